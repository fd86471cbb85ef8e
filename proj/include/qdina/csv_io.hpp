#ifndef QDINA_CSV_IO_HPP
#define QDINA_CSV_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>

#include "qdina/model.hpp"

// Header-less comma separated 0/1 files, one matrix row per line, LF endings.
namespace qdina::io {

BinaryMatrix parse_binary_csv(std::istream& in);
BinaryMatrix read_binary_csv(const std::filesystem::path& path);

void write_binary_csv(std::ostream& out, const BinaryMatrix& m);
void write_binary_csv(const std::filesystem::path& path, const BinaryMatrix& m);

ResponseMatrix read_responses(const std::filesystem::path& path);
QMatrix read_qmatrix(const std::filesystem::path& path);

// Row-major item-by-item bit string, e.g. "1000010000100001".
std::string flatten(const QMatrix& q);

} // namespace qdina::io

#endif
