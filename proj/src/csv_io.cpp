#include "qdina/csv_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "qdina/errors.hpp"

namespace qdina::io {

BinaryMatrix parse_binary_csv(std::istream& in)
{
    std::vector<std::uint8_t> values;
    std::size_t cols = 0, rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool blank_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            blank_seen = true;
            continue;
        }
        if (blank_seen) throw ParseError {"blank line inside data", line_no - 1, 1};
        std::size_t field = 0, pos = 0;
        for (;;) {
            const auto comma = line.find(',', pos);
            const auto end = comma == std::string::npos ? line.size() : comma;
            auto begin = pos;
            auto stop = end;
            while (begin < stop && line[begin] == ' ') ++begin;
            while (stop > begin && line[stop - 1] == ' ') --stop;
            ++field;
            if (stop - begin != 1 || (line[begin] != '0' && line[begin] != '1')) {
                throw ParseError {"expected 0 or 1, found '" + line.substr(pos, end - pos) + "'", line_no, field};
            }
            values.push_back(static_cast<std::uint8_t>(line[begin] - '0'));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (rows == 0) {
            cols = field;
        } else if (field != cols) {
            throw ParseError {"row has " + std::to_string(field) + " fields, expected " + std::to_string(cols),
                              line_no, field};
        }
        ++rows;
    }
    if (rows == 0) throw ParseError {"no data rows", line_no, 0};
    return BinaryMatrix {rows, cols, std::move(values)};
}

BinaryMatrix read_binary_csv(const std::filesystem::path& path)
{
    std::ifstream in {path};
    if (!in) throw Error {"cannot open " + path.string()};
    try {
        return parse_binary_csv(in);
    } catch (const ParseError& e) {
        throw ParseError {path.string() + ": " + e.message(), e.line(), e.column()};
    }
}

void write_binary_csv(std::ostream& out, const BinaryMatrix& m)
{
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << static_cast<char>('0' + m(i, j));
        }
        out << '\n';
    }
}

void write_binary_csv(const std::filesystem::path& path, const BinaryMatrix& m)
{
    std::ofstream out {path, std::ios::binary};
    if (!out) throw Error {"cannot write " + path.string()};
    write_binary_csv(out, m);
    if (!out) throw Error {"write failed for " + path.string()};
}

ResponseMatrix read_responses(const std::filesystem::path& path)
{
    return ResponseMatrix {read_binary_csv(path)};
}

QMatrix read_qmatrix(const std::filesystem::path& path)
{
    return QMatrix {read_binary_csv(path)};
}

std::string flatten(const QMatrix& q)
{
    std::string s;
    s.reserve(q.entries().data().size());
    for (const auto v : q.entries().data()) s.push_back(static_cast<char>('0' + v));
    return s;
}

} // namespace qdina::io
