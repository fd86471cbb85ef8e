#ifndef QDINA_TOOLS_CLI_HPP
#define QDINA_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace qdina::cli {

// Runs one command line (without the program name). Returns the exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error, 3 replay
// verification mismatch.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qdina::cli

#endif
