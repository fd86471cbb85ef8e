#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdina/csv_io.hpp"
#include "qdina/errors.hpp"

using namespace qdina;

namespace {

BinaryMatrix parse(const std::string& text)
{
    std::istringstream in {text};
    return io::parse_binary_csv(in);
}

} // namespace

TEST_CASE("parse and write round trip")
{
    const auto m = parse("0,1,1\n1,0,0\n");
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(0, 2) == 1);
    std::ostringstream out;
    io::write_binary_csv(out, m);
    CHECK(out.str() == "0,1,1\n1,0,0\n");
}

TEST_CASE("tolerated variations")
{
    CHECK(parse("0, 1\r\n1 ,0\r\n") == parse("0,1\n1,0\n"));
    CHECK(parse("1,0\n0,1") == parse("1,0\n0,1\n"));
    CHECK(parse("1,0\n0,1\n\n\n") == parse("1,0\n0,1\n"));
}

TEST_CASE("parse errors carry a location")
{
    const auto fails_at = [](const std::string& text, std::size_t line, std::size_t column) {
        try {
            parse(text);
        } catch (const ParseError& e) {
            CHECK(e.line() == line);
            CHECK(e.column() == column);
            return;
        }
        FAIL("no error for: " << text);
    };
    fails_at("0,1\n1,2\n", 2, 2);
    fails_at("0,1\n1,0,1\n", 2, 3);
    fails_at("0,1\n\n1,0\n", 2, 1);
    fails_at("a,b\n", 1, 1);
    fails_at("0,,1\n", 1, 2);
    fails_at("", 0, 0);
}

TEST_CASE("files")
{
    const auto dir = std::filesystem::temp_directory_path() / "qdina_csv_test";
    std::filesystem::create_directories(dir);
    const auto q = QMatrix::from_rows({{1, 0, 1}, {0, 0, 1}});
    io::write_binary_csv(dir / "q.csv", q.entries());
    CHECK(io::read_qmatrix(dir / "q.csv") == q);
    CHECK(io::flatten(q) == "101001");
    {
        std::ofstream f {dir / "bad.csv"};
        f << "1,0\n0,x\n";
    }
    try {
        io::read_responses(dir / "bad.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string {e.what()}.find("bad.csv") != std::string::npos);
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(io::read_responses(dir / "missing.csv"), Error);
    std::filesystem::remove_all(dir);
}
