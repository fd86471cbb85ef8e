#include "qdina/model.hpp"

#include <string>

#include "qdina/errors.hpp"

namespace qdina {

BinaryMatrix::BinaryMatrix(const std::size_t rows, const std::size_t cols)
: rows_ {rows}, cols_ {cols}, data_(rows * cols, 0) {}

BinaryMatrix::BinaryMatrix(const std::size_t rows, const std::size_t cols, std::vector<std::uint8_t> values)
: rows_ {rows}, cols_ {cols}, data_ {std::move(values)}
{
    if (data_.size() != rows * cols) {
        throw DimensionError {"binary matrix: expected " + std::to_string(rows * cols) + " values, got "
                              + std::to_string(data_.size())};
    }
    for (const auto v : data_) {
        if (v > 1) throw DimensionError {"binary matrix: entries must be 0 or 1"};
    }
}

Code encode_bits(const std::span<const std::uint8_t> bits)
{
    if (bits.size() > 31) throw CapacityError {"cannot encode more than 31 attributes as a code"};
    Code code = 0;
    for (const auto b : bits) code = (code << 1) | (b & 1U);
    return code;
}

std::vector<std::uint8_t> decode_bits(const Code code, const int num_attributes)
{
    std::vector<std::uint8_t> bits(num_attributes);
    for (int k = 0; k < num_attributes; ++k) bits[k] = (code >> (num_attributes - 1 - k)) & 1U;
    return bits;
}

void check_attribute_count(const int num_attributes)
{
    if (num_attributes < 1 || num_attributes > kMaxAttributes) {
        throw CapacityError {"attribute count K=" + std::to_string(num_attributes) + " outside [1, "
                             + std::to_string(kMaxAttributes) + "]; the 2^K latent classes make larger K "
                             + "infeasible in memory"};
    }
}

QMatrix::QMatrix(BinaryMatrix entries) : m_ {std::move(entries)}
{
    if (m_.rows() < 1 || m_.cols() < 1) throw DimensionError {"Q-matrix needs J >= 1 and K >= 1"};
}

QMatrix::QMatrix(const std::size_t items, const std::size_t attributes) : QMatrix {BinaryMatrix {items, attributes}} {}

QMatrix QMatrix::from_rows(const std::vector<std::vector<int>>& rows)
{
    if (rows.empty()) throw DimensionError {"Q-matrix needs at least one row"};
    const auto k = rows.front().size();
    std::vector<std::uint8_t> values;
    values.reserve(rows.size() * k);
    for (const auto& r : rows) {
        if (r.size() != k) throw DimensionError {"Q-matrix rows have unequal length"};
        for (const int v : r) {
            if (v != 0 && v != 1) throw DimensionError {"Q-matrix entries must be 0 or 1"};
            values.push_back(static_cast<std::uint8_t>(v));
        }
    }
    return QMatrix {BinaryMatrix {rows.size(), k, std::move(values)}};
}

QMatrix QMatrix::from_codes(const std::vector<Code>& codes, const int num_attributes)
{
    QMatrix q {codes.size(), static_cast<std::size_t>(num_attributes)};
    for (std::size_t j = 0; j < codes.size(); ++j) q.set_row_code(j, codes[j]);
    return q;
}

void QMatrix::set_row_code(const std::size_t j, const Code code)
{
    const int k = attributes();
    for (int a = 0; a < k; ++a) m_(j, a) = (code >> (k - 1 - a)) & 1U;
}

std::vector<Code> QMatrix::row_codes() const
{
    std::vector<Code> codes(items());
    for (std::size_t j = 0; j < items(); ++j) codes[j] = row_code(j);
    return codes;
}

ResponseMatrix ResponseMatrix::select_rows(const std::span<const std::size_t> indices) const
{
    const auto j = items();
    std::vector<std::uint8_t> values;
    values.reserve(indices.size() * j);
    for (const auto i : indices) {
        if (i >= respondents()) throw DimensionError {"row index out of range"};
        const auto r = row(i);
        values.insert(values.end(), r.begin(), r.end());
    }
    return ResponseMatrix {BinaryMatrix {indices.size(), j, std::move(values)}};
}

ProfileLattice::ProfileLattice(const int num_attributes) : k_ {num_attributes}
{
    check_attribute_count(num_attributes);
}

PatternTable::PatternTable(const int num_attributes) : k_ {num_attributes}
{
    check_attribute_count(num_attributes);
}

ProfileLattice enumerate_profiles(const int num_attributes)
{
    return ProfileLattice {num_attributes};
}

PatternTable pattern_table(const int num_attributes)
{
    return PatternTable {num_attributes};
}

bool ideal_response(const std::span<const std::uint8_t> alpha, const std::span<const std::uint8_t> q)
{
    if (alpha.size() != q.size()) {
        throw DimensionError {"ideal response: profile has " + std::to_string(alpha.size())
                              + " attributes but Q row has " + std::to_string(q.size())};
    }
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (q[k] && !alpha[k]) return false;
    }
    return true;
}

BinaryMatrix ideal_response_matrix(const QMatrix& q, const ProfileLattice& lattice)
{
    if (q.attributes() != lattice.attributes()) {
        throw DimensionError {"ideal response matrix: Q has K=" + std::to_string(q.attributes())
                              + ", lattice has K=" + std::to_string(lattice.attributes())};
    }
    const auto codes = q.row_codes();
    BinaryMatrix eta {lattice.size(), q.items()};
    for (std::size_t l = 0; l < lattice.size(); ++l) {
        for (std::size_t j = 0; j < codes.size(); ++j) eta(l, j) = covers(static_cast<Code>(l), codes[j]);
    }
    return eta;
}

} // namespace qdina
