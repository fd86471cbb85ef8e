#ifndef QDINA_MODEL_HPP
#define QDINA_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qdina {

// Profiles and row patterns are handled as integer codes: attribute 1 is the
// most significant of K bits. Profile index l (0-based) *is* its code; pattern
// index h (0-based) has code h + 1.
using Code = std::uint32_t;

inline constexpr int kMaxAttributes = 15;

inline constexpr double kProbabilityFloor = 1e-6;

inline double clamp_probability(const double p) noexcept
{
    return p < kProbabilityFloor ? kProbabilityFloor : (p > 1.0 - kProbabilityFloor ? 1.0 - kProbabilityFloor : p);
}

// Row-major dense 0/1 matrix.
class BinaryMatrix
{
public:
    BinaryMatrix() = default;
    BinaryMatrix(std::size_t rows, std::size_t cols);
    BinaryMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::uint8_t operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
    std::uint8_t& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

    std::span<const std::uint8_t> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<std::uint8_t> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }

    const std::vector<std::uint8_t>& data() const noexcept { return data_; }

    friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::uint8_t> data_;
};

Code encode_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> decode_bits(Code code, int num_attributes);

// True when a profile masters every attribute the row requires.
inline bool covers(const Code profile, const Code requirement) noexcept
{
    return (requirement & ~profile) == 0;
}

/// J x K item-attribute incidence matrix.
class QMatrix
{
public:
    QMatrix() = default;
    explicit QMatrix(BinaryMatrix entries);
    QMatrix(std::size_t items, std::size_t attributes);

    static QMatrix from_rows(const std::vector<std::vector<int>>& rows);
    static QMatrix from_codes(const std::vector<Code>& codes, int num_attributes);

    std::size_t items() const noexcept { return m_.rows(); }
    int attributes() const noexcept { return static_cast<int>(m_.cols()); }

    std::uint8_t operator()(std::size_t j, std::size_t k) const noexcept { return m_(j, k); }
    std::uint8_t& operator()(std::size_t j, std::size_t k) noexcept { return m_(j, k); }
    std::span<const std::uint8_t> row(std::size_t j) const noexcept { return m_.row(j); }

    Code row_code(std::size_t j) const { return encode_bits(m_.row(j)); }
    void set_row_code(std::size_t j, Code code);
    std::vector<Code> row_codes() const;

    const BinaryMatrix& entries() const noexcept { return m_; }

    friend bool operator==(const QMatrix&, const QMatrix&) = default;

private:
    BinaryMatrix m_;
};

/// N x J binary responses.
class ResponseMatrix
{
public:
    ResponseMatrix() = default;
    explicit ResponseMatrix(BinaryMatrix entries) : m_ {std::move(entries)} {}

    std::size_t respondents() const noexcept { return m_.rows(); }
    std::size_t items() const noexcept { return m_.cols(); }

    std::uint8_t operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
    std::span<const std::uint8_t> row(std::size_t i) const noexcept { return m_.row(i); }

    // Rows gathered in the given order (duplicates allowed).
    ResponseMatrix select_rows(std::span<const std::size_t> indices) const;

    const BinaryMatrix& entries() const noexcept { return m_; }

    friend bool operator==(const ResponseMatrix&, const ResponseMatrix&) = default;

private:
    BinaryMatrix m_;
};

/// All 2^K attribute mastery profiles; row l is the K-bit binary expansion of l.
class ProfileLattice
{
public:
    explicit ProfileLattice(int num_attributes);

    int attributes() const noexcept { return k_; }
    std::size_t size() const noexcept { return std::size_t {1} << k_; }

    std::uint8_t bit(std::size_t l, int k) const noexcept { return (l >> (k_ - 1 - k)) & 1U; }
    std::vector<std::uint8_t> profile(std::size_t l) const { return decode_bits(static_cast<Code>(l), k_); }

private:
    int k_;
};

/// The 2^K - 1 nonzero candidate rows for one item, ascending by code.
class PatternTable
{
public:
    explicit PatternTable(int num_attributes);

    int attributes() const noexcept { return k_; }
    std::size_t size() const noexcept { return (std::size_t {1} << k_) - 1; }

    Code code(std::size_t h) const noexcept { return static_cast<Code>(h + 1); }
    std::uint8_t bit(std::size_t h, int k) const noexcept { return (code(h) >> (k_ - 1 - k)) & 1U; }
    std::vector<std::uint8_t> pattern(std::size_t h) const { return decode_bits(code(h), k_); }

private:
    int k_;
};

struct ItemParams
{
    std::vector<double> slip;
    std::vector<double> guess;
};

void check_attribute_count(int num_attributes);

ProfileLattice enumerate_profiles(int num_attributes);
PatternTable pattern_table(int num_attributes);

bool ideal_response(std::span<const std::uint8_t> alpha, std::span<const std::uint8_t> q);

// L x J, entry (l, j) = eta(alpha_l, q_j).
BinaryMatrix ideal_response_matrix(const QMatrix& q, const ProfileLattice& lattice);

} // namespace qdina

#endif
