#include "qdina/simgen.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "qdina/errors.hpp"

namespace qdina::sim {

namespace {

std::vector<double> broadcast(const std::vector<double>& values, const std::size_t items, const char* what)
{
    if (values.size() == 1) return std::vector<double>(items, values.front());
    if (values.size() != items) {
        throw ConfigError {std::string {what} + ": expected 1 or " + std::to_string(items) + " values, got "
                           + std::to_string(values.size())};
    }
    return values;
}

void check_probabilities(const std::vector<double>& values, const char* what)
{
    for (const double p : values) {
        if (!(p >= 0.0 && p < 1.0)) throw ConfigError {std::string {what} + " must lie in [0, 1)"};
    }
}

} // namespace

void SimConfig::validate() const
{
    if (respondents < 1) throw ConfigError {"sample size must be positive"};
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError {"rho=" + std::to_string(rho) + " outside [0, 1)"};
    if (true_q.items() < 1) throw ConfigError {"a true Q-matrix is required"};
    check_attribute_count(true_q.attributes());
    check_probabilities(broadcast(slip, true_q.items(), "slip"), "slip");
    check_probabilities(broadcast(guess, true_q.items(), "guess"), "guess");
}

double normal_cdf(const double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(const double p)
{
    if (!(p > 0.0 && p < 1.0)) throw ConfigError {"normal quantile needs 0 < p < 1"};
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

Eigen::MatrixXd correlation_factor(const int attributes, const double rho)
{
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(attributes, attributes, rho);
    sigma.diagonal().setOnes();
    const Eigen::LLT<Eigen::MatrixXd> llt {sigma};
    if (llt.info() != Eigen::Success) {
        throw ConfigError {"correlation matrix with rho=" + std::to_string(rho) + " is not positive definite"};
    }
    return llt.matrixU();
}

double mastery_threshold(const int k, const int attributes)
{
    return normal_quantile(static_cast<double>(k + 1) / static_cast<double>(attributes + 1));
}

BinaryMatrix gen_attributes(const std::size_t respondents, const int attributes, const double rho, Rng& rng,
                            Eigen::MatrixXd* latent)
{
    check_attribute_count(attributes);
    const Eigen::MatrixXd v = correlation_factor(attributes, rho);
    Eigen::MatrixXd t(static_cast<Eigen::Index>(respondents), attributes);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        for (Eigen::Index k = 0; k < t.cols(); ++k) t(i, k) = rng.normal();
    }
    const Eigen::MatrixXd nu = t * v;

    std::vector<double> threshold(static_cast<std::size_t>(attributes));
    for (int k = 0; k < attributes; ++k) threshold[static_cast<std::size_t>(k)] = mastery_threshold(k, attributes);

    BinaryMatrix alpha {respondents, static_cast<std::size_t>(attributes)};
    for (std::size_t i = 0; i < respondents; ++i) {
        for (int k = 0; k < attributes; ++k) {
            alpha(i, static_cast<std::size_t>(k))
                = nu(static_cast<Eigen::Index>(i), k) >= threshold[static_cast<std::size_t>(k)];
        }
    }
    if (latent) *latent = nu;
    return alpha;
}

ResponseMatrix gen_responses(const BinaryMatrix& attributes, const QMatrix& true_q, const std::span<const double> slip,
                             const std::span<const double> guess, Rng& rng)
{
    if (attributes.cols() != static_cast<std::size_t>(true_q.attributes())) {
        throw DimensionError {"attribute matrix and Q-matrix disagree on K"};
    }
    const auto items = true_q.items();
    const auto s = broadcast({slip.begin(), slip.end()}, items, "slip");
    const auto g = broadcast({guess.begin(), guess.end()}, items, "guess");
    check_probabilities(s, "slip");
    check_probabilities(g, "guess");

    const auto codes = true_q.row_codes();
    BinaryMatrix x {attributes.rows(), items};
    for (std::size_t i = 0; i < attributes.rows(); ++i) {
        const Code profile = encode_bits(attributes.row(i));
        for (std::size_t j = 0; j < items; ++j) {
            const double p = covers(profile, codes[j]) ? 1.0 - s[j] : g[j];
            x(i, j) = p >= rng.uniform();
        }
    }
    return ResponseMatrix {std::move(x)};
}

SimDataset simulate(const SimConfig& config)
{
    config.validate();
    const Rng root {config.seed};
    SimDataset d;
    Rng attribute_stream = root.child(0);
    d.attributes = gen_attributes(config.respondents, config.true_q.attributes(), config.rho, attribute_stream,
                                  &d.latent);
    Rng response_stream = root.child(1);
    d.responses = gen_responses(d.attributes, config.true_q, config.slip, config.guess, response_stream);
    return d;
}

namespace {

const std::vector<std::vector<int>> kTable2K4 {
    {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {1, 1, 0, 0},
    {1, 0, 1, 0}, {1, 0, 0, 1}, {0, 1, 1, 0}, {0, 1, 0, 1}, {0, 0, 1, 1},
    {1, 1, 1, 0}, {1, 1, 0, 1}, {1, 0, 1, 1}, {0, 1, 1, 1}, {1, 1, 1, 1},
};

const std::vector<std::vector<int>> kTable2K5 {
    {0, 1, 0, 1, 0}, {0, 1, 0, 0, 1}, {0, 0, 1, 1, 0}, {0, 0, 1, 0, 1}, {0, 0, 0, 1, 1},
    {1, 1, 1, 0, 0}, {1, 1, 0, 1, 0}, {1, 1, 0, 0, 1}, {1, 0, 1, 1, 0}, {1, 0, 1, 0, 1},
    {1, 0, 0, 1, 1}, {0, 1, 1, 1, 0}, {0, 1, 1, 0, 1}, {0, 1, 0, 1, 1}, {0, 0, 1, 1, 1},
};

// Attribute lists (1-based) for items 17..60; items 1..16 are two stacked identities.
const std::vector<std::vector<int>> kAppendixA1Tail {
    {3, 7}, {3, 8}, {2, 8}, {3, 4}, {1, 7}, {1, 3}, {7, 8}, {4, 6}, {2, 4}, {2, 3}, {6, 7}, {4, 7}, {2, 7}, {3, 6},
    {2, 5}, {4, 8}, {1, 8}, {2, 6}, {4, 5}, {6, 8}, {1, 4}, {3, 5},
    {2, 5, 8}, {1, 2, 8}, {3, 5, 7}, {4, 5, 6}, {1, 3, 7}, {1, 4, 5}, {1, 4, 6}, {2, 7, 8}, {1, 2, 7}, {2, 3, 8},
    {5, 7, 8}, {2, 3, 7}, {4, 7, 8}, {2, 5, 6}, {2, 5, 7}, {5, 6, 8}, {1, 5, 8}, {3, 5, 6}, {1, 7, 8}, {4, 5, 7},
    {1, 6, 8}, {2, 3, 6},
};

QMatrix appendix_a1()
{
    QMatrix q {60, 8};
    for (std::size_t j = 0; j < 16; ++j) q(j, j % 8) = 1;
    for (std::size_t t = 0; t < kAppendixA1Tail.size(); ++t) {
        for (const int a : kAppendixA1Tail[t]) q(16 + t, static_cast<std::size_t>(a - 1)) = 1;
    }
    return q;
}

} // namespace

QMatrix builtin_true_q(const std::string_view name)
{
    if (name == "table2-k4") return QMatrix::from_rows(kTable2K4);
    if (name == "table2-k5") return QMatrix::from_rows(kTable2K5);
    if (name == "appendix-a1") return appendix_a1();
    throw ConfigError {"unknown built-in Q-matrix '" + std::string {name} + "' (known: table2-k4, table2-k5, appendix-a1)"};
}

std::vector<std::string> builtin_names()
{
    return {"table2-k4", "table2-k5", "appendix-a1"};
}

} // namespace qdina::sim
