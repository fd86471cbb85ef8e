#ifndef QDINA_SIMGEN_HPP
#define QDINA_SIMGEN_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qdina/model.hpp"
#include "qdina/rng.hpp"

namespace qdina::sim {

struct SimConfig
{
    std::size_t respondents = 0;
    double rho = 0.0;              // common latent correlation, [0, 1)
    std::vector<double> slip {0.2};   // one value (broadcast) or one per item
    std::vector<double> guess {0.2};
    QMatrix true_q;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SimDataset
{
    ResponseMatrix responses;
    BinaryMatrix attributes;   // N x K ground-truth profiles
    Eigen::MatrixXd latent;    // N x K correlated normals nu
};

double normal_cdf(double x);
double normal_quantile(double p);

// Upper-triangular V with V^T V = Sigma (ones on the diagonal, rho elsewhere).
Eigen::MatrixXd correlation_factor(int attributes, double rho);

// Mastery threshold on the latent scale for attribute k (0-based): Phi^-1((k+1)/(K+1)).
double mastery_threshold(int k, int attributes);

BinaryMatrix gen_attributes(std::size_t respondents, int attributes, double rho, Rng& rng,
                            Eigen::MatrixXd* latent = nullptr);

ResponseMatrix gen_responses(const BinaryMatrix& attributes, const QMatrix& true_q, std::span<const double> slip,
                             std::span<const double> guess, Rng& rng);

// Attributes from seed stream 0, response uniforms from stream 1.
SimDataset simulate(const SimConfig& config);

QMatrix builtin_true_q(std::string_view name);
std::vector<std::string> builtin_names();

} // namespace qdina::sim

#endif
