#ifndef QDINA_EVAL_HPP
#define QDINA_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qdina/model.hpp"
#include "qdina/vb.hpp"

namespace qdina::eval {

inline constexpr int kMaxPermutationAttributes = 10;

// Column permutation: aligned(:, k) = q_hat(:, permutation[k]), 0-based.
using Permutation = std::vector<int>;

struct Alignment
{
    QMatrix q;
    Permutation permutation;
};

struct RecoveryReport
{
    std::vector<double> raw_rates;        // before alignment
    std::vector<double> per_dataset_rates;  // after alignment when requested, else raw
    std::vector<Permutation> permutation_used;
    double mrr = 0.0;
    double raw_mrr = 0.0;
};

// 1 - Hamming(q_hat, q_true) / (J K).
double recovery_rate(const QMatrix& q_hat, const QMatrix& q_true);

QMatrix permute_columns(const QMatrix& q, const Permutation& permutation);

// Exhaustive over all K! orders; ties go to the lexicographically smallest.
Alignment align_columns(const QMatrix& q_hat, const QMatrix& reference);

// Optimal column assignment by the Hungarian method on column agreement
// counts. Attains the same rate as align_columns but may pick a different
// permutation among equally good ones; usable for any K.
Alignment align_columns_assignment(const QMatrix& q_hat, const QMatrix& reference);

RecoveryReport mean_recovery(const std::vector<QMatrix>& estimates, const QMatrix& q_true, bool align);

// -max over `restarts` seeded VB fits of the full-data ELBO. Restart r uses seed
// derived from (seed, r), so a larger restart count extends the same set.
double negative_elbo_fit(const ResponseMatrix& x, const QMatrix& q, const vb::Priors& priors,
                         const vb::Options& options, int restarts, std::uint64_t seed);

} // namespace qdina::eval

#endif
