#ifndef QDINA_QSEARCH_HPP
#define QDINA_QSEARCH_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qdina/model.hpp"
#include "qdina/rng.hpp"
#include "qdina/vb.hpp"

// Stochastic Q-matrix search: each iteration fits VB on a random subset of
// respondents under the current Q, then replaces every row of Q by the
// nonzero pattern with the highest posterior given the fitted slip/guess
// estimates and MAP profiles. A run's estimate is the rounded average of its
// iterates after a burn-in; the run with the largest mean subset ELBO wins.
namespace qdina::search {

enum class Sampling
{
    with_replacement,     // i.i.d. uniform indices
    without_replacement,  // a uniformly random S-subset, in random order
};

struct SearchConfig
{
    int attributes = 0;          // K
    int runs = 10;               // R
    int iterations = 550;        // T
    int discard = 50;            // D
    std::size_t subset = 0;      // S; 0 means N / 2
    std::uint64_t seed = 1;
    Sampling sampling = Sampling::with_replacement;
    vb::Priors priors;
    vb::Options vb;
    std::optional<QMatrix> initial_q;
    unsigned threads = 1;        // run-level parallelism; 0 = hardware concurrency
    bool keep_samples = true;    // store each iteration's index draw

    // Resolves S against N and checks every invariant.
    SearchConfig resolved(std::size_t respondents, std::size_t items) const;
};

struct IterationRecord
{
    int t = 0;
    QMatrix q;                               // Q_t, the update produced at iteration t
    double elbo = 0.0;                       // L_max(X_S^t | Q_{t-1})
    std::vector<std::uint32_t> sample;       // tau, empty when keep_samples is off
    bool vb_converged = true;
};

struct RunResult
{
    int run = 0;
    std::uint64_t seed = 0;
    QMatrix initial_q;
    std::vector<IterationRecord> records;
    QMatrix averaged_q;
    double mean_elbo = 0.0;
};

struct Estimate
{
    QMatrix q;
    std::size_t selected = 0;
    std::vector<RunResult> runs;
};

std::vector<std::size_t> subsample(std::size_t population, std::size_t size, Rng& rng,
                                   Sampling sampling = Sampling::with_replacement);

// Unnormalised log prior over the H patterns given the previous row, using
// gamma_k = (1 + q_k) / 3.
std::vector<double> row_pattern_log_prior(std::span<const std::uint8_t> previous_row, const PatternTable& table);

// Log likelihood of one item's subset responses under each pattern, given the
// item's slip/guess estimates and each respondent's profile code.
std::vector<double> row_pattern_log_likelihood(std::span<const std::uint8_t> responses,
                                               std::span<const Code> profiles, double slip, double guess,
                                               const PatternTable& table);

// Index (not code) of the best pattern; ties go to the lowest code.
std::size_t select_pattern(std::span<const double> log_prior, std::span<const double> log_likelihood);

QMatrix update_qmatrix(const QMatrix& previous, const vb::PointEstimates& estimates, const ResponseMatrix& subset,
                       const PatternTable& table);

// Entrywise mean of Q_t over records[discard..], rounded with 0.5 -> 1.
QMatrix iterate_average(std::span<const IterationRecord> records, int discard);

// Entries i.i.d. Bernoulli(0.5), all-zero rows redrawn.
QMatrix random_qmatrix(std::size_t items, int attributes, Rng& rng);

std::uint64_t run_seed(std::uint64_t seed, int run);

RunResult run_once(const ResponseMatrix& x, const SearchConfig& config, int run);

// Index of the largest mean ELBO, lowest index on ties.
std::size_t select_run(std::span<const RunResult> runs);

Estimate estimate(const ResponseMatrix& x, const SearchConfig& config);

// Refits VB on the full data under each recorded Q_t. Identical matrices are
// refitted once (same seed), so repeated Q_t give identical values.
std::vector<double> full_elbo_trace(const ResponseMatrix& x, std::span<const IterationRecord> records,
                                    const vb::Priors& priors, const vb::Options& options, std::uint64_t seed);

} // namespace qdina::search

#endif
