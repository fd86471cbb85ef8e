#include "qdina/eval.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "qdina/errors.hpp"

namespace qdina::eval {

namespace {

void check_same_shape(const QMatrix& a, const QMatrix& b)
{
    if (a.items() != b.items() || a.attributes() != b.attributes()) {
        throw DimensionError {"Q-matrices differ in shape: " + std::to_string(a.items()) + "x"
                              + std::to_string(a.attributes()) + " vs " + std::to_string(b.items()) + "x"
                              + std::to_string(b.attributes())};
    }
}

// agreement[c][k]: rows where column c of q_hat equals column k of reference.
std::vector<std::vector<long>> column_agreement(const QMatrix& q_hat, const QMatrix& reference)
{
    const auto k = static_cast<std::size_t>(q_hat.attributes());
    std::vector<std::vector<long>> agree(k, std::vector<long>(k, 0));
    for (std::size_t j = 0; j < q_hat.items(); ++j) {
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t r = 0; r < k; ++r) agree[c][r] += q_hat(j, c) == reference(j, r);
        }
    }
    return agree;
}

} // namespace

double recovery_rate(const QMatrix& q_hat, const QMatrix& q_true)
{
    check_same_shape(q_hat, q_true);
    std::size_t mismatches = 0;
    const auto& a = q_hat.entries().data();
    const auto& b = q_true.entries().data();
    for (std::size_t t = 0; t < a.size(); ++t) mismatches += a[t] != b[t];
    return 1.0 - static_cast<double>(mismatches) / static_cast<double>(a.size());
}

QMatrix permute_columns(const QMatrix& q, const Permutation& permutation)
{
    const auto k = static_cast<std::size_t>(q.attributes());
    if (permutation.size() != k) throw DimensionError {"permutation length differs from K"};
    std::vector<int> seen(k, 0);
    for (const int p : permutation) {
        if (p < 0 || static_cast<std::size_t>(p) >= k || seen[static_cast<std::size_t>(p)]++) {
            throw DimensionError {"not a permutation of the attribute columns"};
        }
    }
    QMatrix out {q.items(), k};
    for (std::size_t j = 0; j < q.items(); ++j) {
        for (std::size_t c = 0; c < k; ++c) out(j, c) = q(j, static_cast<std::size_t>(permutation[c]));
    }
    return out;
}

Alignment align_columns(const QMatrix& q_hat, const QMatrix& reference)
{
    check_same_shape(q_hat, reference);
    const int k = q_hat.attributes();
    if (k > kMaxPermutationAttributes) {
        throw CapacityError {"exhaustive alignment over " + std::to_string(k) + "! permutations refused (limit K="
                             + std::to_string(kMaxPermutationAttributes)
                             + "); use assignment-based alignment or a provisional reference ordering"};
    }
    const auto agree = column_agreement(q_hat, reference);
    Permutation perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    Permutation best = perm;
    long best_score = -1;
    do {
        long score = 0;
        for (std::size_t c = 0; c < perm.size(); ++c) score += agree[static_cast<std::size_t>(perm[c])][c];
        if (score > best_score) {
            best_score = score;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {permute_columns(q_hat, best), best};
}

Alignment align_columns_assignment(const QMatrix& q_hat, const QMatrix& reference)
{
    check_same_shape(q_hat, reference);
    const auto n = static_cast<std::size_t>(q_hat.attributes());
    const auto agree = column_agreement(q_hat, reference);

    // Hungarian method (potentials form), minimising -agreement. Rows are
    // reference columns, columns are q_hat columns; 1-based with a dummy 0.
    constexpr long inf = std::numeric_limits<long>::max() / 4;
    std::vector<long> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t row = 1; row <= n; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::vector<long> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[col0] = 1;
            const std::size_t row0 = match[col0];
            long delta = inf;
            std::size_t col1 = 0;
            for (std::size_t col = 1; col <= n; ++col) {
                if (used[col]) continue;
                const long cost = -agree[col - 1][row0 - 1] - u[row0] - v[col];
                if (cost < minv[col]) {
                    minv[col] = cost;
                    way[col] = col0;
                }
                if (minv[col] < delta) {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for (std::size_t col = 0; col <= n; ++col) {
                if (used[col]) {
                    u[match[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }
    Permutation perm(n);
    for (std::size_t col = 1; col <= n; ++col) perm[match[col] - 1] = static_cast<int>(col - 1);
    return {permute_columns(q_hat, perm), perm};
}

RecoveryReport mean_recovery(const std::vector<QMatrix>& estimates, const QMatrix& q_true, const bool align)
{
    if (estimates.empty()) throw DimensionError {"no estimates to score"};
    RecoveryReport report;
    for (const auto& q : estimates) {
        check_same_shape(q, q_true);
        report.raw_rates.push_back(recovery_rate(q, q_true));
        if (align) {
            const auto a = q_true.attributes() <= kMaxPermutationAttributes ? align_columns(q, q_true)
                                                                            : align_columns_assignment(q, q_true);
            report.per_dataset_rates.push_back(recovery_rate(a.q, q_true));
            report.permutation_used.push_back(a.permutation);
        } else {
            report.per_dataset_rates.push_back(report.raw_rates.back());
            Permutation identity(static_cast<std::size_t>(q.attributes()));
            std::iota(identity.begin(), identity.end(), 0);
            report.permutation_used.push_back(std::move(identity));
        }
    }
    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    report.mrr = mean(report.per_dataset_rates);
    report.raw_mrr = mean(report.raw_rates);
    return report;
}

double negative_elbo_fit(const ResponseMatrix& x, const QMatrix& q, const vb::Priors& priors,
                         const vb::Options& options, const int restarts, const std::uint64_t seed)
{
    if (restarts < 1) throw ConfigError {"need at least one restart"};
    if (x.items() != q.items()) throw DimensionError {"responses and Q-matrix disagree on item count"};
    const auto dense = vb::to_dense(x);
    const auto eta = vb::ideal_responses(q);
    const Rng root {seed};
    double best = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng = root.child(static_cast<std::uint64_t>(r));
        best = std::max(best, vb::fit(dense, eta, priors, rng, options).elbo);
    }
    return -best;
}

} // namespace qdina::eval
