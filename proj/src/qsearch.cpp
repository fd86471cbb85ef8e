#include "qdina/qsearch.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "qdina/errors.hpp"

namespace qdina::search {

SearchConfig SearchConfig::resolved(const std::size_t respondents, const std::size_t items) const
{
    SearchConfig c = *this;
    if (c.initial_q) {
        if (c.attributes == 0) c.attributes = c.initial_q->attributes();
        if (c.initial_q->attributes() != c.attributes || c.initial_q->items() != items) {
            throw DimensionError {"initial Q-matrix shape does not match the data and attribute count"};
        }
    }
    check_attribute_count(c.attributes);
    if (respondents < 1 || items < 1) throw DimensionError {"response matrix is empty"};
    if (c.subset == 0) c.subset = std::max<std::size_t>(1, respondents / 2);
    if (c.subset > respondents) {
        throw ConfigError {"subset size S=" + std::to_string(c.subset) + " exceeds N=" + std::to_string(respondents)};
    }
    if (c.runs < 1) throw ConfigError {"need at least one run"};
    if (c.iterations < 1) throw ConfigError {"need at least one iteration per run"};
    if (c.discard < 0 || c.discard >= c.iterations) {
        throw ConfigError {"discard D=" + std::to_string(c.discard) + " must satisfy 0 <= D < T="
                           + std::to_string(c.iterations)};
    }
    c.priors.validate(std::size_t {1} << c.attributes);
    return c;
}

std::vector<std::size_t> subsample(const std::size_t population, const std::size_t size, Rng& rng,
                                   const Sampling sampling)
{
    if (population < 1 || size < 1) throw ConfigError {"cannot draw an empty subset or from an empty population"};
    if (sampling == Sampling::without_replacement && size > population) {
        throw ConfigError {"subset size " + std::to_string(size) + " exceeds the population of "
                           + std::to_string(population)};
    }
    std::vector<std::size_t> out(size);
    if (sampling == Sampling::with_replacement) {
        for (auto& i : out) i = static_cast<std::size_t>(rng.below(population));
        return out;
    }
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t {0});
    for (std::size_t s = 0; s < size; ++s) {
        const auto pick = s + static_cast<std::size_t>(rng.below(population - s));
        std::swap(pool[s], pool[pick]);
        out[s] = pool[s];
    }
    return out;
}

std::vector<double> row_pattern_log_prior(const std::span<const std::uint8_t> previous_row, const PatternTable& table)
{
    const int k = table.attributes();
    if (static_cast<int>(previous_row.size()) != k) throw DimensionError {"previous Q row has wrong length"};
    // Each attribute contributes log(2/3) when the pattern agrees with the
    // previous row and log(1/3) otherwise; counting agreements keeps exact
    // ties between patterns exact.
    const double agree = std::log(2.0 / 3.0);
    const double disagree = std::log(1.0 / 3.0);
    const Code previous = encode_bits(previous_row);
    std::vector<double> out(table.size());
    for (std::size_t h = 0; h < table.size(); ++h) {
        const int mismatches = std::popcount(table.code(h) ^ previous);
        out[h] = (k - mismatches) * agree + mismatches * disagree;
    }
    return out;
}

namespace {

// Per-pattern counts of correct/incorrect answers among respondents whose
// profile covers the pattern (sum over supersets of the pattern code).
struct CoveredCounts
{
    std::vector<std::int64_t> correct, wrong;
    std::int64_t total_correct = 0, total_wrong = 0;
};

CoveredCounts covered_counts(const std::span<const std::uint8_t> responses, const std::span<const Code> profiles,
                             const int attributes)
{
    const std::size_t classes = std::size_t {1} << attributes;
    CoveredCounts c;
    c.correct.assign(classes, 0);
    c.wrong.assign(classes, 0);
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (profiles[i] >= classes) throw DimensionError {"profile code out of range"};
        (responses[i] ? c.correct : c.wrong)[profiles[i]] += 1;
    }
    c.total_correct = std::accumulate(c.correct.begin(), c.correct.end(), std::int64_t {0});
    c.total_wrong = std::accumulate(c.wrong.begin(), c.wrong.end(), std::int64_t {0});
    for (int b = 0; b < attributes; ++b) {
        const std::size_t bit = std::size_t {1} << b;
        for (std::size_t mask = 0; mask < classes; ++mask) {
            if (mask & bit) continue;
            c.correct[mask] += c.correct[mask | bit];
            c.wrong[mask] += c.wrong[mask | bit];
        }
    }
    return c;
}

void pattern_log_likelihood(const CoveredCounts& c, const double slip, const double guess, const PatternTable& table,
                            std::vector<double>& out)
{
    const double s = clamp_probability(slip);
    const double g = clamp_probability(guess);
    const double log_no_slip = std::log1p(-s), log_slip = std::log(s);
    const double log_guess = std::log(g), log_no_guess = std::log1p(-g);
    out.resize(table.size());
    for (std::size_t h = 0; h < table.size(); ++h) {
        const auto code = table.code(h);
        const auto ideal_correct = static_cast<double>(c.correct[code]);
        const auto ideal_wrong = static_cast<double>(c.wrong[code]);
        out[h] = ideal_correct * log_no_slip + ideal_wrong * log_slip
                 + (static_cast<double>(c.total_correct) - ideal_correct) * log_guess
                 + (static_cast<double>(c.total_wrong) - ideal_wrong) * log_no_guess;
    }
}

} // namespace

std::vector<double> row_pattern_log_likelihood(const std::span<const std::uint8_t> responses,
                                               const std::span<const Code> profiles, const double slip,
                                               const double guess, const PatternTable& table)
{
    if (responses.size() != profiles.size()) throw DimensionError {"responses and profiles differ in length"};
    std::vector<double> out;
    pattern_log_likelihood(covered_counts(responses, profiles, table.attributes()), slip, guess, table, out);
    return out;
}

std::size_t select_pattern(const std::span<const double> log_prior, const std::span<const double> log_likelihood)
{
    if (log_prior.size() != log_likelihood.size() || log_prior.empty()) {
        throw DimensionError {"pattern prior and likelihood differ in length"};
    }
    std::size_t best = 0;
    double best_value = log_prior[0] + log_likelihood[0];
    for (std::size_t h = 1; h < log_prior.size(); ++h) {
        const double v = log_prior[h] + log_likelihood[h];
        if (v > best_value) {
            best = h;
            best_value = v;
        }
    }
    return best;
}

QMatrix update_qmatrix(const QMatrix& previous, const vb::PointEstimates& estimates, const ResponseMatrix& subset,
                       const PatternTable& table)
{
    const auto items = previous.items();
    if (previous.attributes() != table.attributes()) throw DimensionError {"pattern table K differs from Q"};
    if (subset.items() != items || estimates.item.slip.size() != items || estimates.item.guess.size() != items) {
        throw DimensionError {"item count mismatch in Q update"};
    }
    if (estimates.classes.size() != subset.respondents()) throw DimensionError {"profile count mismatch in Q update"};

    QMatrix next {items, static_cast<std::size_t>(previous.attributes())};
    std::vector<std::uint8_t> column(subset.respondents());
    std::vector<double> likelihood;
    for (std::size_t j = 0; j < items; ++j) {
        for (std::size_t i = 0; i < column.size(); ++i) column[i] = subset(i, j);
        const auto counts = covered_counts(column, estimates.classes, table.attributes());
        pattern_log_likelihood(counts, estimates.item.slip[j], estimates.item.guess[j], table, likelihood);
        const auto prior = row_pattern_log_prior(previous.row(j), table);
        next.set_row_code(j, table.code(select_pattern(prior, likelihood)));
    }
    return next;
}

QMatrix iterate_average(const std::span<const IterationRecord> records, const int discard)
{
    if (discard < 0 || static_cast<std::size_t>(discard) >= records.size()) {
        throw ConfigError {"cannot discard " + std::to_string(discard) + " of " + std::to_string(records.size())
                           + " iterates"};
    }
    const auto& first = records[static_cast<std::size_t>(discard)].q;
    const auto items = first.items();
    const auto k = static_cast<std::size_t>(first.attributes());
    std::vector<std::size_t> ones(items * k, 0);
    for (std::size_t t = static_cast<std::size_t>(discard); t < records.size(); ++t) {
        const auto& q = records[t].q;
        if (q.items() != items || static_cast<std::size_t>(q.attributes()) != k) {
            throw DimensionError {"iterates have inconsistent shapes"};
        }
        for (std::size_t j = 0; j < items; ++j) {
            for (std::size_t a = 0; a < k; ++a) ones[j * k + a] += q(j, a);
        }
    }
    const std::size_t kept = records.size() - static_cast<std::size_t>(discard);
    QMatrix out {items, k};
    for (std::size_t j = 0; j < items; ++j) {
        for (std::size_t a = 0; a < k; ++a) out(j, a) = 2 * ones[j * k + a] >= kept;
    }
    return out;
}

QMatrix random_qmatrix(const std::size_t items, const int attributes, Rng& rng)
{
    check_attribute_count(attributes);
    QMatrix q {items, static_cast<std::size_t>(attributes)};
    for (std::size_t j = 0; j < items; ++j) {
        bool any = false;
        while (!any) {
            for (int a = 0; a < attributes; ++a) {
                q(j, static_cast<std::size_t>(a)) = rng.bernoulli(0.5);
                any = any || q(j, static_cast<std::size_t>(a));
            }
        }
    }
    return q;
}

std::uint64_t run_seed(const std::uint64_t seed, const int run)
{
    return Rng {seed}.child(static_cast<std::uint64_t>(run) + 1).seed();
}

RunResult run_once(const ResponseMatrix& x, const SearchConfig& config_in, const int run)
{
    const auto config = config_in.resolved(x.respondents(), x.items());
    const int k = config.attributes;
    const ProfileLattice lattice {k};
    const PatternTable table {k};
    const auto dense = vb::to_dense(x);

    RunResult result;
    result.run = run;
    result.seed = run_seed(config.seed, run);
    const Rng root {result.seed};
    {
        Rng init = root.child(0);
        result.initial_q = config.initial_q ? *config.initial_q : random_qmatrix(x.items(), k, init);
    }

    QMatrix current = result.initial_q;
    vb::Matrix subset_dense(static_cast<Eigen::Index>(config.subset), dense.cols());
    result.records.reserve(static_cast<std::size_t>(config.iterations));
    for (int t = 1; t <= config.iterations; ++t) {
        Rng rng = root.child(static_cast<std::uint64_t>(t));
        const auto sample = subsample(x.respondents(), config.subset, rng, config.sampling);
        for (std::size_t s = 0; s < sample.size(); ++s) {
            subset_dense.row(static_cast<Eigen::Index>(s)) = dense.row(static_cast<Eigen::Index>(sample[s]));
        }
        const auto subset = x.select_rows(sample);

        const auto fitted = vb::fit(subset_dense, vb::ideal_responses(current), config.priors, rng, config.vb);
        const auto estimates = vb::point_estimates(fitted.state, lattice);
        auto next = update_qmatrix(current, estimates, subset, table);

        IterationRecord record;
        record.t = t;
        record.q = next;
        record.elbo = fitted.elbo;
        record.vb_converged = fitted.state.converged;
        if (config.keep_samples) record.sample.assign(sample.begin(), sample.end());
        result.records.push_back(std::move(record));
        current = std::move(next);
    }

    result.averaged_q = iterate_average(result.records, config.discard);
    double sum = 0.0;
    for (std::size_t t = static_cast<std::size_t>(config.discard); t < result.records.size(); ++t) {
        sum += result.records[t].elbo;
    }
    result.mean_elbo = sum / static_cast<double>(result.records.size() - static_cast<std::size_t>(config.discard));
    return result;
}

std::size_t select_run(const std::span<const RunResult> runs)
{
    if (runs.empty()) throw Error {"no runs to select from"};
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].mean_elbo > runs[best].mean_elbo) best = r;
    }
    return best;
}

Estimate estimate(const ResponseMatrix& x, const SearchConfig& config_in)
{
    const auto config = config_in.resolved(x.respondents(), x.items());
    const auto runs = static_cast<std::size_t>(config.runs);
    unsigned threads = config.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : config.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, runs));

    std::vector<std::optional<RunResult>> results(runs);
    std::vector<std::string> failures(runs);
    std::atomic<std::size_t> next {0};
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < runs;) {
            try {
                results[r] = run_once(x, config, static_cast<int>(r));
            } catch (const std::exception& e) {
                failures[r] = e.what();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    }

    Estimate out;
    std::string messages;
    for (std::size_t r = 0; r < runs; ++r) {
        if (results[r]) {
            out.runs.push_back(std::move(*results[r]));
        } else {
            messages += "\n  run " + std::to_string(r) + ": " + failures[r];
        }
    }
    if (out.runs.empty()) throw NumericalError {"all " + std::to_string(runs) + " runs failed:" + messages};
    out.selected = select_run(out.runs);
    out.q = out.runs[out.selected].averaged_q;
    return out;
}

std::vector<double> full_elbo_trace(const ResponseMatrix& x, const std::span<const IterationRecord> records,
                                    const vb::Priors& priors, const vb::Options& options, const std::uint64_t seed)
{
    const auto dense = vb::to_dense(x);
    std::map<std::vector<Code>, double> cache;
    std::vector<double> trace;
    trace.reserve(records.size());
    for (const auto& record : records) {
        if (record.q.items() != x.items()) throw DimensionError {"recorded Q does not match the data"};
        auto key = record.q.row_codes();
        auto it = cache.find(key);
        if (it == cache.end()) {
            Rng rng {seed};
            const double elbo = vb::fit(dense, vb::ideal_responses(record.q), priors, rng, options).elbo;
            it = cache.emplace(std::move(key), elbo).first;
        }
        trace.push_back(it->second);
    }
    return trace;
}

} // namespace qdina::search
