#include "qdina/vb.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "qdina/errors.hpp"

namespace qdina::vb {

namespace {

double digamma(const double x) { return boost::math::digamma(x); }

// boost rather than std::lgamma: the latter writes the global signgam and
// fits run on several threads.
double lgamma(const double x) { return boost::math::lgamma(x); }

double log_beta_fn(const double a, const double b) { return lgamma(a) + lgamma(b) - lgamma(a + b); }

void check_dims(const Matrix& x, const Matrix& eta, const State& state)
{
    if (x.cols() != eta.cols()) {
        throw DimensionError {"responses have " + std::to_string(x.cols()) + " items, ideal responses "
                              + std::to_string(eta.cols())};
    }
    if (state.resp.rows() != x.rows() || state.resp.cols() != eta.rows()) {
        throw DimensionError {"variational state does not match data dimensions"};
    }
    if (state.slip_a.size() != x.cols()) throw DimensionError {"variational state has wrong item count"};
}

} // namespace

Vector Priors::class_vector(const std::size_t num_classes) const
{
    if (class_prior.empty()) return Vector::Constant(static_cast<Eigen::Index>(num_classes), class_concentration);
    if (class_prior.size() != num_classes) {
        throw DimensionError {"class prior has " + std::to_string(class_prior.size()) + " entries, expected "
                              + std::to_string(num_classes)};
    }
    return Eigen::Map<const Vector>(class_prior.data(), static_cast<Eigen::Index>(class_prior.size()));
}

void Priors::validate(const std::size_t num_classes) const
{
    if (!(slip_a > 0 && slip_b > 0 && guess_a > 0 && guess_b > 0)) {
        throw ConfigError {"Beta prior hyperparameters must be positive"};
    }
    if ((class_vector(num_classes).array() <= 0.0).any()) {
        throw ConfigError {"Dirichlet concentration must be positive"};
    }
}

Matrix to_dense(const BinaryMatrix& m)
{
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
    }
    return out;
}

Matrix ideal_responses(const QMatrix& q)
{
    return to_dense(ideal_response_matrix(q, ProfileLattice {q.attributes()}));
}

State init_state(const std::size_t respondents, const std::size_t items, const std::size_t classes,
                 const Priors& priors, Rng& rng, const double jitter)
{
    priors.validate(classes);
    if (jitter < 0.0 || jitter >= 1.0) throw ConfigError {"init jitter must lie in [0, 1)"};
    State s;
    const auto n = static_cast<Eigen::Index>(respondents);
    const auto l = static_cast<Eigen::Index>(classes);
    const auto j = static_cast<Eigen::Index>(items);
    s.resp.resize(n, l);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (jitter == 0.0) {
            s.resp.row(i).setConstant(1.0 / static_cast<double>(classes));
            continue;
        }
        for (Eigen::Index c = 0; c < l; ++c) s.resp(i, c) = 1.0 + jitter * (2.0 * rng.uniform() - 1.0);
        s.resp.row(i) /= s.resp.row(i).sum();
    }
    s.slip_a = Vector::Constant(j, priors.slip_a);
    s.slip_b = Vector::Constant(j, priors.slip_b);
    s.guess_a = Vector::Constant(j, priors.guess_a);
    s.guess_b = Vector::Constant(j, priors.guess_b);
    s.class_conc = priors.class_vector(classes);
    return s;
}

State init_state(const ResponseMatrix& x, const ProfileLattice& lattice, const Priors& priors, Rng& rng,
                 const double jitter)
{
    return init_state(x.respondents(), x.items(), lattice.size(), priors, rng, jitter);
}

LogExpectations expected_logs(const State& state)
{
    LogExpectations e;
    const auto j = state.slip_a.size();
    e.log_slip.resize(j);
    e.log_no_slip.resize(j);
    e.log_guess.resize(j);
    e.log_no_guess.resize(j);
    for (Eigen::Index t = 0; t < j; ++t) {
        const double ds = digamma(state.slip_a[t] + state.slip_b[t]);
        e.log_slip[t] = digamma(state.slip_a[t]) - ds;
        e.log_no_slip[t] = digamma(state.slip_b[t]) - ds;
        const double dg = digamma(state.guess_a[t] + state.guess_b[t]);
        e.log_guess[t] = digamma(state.guess_a[t]) - dg;
        e.log_no_guess[t] = digamma(state.guess_b[t]) - dg;
    }
    const double total = digamma(state.class_conc.sum());
    e.log_weight = state.class_conc.unaryExpr([](double d) { return digamma(d); }).array() - total;
    return e;
}

double responsibilities(const Matrix& x, const Matrix& eta, const LogExpectations& e, RowMatrix& resp)
{
    // logit_il = E log pi_l + sum_j [x (E log g) + (1-x) E log(1-g)]
    //          + sum_j eta_lj [x (E log(1-s) - E log g) + (1-x)(E log s - E log(1-g))]
    const Vector on_correct = e.log_no_slip - e.log_guess;
    const Vector on_wrong = e.log_slip - e.log_no_guess;
    const Matrix weights = (on_correct - on_wrong).asDiagonal() * eta.transpose();  // J x L
    const Eigen::RowVectorXd class_offset = (eta * on_wrong).transpose() + e.log_weight.transpose();
    const Vector respondent_offset = x * (e.log_guess - e.log_no_guess)
                                     + Vector::Constant(x.rows(), e.log_no_guess.sum());

    resp.noalias() = x * weights;
    resp.rowwise() += class_offset;

    double total = 0.0;
    for (Eigen::Index i = 0; i < resp.rows(); ++i) {
        auto row = resp.row(i);
        const double top = row.maxCoeff();
        if (!std::isfinite(top)) throw NumericalError {"non-finite class logit for respondent " + std::to_string(i)};
        row = (row.array() - top).exp();
        const double sum = row.sum();
        row /= sum;
        total += top + std::log(sum) + respondent_offset[i];
    }
    return total;
}

LogExpectations point_logs(const std::size_t items, const std::size_t classes, const double slip, const double guess)
{
    const auto j = static_cast<Eigen::Index>(items);
    const double s = clamp_probability(slip), g = clamp_probability(guess);
    LogExpectations e;
    e.log_slip = Vector::Constant(j, std::log(s));
    e.log_no_slip = Vector::Constant(j, std::log1p(-s));
    e.log_guess = Vector::Constant(j, std::log(g));
    e.log_no_guess = Vector::Constant(j, std::log1p(-g));
    e.log_weight = Vector::Constant(static_cast<Eigen::Index>(classes), -std::log(static_cast<double>(classes)));
    return e;
}

void update_responsibilities(State& state, const Matrix& x, const Matrix& eta)
{
    check_dims(x, eta, state);
    responsibilities(x, eta, expected_logs(state), state.resp);
}

void update_item_posteriors(State& state, const Matrix& x, const Matrix& eta, const Priors& priors)
{
    check_dims(x, eta, state);
    const Matrix expected_eta = state.resp * eta;  // N x J, rbar_ij
    const Vector mastered = expected_eta.colwise().sum().transpose();
    const Vector mastered_correct = expected_eta.cwiseProduct(x).colwise().sum().transpose();
    const Vector correct = x.colwise().sum().transpose();
    const double n = static_cast<double>(x.rows());

    state.slip_a = (mastered - mastered_correct).array() + priors.slip_a;
    state.slip_b = mastered_correct.array() + priors.slip_b;
    state.guess_a = (correct - mastered_correct).array() + priors.guess_a;
    state.guess_b = (n - correct.array() - mastered.array() + mastered_correct.array()) + priors.guess_b;
}

void update_class_weights(State& state, const Priors& priors)
{
    state.class_conc = priors.class_vector(static_cast<std::size_t>(state.resp.cols()))
                       + state.resp.colwise().sum().transpose();
}

double kl_beta(const double a, const double b, const double a0, const double b0)
{
    return log_beta_fn(a0, b0) - log_beta_fn(a, b) + (a - a0) * digamma(a) + (b - b0) * digamma(b)
           - (a + b - a0 - b0) * digamma(a + b);
}

double kl_dirichlet(const Vector& conc, const Vector& conc0)
{
    const double total = conc.sum();
    const double digamma_total = digamma(total);
    double kl = lgamma(total) - lgamma(conc0.sum());
    for (Eigen::Index l = 0; l < conc.size(); ++l) {
        kl += lgamma(conc0[l]) - lgamma(conc[l]) + (conc[l] - conc0[l]) * (digamma(conc[l]) - digamma_total);
    }
    return kl;
}

double parameter_kl(const State& state, const Priors& priors)
{
    double kl = kl_dirichlet(state.class_conc, priors.class_vector(static_cast<std::size_t>(state.class_conc.size())));
    for (Eigen::Index j = 0; j < state.slip_a.size(); ++j) {
        kl += kl_beta(state.slip_a[j], state.slip_b[j], priors.slip_a, priors.slip_b);
        kl += kl_beta(state.guess_a[j], state.guess_b[j], priors.guess_a, priors.guess_b);
    }
    return kl;
}

double compute_elbo(const State& state, const Matrix& x, const Matrix& eta, const Priors& priors)
{
    check_dims(x, eta, state);
    const auto e = expected_logs(state);
    const Matrix expected_eta = state.resp * eta;

    double data = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double r = expected_eta(i, j);
            data += x(i, j) > 0.5 ? r * e.log_no_slip[j] + (1.0 - r) * e.log_guess[j]
                                  : r * e.log_slip[j] + (1.0 - r) * e.log_no_guess[j];
        }
    }
    double assignment = 0.0;
    for (Eigen::Index i = 0; i < state.resp.rows(); ++i) {
        for (Eigen::Index l = 0; l < state.resp.cols(); ++l) {
            const double r = state.resp(i, l);
            if (r > 0.0) assignment += r * (e.log_weight[l] - std::log(r));
        }
    }
    const double elbo = data + assignment - parameter_kl(state, priors);
    if (!std::isfinite(elbo)) throw NumericalError {"ELBO is not finite"};
    return elbo;
}

FitResult fit(const Matrix& x, const Matrix& eta, const Priors& priors, Rng& rng, const Options& options)
{
    if (x.cols() != eta.cols()) throw DimensionError {"responses and ideal responses disagree on item count"};
    if (options.max_sweeps < 1) throw ConfigError {"max_sweeps must be at least 1"};
    auto state = init_state(static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols()),
                            static_cast<std::size_t>(eta.rows()), priors, rng, options.init_jitter);

    if (options.informed_start) {
        RowMatrix likelihood(state.resp.rows(), state.resp.cols());
        responsibilities(x, eta, point_logs(static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(eta.rows()),
                                            options.start_slip, options.start_guess),
                         likelihood);
        state.resp = state.resp.cwiseProduct(likelihood);
        for (Eigen::Index i = 0; i < state.resp.rows(); ++i) state.resp.row(i) /= state.resp.row(i).sum();
    }

    // A sweep starts from the current responsibilities: with every posterior
    // still at a symmetric prior the class logits would all coincide and the
    // initial jitter would be erased before it could break the symmetry.
    double elbo = -std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
        update_item_posteriors(state, x, eta, priors);
        update_class_weights(state, priors);
        // Right after the responsibility update, E_q[log p(X, Z | .)] - E_q[log q(Z)]
        // collapses to the sum of per-respondent log normalisers.
        const double normalisers = responsibilities(x, eta, expected_logs(state), state.resp);
        const double next = normalisers - parameter_kl(state, priors);
        if (!std::isfinite(next)) throw NumericalError {"ELBO is not finite at sweep " + std::to_string(sweep)};
        state.elbo_trace.push_back(next);
        state.sweeps = sweep + 1;
        const bool small_step = std::abs(next - elbo) < options.tol * (1.0 + std::abs(next));
        elbo = next;
        if (small_step) {
            state.converged = true;
            break;
        }
    }
    return {std::move(state), elbo};
}

FitResult fit(const ResponseMatrix& x, const QMatrix& q, const Priors& priors, Rng& rng, const Options& options)
{
    if (x.items() != q.items()) {
        throw DimensionError {"responses have " + std::to_string(x.items()) + " items, Q-matrix has "
                              + std::to_string(q.items())};
    }
    return fit(to_dense(x), ideal_responses(q), priors, rng, options);
}

PointEstimates point_estimates(const State& state, const ProfileLattice& lattice)
{
    if (static_cast<std::size_t>(state.resp.cols()) != lattice.size()) {
        throw DimensionError {"responsibilities do not match the profile lattice"};
    }
    PointEstimates out;
    const auto j = static_cast<std::size_t>(state.slip_a.size());
    out.item.slip.resize(j);
    out.item.guess.resize(j);
    for (std::size_t t = 0; t < j; ++t) {
        const auto e = static_cast<Eigen::Index>(t);
        out.item.slip[t] = clamp_probability(state.slip_a[e] / (state.slip_a[e] + state.slip_b[e]));
        out.item.guess[t] = clamp_probability(state.guess_a[e] / (state.guess_a[e] + state.guess_b[e]));
    }
    const auto n = static_cast<std::size_t>(state.resp.rows());
    const int k = lattice.attributes();
    out.classes.resize(n);
    out.profiles = BinaryMatrix {n, static_cast<std::size_t>(k)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = state.resp.row(static_cast<Eigen::Index>(i));
        Eigen::Index best = 0;
        for (Eigen::Index l = 1; l < row.size(); ++l) {
            if (row[l] > row[best]) best = l;  // ties keep the lowest class
        }
        out.classes[i] = static_cast<Code>(best);
        for (int a = 0; a < k; ++a) out.profiles(i, a) = lattice.bit(static_cast<std::size_t>(best), a);
    }
    return out;
}

} // namespace qdina::vb
