#ifndef QDINA_VB_HPP
#define QDINA_VB_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "qdina/model.hpp"
#include "qdina/rng.hpp"

// Mean-field variational Bayes for the DINA model with a fixed Q-matrix.
//
// Latent class indicators z_i ~ Categorical(pi), pi ~ Dirichlet(delta0),
// slip s_j ~ Beta(a_s0, b_s0), guess g_j ~ Beta(a_g0, b_g0). The variational
// family factorises as q(Z) q(pi) prod_j q(s_j) q(g_j); every factor is
// conjugate, so each coordinate update is closed form.
namespace qdina::vb {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Priors
{
    double slip_a = 1.0, slip_b = 1.0;
    double guess_a = 1.0, guess_b = 1.0;
    double class_concentration = 1.0;  // used when class_prior is empty
    std::vector<double> class_prior;   // optional per-class Dirichlet concentration

    Vector class_vector(std::size_t num_classes) const;
    void validate(std::size_t num_classes) const;
};

struct Options
{
    double tol = 1e-5;          // stop when |dELBO| < tol * (1 + |ELBO|)
    int max_sweeps = 500;
    double init_jitter = 0.5;   // responsibilities start at (1 + jitter * U(-1, 1)) / L, renormalised
    // Before the first sweep, weight the jittered responsibilities by the DINA
    // likelihood at these nominal parameters. Without it the symmetric prior
    // state tends to a saddle or to the reversed solution (g > 1 - s).
    bool informed_start = true;
    double start_slip = 0.2;
    double start_guess = 0.2;
};

struct State
{
    RowMatrix resp;             // N x L, rows sum to one
    Vector slip_a, slip_b;      // Beta posterior of s_j; slip_a counts slips
    Vector guess_a, guess_b;    // Beta posterior of g_j; guess_a counts guesses
    Vector class_conc;          // Dirichlet posterior of pi
    std::vector<double> elbo_trace;
    int sweeps = 0;
    bool converged = false;
};

// E[log .] of every factor the responsibilities depend on.
struct LogExpectations
{
    Vector log_slip, log_no_slip;    // E log s_j, E log(1 - s_j)
    Vector log_guess, log_no_guess;  // E log g_j, E log(1 - g_j)
    Vector log_weight;               // E log pi_l
};

struct FitResult
{
    State state;
    double elbo;  // maximised ELBO
};

struct PointEstimates
{
    ItemParams item;
    std::vector<Code> classes;  // MAP class per respondent (= profile code)
    BinaryMatrix profiles;      // N x K
};

Matrix to_dense(const BinaryMatrix& m);
inline Matrix to_dense(const ResponseMatrix& x) { return to_dense(x.entries()); }

// L x J dense ideal responses for Q over the full lattice.
Matrix ideal_responses(const QMatrix& q);

State init_state(std::size_t respondents, std::size_t items, std::size_t classes, const Priors& priors,
                 Rng& rng, double jitter);
State init_state(const ResponseMatrix& x, const ProfileLattice& lattice, const Priors& priors, Rng& rng,
                 double jitter);

LogExpectations expected_logs(const State& state);

// Normalised responsibilities for fixed expectations. Returns sum_i log sum_l exp(logit_il).
double responsibilities(const Matrix& x, const Matrix& eta, const LogExpectations& e, RowMatrix& resp);

void update_responsibilities(State& state, const Matrix& x, const Matrix& eta);
void update_item_posteriors(State& state, const Matrix& x, const Matrix& eta, const Priors& priors);
void update_class_weights(State& state, const Priors& priors);

double compute_elbo(const State& state, const Matrix& x, const Matrix& eta, const Priors& priors);

// Fixed point parameters as log expectations (all classes equally likely).
LogExpectations point_logs(std::size_t items, std::size_t classes, double slip, double guess);

// Sum of the KL terms of q(pi), q(s), q(g) against their priors.
double parameter_kl(const State& state, const Priors& priors);

FitResult fit(const Matrix& x, const Matrix& eta, const Priors& priors, Rng& rng, const Options& options);
FitResult fit(const ResponseMatrix& x, const QMatrix& q, const Priors& priors, Rng& rng, const Options& options);

PointEstimates point_estimates(const State& state, const ProfileLattice& lattice);

double kl_beta(double a, double b, double a0, double b0);
double kl_dirichlet(const Vector& conc, const Vector& conc0);

} // namespace qdina::vb

#endif
