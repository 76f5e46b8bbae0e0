#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latcap/data.hpp"
#include "latcap/error.hpp"
#include "latcap/likelihood.hpp"
#include "latcap/model.hpp"

namespace latcap {

// No step length in {1, 1/2, ..., 2^-20} keeps the log-likelihood from
// decreasing.
class StepFailure : public Error {
 public:
  using Error::Error;
};

// Profiled: every cycle solves (N, tau) exactly for the current beta and
// takes a Newton step on the resulting profile log-likelihood of beta, or a
// Fisher step where its numerical Hessian is not negative definite.
// Blockwise: one beta step at fixed (N, tau), then the tau solve, then one
// damped N step.
enum class Scheme { Profiled, Blockwise };

struct FitOptions {
  Scheme scheme = Scheme::Profiled;
  double tol_loglik = 1e-8;
  double tol_param = 1e-7;
  int max_outer = 500;
  std::uint64_t seed = 1;
  double init_jitter = 0.1;  // half-width of the uniform perturbation of beta
  double first_step = 0.5;   // a_u = 1 - first_step / u for the N update
  double max_step = 2.0;     // cap on max |beta change| in one step
  bool observed_curvature = true;  // profiled: Newton steps on the concentrated likelihood when it is concave
  std::optional<Params> inits;
};

struct TraceEntry {
  int iteration = 0;
  double loglik = 0.0;
  double score_norm = 0.0;  // max |s_beta| before the beta step
  double N = 0.0;
};

struct FitResult {
  Params params;
  double loglik = 0.0;
  bool converged = false;
  std::string reason;
  int iterations = 0;
  std::vector<TraceEntry> trace;
  ModelState state;
  std::vector<std::string> warnings;
  bool N_at_boundary = false;   // N = n
  bool tau_at_floor = false;    // some tau_i at its lower bound n_i / N
};

struct BetaStep {
  Eigen::VectorXd beta;
  double loglik = 0.0;
  double step = 1.0;
  bool ridge = false;
};

// beta + alpha F^{-1} s_beta with alpha halved until the log-likelihood does
// not decrease. Falls back to F + eps I, eps = 1e-8 trace(F) / dim, when the
// Cholesky factorization fails. The direction is scaled down so that no
// coordinate moves by more than max_step.
BetaStep fisher_step_beta(const Model& model, const Dataset& data, const Params& params,
                          const ModelState& state, double max_step = 2.0);

// Per-unit information of beta with tau profiled out:
//   sum_i tau_i D_i' diag(p_i)^{-1} D_i
//   + Phi' [(tau phi' / phi - I) D_phi + tau tau' / phi] Phi.
Eigen::MatrixXd profile_info_beta(const Params& params, const ModelState& state,
                                  const Dataset& data);

// Maximizes the log-likelihood over (N, tau) for the never-captured
// probabilities in state: N solves psi(N+1) - psi(N-n+1) + log(tau' phi) = 0
// with tau re-solved at every trial N, or sits at n when the score is not
// positive there. Returns params with beta left empty.
Params profile_N_tau(const Dataset& data, const ModelState& state);

// N' = max(n, N + a_u s_N / F_N), a_u = 1 - first_step / u.
double newton_step_N(const Params& params, const Dataset& data, const ModelState& state,
                     int iteration, double first_step = 0.5);

// tau = n_i / n, beta uniform in (-jitter, jitter), N = n / (1 - phi) floored
// at n + 1.
Params initialize(const Dataset& data, const Model& model, std::uint64_t seed,
                  double jitter = 0.1);

// Cycles until the log-likelihood and all parameters stop moving; see Scheme.
FitResult fit(const Dataset& data, const Model& model, const FitOptions& options = {});

// Maximizes over (beta, tau) with N held fixed.
FitResult fit_fixed_N(const Dataset& data, const Model& model, double N,
                      const Eigen::VectorXd& beta_start, const FitOptions& options = {});

struct MultiStartFit {
  FitResult best;
  std::vector<std::uint64_t> seeds;
  std::vector<double> logliks;  // -inf for a start that threw
  std::vector<bool> converged;
};

// Start t uses seed options.seed + t; the highest log-likelihood wins.
MultiStartFit fit_multistart(const Dataset& data, const Model& model, int starts,
                             const FitOptions& options = {});

// Deterministic uniform draws in [0, 1) from a 64-bit seed (splitmix64).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace latcap
