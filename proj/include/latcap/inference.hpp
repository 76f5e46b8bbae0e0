#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latcap/data.hpp"
#include "latcap/estimate.hpp"
#include "latcap/model.hpp"

namespace latcap {

// Per-unit expected information of the profile likelihood (tau profiled
// out). The N-beta block is zero asymptotically and is set to zero.
struct InfoMatrices {
  double F_NN = 0.0;        // (1 - phi) / phi
  Eigen::MatrixXd F_bb;     // beta block
  Eigen::VectorXd F_Nb;     // zeros
  bool positive_definite = false;
  double se_N = 0.0;        // sqrt(N phi / (1 - phi))
  Eigen::VectorXd se_beta;  // sqrt(diag(F_bb^{-1}) / N); empty when not PD
  std::vector<std::string> warnings;
};

InfoMatrices profile_expected_info(const FitResult& fit, const Dataset& data);

// Minus the central-difference Jacobian of s_beta(beta, tau_hat(beta)) at
// fixed N, symmetrized. This is the observed information of the profile
// likelihood, on the scale of the whole sample (compare with N * F_bb).
Eigen::MatrixXd profile_observed_info_beta(const FitResult& fit, const Model& model,
                                           const Dataset& data, double step = 1e-4);

struct ProfilePoint {
  double N = 0.0;
  double deviance = 0.0;  // D_N = 2 [L(N_hat) - L_profile(N)]
  double loglik = 0.0;
  bool converged = false;
};

struct ProfileOptions {
  double tol = 1e-3;     // |D_N - q| at the endpoints
  double growth = 1.5;   // geometric bracket expansion above N_hat
  double max_factor = 100.0;
  int max_bisections = 200;
  FitOptions inner = [] {
    FitOptions o;
    o.tol_loglik = 1e-9;
    o.tol_param = 1e-9;
    o.max_outer = 5000;
    return o;
  }();
};

struct ProfileCI {
  double level = 0.95;
  double quantile = 0.0;  // chi-square(1) quantile at level
  double lower = 0.0;
  double upper = 0.0;
  bool lower_at_boundary = false;  // lower endpoint floored at n
  bool unbounded_above = false;    // D_N stayed below q up to max_factor * N_hat
  std::vector<ProfilePoint> grid;  // every N evaluated, sorted by N
  std::vector<std::string> warnings;
};

double chi_square_quantile(double level, double dof = 1.0);

// Profile deviance at one N, maximizing over (beta, tau) from beta_start.
ProfilePoint profile_deviance(const Dataset& data, const Model& model, const FitResult& fit,
                              double N, const Eigen::VectorXd& beta_start,
                              const FitOptions& inner, Eigen::VectorXd* beta_out = nullptr);

ProfileCI profile_ci_N(const Dataset& data, const Model& model, const FitResult& fit,
                       double level = 0.95, const ProfileOptions& options = {});

struct IdentifiabilityReport {
  int points = 0;
  double radius = 0.0;
  std::vector<double> min_eigen;
  std::vector<double> max_eigen;
  std::vector<bool> flagged;  // min eigenvalue <= 1e-8 * max eigenvalue
  int flagged_count() const;
  bool ok() const { return flagged_count() == 0; }
};

// Samples beta uniformly in a ball around the estimate and checks that the
// profile information stays positive definite. The first point is the
// estimate itself.
IdentifiabilityReport identifiability_check(const FitResult& fit, const Model& model,
                                            const Dataset& data, int n_points, double radius,
                                            std::uint64_t seed = 1);

// N_A * sum_i tau_Ai KL(ptilde_Ai || ptilde_Bi) over all 2^J configurations,
// never-captured included. +inf when B has a zero cell where A is positive.
double kl_by_strata(const FitResult& a, const FitResult& b);
// Per-stratum terms N_A * tau_Ai * KL_i.
std::vector<double> kl_contributions(const FitResult& a, const FitResult& b);

// Analytic derivatives against central differences at one parameter point:
// score_beta, D (all strata stacked), Phi, D_phi and score_N. The error is
// max |analytic - numeric| / max(1, max |numeric|).
struct DerivativeCheck {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

std::vector<DerivativeCheck> derivative_checks(const Dataset& data, const Model& model,
                                               const Params& params, double tolerance = 1e-6);

}  // namespace latcap
