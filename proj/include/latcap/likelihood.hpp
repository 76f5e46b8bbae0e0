#pragma once

#include <Eigen/Dense>

#include "latcap/data.hpp"
#include "latcap/model.hpp"

namespace latcap {

// psi = (N, beta) plus the stratum weights tau. N is continuous.
struct Params {
  double N = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd tau;
};

// Never-captured probability for a unit of unknown stratum, tau' phi.
double average_phi(const Eigen::VectorXd& tau, const ModelState& state);

// log Gamma(N+1) - log Gamma(N-n+1) + (N-n) log(tau'phi)
//   + sum_i [y_i' log p_i + n_i log tau_i].
// Returns -infinity when an observed cell has zero probability.
double log_likelihood(const Params& params, const ModelState& state, const Dataset& data);

// (N-n)/phi Phi' tau + sum_i D_i' diag(p_i)^{-1} y_i. Throws BoundaryError
// when an observed cell has zero probability.
Eigen::VectorXd score_beta(const Params& params, const ModelState& state, const Dataset& data);

// N [Phi' tau tau' Phi / phi + sum_i tau_i D_i' diag(p_i)^{-1} D_i].
Eigen::MatrixXd expected_info_beta(const Params& params, const ModelState& state);

// d L / d N and -d^2 L / d N^2 at fixed (beta, tau); phi = tau'phi.
double score_N(double N, int captured, double phi);
double obs_info_N(double N, int captured);

}  // namespace latcap
