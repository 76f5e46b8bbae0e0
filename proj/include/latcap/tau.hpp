#pragma once

#include <Eigen/Dense>

namespace latcap {

// Stratum weights tau maximizing the likelihood for fixed (N, beta), given the
// per-stratum never-captured probabilities phi and capture counts n_i.

struct TauSolution {
  Eigen::VectorXd tau;
  int iterations = 0;
  double residual = 0.0;            // sum |tau^(u) - tau^(u-1)| at exit
  double hyperbola_residual = 0.0;  // max_i |tau_i - n_i phi / (N phi - (N-n) phi_i)|
};

// d tau / d phi' with the pieces of its rank-one closed form:
//   D = diag(d0)^{-1} [diag(d1) - a (tau' + (phi o d1 / d0)') / g]
// with d0 = N phi - (N-n) phi_vec, d1 = (N-n) tau, a = N tau - n and
// g = 1 + a' diag(d0)^{-1} phi_vec. For unit counts a = N (tau - 1/N).
struct TauJacobian {
  Eigen::MatrixXd Dphi;
  Eigen::VectorXd d0;
  Eigen::VectorXd d1;
  Eigen::VectorXd a;
  double g = 1.0;
};

// tau' = [n + (N-n)/phi diag(phi_vec) tau] / N with phi = tau' phi_vec.
Eigen::VectorXd update_tau(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                           const Eigen::VectorXd& counts);

// Plain fixed-point iteration of update_tau from tau = n / n_total.
TauSolution solve_tau_fixed_point(const Eigen::VectorXd& phi, double N,
                                  const Eigen::VectorXd& counts, double tol = 1e-12,
                                  int max_iter = 10000);

// Locates the fixed point through the scalar equation sum_i tau_i(phi) = 1
// on the hyperbola, then polishes with update_tau until sum |delta| <= tol.
// Converges in a handful of steps even when the plain iteration contracts
// slowly (N much larger than n).
TauSolution solve_tau(const Eigen::VectorXd& phi, double N, const Eigen::VectorXd& counts,
                      double tol = 1e-12, int max_iter = 10000);

double hyperbola_residual(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                          const Eigen::VectorXd& counts);

// max_i |N tau_i phi - n_i phi - (N-n) tau_i phi_i|.
double implicit_residual(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                         const Eigen::VectorXd& counts);

TauJacobian tau_jacobian(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                         const Eigen::VectorXd& counts);

// Weights implied by the likelihood conditional on capture:
// tau_i proportional to n_i / (1 - phi_i).
Eigen::VectorXd conditional_tau(const Eigen::VectorXd& phi, const Eigen::VectorXd& counts);

}  // namespace latcap
