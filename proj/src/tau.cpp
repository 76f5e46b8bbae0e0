#include "latcap/tau.hpp"

#include <cmath>
#include <string>

#include "latcap/error.hpp"

namespace latcap {

namespace {

void check_inputs(const Eigen::VectorXd& phi, double N, const Eigen::VectorXd& counts) {
  if (phi.size() != counts.size() || phi.size() == 0) {
    throw DimensionError("phi and counts must be non-empty and of equal length");
  }
  if ((counts.array() <= 0).any()) throw DomainError("stratum counts must be positive");
  if ((phi.array() < 0).any() || (phi.array() >= 1).any()) {
    throw DomainError("never-captured probabilities must lie in [0, 1)");
  }
  const double n = counts.sum();
  if (!(N >= n)) {
    throw DomainError("N = " + std::to_string(N) + " is below the number captured " +
                      std::to_string(n));
  }
}

double l1_change(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().sum();
}

// Root of h(t) = sum_i n_i / (N - (N-n) phi_i / t) - 1 on (c max phi, max phi],
// c = (N-n)/N. h decreases from +inf to a value <= 0 on that bracket.
double hyperbola_root(const Eigen::VectorXd& phi, double N, const Eigen::VectorXd& counts) {
  const double n = counts.sum();
  const double excess = N - n;
  const double top = phi.maxCoeff();
  auto h = [&](double t, double* slope) {
    double value = -1.0;
    double deriv = 0.0;
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      const double denom = N - excess * phi[i] / t;
      value += counts[i] / denom;
      deriv -= counts[i] * excess * phi[i] / (t * t * denom * denom);
    }
    if (slope) *slope = deriv;
    return value;
  };
  double lo = excess / N * top;
  double hi = top;
  if (h(hi, nullptr) >= 0) return hi;
  double t = hi;
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double value = h(t, &slope);
    if (value > 0) {
      lo = t;
    } else {
      hi = t;
    }
    if (value == 0 || hi - lo <= 1e-16 * hi) break;
    double next = t - value / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-16 * t) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

}  // namespace

Eigen::VectorXd update_tau(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                           const Eigen::VectorXd& counts) {
  check_inputs(phi, N, counts);
  if (tau.size() != phi.size()) throw DimensionError("tau and phi differ in length");
  const double n = counts.sum();
  if (N == n) return counts / n;
  const double phi_bar = tau.dot(phi);
  if (!(phi_bar > 0)) throw DomainError("average never-captured probability is zero");
  return (counts + (N - n) / phi_bar * phi.cwiseProduct(tau)) / N;
}

TauSolution solve_tau_fixed_point(const Eigen::VectorXd& phi, double N,
                                  const Eigen::VectorXd& counts, double tol, int max_iter) {
  check_inputs(phi, N, counts);
  TauSolution sol;
  sol.tau = counts / counts.sum();
  for (sol.iterations = 1; sol.iterations <= max_iter; ++sol.iterations) {
    Eigen::VectorXd next = update_tau(sol.tau, phi, N, counts);
    sol.residual = l1_change(next, sol.tau);
    sol.tau.swap(next);
    if (sol.residual <= tol) break;
  }
  if (sol.residual > tol) {
    throw ConvergenceError("tau iteration did not converge in " + std::to_string(max_iter) +
                           " steps (last change " + std::to_string(sol.residual) + ")");
  }
  sol.hyperbola_residual = hyperbola_residual(sol.tau, phi, N, counts);
  return sol;
}

TauSolution solve_tau(const Eigen::VectorXd& phi, double N, const Eigen::VectorXd& counts,
                      double tol, int max_iter) {
  check_inputs(phi, N, counts);
  const double n = counts.sum();
  TauSolution sol;
  sol.tau = counts / n;
  if (N > n && phi.size() > 1) {
    if (!(phi.maxCoeff() > 0)) throw DomainError("every stratum has zero never-captured probability");
    const double t = hyperbola_root(phi, N, counts);
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      sol.tau[i] = counts[i] * t / (N * t - (N - n) * phi[i]);
    }
    sol.tau /= sol.tau.sum();
  }
  for (sol.iterations = 1; sol.iterations <= max_iter; ++sol.iterations) {
    Eigen::VectorXd next = update_tau(sol.tau, phi, N, counts);
    sol.residual = l1_change(next, sol.tau);
    sol.tau.swap(next);
    if (sol.residual <= tol) break;
  }
  if (sol.residual > tol) {
    throw ConvergenceError("tau polish did not converge in " + std::to_string(max_iter) +
                           " steps (last change " + std::to_string(sol.residual) + ")");
  }
  sol.hyperbola_residual = hyperbola_residual(sol.tau, phi, N, counts);
  return sol;
}

double hyperbola_residual(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                          const Eigen::VectorXd& counts) {
  const double n = counts.sum();
  const double phi_bar = tau.dot(phi);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    const double target = counts[i] * phi_bar / (N * phi_bar - (N - n) * phi[i]);
    worst = std::max(worst, std::abs(tau[i] - target));
  }
  return worst;
}

double implicit_residual(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                         const Eigen::VectorXd& counts) {
  const double n = counts.sum();
  const double phi_bar = tau.dot(phi);
  return (N * phi_bar * tau - phi_bar * counts - (N - n) * tau.cwiseProduct(phi))
      .cwiseAbs()
      .maxCoeff();
}

TauJacobian tau_jacobian(const Eigen::VectorXd& tau, const Eigen::VectorXd& phi, double N,
                         const Eigen::VectorXd& counts) {
  check_inputs(phi, N, counts);
  const double n = counts.sum();
  const double phi_bar = tau.dot(phi);
  TauJacobian jac;
  jac.d0 = (N * phi_bar - (N - n) * phi.array()).matrix();
  for (Eigen::Index i = 0; i < jac.d0.size(); ++i) {
    if (!(jac.d0[i] > 0)) {
      throw DomainError("d0[" + std::to_string(i) + "] = " + std::to_string(jac.d0[i]) +
                        " is not positive; tau does not solve the weight equations");
    }
  }
  jac.d1 = (N - n) * tau;
  jac.a = N * tau - counts;
  const Eigen::VectorXd inv_d0 = jac.d0.cwiseInverse();
  jac.g = 1.0 + jac.a.dot(inv_d0.cwiseProduct(phi));
  const Eigen::RowVectorXd v =
      (tau + phi.cwiseProduct(jac.d1).cwiseProduct(inv_d0)).transpose() / jac.g;
  jac.Dphi = -jac.a * v;
  jac.Dphi.diagonal() += jac.d1;
  jac.Dphi = inv_d0.asDiagonal() * jac.Dphi;
  return jac;
}

Eigen::VectorXd conditional_tau(const Eigen::VectorXd& phi, const Eigen::VectorXd& counts) {
  if (phi.size() != counts.size()) throw DimensionError("phi and counts differ in length");
  if ((phi.array() >= 1).any()) throw DomainError("conditional weights need phi_i < 1");
  Eigen::VectorXd w = counts.array() / (1.0 - phi.array());
  return w / w.sum();
}

}  // namespace latcap
