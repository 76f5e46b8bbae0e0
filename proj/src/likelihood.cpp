#include "latcap/likelihood.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "latcap/error.hpp"
#include "latcap/special.hpp"

namespace latcap {

namespace {

void check_N(double N, int captured) {
  if (!(N >= captured)) {
    throw DomainError("N = " + std::to_string(N) + " is below the number captured " +
                      std::to_string(captured));
  }
}

}  // namespace

double average_phi(const Eigen::VectorXd& tau, const ModelState& state) {
  return tau.dot(state.phi);
}

double log_likelihood(const Params& params, const ModelState& state, const Dataset& data) {
  const int n = data.total;
  check_N(params.N, n);
  if (params.tau.size() != data.size() || state.size() != data.size()) {
    throw DimensionError("tau, state and dataset disagree on the number of strata");
  }
  const double undercount = params.N - n;
  double ll = std::lgamma(params.N + 1.0) - std::lgamma(undercount + 1.0);
  if (undercount > 0) {
    const double phi = average_phi(params.tau, state);
    if (!(phi > 0)) return -std::numeric_limits<double>::infinity();
    ll += undercount * std::log(phi);
  }
  for (int i = 0; i < data.size(); ++i) {
    const auto& st = data.strata[i];
    const auto& p = state.strata[i].p;
    for (std::size_t h = 0; h < st.y.size(); ++h) {
      if (st.y[h] == 0) continue;
      if (!(p[static_cast<Eigen::Index>(h)] > 0)) return -std::numeric_limits<double>::infinity();
      ll += st.y[h] * std::log(p[static_cast<Eigen::Index>(h)]);
    }
    ll += st.n * std::log(params.tau[i]);
  }
  return ll;
}

Eigen::VectorXd score_beta(const Params& params, const ModelState& state, const Dataset& data) {
  const int n = data.total;
  check_N(params.N, n);
  const Eigen::Index dim = state.Phi.cols();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(dim);
  if (params.N > n) {
    const double phi = average_phi(params.tau, state);
    if (!(phi > 0)) throw BoundaryError("average never-captured probability is zero");
    score += (params.N - n) / phi * state.Phi.transpose() * params.tau;
  }
  for (int i = 0; i < data.size(); ++i) {
    const auto& st = data.strata[i];
    const auto& ms = state.strata[i];
    Eigen::VectorXd w = Eigen::VectorXd::Zero(ms.p.size());
    for (std::size_t h = 0; h < st.y.size(); ++h) {
      if (st.y[h] == 0) continue;
      const double ph = ms.p[static_cast<Eigen::Index>(h)];
      if (!(ph > 0)) {
        throw BoundaryError("observed configuration " + std::to_string(h + 1) + " in stratum " +
                            std::to_string(i) + " has zero probability");
      }
      w[static_cast<Eigen::Index>(h)] = st.y[h] / ph;
    }
    score += ms.D.transpose() * w;
  }
  return score;
}

Eigen::MatrixXd expected_info_beta(const Params& params, const ModelState& state) {
  const Eigen::Index dim = state.Phi.cols();
  const Eigen::VectorXd phi_grad = state.Phi.transpose() * params.tau;
  const double phi = average_phi(params.tau, state);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  if (phi > 0) info += phi_grad * phi_grad.transpose() / phi;
  for (int i = 0; i < state.size(); ++i) {
    const auto& ms = state.strata[i];
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ms.p.size());
    for (Eigen::Index h = 0; h < ms.p.size(); ++h) {
      if (ms.p[h] > 0) inv[h] = 1.0 / ms.p[h];
    }
    info.noalias() += params.tau[i] * ms.D.transpose() * inv.asDiagonal() * ms.D;
  }
  info *= params.N;
  return 0.5 * (info + info.transpose());
}

double score_N(double N, int captured, double phi) {
  check_N(N, captured);
  return digamma(N + 1.0) - digamma(N - captured + 1.0) + std::log(phi);
}

double obs_info_N(double N, int captured) {
  check_N(N, captured);
  return trigamma(N - captured + 1.0) - trigamma(N + 1.0);
}

}  // namespace latcap
