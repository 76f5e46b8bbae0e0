#include "latcap/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "latcap/error.hpp"
#include "latcap/sim.hpp"
#include "latcap/tau.hpp"

namespace latcap {

namespace {

constexpr double kIdentifiabilityRatio = 1e-8;

double min_eigen_ratio(const Eigen::MatrixXd& m, double* min_out = nullptr,
                       double* max_out = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()),
                                                     Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (min_out) *min_out = lo;
  if (max_out) *max_out = hi;
  return hi > 0 ? lo / hi : -1.0;
}

Eigen::VectorXd full_probs(const StratumState& st) {
  Eigen::VectorXd p(st.p.size() + 1);
  p[0] = st.phi;
  p.tail(st.p.size()) = st.p;
  return p;
}

}  // namespace

InfoMatrices profile_expected_info(const FitResult& fit, const Dataset& data) {
  InfoMatrices out;
  const double phi = average_phi(fit.params.tau, fit.state);
  out.F_NN = (1.0 - phi) / phi;
  out.F_bb = profile_info_beta(fit.params, fit.state, data);
  out.F_Nb = Eigen::VectorXd::Zero(out.F_bb.rows());
  out.se_N = std::sqrt(fit.params.N * phi / (1.0 - phi));
  if (out.F_bb.size() == 0) {
    out.positive_definite = true;
    return out;
  }
  const double ratio = min_eigen_ratio(out.F_bb);
  Eigen::LLT<Eigen::MatrixXd> llt(out.F_bb);
  out.positive_definite = llt.info() == Eigen::Success && ratio > kIdentifiabilityRatio;
  if (!out.positive_definite) {
    out.warnings.push_back("profile information is not positive definite; beta standard errors suppressed");
    return out;
  }
  const Eigen::MatrixXd cov =
      llt.solve(Eigen::MatrixXd::Identity(out.F_bb.rows(), out.F_bb.cols())) / fit.params.N;
  out.se_beta = cov.diagonal().cwiseSqrt();
  return out;
}

Eigen::MatrixXd profile_observed_info_beta(const FitResult& fit, const Model& model,
                                           const Dataset& data, double step) {
  const Eigen::VectorXd counts = data.counts();
  const double N = fit.params.N;
  const Eigen::Index dim = fit.params.beta.size();
  auto profile_score = [&](const Eigen::VectorXd& beta, Eigen::Index coord) {
    const ModelState st = model_state(model, data, beta);
    Params p;
    p.N = N;
    p.beta = beta;
    try {
      p.tau = solve_tau(st.phi, N, counts).tau;
    } catch (const Error& err) {
      throw ConvergenceError("tau solve failed when perturbing beta coordinate " +
                             std::to_string(coord + 1) + ": " + err.what());
    }
    return Eigen::VectorXd(score_beta(p, st, data));
  };
  Eigen::MatrixXd jac(dim, dim);
  Eigen::VectorXd probe = fit.params.beta;
  for (Eigen::Index t = 0; t < dim; ++t) {
    probe[t] = fit.params.beta[t] + step;
    const Eigen::VectorXd up = profile_score(probe, t);
    probe[t] = fit.params.beta[t] - step;
    const Eigen::VectorXd down = profile_score(probe, t);
    probe[t] = fit.params.beta[t];
    jac.col(t) = (up - down) / (2.0 * step);
  }
  return -0.5 * (jac + jac.transpose());
}

double chi_square_quantile(double level, double dof) {
  if (!(level > 0 && level < 1)) throw DomainError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::chi_squared(dof), level);
}

ProfilePoint profile_deviance(const Dataset& data, const Model& model, const FitResult& fit,
                              double N, const Eigen::VectorXd& beta_start,
                              const FitOptions& inner, Eigen::VectorXd* beta_out) {
  const FitResult r = fit_fixed_N(data, model, N, beta_start, inner);
  if (beta_out) *beta_out = r.params.beta;
  return {N, 2.0 * (fit.loglik - r.loglik), r.loglik, r.converged};
}

ProfileCI profile_ci_N(const Dataset& data, const Model& model, const FitResult& fit,
                       double level, const ProfileOptions& options) {
  ProfileCI ci;
  ci.level = level;
  ci.quantile = chi_square_quantile(level);
  const double n = data.total;
  const double N_hat = fit.params.N;

  std::map<double, std::pair<ProfilePoint, Eigen::VectorXd>> evaluated;
  evaluated[N_hat] = {{N_hat, 0.0, fit.loglik, fit.converged}, fit.params.beta};
  bool warned_negative = false;

  auto eval = [&](double N) -> const ProfilePoint& {
    if (auto it = evaluated.find(N); it != evaluated.end()) return it->second.first;
    // warm start from the nearest evaluated N
    auto above = evaluated.lower_bound(N);
    auto nearest = above;
    if (above == evaluated.end() ||
        (above != evaluated.begin() && N - std::prev(above)->first < above->first - N)) {
      nearest = std::prev(above);
    }
    Eigen::VectorXd beta;
    ProfilePoint pt =
        profile_deviance(data, model, fit, N, nearest->second.second, options.inner, &beta);
    if (pt.deviance < -1e-6 && !warned_negative) {
      ci.warnings.push_back("profile at N = " + std::to_string(N) +
                            " exceeds the fitted log-likelihood; the fit may be a local maximum");
      warned_negative = true;
    }
    if (!pt.converged) {
      ci.warnings.push_back("inner fit at N = " + std::to_string(N) + " did not converge");
    }
    return evaluated.emplace(N, std::make_pair(pt, beta)).first->second.first;
  };

  // Root of D_N = q between a (D < q) and b (D > q).
  auto bisect = [&](double a, double b) {
    double mid = 0.5 * (a + b);
    for (int it = 0; it < options.max_bisections; ++it) {
      mid = 0.5 * (a + b);
      const double d = eval(mid).deviance;
      if (std::abs(d - ci.quantile) <= options.tol) break;
      if (d < ci.quantile) {
        a = mid;
      } else {
        b = mid;
      }
      if (std::abs(b - a) <= 1e-10 * std::max(1.0, std::abs(b))) break;
    }
    return mid;
  };

  // Lower endpoint.
  if (N_hat <= n) {
    ci.lower = n;
    ci.lower_at_boundary = true;
  } else {
    const double d_n = eval(n).deviance;
    if (d_n <= ci.quantile) {
      ci.lower = n;
      ci.lower_at_boundary = true;
    } else {
      ci.lower = bisect(N_hat, n);
    }
  }

  // Upper endpoint: expand geometrically until D_N exceeds q.
  double prev_N = N_hat;
  double prev_d = 0.0;
  double N = std::max(N_hat, n + 1.0);
  bool bracketed = false;
  while (true) {
    N *= options.growth;
    if (N > options.max_factor * std::max(N_hat, 1.0)) break;
    const double d = eval(N).deviance;
    if (d < prev_d - 1e-9) {
      ci.warnings.push_back("profile deviance is not monotone above N_hat near N = " +
                            std::to_string(N));
    }
    if (d > ci.quantile) {
      bracketed = true;
      break;
    }
    prev_N = N;
    prev_d = d;
  }
  if (bracketed) {
    ci.upper = bisect(prev_N, N);
  } else {
    ci.unbounded_above = true;
    ci.upper = prev_N;
    ci.warnings.push_back("profile deviance stays below the chi-square quantile up to N = " +
                          std::to_string(prev_N) + "; interval unbounded above");
  }

  for (const auto& [key, value] : evaluated) ci.grid.push_back(value.first);
  return ci;
}

int IdentifiabilityReport::flagged_count() const {
  return static_cast<int>(std::count(flagged.begin(), flagged.end(), true));
}

IdentifiabilityReport identifiability_check(const FitResult& fit, const Model& model,
                                            const Dataset& data, int n_points, double radius,
                                            std::uint64_t seed) {
  IdentifiabilityReport rep;
  rep.points = n_points;
  rep.radius = radius;
  const Eigen::VectorXd counts = data.counts();
  const Eigen::Index dim = fit.params.beta.size();
  SplitMix64 rng(seed);
  auto gaussian = [&] {
    const double u1 = std::max(rng.uniform(), 1e-300);
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  for (int t = 0; t < n_points; ++t) {
    Eigen::VectorXd beta = fit.params.beta;
    if (t > 0 && dim > 0) {
      Eigen::VectorXd dir(dim);
      for (Eigen::Index j = 0; j < dim; ++j) dir[j] = gaussian();
      const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
      beta += r * dir / dir.norm();
    }
    double lo = 0.0;
    double hi = 0.0;
    bool flag = true;
    try {
      const ModelState st = model_state(model, data, beta);
      Params p;
      p.N = fit.params.N;
      p.beta = beta;
      p.tau = solve_tau(st.phi, p.N, counts).tau;
      const Eigen::MatrixXd info = profile_info_beta(p, st, data);
      flag = min_eigen_ratio(info, &lo, &hi) <= kIdentifiabilityRatio;
    } catch (const Error&) {
      flag = true;
    }
    rep.min_eigen.push_back(lo);
    rep.max_eigen.push_back(hi);
    rep.flagged.push_back(flag);
  }
  return rep;
}

std::vector<double> kl_contributions(const FitResult& a, const FitResult& b) {
  if (a.state.size() != b.state.size()) throw DimensionError("fits have different strata");
  std::vector<double> out;
  for (int i = 0; i < a.state.size(); ++i) {
    const Eigen::VectorXd pa = full_probs(a.state.strata[i]);
    const Eigen::VectorXd pb = full_probs(b.state.strata[i]);
    if (pa.size() != pb.size()) throw DimensionError("fits have different numbers of lists");
    double kl = 0.0;
    for (Eigen::Index h = 0; h < pa.size(); ++h) {
      if (pa[h] <= 0) continue;
      if (pb[h] <= 0) {
        kl = std::numeric_limits<double>::infinity();
        break;
      }
      kl += pa[h] * std::log(pa[h] / pb[h]);
    }
    out.push_back(a.params.N * a.params.tau[i] * kl);
  }
  return out;
}

double kl_by_strata(const FitResult& a, const FitResult& b) {
  double total = 0.0;
  for (double c : kl_contributions(a, b)) total += c;
  return total;
}

}  // namespace latcap

namespace latcap {

namespace {

double scaled_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  if (analytic.size() == 0) return 0.0;
  return (analytic - numeric).lpNorm<Eigen::Infinity>() /
         std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
}

}  // namespace

std::vector<DerivativeCheck> derivative_checks(const Dataset& data, const Model& model,
                                               const Params& params, double tolerance) {
  std::vector<DerivativeCheck> out;
  auto record = [&](const std::string& name, double err) {
    out.push_back({name, err, tolerance, err <= tolerance});
  };
  const Eigen::VectorXd counts = data.counts();
  const ModelState state = model_state(model, data, params.beta);

  const auto loglik_beta = [&](const Eigen::VectorXd& b) {
    Params p = params;
    p.beta = b;
    return log_likelihood(p, model_state(model, data, b, Derivatives::No), data);
  };
  record("score_beta", scaled_error(score_beta(params, state, data),
                                    finite_diff(std::function<double(const Eigen::VectorXd&)>(loglik_beta),
                                                params.beta)));

  const int cells = model.configs() - 1;
  Eigen::MatrixXd D(cells * state.size(), model.beta_dim());
  for (int i = 0; i < state.size(); ++i) D.middleRows(i * cells, cells) = state.strata[i].D;
  const auto stacked_p = [&](const Eigen::VectorXd& b) {
    const ModelState st = model_state(model, data, b, Derivatives::No);
    Eigen::VectorXd v(cells * st.size());
    for (int i = 0; i < st.size(); ++i) v.segment(i * cells, cells) = st.strata[i].p;
    return v;
  };
  record("D", scaled_error(D, finite_diff(std::function<Eigen::VectorXd(const Eigen::VectorXd&)>(stacked_p),
                                          params.beta)));

  const auto phi_vec = [&](const Eigen::VectorXd& b) {
    return Eigen::VectorXd(model_state(model, data, b, Derivatives::No).phi);
  };
  record("Phi", scaled_error(state.Phi,
                             finite_diff(std::function<Eigen::VectorXd(const Eigen::VectorXd&)>(phi_vec),
                                         params.beta)));

  const double N = std::max(params.N, data.total + 1.0);
  const Eigen::VectorXd tau = solve_tau(state.phi, N, counts).tau;
  const auto tau_of_phi = [&](const Eigen::VectorXd& phi) {
    return Eigen::VectorXd(solve_tau(phi, N, counts).tau);
  };
  const double step = std::min(1e-5, 0.5 * std::min(state.phi.minCoeff(), 1.0 - state.phi.maxCoeff()));
  record("D_phi", scaled_error(tau_jacobian(tau, state.phi, N, counts).Dphi,
                               finite_diff(std::function<Eigen::VectorXd(const Eigen::VectorXd&)>(tau_of_phi),
                                           state.phi, step)));

  Params at = params;
  at.N = N;
  at.tau = tau;
  const double phi = average_phi(tau, state);
  const auto loglik_N = [&](const Eigen::VectorXd& v) {
    Params p = at;
    p.N = v[0];
    return log_likelihood(p, state, data);
  };
  const Eigen::VectorXd N_vec = Eigen::VectorXd::Constant(1, N);
  Eigen::VectorXd sN(1);
  sN[0] = score_N(N, data.total, phi);
  record("score_N", scaled_error(sN, finite_diff(std::function<double(const Eigen::VectorXd&)>(loglik_N),
                                                 N_vec, std::min(1e-4, 0.5 * (N - data.total)))));
  return out;
}

}  // namespace latcap
