#include "latcap/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "latcap/tau.hpp"

namespace latcap {

namespace {

constexpr int kMaxHalvings = 20;
constexpr double kRatioFloor = 1e-10;
constexpr double kDivergentParam = 15.0;

double loglik_at(const Model& model, const Dataset& data, const Params& params) {
  try {
    const ModelState st = model_state(model, data, params.beta, Derivatives::No);
    return log_likelihood(params, st, data);
  } catch (const NumericError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

bool tau_on_floor(const Params& params, const Dataset& data) {
  for (int i = 0; i < data.size(); ++i) {
    if (params.tau[i] <= data.strata[i].n / params.N * (1.0 + 1e-12) && params.N > data.total) {
      return true;
    }
  }
  return false;
}

void finish(FitResult& res, const Model& model, const Dataset& data) {
  res.state = model_state(model, data, res.params.beta);
  res.loglik = log_likelihood(res.params, res.state, data);
  res.N_at_boundary = res.params.N <= data.total;
  res.tau_at_floor = tau_on_floor(res.params, data);
  if (res.N_at_boundary) res.warnings.push_back("N estimate sits at the number captured");
  if (res.tau_at_floor) res.warnings.push_back("a stratum weight sits at its floor n_i / N");
  const auto names = model.parameter_names();
  for (Eigen::Index j = 0; j < res.params.beta.size(); ++j) {
    if (std::abs(res.params.beta[j]) > kDivergentParam) {
      res.warnings.push_back(names[j] + " = " + std::to_string(res.params.beta[j]) +
                             " is far out on the logit scale; the likelihood may peak at infinity");
    }
  }
}

bool well_conditioned(const Eigen::MatrixXd& m, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(m);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
  const double lo = diag.minCoeff();
  const double hi = diag.maxCoeff();
  return lo > 0 && lo * lo > kRatioFloor * hi * hi;
}

// Solves metric * d = score, falling back through the candidates in order and
// finally to a ridge on the last one.
Eigen::VectorXd solve_direction(const std::vector<Eigen::MatrixXd>& metrics,
                                const Eigen::VectorXd& score, bool* ridge) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (const auto& m : metrics) {
    if (well_conditioned(m, llt)) {
      Eigen::VectorXd d = llt.solve(score);
      if (d.allFinite()) return d;
    }
  }
  const Eigen::MatrixXd& last = metrics.back();
  Eigen::MatrixXd ridged = last;
  ridged.diagonal().array() += 1e-8 * std::max(last.trace(), 1e-300) / last.rows();
  Eigen::VectorXd d = ridged.ldlt().solve(score);
  *ridge = true;
  if (!d.allFinite()) throw StepFailure("information matrix is singular even with ridge");
  return d;
}

void cap_step(Eigen::VectorXd& direction, double max_step) {
  const double big = direction.lpNorm<Eigen::Infinity>();
  if (big > max_step) direction *= max_step / big;
}

struct Completed {
  Params params;
  double loglik = -std::numeric_limits<double>::infinity();
};

// Line search along direction where every trial beta is completed by
// maximizing over the remaining blocks.
bool search(const Model& model, const Dataset& data, const Eigen::VectorXd& beta,
            const Eigen::VectorXd& direction, double current,
            const std::function<Params(const ModelState&)>& complete, Completed& out) {
  double alpha = 1.0;
  for (int halving = 0; halving <= kMaxHalvings; ++halving, alpha *= 0.5) {
    Params trial;
    double ll = -std::numeric_limits<double>::infinity();
    try {
      const Eigen::VectorXd b = beta + alpha * direction;
      const ModelState st = model_state(model, data, b, Derivatives::No);
      trial = complete(st);
      trial.beta = b;
      ll = log_likelihood(trial, st, data);
    } catch (const Error&) {
      continue;
    }
    if (ll >= current) {
      out.params = trial;
      out.loglik = ll;
      return true;
    }
  }
  return false;
}

// Negative Hessian of the concentrated log-likelihood by central differences
// of its gradient, which is score_beta at the completed (N, tau). Empty when
// a perturbed point cannot be completed.
Eigen::MatrixXd concentrated_info(const Model& model, const Dataset& data, const Eigen::VectorXd& beta,
                                  const std::function<Params(const ModelState&)>& complete,
                                  double step = 1e-5) {
  const Eigen::Index d = beta.size();
  Eigen::MatrixXd h(d, d);
  auto gradient = [&](const Eigen::VectorXd& b) {
    const ModelState st = model_state(model, data, b);
    Params p = complete(st);
    p.beta = b;
    return score_beta(p, st, data);
  };
  try {
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd up = beta;
      Eigen::VectorXd down = beta;
      up[j] += step;
      down[j] -= step;
      h.col(j) = (gradient(down) - gradient(up)) / (2 * step);
    }
  } catch (const Error&) {
    return {};
  }
  if (!h.allFinite()) return {};
  return 0.5 * (h + h.transpose());
}

// Shared loop of the profiled scheme. complete() fills (N, tau) for a state;
// correct_N adds the curvature lost by profiling N. The observed curvature of
// the concentrated likelihood is tried first: Fisher scoring alone converges
// linearly on latent-class ridges, where the two informations differ.
FitResult profiled_loop(const Dataset& data, const Model& model, Params start,
                        const FitOptions& options,
                        const std::function<Params(const ModelState&)>& complete, bool correct_N) {
  FitResult res;
  ModelState state = model_state(model, data, start.beta);
  {
    Params filled = complete(state);
    filled.beta = start.beta;
    res.params = filled;
  }
  double ll = log_likelihood(res.params, state, data);
  if (!std::isfinite(ll)) {
    res.reason = "log-likelihood is not finite at the starting point";
    finish(res, model, data);
    return res;
  }
  const int n = data.total;
  bool ridge_noted = false;

  for (int u = 1; u <= options.max_outer; ++u) {
    const Params before = res.params;
    const double ll_before = ll;
    TraceEntry entry;
    entry.iteration = u;

    if (model.beta_dim() > 0) {
      Eigen::VectorXd score;
      try {
        score = score_beta(res.params, state, data);
      } catch (const BoundaryError& err) {
        res.reason = std::string("boundary reached: ") + err.what();
        break;
      }
      entry.score_norm = score.lpNorm<Eigen::Infinity>();

      const double N = res.params.N;
      const Eigen::MatrixXd profiled = N * profile_info_beta(res.params, state, data);
      std::vector<Eigen::MatrixXd> metrics;
      if (options.observed_curvature) {
        Eigen::MatrixXd observed = concentrated_info(model, data, res.params.beta, complete);
        if (observed.size() > 0) metrics.push_back(std::move(observed));
      }
      if (correct_N && N > n) {
        const double phi = average_phi(res.params.tau, state);
        const Eigen::VectorXd cross = state.Phi.transpose() * res.params.tau / phi;
        metrics.push_back(profiled - cross * cross.transpose() / obs_info_N(N, n));
      }
      metrics.push_back(profiled);
      metrics.push_back(expected_info_beta(res.params, state));

      bool ridge = false;
      Eigen::VectorXd direction;
      try {
        direction = solve_direction(metrics, score, &ridge);
      } catch (const StepFailure& err) {
        res.reason = std::string("beta step failed: ") + err.what();
        break;
      }
      if (ridge && !ridge_noted) {
        res.warnings.push_back("ridge fallback used for a singular information matrix");
        ridge_noted = true;
      }
      cap_step(direction, options.max_step);

      Completed next;
      if (search(model, data, res.params.beta, direction, ll, complete, next)) {
        res.params = next.params;
        ll = next.loglik;
        state = model_state(model, data, res.params.beta);
      } else if (0.5 * score.dot(direction) > 1e-11 * (1.0 + std::abs(ll))) {
        res.reason = "beta step failed: no step length in [2^-20, 1] keeps the log-likelihood "
                     "from decreasing";
        break;
      }
    }

    entry.loglik = ll;
    entry.N = res.params.N;
    res.trace.push_back(entry);
    res.iterations = u;

    const double change =
        std::max({(res.params.beta - before.beta).lpNorm<Eigen::Infinity>(),
                  std::abs(res.params.N - before.N),
                  (res.params.tau - before.tau).lpNorm<Eigen::Infinity>()});
    if (std::abs(ll - ll_before) <= options.tol_loglik && change <= options.tol_param) {
      res.converged = true;
      res.reason = "converged";
      break;
    }
  }
  if (!res.converged && res.reason.empty()) {
    res.reason = "maximum of " + std::to_string(options.max_outer) + " iterations reached";
  }
  finish(res, model, data);
  return res;
}

FitResult blockwise_fit(const Dataset& data, const Model& model, const FitOptions& options) {
  FitResult res;
  res.params = options.inits ? *options.inits : initialize(data, model, options.seed, options.init_jitter);
  const Eigen::VectorXd counts = data.counts();
  const int n = data.total;
  if (res.params.N < n) res.params.N = n;

  ModelState state = model_state(model, data, res.params.beta);
  double ll = log_likelihood(res.params, state, data);
  if (!std::isfinite(ll)) {
    res.reason = "log-likelihood is not finite at the starting point";
    finish(res, model, data);
    return res;
  }

  bool ridge_noted = false;
  for (int u = 1; u <= options.max_outer; ++u) {
    const Params before = res.params;
    const double ll_before = ll;
    TraceEntry entry;
    entry.iteration = u;

    // beta block
    BetaStep step;
    try {
      entry.score_norm = score_beta(res.params, state, data).lpNorm<Eigen::Infinity>();
      step = fisher_step_beta(model, data, res.params, state, options.max_step);
    } catch (const StepFailure& err) {
      res.reason = std::string("beta step failed: ") + err.what();
      break;
    } catch (const BoundaryError& err) {
      res.reason = std::string("boundary reached: ") + err.what();
      break;
    }
    if (step.ridge && !ridge_noted) {
      res.warnings.push_back("ridge fallback used for a singular information matrix");
      ridge_noted = true;
    }
    res.params.beta = step.beta;
    state = model_state(model, data, res.params.beta);

    // tau block
    res.params.tau = solve_tau(state.phi, res.params.N, counts).tau;

    // N block, halved until the log-likelihood does not decrease
    const double ll_tau = log_likelihood(res.params, state, data);
    const double N_old = res.params.N;
    const double N_new = newton_step_N(res.params, data, state, u, options.first_step);
    double delta = N_new - N_old;
    for (int halving = 0; halving <= kMaxHalvings; ++halving, delta *= 0.5) {
      res.params.N = std::max(static_cast<double>(n), N_old + delta);
      if (log_likelihood(res.params, state, data) >= ll_tau) break;
      res.params.N = N_old;
    }

    ll = log_likelihood(res.params, state, data);
    entry.loglik = ll;
    entry.N = res.params.N;
    res.trace.push_back(entry);
    res.iterations = u;

    const double change =
        std::max({(res.params.beta - before.beta).lpNorm<Eigen::Infinity>(),
                  std::abs(res.params.N - before.N),
                  (res.params.tau - before.tau).lpNorm<Eigen::Infinity>()});
    if (std::abs(ll - ll_before) <= options.tol_loglik && change <= options.tol_param) {
      res.converged = true;
      res.reason = "converged";
      break;
    }
  }
  if (!res.converged && res.reason.empty()) {
    res.reason = "maximum of " + std::to_string(options.max_outer) + " outer iterations reached";
  }
  finish(res, model, data);
  return res;
}

}  // namespace

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd profile_info_beta(const Params& params, const ModelState& state,
                                  const Dataset& data) {
  const Eigen::Index dim = state.Phi.cols();
  const Eigen::VectorXd counts = data.counts();
  const Eigen::VectorXd& tau = params.tau;
  const double phi = average_phi(tau, state);

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < state.size(); ++i) {
    const auto& ms = state.strata[i];
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ms.p.size());
    for (Eigen::Index h = 0; h < ms.p.size(); ++h) {
      if (ms.p[h] > 0) inv[h] = 1.0 / ms.p[h];
    }
    info.noalias() += tau[i] * ms.D.transpose() * inv.asDiagonal() * ms.D;
  }
  const TauJacobian jac = tau_jacobian(tau, state.phi, params.N, counts);
  Eigen::MatrixXd middle = (tau * state.phi.transpose() / phi) * jac.Dphi - jac.Dphi;
  middle += tau * tau.transpose() / phi;
  info += state.Phi.transpose() * middle * state.Phi;
  return 0.5 * (info + info.transpose());
}

Params profile_N_tau(const Dataset& data, const ModelState& state) {
  const Eigen::VectorXd counts = data.counts();
  const double n = data.total;
  Params out;
  auto tau_at = [&](double N) { return solve_tau(state.phi, N, counts).tau; };
  auto score_at = [&](double N) { return score_N(N, data.total, average_phi(tau_at(N), state)); };

  if (score_at(n) <= 0) {
    out.N = n;
    out.tau = counts / n;
    return out;
  }
  double lo = n;
  double hi = std::max(n + 1.0, 2.0 * n / std::max(1.0 - average_phi(counts / n, state), 1e-12));
  while (score_at(hi) > 0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) throw BoundaryError("profile score in N stays positive; N is unbounded");
  }
  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      score_at, lo, hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  out.N = 0.5 * (bracket.first + bracket.second);
  out.tau = tau_at(out.N);
  return out;
}

BetaStep fisher_step_beta(const Model& model, const Dataset& data, const Params& params,
                          const ModelState& state, double max_step) {
  const double current = log_likelihood(params, state, data);
  BetaStep out{params.beta, current, 0.0, false};
  if (model.beta_dim() == 0) return out;

  const Eigen::VectorXd score = score_beta(params, state, data);
  const Eigen::MatrixXd info = expected_info_beta(params, state);
  Eigen::VectorXd direction = solve_direction({info}, score, &out.ridge);
  cap_step(direction, max_step);

  Params trial = params;
  double alpha = 1.0;
  for (int halving = 0; halving <= kMaxHalvings; ++halving, alpha *= 0.5) {
    trial.beta = params.beta + alpha * direction;
    const double ll = loglik_at(model, data, trial);
    if (ll >= current) {
      out.beta = trial.beta;
      out.loglik = ll;
      out.step = alpha;
      return out;
    }
  }
  // Near a stationary point the predicted gain s'F^{-1}s / 2 drops below the
  // rounding error of the log-likelihood and no step can register.
  if (0.5 * score.dot(direction) <= 1e-11 * (1.0 + std::abs(current))) return out;
  throw StepFailure("no step length in [2^-20, 1] keeps the log-likelihood from decreasing");
}

double newton_step_N(const Params& params, const Dataset& data, const ModelState& state,
                     int iteration, double first_step) {
  const int n = data.total;
  const double a = 1.0 - first_step / std::max(iteration, 1);
  const double phi = average_phi(params.tau, state);
  const double s = score_N(params.N, n, phi);
  const double f = obs_info_N(params.N, n);
  return std::max(static_cast<double>(n), params.N + a * s / f);
}

Params initialize(const Dataset& data, const Model& model, std::uint64_t seed, double jitter) {
  Params p;
  p.tau = data.counts() / data.total;
  p.beta.resize(model.beta_dim());
  SplitMix64 rng(seed);
  for (Eigen::Index t = 0; t < p.beta.size(); ++t) p.beta[t] = jitter * (2.0 * rng.uniform() - 1.0);
  const ModelState st = model_state(model, data, p.beta, Derivatives::No);
  const double phi = average_phi(p.tau, st);
  p.N = std::max(data.total / (1.0 - phi), data.total + 1.0);
  return p;
}

FitResult fit(const Dataset& data, const Model& model, const FitOptions& options) {
  if (options.scheme == Scheme::Blockwise) return blockwise_fit(data, model, options);
  const Params start =
      options.inits ? *options.inits : initialize(data, model, options.seed, options.init_jitter);
  return profiled_loop(
      data, model, start, options,
      [&](const ModelState& st) { return profile_N_tau(data, st); }, true);
}

FitResult fit_fixed_N(const Dataset& data, const Model& model, double N,
                      const Eigen::VectorXd& beta_start, const FitOptions& options) {
  const Eigen::VectorXd counts = data.counts();
  if (options.scheme == Scheme::Profiled) {
    Params start;
    start.N = N;
    start.beta = beta_start;
    return profiled_loop(
        data, model, start, options,
        [&](const ModelState& st) {
          Params p;
          p.N = N;
          p.tau = solve_tau(st.phi, N, counts).tau;
          return p;
        },
        false);
  }

  FitResult res;
  res.params.N = N;
  res.params.beta = beta_start;
  ModelState state = model_state(model, data, res.params.beta);
  res.params.tau = solve_tau(state.phi, N, counts).tau;
  double ll = log_likelihood(res.params, state, data);

  for (int u = 1; u <= options.max_outer; ++u) {
    const Params before = res.params;
    const double ll_before = ll;
    TraceEntry entry;
    entry.iteration = u;
    BetaStep step;
    try {
      entry.score_norm = score_beta(res.params, state, data).lpNorm<Eigen::Infinity>();
      step = fisher_step_beta(model, data, res.params, state, options.max_step);
    } catch (const StepFailure& err) {
      res.reason = std::string("beta step failed: ") + err.what();
      break;
    } catch (const BoundaryError& err) {
      res.reason = std::string("boundary reached: ") + err.what();
      break;
    }
    res.params.beta = step.beta;
    state = model_state(model, data, res.params.beta);
    res.params.tau = solve_tau(state.phi, N, counts).tau;
    ll = log_likelihood(res.params, state, data);
    entry.loglik = ll;
    entry.N = N;
    res.trace.push_back(entry);
    res.iterations = u;
    const double change = std::max((res.params.beta - before.beta).lpNorm<Eigen::Infinity>(),
                                   (res.params.tau - before.tau).lpNorm<Eigen::Infinity>());
    if (std::abs(ll - ll_before) <= options.tol_loglik && change <= options.tol_param) {
      res.converged = true;
      res.reason = "converged";
      break;
    }
  }
  if (!res.converged && res.reason.empty()) {
    res.reason = "maximum of " + std::to_string(options.max_outer) + " iterations reached";
  }
  finish(res, model, data);
  return res;
}

MultiStartFit fit_multistart(const Dataset& data, const Model& model, int starts,
                             const FitOptions& options) {
  MultiStartFit out;
  bool have_best = false;
  for (int t = 0; t < std::max(starts, 1); ++t) {
    FitOptions opt = options;
    opt.seed = options.seed + static_cast<std::uint64_t>(t);
    if (t > 0) opt.inits.reset();
    out.seeds.push_back(opt.seed);
    try {
      FitResult r = fit(data, model, opt);
      out.logliks.push_back(r.loglik);
      out.converged.push_back(r.converged);
      const bool better = !have_best || (r.converged && !out.best.converged) ||
                          (r.converged == out.best.converged && r.loglik > out.best.loglik);
      if (better) {
        out.best = std::move(r);
        have_best = true;
      }
    } catch (const Error&) {
      out.logliks.push_back(-std::numeric_limits<double>::infinity());
      out.converged.push_back(false);
    }
  }
  if (!have_best) throw Error("every start failed");
  return out;
}

}  // namespace latcap
