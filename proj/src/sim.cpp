#include "latcap/sim.hpp"

#include <algorithm>
#include <cmath>

#include "latcap/error.hpp"
#include "latcap/estimate.hpp"

namespace latcap {

namespace {

int draw_categorical(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    acc += weights[t];
    if (u < acc) return static_cast<int>(t);
  }
  return static_cast<int>(weights.size()) - 1;
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

int covariate_column(const Model& model, const std::string& name) {
  const auto& names = model.covariate_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DomainError("unknown covariate '" + name + "'");
  return static_cast<int>(it - names.begin());
}

// delta for class c read straight off the spec's linear forms.
std::vector<double> oracle_delta(const Model& model, int c, const std::vector<double>& x,
                                 const Eigen::VectorXd& lambda) {
  const auto& spec = model.spec();
  std::vector<double> delta(model.delta_dim(), 0.0);
  if (spec.restriction.empty()) {
    for (int r = 0; r < model.delta_dim(); ++r) delta[r] = lambda[c * model.delta_dim() + r];
    return delta;
  }
  for (int r = 0; r < model.delta_dim(); ++r) {
    for (const auto& term : spec.restriction[c][r]) {
      const double coef =
          term.covariate.empty() ? 1.0 : x[covariate_column(model, term.covariate)];
      delta[r] += term.scale * coef * lambda[term.lambda];
    }
  }
  return delta;
}

std::vector<double> oracle_xi(const Model& model, const std::vector<double>& x,
                              const Eigen::VectorXd& zeta) {
  const auto& spec = model.spec();
  const int classes = spec.classes;
  const int width = 1 + static_cast<int>(spec.latent_covariates.size());
  std::vector<double> eta(classes, 0.0);
  for (int c = 1; c < classes; ++c) {
    const int offset = (c - 1) * width;
    eta[c] = zeta[offset];
    for (std::size_t m = 0; m < spec.latent_covariates.size(); ++m) {
      eta[c] += zeta[offset + 1 + static_cast<int>(m)] *
                x[covariate_column(model, spec.latent_covariates[m])];
    }
  }
  const double top = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  for (double& e : eta) total += (e = std::exp(e - top));
  for (double& e : eta) e /= total;
  return eta;
}

// Probability of configuration r within one class.
double oracle_q(const Model& model, const std::vector<double>& delta, int r) {
  const int lists = model.lists();
  std::vector<int> bits(lists);
  for (int j = 0; j < lists; ++j) bits[j] = (r >> (lists - 1 - j)) & 1;
  if (model.family() == Family::Recursive) {
    double q = 1.0;
    for (int j = 0; j < lists; ++j) {
      const int v = model.partition().classify(std::span<const int>(bits.data(), j));
      const double pr = logistic(delta[v - 1]);
      q *= bits[j] ? pr : 1.0 - pr;
    }
    return q;
  }
  const auto& pairs = model.spec().interactions;
  auto log_weight = [&](int cfg) {
    double w = 0.0;
    for (int j = 0; j < lists; ++j) w += ((cfg >> (lists - 1 - j)) & 1) * delta[j];
    for (std::size_t t = 0; t < pairs.size(); ++t) {
      const int a = (cfg >> (lists - 1 - pairs[t].first)) & 1;
      const int b = (cfg >> (lists - 1 - pairs[t].second)) & 1;
      w += a * b * delta[lists + t];
    }
    return w;
  };
  double norm = 0.0;
  for (int cfg = 0; cfg < (1 << lists); ++cfg) norm += std::exp(log_weight(cfg));
  return std::exp(log_weight(r)) / norm;
}

}  // namespace

Dataset generate(const SimConfig& config, const Model& model) {
  if (config.pool.empty() || config.pool.size() != config.weights.size()) {
    throw DimensionError("covariate pool and weights must be non-empty and of equal length");
  }
  if (config.n_true < 1) throw DomainError("n_true must be at least 1");
  const int lists = model.lists();
  const Eigen::VectorXd lambda = model.lambda(config.beta);

  struct PoolEntry {
    std::vector<double> xi;
    std::vector<Eigen::VectorXd> delta;
    std::vector<Eigen::VectorXd> qtilde;
  };
  std::vector<PoolEntry> entries;
  for (const auto& x : config.pool) {
    PoolEntry e;
    const Eigen::VectorXd xi = latent_weights(model.latent_design(x), model.zeta(config.beta));
    e.xi.assign(xi.data(), xi.data() + xi.size());
    for (int c = 0; c < model.classes(); ++c) {
      e.delta.push_back(model.restriction(c, x) * lambda);
      if (model.family() == Family::LogLinear) {
        e.qtilde.push_back(model.conditional_probs(e.delta.back()));
      }
    }
    entries.push_back(std::move(e));
  }

  std::vector<CaptureRecord> records;
  std::vector<int> bits(lists);
  for (int u = 0; u < config.n_true; ++u) {
    SplitMix64 rng(config.seed ^ (static_cast<std::uint64_t>(u + 1) * 0x9e3779b97f4a7c15ULL));
    const int which = draw_categorical(config.weights, rng.uniform());
    const auto& entry = entries[which];
    const int c = draw_categorical(entry.xi, rng.uniform());
    if (model.family() == Family::Recursive) {
      for (int j = 0; j < lists; ++j) {
        const int v = model.partition().classify(std::span<const int>(bits.data(), j));
        const double pr = logistic(entry.delta[c][v - 1]);
        bits[j] = rng.uniform() < pr ? 1 : 0;
      }
    } else {
      const auto& q = entry.qtilde[c];
      std::vector<double> w(q.data(), q.data() + q.size());
      const int r = draw_categorical(w, rng.uniform());
      for (int j = 0; j < lists; ++j) bits[j] = (r >> (lists - 1 - j)) & 1;
    }
    if (std::find(bits.begin(), bits.end(), 1) == bits.end()) continue;
    records.push_back({bits, config.pool[which]});
  }
  if (records.empty()) throw Error("no observable units: every simulated unit escaped capture");
  return stratify(records, lists, config.covariate_names);
}

double enumerate_loglik(const Dataset& data, const Model& model, const Params& params) {
  if (data.lists > 6 || data.size() > 20) {
    throw DomainError("enumeration oracle is limited to J <= 6 and s <= 20");
  }
  const int k = 1 << data.lists;
  const Eigen::VectorXd zeta = model.zeta(params.beta);
  const Eigen::VectorXd lambda = model.lambda(params.beta);
  const double N = params.N;
  const int n = data.total;

  std::vector<double> phi_i(data.size());
  std::vector<std::vector<double>> p(data.size(), std::vector<double>(k, 0.0));
  for (int i = 0; i < data.size(); ++i) {
    const auto& x = data.strata[i].x;
    const auto xi = oracle_xi(model, x, zeta);
    for (int c = 0; c < model.classes(); ++c) {
      const auto delta = oracle_delta(model, c, x, lambda);
      for (int r = 0; r < k; ++r) p[i][r] += xi[c] * oracle_q(model, delta, r);
    }
    phi_i[i] = p[i][0];
  }
  double phi = 0.0;
  for (int i = 0; i < data.size(); ++i) phi += params.tau[i] * phi_i[i];

  // n of N captured, stratum unknown.
  double binomial = std::lgamma(N + 1.0) - std::lgamma(N - n + 1.0) + n * std::log(1.0 - phi);
  if (N > n) binomial += (N - n) * std::log(phi);
  // Configurations given stratum and capture.
  double conditional = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    for (int r = 1; r < k; ++r) {
      const int y = data.strata[i].y[r - 1];
      if (y > 0) conditional += y * std::log(p[i][r] / (1.0 - phi_i[i]));
    }
  }
  // Stratum membership given capture.
  double membership = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    membership += data.strata[i].n * std::log(params.tau[i] * (1.0 - phi_i[i]) / (1.0 - phi));
  }
  return binomial + conditional + membership;
}

Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    probe[t] = x[t] + step;
    const double up = f(probe);
    probe[t] = x[t] - step;
    const double down = f(probe);
    probe[t] = x[t];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("non-finite function value in finite differences");
    }
    grad[t] = (up - down) / (2.0 * step);
  }
  return grad;
}

Eigen::MatrixXd finite_diff(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd probe = x;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    probe[t] = x[t] + step;
    const Eigen::VectorXd up = f(probe);
    probe[t] = x[t] - step;
    const Eigen::VectorXd down = f(probe);
    probe[t] = x[t];
    if (!up.allFinite() || !down.allFinite()) {
      throw NumericError("non-finite function value in finite differences");
    }
    if (t == 0) jac.resize(up.size(), x.size());
    jac.col(t) = (up - down) / (2.0 * step);
  }
  return jac;
}

}  // namespace latcap
