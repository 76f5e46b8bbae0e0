// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
// The deer mouse checks read LATCAP_DEERMICE_CSV, or data/deermice.csv in the
// source tree: 38 units, columns h1..h6 then numeric sex, age, weight.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "latcap/config.hpp"
#include "latcap/data.hpp"
#include "latcap/estimate.hpp"
#include "latcap/inference.hpp"
#include "latcap/likelihood.hpp"
#include "latcap/model.hpp"
#include "latcap/sim.hpp"
#include "latcap/tau.hpp"

using namespace latcap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& name, const Outcome& o) {
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << number << ". " << name << ": " << o.detail
            << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

fs::path source_path(const std::string& rel) { return fs::path(LATCAP_SOURCE_DIR) / rel; }

std::optional<fs::path> deermice_path() {
  if (const char* env = std::getenv("LATCAP_DEERMICE_CSV"); env && *env) return fs::path(env);
  const fs::path bundled = source_path("data/deermice.csv");
  if (fs::exists(bundled)) return bundled;
  return std::nullopt;
}

const char* kNoData =
    "deer mouse data not found (set LATCAP_DEERMICE_CSV or add data/deermice.csv)";

Dataset load_deermice(const fs::path& path) {
  const CaptureTable t = parse_capture_csv(path.string(), 6);
  return stratify(t.records, 6, t.covariate_names);
}

Model load_model(const std::string& rel, const Dataset& data) {
  return Model(load_model_config(source_path(rel).string()), data.lists, data.covariate_names);
}

FitResult best_fit(const Dataset& data, const Model& model) {
  return fit_multistart(data, model, model.classes() > 1 ? 10 : 1).best;
}

Outcome deermice_estimate() {
  const auto path = deermice_path();
  if (!path) return {false, kNoData};
  const auto t0 = Clock::now();
  const Dataset data = load_deermice(*path);
  const Model model = load_model("data/deermice_mb.cfg", data);
  const FitResult f = best_fit(data, model);
  const ProfileCI ci = profile_ci_N(data, model, f, 0.95);
  const double elapsed = seconds_since(t0);
  const long N = std::lround(f.params.N);
  const bool pass = f.converged && data.total == 38 && N == 42 && std::abs(ci.lower - 38) <= 1 &&
                    std::abs(ci.upper - 60) <= 1 && !ci.unbounded_above && elapsed < 10;
  return {pass, "n " + std::to_string(data.total) + ", N " + fmt(f.params.N, 6) + " (rounded " +
                    std::to_string(N) + "), CI [" + fmt(ci.lower, 5) + ", " + fmt(ci.upper, 5) +
                    "], " + fmt(elapsed, 3) + " s; expected 42, [38, 60] +-1, < 10 s"};
}

Outcome deermice_lr() {
  const auto path = deermice_path();
  if (!path) return {false, kNoData};
  const Dataset data = load_deermice(*path);
  const FitResult with_sex = best_fit(data, load_model("data/deermice_sex.cfg", data));
  const FitResult without = best_fit(data, load_model("data/deermice_nosex.cfg", data));
  const double lr = 2 * (with_sex.loglik - without.loglik);
  const bool pass = with_sex.converged && without.converged && std::abs(lr - 7.8) <= 0.2;
  return {pass, "LR " + fmt(lr) + " on 1 dof; expected 7.8 +- 0.2"};
}

double sigmoid(double t) { return 1 / (1 + std::exp(-t)); }

Outcome deermice_classes() {
  const auto path = deermice_path();
  if (!path) return {false, kNoData};
  const Dataset data = load_deermice(*path);
  const Model model = load_model("data/deermice_mb.cfg", data);
  const FitResult f = best_fit(data, model);
  const Eigen::VectorXd lambda = model.lambda(f.params.beta);
  // (first capture, recapture) per class, ordered by first capture
  std::vector<std::pair<double, double>> cls{{sigmoid(lambda[0]), sigmoid(lambda[0] + lambda[2])},
                                             {sigmoid(lambda[1]), sigmoid(lambda[1] + lambda[2])}};
  std::sort(cls.begin(), cls.end());
  const bool pass = f.converged && std::abs(cls[0].first - 0.26) <= 0.03 &&
                    std::abs(cls[1].first - 0.74) <= 0.03 &&
                    std::abs(cls[0].second - 0.45) <= 0.03 &&
                    std::abs(cls[1].second - 0.86) <= 0.03;
  return {pass, "first capture (" + fmt(cls[0].first, 3) + ", " + fmt(cls[1].first, 3) +
                    "), recapture (" + fmt(cls[0].second, 3) + ", " + fmt(cls[1].second, 3) +
                    "); expected (0.26, 0.74), (0.45, 0.86) +- 0.03"};
}

Outcome boundary_scores() {
  double worst = 0;
  for (double phi : {1e-6, 0.01, 0.2, 0.5, 0.9, 0.999999}) {
    worst = std::max(worst, std::abs(score_N(1, 1, phi) - (1 + std::log(phi))));
    worst = std::max(worst, std::abs(score_N(2, 2, phi) - (1.5 + std::log(phi))));
  }
  return {worst <= 1e-10, "max deviation " + fmt(worst, 3) + " (tolerance 1e-10)"};
}

// Random parameter points around each small model's truth, each with its
// own simulated dataset.
struct Instance {
  Model model;
  Dataset data;
  Params params;
};

std::vector<Instance> random_instances(int per_model, std::uint64_t seed) {
  std::vector<Instance> out;
  SplitMix64 rng(seed);
  int draw = 0;
  for (const auto& text : testing::small_model_suite()) {
    const SimulationSpec spec = testing::sim_from(text);
    const Model model(spec.model, spec.lists, spec.covariate_names);
    for (int t = 0; t < per_model; ++t) {
      const Dataset data = testing::simulate(spec, model, 150, seed + static_cast<std::uint64_t>(++draw));
      Params p;
      p.beta = spec.beta + testing::random_vector(rng, spec.beta.size(), 0.5);
      p.N = data.total * (1.2 + rng.uniform());
      const ModelState st = model_state(model, data, p.beta, Derivatives::No);
      Eigen::VectorXd phi(data.size());
      for (int i = 0; i < data.size(); ++i) phi[i] = st.strata[i].phi;
      p.tau = solve_tau(phi, p.N, data.counts()).tau;
      out.push_back({model, data, p});
    }
  }
  return out;
}

Outcome derivatives() {
  const auto t0 = Clock::now();
  const auto instances = random_instances(3, 100);
  std::map<std::string, double> worst;
  bool pass = true;
  for (const auto& in : instances) {
    for (const auto& c : derivative_checks(in.data, in.model, in.params, 1e-6)) {
      worst[c.name] = std::max(worst[c.name], c.error);
      pass = pass && c.pass;
    }
  }
  const double elapsed = seconds_since(t0);
  pass = pass && instances.size() >= 20 && elapsed < 60;
  std::string detail = std::to_string(instances.size()) + " models, max error";
  for (const auto& [name, e] : worst) detail += " " + name + " " + fmt(e, 2);
  return {pass, detail + ", " + fmt(elapsed, 3) + " s (tolerance 1e-6, < 60 s)"};
}

Outcome tau_residuals() {
  SplitMix64 rng(7);
  double hyper = 0;
  double implicit = 0;
  int count = 0;
  for (bool ties : {false, true}) {
    for (int t = 0; t < 200; ++t) {
      const int s = 2 + static_cast<int>(rng.uniform() * 30);
      Eigen::VectorXd phi(s);
      Eigen::VectorXd counts(s);
      for (int i = 0; i < s; ++i) {
        phi[i] = 0.01 + 0.98 * rng.uniform();
        counts[i] = ties ? 1 + std::floor(rng.uniform() * 6) : 1;
      }
      const double N = counts.sum() * (1.0001 + 9 * rng.uniform());
      const TauSolution sol = solve_tau(phi, N, counts);
      hyper = std::max(hyper, hyperbola_residual(sol.tau, phi, N, counts));
      implicit = std::max(implicit, implicit_residual(sol.tau, phi, N, counts));
      ++count;
    }
  }
  return {hyper <= 1e-10 && implicit <= 1e-10,
          std::to_string(count) + " instances, max hyperbola residual " + fmt(hyper, 3) +
              ", max implicit residual " + fmt(implicit, 3) + " (tolerance 1e-10)"};
}

Outcome oracle() {
  const auto instances = random_instances(3, 300);
  double worst = 0;
  for (const auto& in : instances) {
    const ModelState st = model_state(in.model, in.data, in.params.beta, Derivatives::No);
    const double a = log_likelihood(in.params, st, in.data);
    const double b = enumerate_loglik(in.data, in.model, in.params);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  return {worst <= 1e-10, std::to_string(instances.size()) + " models, max relative difference " +
                              fmt(worst, 3) + " (tolerance 1e-10)"};
}

Outcome coverage() {
  const auto t0 = Clock::now();
  const SimulationSpec spec = load_simulation_spec(source_path("data/coverage_sim.cfg").string());
  const Model model(load_model_config(source_path("data/coverage_fit.cfg").string()), spec.lists,
                    spec.covariate_names);
  const int reps = 200;
  const double n_true = 300;
  int covered = 0;
  int usable = 0;
  for (int r = 0; r < reps; ++r) {
    const Dataset data = testing::simulate(spec, model, static_cast<int>(n_true), 1000 + r);
    const FitResult f = fit(data, model);
    if (!f.converged) continue;
    const ProfileCI ci = profile_ci_N(data, model, f, 0.95);
    ++usable;
    if (ci.lower <= n_true && n_true <= ci.upper) ++covered;
  }
  const double rate = static_cast<double>(covered) / reps;
  const double elapsed = seconds_since(t0);
  const bool pass = usable == reps && rate >= 0.90 && rate <= 0.99 && elapsed < 600;
  return {pass, std::to_string(covered) + " of " + std::to_string(reps) + " intervals cover N = 300 (" +
                    std::to_string(usable) + " fits converged), rate " + fmt(rate, 3) + ", " +
                    fmt(elapsed, 3) + " s; expected [0.90, 0.99], < 600 s"};
}

Outcome zero_mean_score() {
  // Two classes with a three-level latent covariate; all strata appear with
  // overwhelming probability at N = 400, so the true tau is the pool weights.
  const SimulationSpec spec = testing::sim_from(testing::small_model_suite()[2]);
  const Model model(spec.model, spec.lists, spec.covariate_names);
  const int reps = 500;
  const Eigen::Index d = spec.beta.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  const double weight_total = std::accumulate(spec.weights.begin(), spec.weights.end(), 0.0);
  for (int r = 0; r < reps; ++r) {
    const Dataset data = testing::simulate(spec, model, 400, 5000 + r);
    if (data.size() != static_cast<int>(spec.pool.size())) {
      return {false, "replicate " + std::to_string(r) + " is missing a stratum"};
    }
    Params p;
    p.N = 400;
    p.beta = spec.beta;
    p.tau.resize(data.size());
    for (int i = 0; i < data.size(); ++i) {
      const auto it = std::find(spec.pool.begin(), spec.pool.end(), data.strata[i].x);
      p.tau[i] = spec.weights[it - spec.pool.begin()] / weight_total;
    }
    const ModelState st = model_state(model, data, p.beta);
    const Eigen::VectorXd s = score_beta(p, st, data);
    sum += s;
    sum_sq += s.cwiseAbs2();
  }
  const Eigen::VectorXd mean = sum / reps;
  const Eigen::VectorXd var = (sum_sq / reps - mean.cwiseAbs2()) * reps / (reps - 1.0);
  const Eigen::VectorXd z = mean.array() / (var.array() / reps).sqrt();
  std::string detail = std::to_string(reps) + " datasets, z =";
  for (Eigen::Index t = 0; t < d; ++t) detail += " " + fmt(z[t], 3);
  return {z.cwiseAbs().maxCoeff() <= 3, detail + " (each |z| <= 3)"};
}

template <typename F>
void run(int number, const std::string& name, F&& check) {
  try {
    report(number, name, check());
  } catch (const std::exception& e) {
    report(number, name, {false, std::string("error: ") + e.what()});
  }
}

}  // namespace

int main() {
  run(1, "deer mouse N and profile CI", deermice_estimate);
  run(2, "deer mouse LR for sex", deermice_lr);
  run(3, "deer mouse class capture probabilities", deermice_classes);
  run(4, "boundary score identities", boundary_scores);
  run(5, "analytic derivatives", derivatives);
  run(6, "tau fixed point residuals", tau_residuals);
  run(7, "log-likelihood oracle", oracle);
  run(8, "profile CI coverage", coverage);
  run(9, "zero-mean score", zero_mean_score);
  std::cout << "NOTE  10. meningitis reproduction: not run, needs user-supplied data\n";
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
