#include "latcap/cli.hpp"

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "latcap/config.hpp"
#include "latcap/data.hpp"
#include "latcap/estimate.hpp"
#include "latcap/inference.hpp"
#include "latcap/report.hpp"
#include "latcap/sim.hpp"

namespace latcap {

namespace {

struct Loaded {
  Dataset data;
  std::optional<Model> model;
};

Loaded load(const std::string& data_path, int lists, const std::string& model_path) {
  const CaptureTable table = parse_capture_csv(data_path, lists);
  Loaded out;
  out.data = stratify(table.records, lists, table.covariate_names);
  try {
    out.model.emplace(load_model_config(model_path), lists, out.data.covariate_names);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& err) {
    throw Error(model_path + ": " + err.what());
  }
  return out;
}

Scheme parse_scheme(const std::string& name) {
  return name == "blockwise" ? Scheme::Blockwise : Scheme::Profiled;
}

// Writes text to path, or to out when path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path);
  if (!file) throw Error("cannot write '" + path + "'");
  file << text;
}

struct FitArgs {
  std::string data;
  int lists = 0;
  std::string model;
  double ci_level = 0.95;
  std::uint64_t seed = 1;
  int starts = 0;  // 0: 1 for one class, 5 otherwise
  std::string out;
  std::string format = "text";
  std::string compare;
  std::string scheme = "profiled";
  bool no_ci = false;
  int id_points = 20;
  double id_radius = 0.1;
  int max_iter = 500;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  Loaded in = load(a.data, a.lists, a.model);
  const Model& model = *in.model;

  FitOptions options;
  options.seed = a.seed;
  options.scheme = parse_scheme(a.scheme);
  options.max_outer = a.max_iter;
  const int starts = a.starts > 0 ? a.starts : (model.classes() > 1 ? 5 : 1);
  const MultiStartFit fits = fit_multistart(in.data, model, starts, options);
  const FitResult& best = fits.best;

  std::optional<InfoMatrices> info;
  std::optional<ProfileCI> ci;
  std::optional<IdentifiabilityReport> id;
  std::vector<std::string> extra;
  try {
    info = profile_expected_info(best, in.data);
  } catch (const Error& e) {
    extra.push_back(std::string("information matrix unavailable: ") + e.what());
  }
  ProfileOptions profile;
  if (!a.no_ci && best.converged) {
    try {
      ci = profile_ci_N(in.data, model, best, a.ci_level, profile);
    } catch (const Error& e) {
      extra.push_back(std::string("profile interval failed: ") + e.what());
    }
  }
  if (a.id_points > 0) {
    id = identifiability_check(best, model, in.data, a.id_points, a.id_radius, a.seed);
  }

  ReportInputs ri;
  ri.data_path = a.data;
  ri.model_path = a.model;
  ri.data = &in.data;
  ri.model = &model;
  ri.fit = &fits;
  ri.info = info ? &*info : nullptr;
  ri.interval = ci ? &*ci : nullptr;
  ri.identifiability = id ? &*id : nullptr;
  ri.options = options;
  ri.starts = starts;
  ri.ci_tol = profile.tol;
  Report report = build_report(ri);
  report.warnings.insert(report.warnings.end(), extra.begin(), extra.end());

  if (!a.compare.empty()) {
    Model other_model = [&] {
      try {
        return Model(load_model_config(a.compare), a.lists, in.data.covariate_names);
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw Error(a.compare + ": " + e.what());
      }
    }();
    const int other_starts = a.starts > 0 ? a.starts : (other_model.classes() > 1 ? 5 : 1);
    const MultiStartFit other = fit_multistart(in.data, other_model, other_starts, options);
    add_comparison(report, a.compare, best, model, other.best, other_model);
  }

  std::ostringstream text;
  if (a.format == "json") {
    text << to_json(report) << "\n";
  } else {
    write_text(text, report);
  }
  emit(a.out, text.str(), out);
  if (!best.converged) {
    err << "latcap: fit did not converge: " << best.reason << "\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string spec;
  int n_true = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const SimulationSpec spec = load_simulation_spec(a.spec);
  const Model model(spec.model, spec.lists, spec.covariate_names);
  SimConfig config;
  config.n_true = a.n_true;
  config.beta = spec.beta;
  config.pool = spec.pool;
  config.weights = spec.weights;
  config.covariate_names = spec.covariate_names;
  config.seed = a.seed;
  const Dataset data = generate(config, model);
  std::ostringstream csv;
  write_capture_csv(csv, data);
  emit(a.out, csv.str(), out);
  return kExitOk;
}

struct CheckArgs {
  std::string data;
  int lists = 0;
  std::string model;
  std::uint64_t seed = 1;
  int starts = 0;
  int points = 50;
  double radius = 0.1;
  double tolerance = 1e-6;
};

int cmd_check(const CheckArgs& a, std::ostream& out) {
  Loaded in = load(a.data, a.lists, a.model);
  const Model& model = *in.model;
  FitOptions options;
  options.seed = a.seed;
  const int starts = a.starts > 0 ? a.starts : (model.classes() > 1 ? 5 : 1);
  const MultiStartFit fits = fit_multistart(in.data, model, starts, options);
  const FitResult& best = fits.best;

  bool all_pass = true;
  out << std::left << std::setw(24) << "check" << std::setw(8) << "status"
      << "detail\n";
  auto row = [&](const std::string& name, bool pass, const std::string& detail) {
    all_pass = all_pass && pass;
    out << std::left << std::setw(24) << name << std::setw(8) << (pass ? "PASS" : "FAIL") << detail
        << "\n";
  };

  std::ostringstream fit_detail;
  fit_detail << "N = " << std::setprecision(8) << best.params.N << ", loglik "
             << std::setprecision(10) << best.loglik << ", " << best.reason;
  row("fit converged", best.converged, fit_detail.str());

  const IdentifiabilityReport id =
      identifiability_check(best, model, in.data, a.points, a.radius, a.seed);
  double worst = 1.0;
  for (std::size_t t = 0; t < id.min_eigen.size(); ++t) {
    worst = std::min(worst, id.max_eigen[t] > 0 ? id.min_eigen[t] / id.max_eigen[t] : 0.0);
  }
  std::ostringstream id_detail;
  id_detail << id.flagged_count() << " of " << id.points << " points flagged within radius "
            << a.radius << ", min eigenvalue ratio " << std::setprecision(3) << worst;
  row("identifiability", id.ok(), id_detail.str());

  try {
    for (const auto& c : derivative_checks(in.data, model, best.params, a.tolerance)) {
      std::ostringstream d;
      d << "max scaled error " << std::scientific << std::setprecision(2) << c.error
        << " (tolerance " << c.tolerance << ")";
      row("derivative " + c.name, c.pass, d.str());
    }
  } catch (const Error& e) {
    row("derivative checks", false, e.what());
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Population size from multi-list capture-recapture data with latent classes"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and report N with its profile interval");
  fit_cmd->add_option("--data", fa.data, "capture CSV")->required();
  fit_cmd->add_option("--lists", fa.lists, "number of lists J")->required()->check(CLI::Range(2, kMaxLists));
  fit_cmd->add_option("--model", fa.model, "model config")->required();
  fit_cmd->add_option("--ci-level", fa.ci_level, "profile interval level")->check(CLI::Range(0.0, 1.0));
  fit_cmd->add_option("--seed", fa.seed, "seed of the first start");
  fit_cmd->add_option("--starts", fa.starts, "number of starts (default 1, or 5 with latent classes)");
  fit_cmd->add_option("--out", fa.out, "report path (default stdout)");
  fit_cmd->add_option("--format", fa.format, "report format")->check(CLI::IsMember({"text", "json"}));
  fit_cmd->add_option("--compare", fa.compare, "second model config for a likelihood-ratio comparison");
  fit_cmd->add_option("--scheme", fa.scheme, "optimization scheme")
      ->check(CLI::IsMember({"profiled", "blockwise"}));
  fit_cmd->add_flag("--no-ci", fa.no_ci, "skip the profile interval");
  fit_cmd->add_option("--id-points", fa.id_points, "identifiability sample size (0 skips)");
  fit_cmd->add_option("--id-radius", fa.id_radius, "identifiability ball radius");
  fit_cmd->add_option("--max-iter", fa.max_iter, "iteration cap per start")->check(CLI::PositiveNumber);

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a capture CSV from a simulation spec");
  sim_cmd->add_option("--spec", sa.spec, "simulation spec")->required();
  sim_cmd->add_option("--n-true", sa.n_true, "population size")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sa.seed, "seed");
  sim_cmd->add_option("--out", sa.out, "CSV path (default stdout)");

  CheckArgs ca;
  auto* check_cmd = app.add_subcommand("check", "identifiability and derivative self-tests");
  check_cmd->add_option("--data", ca.data, "capture CSV")->required();
  check_cmd->add_option("--lists", ca.lists, "number of lists J")->required()->check(CLI::Range(2, kMaxLists));
  check_cmd->add_option("--model", ca.model, "model config")->required();
  check_cmd->add_option("--seed", ca.seed, "seed");
  check_cmd->add_option("--starts", ca.starts, "number of starts");
  check_cmd->add_option("--points", ca.points, "identifiability sample size");
  check_cmd->add_option("--radius", ca.radius, "identifiability ball radius");
  check_cmd->add_option("--tolerance", ca.tolerance, "derivative tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa, out, err);
    if (*sim_cmd) return cmd_simulate(sa, out);
    return cmd_check(ca, out);
  } catch (const Error& e) {
    err << "latcap: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "latcap: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace latcap
