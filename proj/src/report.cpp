#include "latcap/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "latcap/error.hpp"
#include "latcap/sim.hpp"

namespace latcap {

using nlohmann::json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<std::string> partition_labels(const Partition& partition) {
  if (partition.name == "captured_before") return {"first capture", "recapture"};
  if (partition.name == "none") return {"capture"};
  if (partition.name == "repeat_and_previous") {
    return {"at most once before, not previous", "first capture was previous",
            "more than once before, not previous", "previous and earlier"};
  }
  std::vector<std::string> out;
  for (int v = 1; v <= partition.classes; ++v) out.push_back("partition class " + std::to_string(v));
  return out;
}

const char* family_name(Family f) { return f == Family::Recursive ? "recursive" : "loglinear"; }

template <class T>
json optional_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(*v)) return nullptr;
  }
  return *v;
}

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::vector<ClassCapture> class_capture(const Model& model, const ModelState& state) {
  std::vector<ClassCapture> out;
  std::vector<std::string> labels;
  if (model.family() == Family::Recursive) {
    labels = partition_labels(model.partition());
  } else {
    for (int j = 1; j <= model.lists(); ++j) labels.push_back("list " + std::to_string(j));
  }
  for (int c = 0; c < model.classes(); ++c) {
    for (int i = 0; i < state.size(); ++i) {
      const StratumState& st = state.strata[i];
      std::vector<double> values;
      if (model.family() == Family::Recursive) {
        for (Eigen::Index v = 0; v < st.delta.rows(); ++v) values.push_back(sigmoid(st.delta(v, c)));
      } else {
        const Eigen::VectorXd marginal = model.history().transpose() * st.qtilde.col(c);
        values.assign(marginal.data(), marginal.data() + marginal.size());
      }
      auto same = std::find_if(out.begin(), out.end(), [&](const ClassCapture& cc) {
        if (cc.cls != c + 1) return false;
        for (std::size_t t = 0; t < values.size(); ++t) {
          if (std::abs(cc.values[t] - values[t]) > 1e-12) return false;
        }
        return true;
      });
      if (same != out.end()) {
        same->strata.push_back(i);
      } else {
        out.push_back({c + 1, {i}, labels, values});
      }
    }
  }
  return out;
}

Report build_report(const ReportInputs& in) {
  if (!in.data || !in.model || !in.fit) throw Error("report needs data, model and fit");
  const Dataset& data = *in.data;
  const Model& model = *in.model;
  const FitResult& fit = in.fit->best;
  Report r;
  r.data = in.data_path;
  r.model = in.model_path;
  r.family = family_name(model.family());
  r.partition = model.family() == Family::Recursive ? model.partition().name : "";
  r.classes = model.classes();
  r.lists = model.lists();
  r.captured = data.total;
  r.strata = data.size();
  r.latent_covariates = model.spec().latent_covariates;

  r.N = fit.params.N;
  r.N_rounded = std::llround(fit.params.N);
  r.loglik = fit.loglik;
  r.converged = fit.converged;
  r.reason = fit.reason;
  r.iterations = fit.iterations;

  const auto names = model.parameter_names();
  for (Eigen::Index t = 0; t < fit.params.beta.size(); ++t) {
    ParameterEstimate pe{names[t], fit.params.beta[t], std::nullopt};
    if (in.info && in.info->se_beta.size() == fit.params.beta.size()) pe.se = in.info->se_beta[t];
    r.parameters.push_back(pe);
  }
  if (in.info) r.se_N = in.info->se_N;

  std::vector<double> tau(fit.params.tau.data(), fit.params.tau.data() + fit.params.tau.size());
  std::sort(tau.begin(), tau.end());
  r.tau_min = tau.front();
  r.tau_max = tau.back();
  const std::size_t m = tau.size();
  r.tau_median = m % 2 ? tau[m / 2] : 0.5 * (tau[m / 2 - 1] + tau[m / 2]);

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(model.classes());
  for (int i = 0; i < fit.state.size(); ++i) weights += fit.params.tau[i] * fit.state.strata[i].xi;
  r.class_weights.assign(weights.data(), weights.data() + weights.size());
  r.class_capture = class_capture(model, fit.state);

  if (in.interval) {
    const ProfileCI& ci = *in.interval;
    r.interval = IntervalReport{ci.level, ci.lower, ci.upper, ci.lower_at_boundary,
                                ci.unbounded_above, static_cast<int>(ci.grid.size())};
  }
  if (in.identifiability) {
    const IdentifiabilityReport& id = *in.identifiability;
    IdentifiabilitySummary s{id.points, id.radius, id.flagged_count(), 1.0};
    for (std::size_t t = 0; t < id.min_eigen.size(); ++t) {
      const double ratio = id.max_eigen[t] > 0 ? id.min_eigen[t] / id.max_eigen[t] : 0.0;
      s.min_ratio = std::min(s.min_ratio, ratio);
    }
    r.identifiability = s;
  }
  for (std::size_t t = 0; t < in.fit->seeds.size(); ++t) {
    StartRecord sr{in.fit->seeds[t], std::nullopt, in.fit->converged[t]};
    if (std::isfinite(in.fit->logliks[t])) sr.loglik = in.fit->logliks[t];
    r.starts.push_back(sr);
  }
  r.settings = Settings{in.options.scheme == Scheme::Profiled ? "profiled" : "blockwise",
                        in.options.tol_loglik,
                        in.options.tol_param,
                        in.options.max_outer,
                        in.options.seed,
                        in.starts,
                        in.ci_tol,
                        kSimulationGenerator};

  r.warnings = fit.warnings;
  if (in.info) r.warnings.insert(r.warnings.end(), in.info->warnings.begin(), in.info->warnings.end());
  if (in.interval) {
    r.warnings.insert(r.warnings.end(), in.interval->warnings.begin(), in.interval->warnings.end());
  }
  if (in.identifiability && !in.identifiability->ok()) {
    r.warnings.push_back("identifiability check flagged " +
                         std::to_string(in.identifiability->flagged_count()) + " of " +
                         std::to_string(in.identifiability->points) + " points");
  }
  return r;
}

void add_comparison(Report& report, const std::string& model_path, const FitResult& main,
                    const Model& main_model, const FitResult& other, const Model& other_model) {
  ComparisonReport c;
  c.model = model_path;
  c.loglik = other.loglik;
  c.N = other.params.N;
  const int dim_main = main_model.beta_dim();
  const int dim_other = other_model.beta_dim();
  c.dof = std::abs(dim_main - dim_other);
  c.statistic = dim_main >= dim_other ? 2.0 * (main.loglik - other.loglik)
                                      : 2.0 * (other.loglik - main.loglik);
  if (c.dof > 0 && c.statistic >= 0) {
    c.p_value = boost::math::cdf(
        boost::math::complement(boost::math::chi_squared(c.dof), c.statistic));
  }
  try {
    const double kl = kl_by_strata(main, other);
    if (std::isfinite(kl)) c.kl = kl;
  } catch (const Error&) {
  }
  if (!other.converged) report.warnings.push_back("comparison fit did not converge: " + other.reason);
  report.comparison = c;
}

std::string to_json(const Report& r, int indent) {
  json j;
  j["schema"] = r.schema;
  j["data"] = r.data;
  j["model"] = {{"path", r.model},
                {"family", r.family},
                {"partition", r.partition},
                {"classes", r.classes},
                {"lists", r.lists},
                {"latent_covariates", r.latent_covariates}};
  j["captured"] = r.captured;
  j["strata"] = r.strata;
  j["estimate"] = {{"N", r.N},
                   {"N_rounded", r.N_rounded},
                   {"se_N", optional_json(r.se_N)},
                   {"loglik", r.loglik},
                   {"converged", r.converged},
                   {"reason", r.reason},
                   {"iterations", r.iterations}};
  json params = json::array();
  for (const auto& p : r.parameters) {
    params.push_back({{"name", p.name}, {"estimate", p.estimate}, {"se", optional_json(p.se)}});
  }
  j["parameters"] = params;
  j["tau"] = {{"min", r.tau_min}, {"median", r.tau_median}, {"max", r.tau_max}};
  j["class_weights"] = r.class_weights;
  json cap = json::array();
  for (const auto& c : r.class_capture) {
    cap.push_back({{"class", c.cls}, {"strata", c.strata}, {"labels", c.labels}, {"values", c.values}});
  }
  j["class_capture"] = cap;
  if (r.interval) {
    const auto& ci = *r.interval;
    j["interval"] = {{"level", ci.level},
                     {"lower", ci.lower},
                     {"upper", ci.upper},
                     {"lower_at_boundary", ci.lower_at_boundary},
                     {"unbounded_above", ci.unbounded_above},
                     {"evaluations", ci.evaluations}};
  } else {
    j["interval"] = nullptr;
  }
  if (r.comparison) {
    const auto& c = *r.comparison;
    j["comparison"] = {{"model", c.model},
                       {"loglik", c.loglik},
                       {"N", c.N},
                       {"statistic", c.statistic},
                       {"dof", c.dof},
                       {"p_value", optional_json(c.p_value)},
                       {"kl", optional_json(c.kl)}};
  } else {
    j["comparison"] = nullptr;
  }
  if (r.identifiability) {
    const auto& id = *r.identifiability;
    j["identifiability"] = {{"points", id.points},
                            {"radius", id.radius},
                            {"flagged", id.flagged},
                            {"min_ratio", id.min_ratio}};
  } else {
    j["identifiability"] = nullptr;
  }
  json starts = json::array();
  for (const auto& s : r.starts) {
    starts.push_back({{"seed", s.seed}, {"loglik", optional_json(s.loglik)}, {"converged", s.converged}});
  }
  j["starts"] = starts;
  j["settings"] = {{"scheme", r.settings.scheme},
                   {"tol_loglik", r.settings.tol_loglik},
                   {"tol_param", r.settings.tol_param},
                   {"max_outer", r.settings.max_outer},
                   {"seed", r.settings.seed},
                   {"starts", r.settings.starts},
                   {"ci_tol", r.settings.ci_tol},
                   {"generator", r.settings.generator}};
  j["warnings"] = r.warnings;
  return j.dump(indent);
}

Report from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw Error(std::string("report is not valid JSON: ") + err.what());
  }
  try {
    Report r;
    r.schema = j.at("schema").get<std::string>();
    if (r.schema != kReportSchema) throw Error("unsupported report schema '" + r.schema + "'");
    r.data = j.at("data").get<std::string>();
    const json& m = j.at("model");
    r.model = m.at("path").get<std::string>();
    r.family = m.at("family").get<std::string>();
    r.partition = m.at("partition").get<std::string>();
    r.classes = m.at("classes").get<int>();
    r.lists = m.at("lists").get<int>();
    r.latent_covariates = m.at("latent_covariates").get<std::vector<std::string>>();
    r.captured = j.at("captured").get<int>();
    r.strata = j.at("strata").get<int>();
    const json& e = j.at("estimate");
    r.N = e.at("N").get<double>();
    r.N_rounded = e.at("N_rounded").get<long long>();
    r.se_N = optional_from<double>(e, "se_N");
    r.loglik = e.at("loglik").get<double>();
    r.converged = e.at("converged").get<bool>();
    r.reason = e.at("reason").get<std::string>();
    r.iterations = e.at("iterations").get<int>();
    for (const auto& p : j.at("parameters")) {
      r.parameters.push_back({p.at("name").get<std::string>(), p.at("estimate").get<double>(),
                              optional_from<double>(p, "se")});
    }
    r.tau_min = j.at("tau").at("min").get<double>();
    r.tau_median = j.at("tau").at("median").get<double>();
    r.tau_max = j.at("tau").at("max").get<double>();
    r.class_weights = j.at("class_weights").get<std::vector<double>>();
    for (const auto& c : j.at("class_capture")) {
      r.class_capture.push_back({c.at("class").get<int>(), c.at("strata").get<std::vector<int>>(),
                                 c.at("labels").get<std::vector<std::string>>(),
                                 c.at("values").get<std::vector<double>>()});
    }
    if (!j.at("interval").is_null()) {
      const json& ci = j.at("interval");
      r.interval = IntervalReport{ci.at("level").get<double>(),
                                  ci.at("lower").get<double>(),
                                  ci.at("upper").get<double>(),
                                  ci.at("lower_at_boundary").get<bool>(),
                                  ci.at("unbounded_above").get<bool>(),
                                  ci.at("evaluations").get<int>()};
    }
    if (!j.at("comparison").is_null()) {
      const json& c = j.at("comparison");
      r.comparison = ComparisonReport{c.at("model").get<std::string>(),
                                      c.at("loglik").get<double>(),
                                      c.at("N").get<double>(),
                                      c.at("statistic").get<double>(),
                                      c.at("dof").get<int>(),
                                      optional_from<double>(c, "p_value"),
                                      optional_from<double>(c, "kl")};
    }
    if (!j.at("identifiability").is_null()) {
      const json& id = j.at("identifiability");
      r.identifiability = IdentifiabilitySummary{id.at("points").get<int>(), id.at("radius").get<double>(),
                                                 id.at("flagged").get<int>(),
                                                 id.at("min_ratio").get<double>()};
    }
    for (const auto& s : j.at("starts")) {
      r.starts.push_back({s.at("seed").get<std::uint64_t>(), optional_from<double>(s, "loglik"),
                          s.at("converged").get<bool>()});
    }
    const json& st = j.at("settings");
    r.settings = Settings{st.at("scheme").get<std::string>(),
                          st.at("tol_loglik").get<double>(),
                          st.at("tol_param").get<double>(),
                          st.at("max_outer").get<int>(),
                          st.at("seed").get<std::uint64_t>(),
                          st.at("starts").get<int>(),
                          st.at("ci_tol").get<double>(),
                          st.at("generator").get<std::string>()};
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& err) {
    throw Error(std::string("malformed report: ") + err.what());
  }
}

void write_text(std::ostream& out, const Report& r) {
  out << "latent-class capture-recapture fit\n";
  out << "  data        " << r.data << " (" << r.captured << " captured, " << r.strata
      << " strata, " << r.lists << " lists)\n";
  out << "  model       " << r.model << " (" << r.family;
  if (!r.partition.empty()) out << ", partition " << r.partition;
  out << ", " << r.classes << (r.classes == 1 ? " class" : " classes");
  if (!r.latent_covariates.empty()) {
    out << ", latent covariates";
    for (const auto& c : r.latent_covariates) out << ' ' << c;
  }
  out << ")\n\n";

  out << "  N           " << fixed(r.N, 4) << "  (rounded " << r.N_rounded << ")\n";
  if (r.se_N) out << "  Wald SE     " << fixed(*r.se_N, 4) << "\n";
  if (r.interval) {
    const auto& ci = *r.interval;
    out << "  profile CI  " << fixed(100 * ci.level, 1) << "%  [" << fixed(ci.lower, 3) << ", ";
    if (ci.unbounded_above) {
      out << "unbounded, last checked " << fixed(ci.upper, 1) << "]";
    } else {
      out << fixed(ci.upper, 3) << "]";
    }
    if (ci.lower_at_boundary) out << "  lower end at n";
    out << "  (" << ci.evaluations << " profile points)\n";
  }
  out << "  loglik      " << std::setprecision(12) << r.loglik << "\n";
  out << "  converged   " << (r.converged ? "yes" : "no") << " after " << r.iterations
      << " iterations (" << r.reason << ")\n\n";

  if (!r.parameters.empty()) {
    out << "  parameter                          estimate          SE\n";
    for (const auto& p : r.parameters) {
      out << "  " << std::left << std::setw(30) << p.name << std::right << std::setw(14)
          << fixed(p.estimate, 6) << std::setw(12) << (p.se ? fixed(*p.se, 6) : std::string("-"))
          << "\n";
    }
    out << "\n";
  }
  out << "  tau         min " << fixed(r.tau_min, 6) << "  median " << fixed(r.tau_median, 6)
      << "  max " << fixed(r.tau_max, 6) << "\n";
  out << "  class weights";
  for (double w : r.class_weights) out << ' ' << fixed(w, 4);
  out << "\n\n  class capture probabilities\n";
  for (const auto& c : r.class_capture) {
    out << "    class " << c.cls;
    if (static_cast<int>(c.strata.size()) != r.strata) {
      out << " (strata";
      for (int s : c.strata) out << ' ' << s + 1;
      out << ")";
    }
    out << ":";
    for (std::size_t t = 0; t < c.values.size(); ++t) {
      out << "  " << c.labels[t] << " " << fixed(c.values[t], 4);
    }
    out << "\n";
  }
  if (r.comparison) {
    const auto& c = *r.comparison;
    out << "\n  compared with " << c.model << ": loglik " << std::setprecision(12) << c.loglik
        << ", N " << fixed(c.N, 3) << "\n";
    out << "    LR " << fixed(c.statistic, 4) << " on " << c.dof << " d.o.f.";
    if (c.p_value) out << ", p = " << std::setprecision(4) << *c.p_value;
    if (c.kl) out << ", KL " << fixed(*c.kl, 4);
    out << "\n";
  }
  if (r.identifiability) {
    const auto& id = *r.identifiability;
    out << "\n  identifiability: " << id.flagged << " of " << id.points
        << " points flagged within radius " << id.radius << " (min eigenvalue ratio "
        << std::setprecision(3) << id.min_ratio << ")\n";
  }
  out << "\n  starts\n";
  for (const auto& s : r.starts) {
    out << "    seed " << s.seed << "  loglik "
        << (s.loglik ? [&] {
             std::ostringstream o;
             o << std::setprecision(12) << *s.loglik;
             return o.str();
           }()
                     : std::string("failed"))
        << (s.converged ? "" : "  (not converged)") << "\n";
  }
  out << "\n  settings    scheme " << r.settings.scheme << ", tol_loglik " << r.settings.tol_loglik
      << ", tol_param " << r.settings.tol_param << ", max_outer " << r.settings.max_outer
      << ", seed " << r.settings.seed << ", starts " << r.settings.starts << ", ci_tol "
      << r.settings.ci_tol << ", generator " << r.settings.generator << "\n";
  if (!r.warnings.empty()) {
    out << "\n  warnings\n";
    for (const auto& w : r.warnings) out << "    " << w << "\n";
  }
}

}  // namespace latcap
