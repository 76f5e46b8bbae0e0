#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "latcap/data.hpp"
#include "latcap/estimate.hpp"
#include "latcap/inference.hpp"
#include "latcap/model.hpp"

namespace latcap {

inline constexpr const char* kReportSchema = "latent-capture/1";

struct ParameterEstimate {
  std::string name;
  double estimate = 0.0;
  std::optional<double> se;  // absent when the information is not positive definite
  bool operator==(const ParameterEstimate&) const = default;
};

// Conditional capture probabilities of one latent class. Recursive models
// give one probability per partition class, log-linear models the marginal
// capture probability of each list. Strata sharing identical values are
// grouped.
struct ClassCapture {
  int cls = 1;
  std::vector<int> strata;  // 0-based stratum indices
  std::vector<std::string> labels;
  std::vector<double> values;
  bool operator==(const ClassCapture&) const = default;
};

struct StartRecord {
  std::uint64_t seed = 0;
  std::optional<double> loglik;  // absent when the start threw
  bool converged = false;
  bool operator==(const StartRecord&) const = default;
};

struct IntervalReport {
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
  bool lower_at_boundary = false;
  bool unbounded_above = false;
  int evaluations = 0;
  bool operator==(const IntervalReport&) const = default;
};

struct ComparisonReport {
  std::string model;
  double loglik = 0.0;
  double N = 0.0;
  double statistic = 0.0;  // 2 * (loglik of larger model - loglik of smaller)
  int dof = 0;
  std::optional<double> p_value;
  std::optional<double> kl;  // KL(main || compared) over the observed strata
  bool operator==(const ComparisonReport&) const = default;
};

struct IdentifiabilitySummary {
  int points = 0;
  double radius = 0.0;
  int flagged = 0;
  double min_ratio = 0.0;  // smallest min/max eigenvalue ratio seen
  bool operator==(const IdentifiabilitySummary&) const = default;
};

struct Settings {
  std::string scheme;
  double tol_loglik = 0.0;
  double tol_param = 0.0;
  int max_outer = 0;
  std::uint64_t seed = 0;
  int starts = 1;
  double ci_tol = 0.0;
  std::string generator;
  bool operator==(const Settings&) const = default;
};

struct Report {
  std::string schema = kReportSchema;
  std::string data;
  std::string model;
  std::string family;
  std::string partition;
  int classes = 1;
  int lists = 0;
  int captured = 0;
  int strata = 0;
  std::vector<std::string> latent_covariates;

  double N = 0.0;
  long long N_rounded = 0;
  std::optional<double> se_N;
  double loglik = 0.0;
  bool converged = false;
  std::string reason;
  int iterations = 0;

  std::vector<ParameterEstimate> parameters;
  double tau_min = 0.0;
  double tau_median = 0.0;
  double tau_max = 0.0;
  std::vector<double> class_weights;  // sum_i tau_i xi_i
  std::vector<ClassCapture> class_capture;
  std::optional<IntervalReport> interval;
  std::optional<ComparisonReport> comparison;
  std::optional<IdentifiabilitySummary> identifiability;
  std::vector<StartRecord> starts;
  Settings settings;
  std::vector<std::string> warnings;

  bool operator==(const Report&) const = default;
};

struct ReportInputs {
  std::string data_path;
  std::string model_path;
  const Dataset* data = nullptr;
  const Model* model = nullptr;
  const MultiStartFit* fit = nullptr;
  const InfoMatrices* info = nullptr;
  const ProfileCI* interval = nullptr;
  const IdentifiabilityReport* identifiability = nullptr;
  FitOptions options;
  int starts = 1;
  double ci_tol = 0.0;
};

Report build_report(const ReportInputs& in);

// Fills report.comparison from a second fit on the same data.
void add_comparison(Report& report, const std::string& model_path, const FitResult& main,
                    const Model& main_model, const FitResult& other, const Model& other_model);

std::vector<ClassCapture> class_capture(const Model& model, const ModelState& state);

std::string to_json(const Report& report, int indent = 2);
Report from_json(const std::string& text);
void write_text(std::ostream& out, const Report& report);

}  // namespace latcap
