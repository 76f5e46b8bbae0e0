#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "latcap/data.hpp"

namespace latcap {

enum class Family { LogLinear, Recursive };

// Maps a partial capture history (bits h_1..h_{j-1}; empty for the first
// occasion) to a class in 1..V.
using PartialHistoryClassifier = std::function<int(std::span<const int>)>;

struct Partition {
  std::string name;
  int classes = 1;
  PartialHistoryClassifier classify;
};

// V = 1: one logit for every occasion.
Partition partition_none();
// V = 2: never captured before / captured at least once before.
Partition partition_captured_before();
// V = 4, crossing "captured more than once before" with "captured on the
// previous occasion":
//   1 at most once before, not on the previous occasion
//   2 first capture was on the previous occasion
//   3 more than once before, not on the previous occasion
//   4 on the previous occasion and at least once earlier
Partition partition_repeat_and_previous();
// Explicit table keyed by the partial history as a bit string ("" for the
// first occasion). Histories missing from the table map to default_class
// (0 means missing entries are an error).
Partition partition_table(int classes, std::map<std::string, int> table, int default_class = 0);
// Resolves "none", "captured_before", "example1" / "repeat_and_previous".
Partition partition_by_name(const std::string& name);

// k x J, row r is the J-bit binary expansion of r (h_1 most significant).
Eigen::MatrixXd build_history_matrix(int lists);

// H_1..H_V: entry (r, j) of H_v is 1 iff the first j bits of row r (the
// partial history before occasion j + 1) fall in class v.
std::vector<Eigen::MatrixXd> build_partition_matrices(int lists, const Partition& partition);

// log qtilde = A delta - B log(1 + exp(delta)).
struct RecursiveDesign {
  Eigen::MatrixXd A;  // column v = (H * H_v) 1
  Eigen::MatrixXd B;  // column v = H_v 1
};

RecursiveDesign build_recursive_design(const Eigen::MatrixXd& history,
                                       const std::vector<Eigen::MatrixXd>& partition);

// Main effects (columns of H) followed by one column per list pair.
// Pairs are 0-based list indices.
Eigen::MatrixXd build_loglinear_design(const Eigen::MatrixXd& history,
                                       std::span<const std::pair<int, int>> interactions);

// Multinomial logit with max subtraction.
Eigen::VectorXd latent_weights(const Eigen::MatrixXd& design, const Eigen::VectorXd& zeta);
Eigen::VectorXd loglinear_probs(const Eigen::MatrixXd& design, const Eigen::VectorXd& delta);
Eigen::VectorXd recursive_probs(const RecursiveDesign& design, const Eigen::VectorXd& delta);

// One term of a linear form: scale * lambda[index] * (covariate or 1).
struct LinearTerm {
  int lambda = 0;
  double scale = 1.0;
  std::string covariate;  // empty for a constant coefficient
};
using LinearForm = std::vector<LinearTerm>;

struct ModelSpec {
  int classes = 1;
  Family family = Family::Recursive;

  // Recursive family.
  std::string partition = "none";  // a built-in name or "table"
  int partition_classes = 0;
  std::map<std::string, int> partition_table;
  int partition_default = 0;

  // Log-linear family, 0-based list pairs.
  std::vector<std::pair<int, int>> interactions;

  // Covariates entering the latent logits of classes 2..C (each class gets an
  // intercept plus one slope per covariate; class 1 is the reference).
  std::vector<std::string> latent_covariates;

  // delta_c = M_c lambda. restriction[c][r] is the linear form for coordinate
  // r of delta_c. Empty means each class has its own free delta.
  int lambda_dim = 0;
  std::vector<std::vector<LinearForm>> restriction;
};

// A ModelSpec compiled against a number of lists and covariate names.
class Model {
 public:
  Model(ModelSpec spec, int lists, std::vector<std::string> covariate_names);

  int lists() const { return lists_; }
  int configs() const { return 1 << lists_; }
  int classes() const { return spec_.classes; }
  Family family() const { return spec_.family; }
  int delta_dim() const { return delta_dim_; }
  int zeta_dim() const { return zeta_dim_; }
  int lambda_dim() const { return lambda_dim_; }
  int beta_dim() const { return zeta_dim_ + lambda_dim_; }

  const ModelSpec& spec() const { return spec_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const Eigen::MatrixXd& history() const { return history_; }
  const Partition& partition() const { return partition_; }
  const RecursiveDesign& recursive_design() const { return recursive_; }
  const Eigen::MatrixXd& loglinear_design() const { return loglinear_; }

  // C x zeta_dim, zero first row.
  Eigen::MatrixXd latent_design(std::span<const double> x) const;
  // delta_dim x lambda_dim.
  Eigen::MatrixXd restriction(int cls, std::span<const double> x) const;

  Eigen::VectorXd conditional_probs(const Eigen::VectorXd& delta) const;
  // d qtilde / d delta', k x delta_dim.
  Eigen::MatrixXd conditional_jacobian(const Eigen::VectorXd& delta,
                                       const Eigen::VectorXd& qtilde) const;

  Eigen::VectorXd zeta(const Eigen::VectorXd& beta) const { return beta.head(zeta_dim_); }
  Eigen::VectorXd lambda(const Eigen::VectorXd& beta) const { return beta.tail(lambda_dim_); }
  std::vector<std::string> parameter_names() const;

 private:
  struct CompiledTerm {
    int lambda;
    double scale;
    int covariate;  // -1 for constant
  };

  ModelSpec spec_;
  int lists_;
  std::vector<std::string> covariate_names_;
  Eigen::MatrixXd history_;
  Partition partition_;
  RecursiveDesign recursive_;
  Eigen::MatrixXd loglinear_;
  int delta_dim_ = 0;
  int zeta_dim_ = 0;
  int lambda_dim_ = 0;
  std::vector<int> latent_columns_;
  std::vector<std::vector<std::vector<CompiledTerm>>> restriction_;  // [c][r]
};

struct StratumState {
  Eigen::VectorXd xi;      // latent weights, C
  Eigen::MatrixXd delta;   // delta_dim x C
  Eigen::MatrixXd qtilde;  // k x C, row 0 = never-captured probability per class
  Eigen::VectorXd p;       // k - 1 manifest probabilities, h = 0 dropped
  double phi = 0.0;        // never-captured probability
  Eigen::MatrixXd D;       // d p / d beta', (k - 1) x beta_dim
  Eigen::RowVectorXd dphi; // d phi / d beta'
};

struct ModelState {
  std::vector<StratumState> strata;
  Eigen::VectorXd phi;  // s
  Eigen::MatrixXd Phi;  // s x beta_dim, row i = d phi_i / d beta'

  int size() const { return static_cast<int>(strata.size()); }
};

enum class Derivatives { Yes, No };

StratumState stratum_state(const Model& model, std::span<const double> x,
                           const Eigen::VectorXd& beta, Derivatives derivs = Derivatives::Yes,
                           int index = -1);

ModelState model_state(const Model& model, const Dataset& data, const Eigen::VectorXd& beta,
                       Derivatives derivs = Derivatives::Yes);
ModelState model_state(const Model& model, std::span<const std::vector<double>> covariates,
                       const Eigen::VectorXd& beta, Derivatives derivs = Derivatives::Yes);

// Omega(v) = diag(v) - v v'.
Eigen::MatrixXd multinomial_covariance(const Eigen::VectorXd& v);

}  // namespace latcap
