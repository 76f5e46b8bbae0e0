#include "latcap/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "latcap/error.hpp"

namespace latcap {

namespace {

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& eta) {
  Eigen::VectorXd w = (eta.array() - eta.maxCoeff()).exp();
  return w / w.sum();
}

void check_lists(int lists) {
  if (lists < 2 || lists > kMaxLists) {
    throw DomainError("number of lists must be in [2, " + std::to_string(kMaxLists) +
                      "], got " + std::to_string(lists));
  }
}

}  // namespace

Partition partition_none() {
  return {"none", 1, [](std::span<const int>) { return 1; }};
}

Partition partition_captured_before() {
  return {"captured_before", 2, [](std::span<const int> past) {
            return std::find(past.begin(), past.end(), 1) != past.end() ? 2 : 1;
          }};
}

Partition partition_repeat_and_previous() {
  return {"repeat_and_previous", 4, [](std::span<const int> past) {
            const auto captures = std::count(past.begin(), past.end(), 1);
            const bool previous = !past.empty() && past.back() == 1;
            if (previous) return captures >= 2 ? 4 : 2;
            return captures >= 2 ? 3 : 1;
          }};
}

Partition partition_table(int classes, std::map<std::string, int> table, int default_class) {
  if (classes < 1) throw DomainError("partition table needs at least one class");
  for (const auto& [key, v] : table) {
    if (v < 1 || v > classes) {
      throw DomainError("partition table maps '" + key + "' to class " + std::to_string(v) +
                        " outside 1.." + std::to_string(classes));
    }
    if (key.find_first_not_of("01") != std::string::npos) {
      throw DomainError("partition table key '" + key + "' is not a bit string");
    }
  }
  return {"table", classes,
          [table = std::move(table), default_class](std::span<const int> past) {
            std::string key;
            for (int b : past) key.push_back(b ? '1' : '0');
            const auto it = table.find(key);
            if (it != table.end()) return it->second;
            if (default_class == 0) {
              throw DomainError("partition table has no entry for partial history '" + key + "'");
            }
            return default_class;
          }};
}

Partition partition_by_name(const std::string& name) {
  if (name == "none") return partition_none();
  if (name == "captured_before") return partition_captured_before();
  if (name == "example1" || name == "repeat_and_previous") return partition_repeat_and_previous();
  throw DomainError("unknown partition '" + name + "'");
}

Eigen::MatrixXd build_history_matrix(int lists) {
  check_lists(lists);
  const int k = 1 << lists;
  Eigen::MatrixXd h(k, lists);
  for (int r = 0; r < k; ++r) {
    for (int j = 0; j < lists; ++j) h(r, j) = (r >> (lists - 1 - j)) & 1;
  }
  return h;
}

std::vector<Eigen::MatrixXd> build_partition_matrices(int lists, const Partition& partition) {
  check_lists(lists);
  const int k = 1 << lists;
  std::vector<Eigen::MatrixXd> hv(partition.classes, Eigen::MatrixXd::Zero(k, lists));
  std::vector<int> bits(lists);
  for (int r = 0; r < k; ++r) {
    for (int j = 0; j < lists; ++j) bits[j] = (r >> (lists - 1 - j)) & 1;
    for (int j = 0; j < lists; ++j) {
      const int v = partition.classify(std::span<const int>(bits.data(), j));
      if (v < 1 || v > partition.classes) {
        throw DomainError("partition '" + partition.name + "' returned class " +
                          std::to_string(v) + " outside 1.." +
                          std::to_string(partition.classes));
      }
      hv[v - 1](r, j) = 1.0;
    }
  }
  return hv;
}

RecursiveDesign build_recursive_design(const Eigen::MatrixXd& history,
                                       const std::vector<Eigen::MatrixXd>& partition) {
  const auto v_count = static_cast<Eigen::Index>(partition.size());
  RecursiveDesign d{Eigen::MatrixXd(history.rows(), v_count),
                    Eigen::MatrixXd(history.rows(), v_count)};
  for (Eigen::Index v = 0; v < v_count; ++v) {
    const auto& hv = partition[v];
    if (hv.rows() != history.rows() || hv.cols() != history.cols()) {
      throw DimensionError("partition matrix is not conformable with the history matrix");
    }
    d.A.col(v) = history.cwiseProduct(hv).rowwise().sum();
    d.B.col(v) = hv.rowwise().sum();
  }
  return d;
}

Eigen::MatrixXd build_loglinear_design(const Eigen::MatrixXd& history,
                                       std::span<const std::pair<int, int>> interactions) {
  const auto lists = history.cols();
  Eigen::MatrixXd g(history.rows(), lists + static_cast<Eigen::Index>(interactions.size()));
  g.leftCols(lists) = history;
  std::set<std::pair<int, int>> seen;
  for (std::size_t t = 0; t < interactions.size(); ++t) {
    auto [a, b] = interactions[t];
    if (a > b) std::swap(a, b);
    if (a < 0 || b >= lists || a == b) {
      throw DomainError("interaction (" + std::to_string(a + 1) + ", " + std::to_string(b + 1) +
                        ") is not a pair of distinct lists");
    }
    if (!seen.insert({a, b}).second) {
      throw DomainError("interaction (" + std::to_string(a + 1) + ", " + std::to_string(b + 1) +
                        ") declared twice");
    }
    g.col(lists + static_cast<Eigen::Index>(t)) = history.col(a).cwiseProduct(history.col(b));
  }
  return g;
}

Eigen::VectorXd latent_weights(const Eigen::MatrixXd& design, const Eigen::VectorXd& zeta) {
  if (design.cols() != zeta.size()) throw DimensionError("latent design does not match zeta");
  return softmax(design * zeta);
}

Eigen::VectorXd loglinear_probs(const Eigen::MatrixXd& design, const Eigen::VectorXd& delta) {
  if (design.cols() != delta.size()) throw DimensionError("log-linear design does not match delta");
  return softmax(design * delta);
}

Eigen::VectorXd recursive_probs(const RecursiveDesign& design, const Eigen::VectorXd& delta) {
  if (design.A.cols() != delta.size()) throw DimensionError("recursive design does not match delta");
  const Eigen::VectorXd sp = delta.unaryExpr([](double t) { return softplus(t); });
  return (design.A * delta - design.B * sp).array().exp();
}

Eigen::MatrixXd multinomial_covariance(const Eigen::VectorXd& v) {
  Eigen::MatrixXd omega = -v * v.transpose();
  omega.diagonal() += v;
  return omega;
}

Model::Model(ModelSpec spec, int lists, std::vector<std::string> covariate_names)
    : spec_(std::move(spec)), lists_(lists), covariate_names_(std::move(covariate_names)) {
  check_lists(lists_);
  if (spec_.classes < 1) throw DomainError("number of latent classes must be at least 1");
  history_ = build_history_matrix(lists_);

  if (spec_.family == Family::Recursive) {
    if (spec_.partition == "table") {
      partition_ = partition_table(spec_.partition_classes, spec_.partition_table,
                                   spec_.partition_default);
    } else {
      partition_ = partition_by_name(spec_.partition);
    }
    recursive_ = build_recursive_design(history_, build_partition_matrices(lists_, partition_));
    delta_dim_ = partition_.classes;
  } else {
    loglinear_ = build_loglinear_design(history_, spec_.interactions);
    delta_dim_ = static_cast<int>(loglinear_.cols());
  }

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
    if (it == covariate_names_.end()) throw DomainError("unknown covariate '" + name + "'");
    return static_cast<int>(it - covariate_names_.begin());
  };

  for (const auto& name : spec_.latent_covariates) latent_columns_.push_back(column_of(name));
  zeta_dim_ = (spec_.classes - 1) * (1 + static_cast<int>(latent_columns_.size()));

  if (spec_.restriction.empty()) {
    lambda_dim_ = spec_.classes * delta_dim_;
    restriction_.resize(spec_.classes);
    for (int c = 0; c < spec_.classes; ++c) {
      restriction_[c].resize(delta_dim_);
      for (int r = 0; r < delta_dim_; ++r) restriction_[c][r] = {{c * delta_dim_ + r, 1.0, -1}};
    }
  } else {
    lambda_dim_ = spec_.lambda_dim;
    if (lambda_dim_ < 1) throw DomainError("restriction requires a positive lambda dimension");
    if (static_cast<int>(spec_.restriction.size()) != spec_.classes) {
      throw DimensionError("restriction has " + std::to_string(spec_.restriction.size()) +
                           " class blocks, expected " + std::to_string(spec_.classes));
    }
    restriction_.resize(spec_.classes);
    for (int c = 0; c < spec_.classes; ++c) {
      const auto& rows = spec_.restriction[c];
      if (static_cast<int>(rows.size()) != delta_dim_) {
        throw DimensionError("restriction for class " + std::to_string(c + 1) + " has " +
                             std::to_string(rows.size()) + " rows, expected " +
                             std::to_string(delta_dim_));
      }
      restriction_[c].resize(delta_dim_);
      for (int r = 0; r < delta_dim_; ++r) {
        for (const auto& term : rows[r]) {
          if (term.lambda < 0 || term.lambda >= lambda_dim_) {
            throw DomainError("restriction refers to lambda " + std::to_string(term.lambda + 1) +
                              " outside 1.." + std::to_string(lambda_dim_));
          }
          restriction_[c][r].push_back(
              {term.lambda, term.scale, term.covariate.empty() ? -1 : column_of(term.covariate)});
        }
      }
    }
  }
}

Eigen::MatrixXd Model::latent_design(std::span<const double> x) const {
  const int width = 1 + static_cast<int>(latent_columns_.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(spec_.classes, zeta_dim_);
  for (int c = 1; c < spec_.classes; ++c) {
    const int offset = (c - 1) * width;
    design(c, offset) = 1.0;
    for (std::size_t m = 0; m < latent_columns_.size(); ++m) {
      design(c, offset + 1 + static_cast<int>(m)) = x[latent_columns_[m]];
    }
  }
  return design;
}

Eigen::MatrixXd Model::restriction(int cls, std::span<const double> x) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(delta_dim_, lambda_dim_);
  for (int r = 0; r < delta_dim_; ++r) {
    for (const auto& term : restriction_[cls][r]) {
      m(r, term.lambda) += term.scale * (term.covariate < 0 ? 1.0 : x[term.covariate]);
    }
  }
  return m;
}

Eigen::VectorXd Model::conditional_probs(const Eigen::VectorXd& delta) const {
  return spec_.family == Family::Recursive ? recursive_probs(recursive_, delta)
                                           : loglinear_probs(loglinear_, delta);
}

Eigen::MatrixXd Model::conditional_jacobian(const Eigen::VectorXd& delta,
                                            const Eigen::VectorXd& qtilde) const {
  if (spec_.family == Family::LogLinear) return multinomial_covariance(qtilde) * loglinear_;
  const Eigen::VectorXd sigma = delta.unaryExpr([](double t) { return logistic(t); });
  return qtilde.asDiagonal() * (recursive_.A - recursive_.B * sigma.asDiagonal());
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names;
  for (int c = 1; c < spec_.classes; ++c) {
    const std::string cls = "class" + std::to_string(c + 1);
    names.push_back("zeta." + cls + ".intercept");
    for (const auto& name : spec_.latent_covariates) names.push_back("zeta." + cls + "." + name);
  }
  if (spec_.restriction.empty()) {
    for (int c = 1; c <= spec_.classes; ++c) {
      for (int r = 1; r <= delta_dim_; ++r) {
        names.push_back("delta.class" + std::to_string(c) + "." + std::to_string(r));
      }
    }
    return names;
  }
  for (int l = 0; l < lambda_dim_; ++l) names.push_back("lambda" + std::to_string(l + 1));
  return names;
}

StratumState stratum_state(const Model& model, std::span<const double> x,
                           const Eigen::VectorXd& beta, Derivatives derivs, int index) {
  if (beta.size() != model.beta_dim()) {
    throw DimensionError("beta has length " + std::to_string(beta.size()) + ", model needs " +
                         std::to_string(model.beta_dim()));
  }
  const int k = model.configs();
  const int classes = model.classes();
  const Eigen::VectorXd lambda = model.lambda(beta);

  StratumState st;
  const Eigen::MatrixXd latent = model.latent_design(x);
  st.xi = latent_weights(latent, model.zeta(beta));
  st.delta.resize(model.delta_dim(), classes);
  st.qtilde.resize(k, classes);

  Eigen::MatrixXd d_full;
  if (derivs == Derivatives::Yes) d_full = Eigen::MatrixXd::Zero(k, model.beta_dim());

  for (int c = 0; c < classes; ++c) {
    const Eigen::MatrixXd m = model.restriction(c, x);
    st.delta.col(c) = m * lambda;
    st.qtilde.col(c) = model.conditional_probs(st.delta.col(c));
    if (derivs == Derivatives::Yes && model.lambda_dim() > 0) {
      d_full.rightCols(model.lambda_dim()) +=
          st.xi[c] * model.conditional_jacobian(st.delta.col(c), st.qtilde.col(c)) * m;
    }
  }
  const Eigen::VectorXd ptilde = st.qtilde * st.xi;
  st.phi = ptilde[0];
  st.p = ptilde.tail(k - 1);

  if (derivs == Derivatives::Yes) {
    if (model.zeta_dim() > 0) {
      d_full.leftCols(model.zeta_dim()) = st.qtilde * multinomial_covariance(st.xi) * latent;
    }
    if (!d_full.allFinite()) throw NumericError("non-finite derivative in stratum " + std::to_string(index), index);
    st.dphi = d_full.row(0);
    st.D = d_full.bottomRows(k - 1);
  }
  if (!ptilde.allFinite() || !st.xi.allFinite()) {
    throw NumericError("non-finite probability in stratum " + std::to_string(index), index);
  }
  return st;
}

ModelState model_state(const Model& model, std::span<const std::vector<double>> covariates,
                       const Eigen::VectorXd& beta, Derivatives derivs) {
  ModelState state;
  const int s = static_cast<int>(covariates.size());
  state.strata.reserve(s);
  state.phi.resize(s);
  if (derivs == Derivatives::Yes) state.Phi.resize(s, model.beta_dim());
  for (int i = 0; i < s; ++i) {
    StratumState st = stratum_state(model, covariates[i], beta, derivs, i);
    state.phi[i] = st.phi;
    if (derivs == Derivatives::Yes) state.Phi.row(i) = st.dphi;
    state.strata.push_back(std::move(st));
  }
  return state;
}

ModelState model_state(const Model& model, const Dataset& data, const Eigen::VectorXd& beta,
                       Derivatives derivs) {
  if (data.lists != model.lists()) throw DimensionError("dataset and model disagree on J");
  std::vector<std::vector<double>> covariates;
  covariates.reserve(data.strata.size());
  for (const auto& st : data.strata) covariates.push_back(st.x);
  return model_state(model, covariates, beta, derivs);
}

}  // namespace latcap
