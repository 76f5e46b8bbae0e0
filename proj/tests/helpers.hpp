#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latcap/config.hpp"
#include "latcap/data.hpp"
#include "latcap/estimate.hpp"
#include "latcap/model.hpp"
#include "latcap/sim.hpp"

namespace testing {

inline latcap::ModelSpec spec_from(const std::string& text) {
  std::istringstream in(text);
  return latcap::parse_model_config(in);
}

inline latcap::SimulationSpec sim_from(const std::string& text) {
  std::istringstream in(text);
  return latcap::parse_simulation_spec(in);
}

inline Eigen::VectorXd random_vector(latcap::SplitMix64& rng, Eigen::Index n, double half_width) {
  Eigen::VectorXd v(n);
  for (Eigen::Index t = 0; t < n; ++t) v[t] = half_width * (2.0 * rng.uniform() - 1.0);
  return v;
}

inline latcap::Dataset simulate(const latcap::SimulationSpec& spec, const latcap::Model& model,
                                int n_true, std::uint64_t seed) {
  latcap::SimConfig config;
  config.n_true = n_true;
  config.beta = spec.beta;
  config.pool = spec.pool;
  config.weights = spec.weights;
  config.covariate_names = spec.covariate_names;
  config.seed = seed;
  return latcap::generate(config, model);
}

// Small models used by the derivative and oracle suites. Each entry is a
// simulation spec; the truth lines give a parameter point of the right size.
inline std::vector<std::string> small_model_suite() {
  return {
      // 1 class, no covariates
      "[model]\nclasses = 1\nfamily = recursive\npartition = none\n"
      "[truth]\nlists = 3\nlambda = -0.4\n",
      // 1 class, M_b
      "[model]\nclasses = 1\nfamily = recursive\npartition = captured_before\n"
      "[truth]\nlists = 4\nlambda = -0.8, 0.3\n",
      // 2 classes, latent covariate
      "[model]\nclasses = 2\nfamily = recursive\npartition = none\n[latent]\ncovariates = x\n"
      "[truth]\nlists = 4\nzeta = 0.2, 0.7\nlambda = -1.2, 0.5\n"
      "[pool]\ncovariates = x\nentry = 0 @ 1\nentry = 1 @ 2\nentry = 2 @ 1\n",
      // 2 classes, repeat-and-previous partition
      "[model]\nclasses = 2\nfamily = recursive\npartition = example1\n"
      "[truth]\nlists = 5\nzeta = -0.3\nlambda = -1, -0.5, 0, 0.5, 0.2, 0.4, 0.6, 0.8\n",
      // 3 classes, captured_before, restriction with a covariate
      "[model]\nclasses = 3\nfamily = recursive\npartition = captured_before\nlambda = 4\n"
      "[latent]\ncovariates = x\n"
      "[restriction]\nclass1.delta1 = l1\nclass1.delta2 = l1 + l4\n"
      "class2.delta1 = l2 + 0.5*l4*x\nclass2.delta2 = l2\n"
      "class3.delta1 = l3\nclass3.delta2 = l3 - l4\n"
      "[truth]\nlists = 4\nzeta = 0.1, 0.2, -0.3, 0.4\nlambda = -1.5, -0.2, 0.6, 0.3\n"
      "[pool]\ncovariates = x\nentry = 0 @ 1\nentry = 1 @ 1\nentry = -1 @ 1\n",
      // log-linear, 1 class, interactions
      "[model]\nclasses = 1\nfamily = loglinear\ninteractions = 1-2, 2-3\n"
      "[truth]\nlists = 3\nlambda = -0.3, 0.2, -0.1, 0.4, -0.5\n",
      // log-linear, 2 classes, covariate restriction
      "[model]\nclasses = 2\nfamily = loglinear\ninteractions = 1-2\nlambda = 3\n"
      "[latent]\ncovariates = x\n"
      "[restriction]\nclass1.delta1 = l1\nclass1.delta2 = l1 + l2*x\nclass1.delta3 = l1\n"
      "class1.delta4 = l3\nclass2.delta1 = l2\nclass2.delta2 = l2\nclass2.delta3 = l2 - l1\n"
      "class2.delta4 = l3\n"
      "[truth]\nlists = 3\nzeta = 0.3, -0.6\nlambda = -0.7, 0.4, 0.5\n"
      "[pool]\ncovariates = x\nentry = 0 @ 1\nentry = 1 @ 1\n",
      // log-linear, 3 classes, six lists
      "[model]\nclasses = 3\nfamily = loglinear\ninteractions = 2-4\n"
      "[truth]\nlists = 6\nzeta = 0.2, -0.2\n"
      "lambda = -1, -1, -1, -1, -1, -1, 0.3, 0, 0, 0, 0, 0, 0, 0.2, 1, 1, 1, 1, 1, 1, -0.1\n",
      // table partition
      "[model]\nclasses = 1\nfamily = recursive\npartition = table\n"
      "[partition]\nclasses = 3\ndefault = 3\nstart = 1\n0 = 1\n1 = 2\n"
      "[truth]\nlists = 4\nlambda = -0.5, 0.5, 0.1\n",
  };
}

}  // namespace testing
