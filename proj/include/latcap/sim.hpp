#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latcap/data.hpp"
#include "latcap/likelihood.hpp"
#include "latcap/model.hpp"

namespace latcap {

struct SimConfig {
  int n_true = 0;
  Eigen::VectorXd beta;
  std::vector<std::vector<double>> pool;  // candidate covariate vectors
  std::vector<double> weights;            // sampling weights, a simplex
  std::vector<std::string> covariate_names;
  std::uint64_t seed = 1;
};

// Name of the random stream recorded in reports.
inline constexpr const char* kSimulationGenerator = "splitmix64/unit-stream";

// Draws n_true units: covariate by weight, latent class by xi, history
// occasion by occasion (recursive) or as one categorical draw (log-linear).
// Unit u draws from splitmix64 seeded with seed ^ ((u + 1) * 0x9e3779b97f4a7c15),
// in the order covariate, class, history. Units never captured are dropped.
// Throws Error("no observable units ...") when nobody is captured.
Dataset generate(const SimConfig& config, const Model& model);

// Independent evaluation of the log-likelihood for oracle checks: every
// probability is summed explicitly over classes and configurations without
// the design matrices, and the likelihood is assembled from its three
// unsimplified components (binomial, conditional on capture, stratum).
// Limited to J <= 6 and s <= 20.
double enumerate_loglik(const Dataset& data, const Model& model, const Params& params);

// Central differences, one coordinate at a time.
Eigen::VectorXd finite_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step = 1e-5);
Eigen::MatrixXd finite_diff(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double step = 1e-5);

}  // namespace latcap
