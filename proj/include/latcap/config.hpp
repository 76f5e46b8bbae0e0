#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latcap/model.hpp"

namespace latcap {

// Line-oriented "key = value" text with [section] headers and '#' comments.
// Errors are ParseError carrying the 1-based line number.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;
};

std::vector<ConfigSection> parse_config_text(std::istream& in);

// Model configuration:
//
//   [model]
//   classes = 2                    # latent classes, default 1
//   family = recursive             # or loglinear
//   partition = captured_before    # none | captured_before | example1 | table
//   interactions = 1-2, 2-4        # loglinear only, list pairs (1-based)
//   lambda = 3                     # required with [restriction]
//
//   [latent]
//   covariates = sex               # covariates in the class 2..C logits
//
//   [partition]                    # only with partition = table
//   classes = 3
//   default = 1                    # optional fallback class
//   start = 1                      # first occasion (empty partial history)
//   01 = 2                         # partial history bits -> class
//
//   [restriction]                  # delta_c = M_c lambda, one line per cell
//   class1.delta1 = l1
//   class1.delta2 = l1 + l3
//   class2.delta1 = l2 - 0.5*l3*year
ModelSpec parse_model_config(std::istream& in);
ModelSpec load_model_config(const std::string& path);

// Simulation specification: a model configuration plus
//
//   [truth]
//   lists = 4
//   zeta = 0.5, -1                 # may be omitted when zeta is empty
//   lambda = -1, 1
//
//   [pool]                         # optional; default is one empty vector
//   covariates = sex, age
//   entry = 0, 1 @ 0.25            # covariate vector @ sampling weight
struct SimulationSpec {
  ModelSpec model;
  int lists = 0;
  Eigen::VectorXd beta;
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> pool;
  std::vector<double> weights;  // normalized to sum 1
};

SimulationSpec parse_simulation_spec(std::istream& in);
SimulationSpec load_simulation_spec(const std::string& path);

}  // namespace latcap
