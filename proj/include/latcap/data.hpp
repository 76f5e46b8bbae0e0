#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace latcap {

inline constexpr int kMaxLists = 20;

struct CaptureRecord {
  std::vector<int> history;  // h_j = 1 if caught by list j
  std::vector<double> covariates;
};

// Units sharing one covariate vector. y[r - 1] counts configuration r,
// r = 1..2^J - 1 (the never-captured configuration has no slot).
struct Stratum {
  std::vector<double> x;
  int n = 0;
  std::vector<int> y;
};

struct Dataset {
  int lists = 0;
  std::vector<std::string> covariate_names;
  std::vector<Stratum> strata;
  int total = 0;  // captured units, sum of strata[i].n

  int configs() const { return 1 << lists; }
  int size() const { return static_cast<int>(strata.size()); }
  Eigen::VectorXd counts() const;
};

struct CaptureTable {
  std::vector<std::string> covariate_names;
  std::vector<CaptureRecord> records;
};

// Lexicographic index of a capture history with h_1 as the most significant
// bit, so 0 is the never-captured history.
int encode_history(std::span<const int> bits, int lists);
std::vector<int> decode_history(int index, int lists);

// Merges records with identical covariate vectors. Strata appear in order of
// first appearance.
Dataset stratify(std::span<const CaptureRecord> records, int lists,
                 std::vector<std::string> covariate_names = {});

CaptureTable parse_capture_csv(const std::string& path, int lists);
CaptureTable parse_capture_csv(std::istream& in, int lists);

// One row per captured unit, strata in order.
void write_capture_csv(std::ostream& out, const Dataset& data);

}  // namespace latcap
