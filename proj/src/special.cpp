#include "latcap/special.hpp"

#include <cmath>
#include <string>

#include "latcap/error.hpp"

namespace latcap {

namespace {

constexpr double kAsymptoticFloor = 10.0;

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(name) + " requires a positive finite argument, got " +
                      std::to_string(x));
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double shift = 0.0;
  while (x < kAsymptoticFloor) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // ln x - 1/(2x) - sum_k B_2k / (2k x^2k), six terms
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760))))));
  return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double shift = 0.0;
  while (x < kAsymptoticFloor) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1), six terms
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 6 -
           r * (1.0 / 30 -
                r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730))))));
  return shift + 1.0 / x + 0.5 * r + series / x;
}

double log_gamma_derivative(int k, double v) {
  switch (k) {
    case 0:
      require_positive(v, "log_gamma");
      return std::lgamma(v);
    case 1:
      return digamma(v);
    case 2:
      return trigamma(v);
    default:
      throw DomainError("log_gamma_derivative supports k in {0, 1, 2}");
  }
}

}  // namespace latcap
