#pragma once

namespace latcap {

// First and second derivatives of log Gamma for x > 0. Upward recurrence to
// x >= 10, then the asymptotic expansion; absolute error below 1e-13.
double digamma(double x);
double trigamma(double x);

// k-th derivative of log Gamma at v, k in {0, 1, 2}.
double log_gamma_derivative(int k, double v);

}  // namespace latcap
