#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace ctpd::numeric {

/// log(1 + exp(x)) without overflow for large |x|.
inline double softplus(double x) {
  if (x > 0.0)
    return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Logistic sigmoid, evaluated branch-wise so neither tail overflows.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// -log sigmoid(x) == softplus(-x).
inline double neg_log_sigmoid(double x) { return softplus(-x); }

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty())
    return -std::numeric_limits<double>::infinity();
  double hi = xs[0];
  for (double x : xs)
    hi = x > hi ? x : hi;
  if (!std::isfinite(hi))
    return hi;
  double acc = 0.0;
  for (double x : xs)
    acc += std::exp(x - hi);
  return hi + std::log(acc);
}

/// Compensated (Neumaier) accumulator. Sequence rewards are sums of many
/// terms of mixed sign, and finite-difference checks at h = 1e-6 need the
/// rounding error of those sums well below h.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sum(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs)
    acc.add(x);
  return acc.value();
}

} // namespace ctpd::numeric
