#include "gwising/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace gwising {

double log_sum_exp(std::span<const double> xs) {
  LogSumExp acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void LogSumExp::add(double x) {
  if (x == -std::numeric_limits<double>::infinity()) return;
  if (x <= max_) {
    scaled_ += std::exp(x - max_);
  } else {
    scaled_ = scaled_ * std::exp(max_ - x) + 1.0;
    max_ = x;
  }
}

double LogSumExp::value() const {
  if (scaled_ == 0.0) return -std::numeric_limits<double>::infinity();
  return max_ + std::log(scaled_);
}

}  // namespace gwising
