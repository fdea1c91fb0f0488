#pragma once

// Small numeric helpers shared across modules.

#include <span>
#include <limits>
#include <string>

namespace gwising {

// log(sum exp(x_i)); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> xs);
// log(exp(a) + exp(b))
double log_add_exp(double a, double b);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// Shortest round-trippable decimal ("%.17g").
std::string format_real(double x);

// Streaming log-sum-exp accumulator.
class LogSumExp {
 public:
  void add(double x);
  double value() const;

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double scaled_ = 0.0;
};

}  // namespace gwising
