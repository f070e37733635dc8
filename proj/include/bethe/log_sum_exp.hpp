#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace bethe {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Streaming log-sum-exp with a running maximum. -inf is the identity.
class LogSumExp {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= max_) {
      scaled_ += std::exp(x - max_);
    } else {
      scaled_ = scaled_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }

  void merge(const LogSumExp& other) {
    if (other.max_ == kNegInf) return;
    if (max_ == kNegInf) {
      *this = other;
    } else if (other.max_ <= max_) {
      scaled_ += other.scaled_ * std::exp(other.max_ - max_);
    } else {
      scaled_ = scaled_ * std::exp(max_ - other.max_) + other.scaled_;
      max_ = other.max_;
    }
  }

  double value() const {
    return max_ == kNegInf ? kNegInf : max_ + std::log(scaled_);
  }

  double max() const { return max_; }

 private:
  double max_ = kNegInf;
  double scaled_ = 0.0;
};

inline double log_sum_exp(std::span<const double> xs) {
  LogSumExp acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace bethe
