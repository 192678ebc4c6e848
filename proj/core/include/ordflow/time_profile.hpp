#pragma once

#include <vector>

namespace ordflow {

// Nonnegative piecewise-linear function of time, constant beyond its end samples.
// integral(a, b) is the exact integral of the interpolant, so omega(t) = integral(0, t).
class TimeProfile {
 public:
  TimeProfile() : TimeProfile(0.0) {}
  explicit TimeProfile(double constant);
  TimeProfile(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;
  double integral(double a, double b) const;
  bool is_zero() const;
  double max() const;
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double primitive(double t) const;
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<double> cumulative_;
};

}  // namespace ordflow
