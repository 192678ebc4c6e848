#include "ordflow/time_profile.hpp"

#include <algorithm>
#include <cmath>

#include "ordflow/error.hpp"

namespace ordflow {

TimeProfile::TimeProfile(double constant) : times_{0.0}, values_{constant}, cumulative_{0.0} {
  if (!(constant >= 0.0) || !std::isfinite(constant))
    throw DomainError("time profile values must be nonnegative and finite");
}

TimeProfile::TimeProfile(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty() || times_.size() != values_.size())
    throw DimensionError("time profile needs matching nonempty times and values");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
      throw DomainError("time profile values must be nonnegative and finite");
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw DomainError("time profile sample times must be strictly increasing");
  }
  cumulative_.assign(times_.size(), 0.0);
  for (std::size_t i = 1; i < times_.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] + 0.5 * (values_[i] + values_[i - 1]) * (times_[i] - times_[i - 1]);
}

double TimeProfile::operator()(double t) const {
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times_.begin());
  const double w = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
  return values_[j - 1] + w * (values_[j] - values_[j - 1]);
}

double TimeProfile::primitive(double t) const {
  if (t <= times_.front()) return (t - times_.front()) * values_.front();
  if (t >= times_.back()) return cumulative_.back() + (t - times_.back()) * values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times_.begin());
  return cumulative_[j - 1] + 0.5 * (values_[j - 1] + (*this)(t)) * (t - times_[j - 1]);
}

double TimeProfile::integral(double a, double b) const { return primitive(b) - primitive(a); }

bool TimeProfile::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double TimeProfile::max() const { return *std::max_element(values_.begin(), values_.end()); }

}  // namespace ordflow
