#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace qdid {

/// Weighted empirical distribution: a right-continuous step CDF with a
/// left-continuous generalized-inverse quantile, inf { y : F(y) >= tau }.
///
/// Tied values are merged by summing their weights; zero-weight values do
/// not appear in the support.
class StepDistribution {
 public:
  StepDistribution() = default;

  static StepDistribution fit(std::span<const double> values,
                              std::optional<std::span<const double>> weights = std::nullopt) {
    if (values.empty()) {
      throw std::invalid_argument("StepDistribution::fit: at least one value is required");
    }
    if (weights && weights->size() != values.size()) {
      throw std::invalid_argument("StepDistribution::fit: weights and values differ in length");
    }

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    StepDistribution d;
    d.support_.reserve(values.size());
    d.mass_.reserve(values.size());
    for (std::size_t i : order) {
      const double w = weights ? (*weights)[i] : 1.0;
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("StepDistribution::fit: weights must be finite and non-negative");
      }
      if (!std::isfinite(values[i])) {
        throw std::invalid_argument("StepDistribution::fit: values must be finite");
      }
      if (w == 0.0) continue;
      if (!d.support_.empty() && d.support_.back() == values[i]) {
        d.mass_.back() += w;
      } else {
        d.support_.push_back(values[i]);
        d.mass_.push_back(w);
      }
    }
    if (d.support_.empty()) {
      throw std::invalid_argument("StepDistribution::fit: all weights are zero");
    }

    // The final running sum is the total, so the last cumulative value is exactly 1.
    d.cumulative_.resize(d.mass_.size());
    double running = 0.0;
    for (std::size_t k = 0; k < d.mass_.size(); ++k) {
      running += d.mass_[k];
      d.cumulative_[k] = running;
    }
    d.total_ = running;
    for (double& c : d.cumulative_) c /= d.total_;
    return d;
  }

  /// Mixture sum_k share_k * F_k over the merged support.
  static StepDistribution mixture(std::span<const StepDistribution> parts,
                                  std::span<const double> shares) {
    if (parts.empty() || parts.size() != shares.size()) {
      throw std::invalid_argument("StepDistribution::mixture: need one share per component");
    }
    if (parts.size() == 1) return parts.front();
    std::vector<double> values;
    std::vector<double> weights;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      for (std::size_t j = 0; j < parts[k].size(); ++j) {
        values.push_back(parts[k].support_[j]);
        weights.push_back(shares[k] * parts[k].probability(j));
      }
    }
    return fit(values, weights);
  }

  double cdf(double y) const {
    auto it = std::upper_bound(support_.begin(), support_.end(), y);
    if (it == support_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }

  double quantile(double tau) const {
    if (!(tau > 0.0 && tau <= 1.0)) {
      throw std::domain_error("StepDistribution::quantile: tau must lie in (0, 1]");
    }
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), tau);
    // tau <= 1 == cumulative_.back(), so the search always succeeds.
    return support_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  std::size_t size() const { return support_.size(); }
  double min() const { return support_.front(); }
  double max() const { return support_.back(); }
  double total_weight() const { return total_; }

  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  /// Unnormalized merged weights, aligned with support().
  const std::vector<double>& masses() const { return mass_; }

  double probability(std::size_t k) const { return mass_[k] / total_; }

 private:
  std::vector<double> support_;
  std::vector<double> mass_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

/// quantile(target, cdf(source, y)). Points strictly below the source
/// support map to the minimum of the target support.
inline double rank_transform(const StepDistribution& source, const StepDistribution& target,
                             double y) {
  const double u = source.cdf(y);
  if (u <= 0.0) return target.min();
  return target.quantile(u);
}

}  // namespace qdid
