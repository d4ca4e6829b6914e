#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace binscatter {

enum class BinningScheme { QuantileSpaced, EvenlySpaced, UserSupplied };

std::string_view to_string(BinningScheme scheme) noexcept;

/// Strictly increasing knots tau_0 < ... < tau_J. Bins are [tau_{j-1}, tau_j)
/// except the last, which is closed on the right.
class Partition {
 public:
  /// Validates strict increase; throws DegeneratePartition otherwise.
  Partition(std::vector<double> knots, BinningScheme scheme);

  std::size_t nbins() const noexcept { return knots_.size() - 1; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  BinningScheme scheme() const noexcept { return scheme_; }

  double lower() const noexcept { return knots_.front(); }
  double upper() const noexcept { return knots_.back(); }
  double width(std::size_t bin) const { return knots_[bin + 1] - knots_[bin]; }
  bool contains(double x) const noexcept { return x >= lower() && x <= upper(); }

  /// Zero-based index of the bin holding x. Throws OutOfSupport.
  std::size_t bin_of(double x) const;

 private:
  std::vector<double> knots_;
  BinningScheme scheme_;
};

/// Interior knots are order statistics x_(ceil(n j / J)), i.e. the generalized
/// inverse inf{u : F_n(u) >= j/J}; endpoints are the sample min and max.
Partition quantile_knots(std::span<const double> x, std::size_t nbins);

Partition even_knots(std::span<const double> x, std::size_t nbins);

Partition user_knots(std::vector<double> knots);

/// Zero-based bin index for every x.
std::vector<std::size_t> assign_bins(const Partition& part, std::span<const double> x);

std::vector<std::size_t> bin_counts(const Partition& part, std::span<const double> x);

/// max_j h_j / min_j h_j.
double quasi_uniform_ratio(const Partition& part);

inline constexpr double kDefaultQuasiUniformWarning = 50.0;

}  // namespace binscatter
