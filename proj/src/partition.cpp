#include "binscatter/partition.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binscatter/error.hpp"

namespace binscatter {

std::string_view to_string(BinningScheme scheme) noexcept {
  switch (scheme) {
    case BinningScheme::QuantileSpaced: return "qs";
    case BinningScheme::EvenlySpaced: return "es";
    case BinningScheme::UserSupplied: return "user";
  }
  return "unknown";
}

Partition::Partition(std::vector<double> knots, BinningScheme scheme)
    : knots_(std::move(knots)), scheme_(scheme) {
  if (knots_.size() < 2) {
    throw Error(ErrorCode::DegeneratePartition, "a partition needs at least two knots");
  }
  for (std::size_t j = 0; j < knots_.size(); ++j) {
    if (!std::isfinite(knots_[j])) {
      throw Error(ErrorCode::DegeneratePartition, "knots must be finite");
    }
    if (j > 0 && !(knots_[j] > knots_[j - 1])) {
      std::ostringstream msg;
      msg << "knots are not strictly increasing at position " << j << " (" << knots_[j - 1]
          << " >= " << knots_[j] << "); reduce the number of bins";
      throw Error(ErrorCode::DegeneratePartition, msg.str());
    }
  }
}

std::size_t Partition::bin_of(double x) const {
  if (!contains(x)) {
    std::ostringstream msg;
    msg << "x = " << x << " is outside the partition support [" << lower() << ", " << upper()
        << "]";
    throw Error(ErrorCode::OutOfSupport, msg.str());
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const auto idx = static_cast<std::size_t>(it - knots_.begin());
  // idx is the first knot strictly greater than x; x == upper() gives idx == size.
  return std::min(idx, knots_.size() - 1) - 1;
}

Partition quantile_knots(std::span<const double> x, std::size_t nbins) {
  if (nbins == 0) throw Error(ErrorCode::InvalidArgument, "number of bins must be positive");
  if (x.empty()) throw Error(ErrorCode::EmptyData, "cannot partition an empty sample");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> knots(nbins + 1);
  knots.front() = sorted.front();
  knots.back() = sorted.back();
  for (std::size_t j = 1; j < nbins; ++j) {
    const std::size_t rank = (n * j + nbins - 1) / nbins;  // ceil(n j / J), one-based
    knots[j] = sorted[std::max<std::size_t>(rank, 1) - 1];
  }
  return Partition(std::move(knots), BinningScheme::QuantileSpaced);
}

Partition even_knots(std::span<const double> x, std::size_t nbins) {
  if (nbins == 0) throw Error(ErrorCode::InvalidArgument, "number of bins must be positive");
  if (x.empty()) throw Error(ErrorCode::EmptyData, "cannot partition an empty sample");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (!(*hi > *lo)) {
    throw Error(ErrorCode::DegeneratePartition, "x has zero range; cannot build even bins");
  }
  std::vector<double> knots(nbins + 1);
  const double span = *hi - *lo;
  for (std::size_t j = 0; j <= nbins; ++j) {
    knots[j] = *lo + span * static_cast<double>(j) / static_cast<double>(nbins);
  }
  knots.back() = *hi;
  return Partition(std::move(knots), BinningScheme::EvenlySpaced);
}

Partition user_knots(std::vector<double> knots) {
  return Partition(std::move(knots), BinningScheme::UserSupplied);
}

std::vector<std::size_t> assign_bins(const Partition& part, std::span<const double> x) {
  std::vector<std::size_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = part.bin_of(x[i]);
  return out;
}

std::vector<std::size_t> bin_counts(const Partition& part, std::span<const double> x) {
  std::vector<std::size_t> counts(part.nbins(), 0);
  for (double xi : x) ++counts[part.bin_of(xi)];
  return counts;
}

double quasi_uniform_ratio(const Partition& part) {
  double lo = part.width(0);
  double hi = lo;
  for (std::size_t j = 1; j < part.nbins(); ++j) {
    lo = std::min(lo, part.width(j));
    hi = std::max(hi, part.width(j));
  }
  return hi / lo;
}

}  // namespace binscatter
