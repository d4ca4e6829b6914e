#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace binscatter {

/// Observations (y, x, w, group). Controls are stored centered; `w_means`
/// recovers the original units.
struct Dataset {
  std::vector<double> y;
  std::vector<double> x;
  Eigen::MatrixXd w;  // n x d, centered
  std::vector<std::string> w_names;
  std::vector<double> w_means;
  std::vector<std::string> group;  // empty when there are no labels
  std::size_t dropped_rows = 0;

  std::size_t n() const noexcept { return y.size(); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(w.cols()); }
  bool has_groups() const noexcept { return !group.empty(); }

  /// Builds a dataset from raw columns, validating sizes and finiteness and
  /// centering w. `w_raw` may have zero columns.
  static Dataset from_columns(std::vector<double> y, std::vector<double> x,
                              const Eigen::MatrixXd& w_raw = Eigen::MatrixXd(),
                              std::vector<std::string> w_names = {},
                              std::vector<std::string> group = {});

  /// Controls in original units.
  Eigen::MatrixXd w_raw() const;

  /// Rows selected by index, re-centered on the subset.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

}  // namespace binscatter
