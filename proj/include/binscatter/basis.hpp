#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "binscatter/partition.hpp"

namespace binscatter {

/// Piecewise polynomial (smoothness 0) or maximally smooth B-spline
/// (smoothness == degree) basis over a partition, scaled by sqrt(J).
class BasisSpec {
 public:
  /// Throws UnsupportedSmoothness unless smoothness is 0 or degree.
  BasisSpec(int degree, int smoothness, Partition partition);

  int degree() const noexcept { return degree_; }
  int smoothness() const noexcept { return smoothness_; }
  bool is_spline() const noexcept { return smoothness_ == degree_; }
  const Partition& partition() const noexcept { return partition_; }

  /// K = (p+1)J - s(J-1).
  std::size_t dimension() const noexcept;

  /// Same partition and smoothness family, degree raised by one (s = 0 stays
  /// piecewise, s = p becomes s = p+1). Degree 0 counts as s = p.
  BasisSpec raised() const;

 private:
  int degree_;
  int smoothness_;
  Partition partition_;
};

/// Nonzero entries of a basis vector. Support is always contiguous, so a row is
/// an offset plus at most p+1 values.
struct BasisRow {
  std::size_t offset = 0;
  std::vector<double> values;

  double dot(std::span<const double> coef) const;
};

/// v-th derivative of the basis at x. Throws OutOfSupport or InvalidDerivative.
BasisRow eval_basis(const BasisSpec& spec, double x, int deriv = 0);

/// Dense expansion of eval_basis, length K.
std::vector<double> eval_basis_dense(const BasisSpec& spec, double x, int deriv = 0);

/// Row-sparse n x K design matrix; row i holds width() values starting at
/// offset(i).
class DesignMatrix {
 public:
  DesignMatrix(std::size_t cols, std::size_t width) : cols_(cols), width_(width) {}

  void push_back(const BasisRow& row);

  std::size_t rows() const noexcept { return offsets_.size(); }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * width_, width_};
  }
  double row_dot(std::size_t i, std::span<const double> coef) const;

 private:
  std::size_t cols_;
  std::size_t width_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

DesignMatrix design_matrix(const BasisSpec& spec, std::span<const double> x, int deriv = 0);

}  // namespace binscatter
