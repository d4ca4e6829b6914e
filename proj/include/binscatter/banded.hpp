#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace binscatter {

/// Symmetric matrix with `bandwidth` nonzero super-diagonals. Only the lower
/// band is stored: entry (i, i-k) for k = 0..bandwidth.
class SymmetricBandMatrix {
 public:
  SymmetricBandMatrix(std::size_t size, std::size_t bandwidth);

  std::size_t size() const noexcept { return size_; }
  std::size_t bandwidth() const noexcept { return bw_; }

  /// Entry (i, j); zero outside the band.
  double operator()(std::size_t i, std::size_t j) const;
  /// Reference to the stored entry for |i-j| <= bandwidth.
  double& at(std::size_t i, std::size_t j);

  /// this += weight * row row' for a contiguous row starting at `offset`.
  void add_outer(std::size_t offset, std::span<const double> row, double weight);

  void scale(double factor);
  double trace() const;
  void add_to_diagonal(double value);

  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;

 private:
  std::size_t size_;
  std::size_t bw_;
  std::vector<double> data_;  // row-major, (bw+1) entries per row
};

/// Banded Cholesky factor L with A = L L'. L keeps the bandwidth of A.
class BandedCholesky {
 public:
  /// Returns nullopt when A is not numerically positive definite (a pivot is
  /// not larger than rel_tol times the largest diagonal entry of A).
  static std::optional<BandedCholesky> factor(const SymmetricBandMatrix& a,
                                              double rel_tol = 1e-13);

  std::size_t size() const noexcept { return size_; }
  std::size_t bandwidth() const noexcept { return bw_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  /// L^{-1} b
  Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;
  /// L' x
  Eigen::VectorXd multiply_upper(const Eigen::VectorXd& x) const;

  double lower(std::size_t i, std::size_t j) const;
  Eigen::MatrixXd lower_dense() const;
  double min_pivot() const noexcept { return min_pivot_; }
  double max_pivot() const noexcept { return max_pivot_; }

 private:
  BandedCholesky(std::size_t size, std::size_t bw) : size_(size), bw_(bw) {}

  std::size_t size_;
  std::size_t bw_;
  std::vector<double> l_;
  double min_pivot_ = 0.0;
  double max_pivot_ = 0.0;
};

/// Block system [A C; C' D] with A banded SPD (K x K), C dense K x d and D dense
/// d x d. Solved by a banded factorization of A and a dense Cholesky of the
/// Schur complement D - C' A^{-1} C.
struct BlockSystem {
  SymmetricBandMatrix a;
  Eigen::MatrixXd c;
  Eigen::MatrixXd d;
};

struct BlockSolution {
  Eigen::VectorXd top;     // length K
  Eigen::VectorXd bottom;  // length d
};

/// Returns nullopt when A or the Schur complement is singular.
std::optional<BlockSolution> solve_block(const BlockSystem& sys, const Eigen::VectorXd& rhs_top,
                                         const Eigen::VectorXd& rhs_bottom);

}  // namespace binscatter
