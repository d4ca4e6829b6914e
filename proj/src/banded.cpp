#include "binscatter/banded.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace binscatter {

SymmetricBandMatrix::SymmetricBandMatrix(std::size_t size, std::size_t bandwidth)
    : size_(size), bw_(bandwidth), data_(size * (bandwidth + 1), 0.0) {}

double SymmetricBandMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i < j) std::swap(i, j);
  if (i - j > bw_) return 0.0;
  return data_[i * (bw_ + 1) + (i - j)];
}

double& SymmetricBandMatrix::at(std::size_t i, std::size_t j) {
  if (i < j) std::swap(i, j);
  assert(i - j <= bw_);
  return data_[i * (bw_ + 1) + (i - j)];
}

void SymmetricBandMatrix::add_outer(std::size_t offset, std::span<const double> row,
                                    double weight) {
  const std::size_t w = row.size();
  for (std::size_t a = 0; a < w; ++a) {
    const double ra = weight * row[a];
    if (ra == 0.0) continue;
    double* dst = data_.data() + (offset + a) * (bw_ + 1);
    for (std::size_t b = 0; b <= a; ++b) dst[a - b] += ra * row[b];
  }
}

void SymmetricBandMatrix::scale(double factor) {
  for (double& v : data_) v *= factor;
}

double SymmetricBandMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < size_; ++i) t += data_[i * (bw_ + 1)];
  return t;
}

void SymmetricBandMatrix::add_to_diagonal(double value) {
  for (std::size_t i = 0; i < size_; ++i) data_[i * (bw_ + 1)] += value;
}

Eigen::MatrixXd SymmetricBandMatrix::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size_),
                                              static_cast<Eigen::Index>(size_));
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t k = 0; k <= std::min(bw_, i); ++k) {
      const double v = data_[i * (bw_ + 1) + k];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - k)) = v;
      out(static_cast<Eigen::Index>(i - k), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

Eigen::VectorXd SymmetricBandMatrix::multiply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (std::size_t i = 0; i < size_; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out(ii) += data_[i * (bw_ + 1)] * v(ii);
    for (std::size_t k = 1; k <= std::min(bw_, i); ++k) {
      const auto jj = static_cast<Eigen::Index>(i - k);
      const double a = data_[i * (bw_ + 1) + k];
      out(ii) += a * v(jj);
      out(jj) += a * v(ii);
    }
  }
  return out;
}

std::optional<BandedCholesky> BandedCholesky::factor(const SymmetricBandMatrix& a,
                                                     double rel_tol) {
  const std::size_t n = a.size();
  const std::size_t bw = a.bandwidth();
  BandedCholesky f(n, bw);
  f.l_.assign(n * (bw + 1), 0.0);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
  if (!(max_diag > 0.0)) return std::nullopt;
  const double threshold = rel_tol * max_diag;

  auto L = [&](std::size_t i, std::size_t j) -> double& { return f.l_[i * (bw + 1) + (i - j)]; };
  f.min_pivot_ = std::numeric_limits<double>::infinity();
  f.max_pivot_ = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t jstart = i >= bw ? i - bw : 0;
    for (std::size_t j = jstart; j <= i; ++j) {
      double sum = a(i, j);
      const std::size_t kstart = std::max(jstart, j >= bw ? j - bw : 0);
      for (std::size_t k = kstart; k < j; ++k) sum -= L(i, k) * L(j, k);
      if (j == i) {
        if (!(sum > threshold) || !std::isfinite(sum)) return std::nullopt;
        const double piv = std::sqrt(sum);
        L(i, i) = piv;
        f.min_pivot_ = std::min(f.min_pivot_, sum);
        f.max_pivot_ = std::max(f.max_pivot_, sum);
      } else {
        L(i, j) = sum / L(j, j);
      }
    }
  }
  return f;
}

double BandedCholesky::lower(std::size_t i, std::size_t j) const {
  if (j > i || i - j > bw_) return 0.0;
  return l_[i * (bw_ + 1) + (i - j)];
}

Eigen::MatrixXd BandedCholesky::lower_dense() const {
  const auto n = static_cast<Eigen::Index>(size_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t k = 0; k <= std::min(bw_, i); ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - k)) =
          l_[i * (bw_ + 1) + k];
    }
  }
  return out;
}

Eigen::VectorXd BandedCholesky::solve_lower(const Eigen::VectorXd& b) const {
  Eigen::VectorXd y = b;
  for (std::size_t i = 0; i < size_; ++i) {
    double sum = y(static_cast<Eigen::Index>(i));
    const std::size_t jstart = i >= bw_ ? i - bw_ : 0;
    for (std::size_t j = jstart; j < i; ++j) {
      sum -= l_[i * (bw_ + 1) + (i - j)] * y(static_cast<Eigen::Index>(j));
    }
    y(static_cast<Eigen::Index>(i)) = sum / l_[i * (bw_ + 1)];
  }
  return y;
}

Eigen::VectorXd BandedCholesky::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = solve_lower(b);
  for (std::size_t ii = size_; ii-- > 0;) {
    double sum = x(static_cast<Eigen::Index>(ii));
    const std::size_t jend = std::min(size_ - 1, ii + bw_);
    for (std::size_t j = ii + 1; j <= jend; ++j) {
      sum -= l_[j * (bw_ + 1) + (j - ii)] * x(static_cast<Eigen::Index>(j));
    }
    x(static_cast<Eigen::Index>(ii)) = sum / l_[ii * (bw_ + 1)];
  }
  return x;
}

Eigen::MatrixXd BandedCholesky::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd out(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) out.col(c) = solve(Eigen::VectorXd(b.col(c)));
  return out;
}

Eigen::VectorXd BandedCholesky::multiply_upper(const Eigen::VectorXd& x) const {
  // (L' x)_j = sum_{i >= j} L(i, j) x_i
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < size_; ++i) {
    const double xi = x(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k <= std::min(bw_, i); ++k) {
      out(static_cast<Eigen::Index>(i - k)) += l_[i * (bw_ + 1) + k] * xi;
    }
  }
  return out;
}

std::optional<BlockSolution> solve_block(const BlockSystem& sys, const Eigen::VectorXd& rhs_top,
                                         const Eigen::VectorXd& rhs_bottom) {
  const auto chol = BandedCholesky::factor(sys.a);
  if (!chol) return std::nullopt;
  BlockSolution out;
  const Eigen::VectorXd a_inv_top = chol->solve(rhs_top);
  if (sys.d.rows() == 0) {
    out.top = a_inv_top;
    out.bottom = Eigen::VectorXd(0);
    return out;
  }
  const Eigen::MatrixXd a_inv_c = chol->solve(sys.c);
  const Eigen::MatrixXd schur = sys.d - sys.c.transpose() * a_inv_c;
  Eigen::LLT<Eigen::MatrixXd> llt(schur);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const double max_diag = sys.d.diagonal().cwiseAbs().maxCoeff();
  const Eigen::MatrixXd lmat = llt.matrixL();
  if (!(lmat.diagonal().array().square().minCoeff() > 1e-11 * std::max(max_diag, 1e-300))) {
    return std::nullopt;
  }
  out.bottom = llt.solve(rhs_bottom - sys.c.transpose() * a_inv_top);
  out.top = a_inv_top - a_inv_c * out.bottom;
  return out;
}

}  // namespace binscatter
