#include "binscatter/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binscatter/error.hpp"

namespace binscatter {

BasisSpec::BasisSpec(int degree, int smoothness, Partition partition)
    : degree_(degree), smoothness_(smoothness), partition_(std::move(partition)) {
  if (degree_ < 0) throw Error(ErrorCode::InvalidArgument, "degree must be nonnegative");
  if (smoothness_ != 0 && smoothness_ != degree_) {
    std::ostringstream msg;
    msg << "smoothness " << smoothness_ << " with degree " << degree_
        << " is not supported; use 0 (piecewise) or the degree (B-spline)";
    throw Error(ErrorCode::UnsupportedSmoothness, msg.str());
  }
}

std::size_t BasisSpec::dimension() const noexcept {
  const auto J = partition_.nbins();
  const auto p = static_cast<std::size_t>(degree_);
  const auto s = static_cast<std::size_t>(smoothness_);
  return (p + 1) * J - s * (J - 1);
}

BasisSpec BasisSpec::raised() const {
  return BasisSpec(degree_ + 1, is_spline() ? degree_ + 1 : 0, partition_);
}

double BasisRow::dot(std::span<const double> coef) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) acc += values[k] * coef[offset + k];
  return acc;
}

namespace {

void check_derivative(const BasisSpec& spec, int deriv) {
  if (deriv < 0 || deriv > spec.degree()) {
    std::ostringstream msg;
    msg << "derivative order " << deriv << " exceeds basis degree " << spec.degree();
    throw Error(ErrorCode::InvalidDerivative, msg.str());
  }
}

BasisRow eval_piecewise(const BasisSpec& spec, std::size_t bin, double x, int deriv) {
  const Partition& part = spec.partition();
  const int p = spec.degree();
  const double h = part.width(bin);
  const double t = (x - part.knots()[bin]) / h;
  const double scale = std::sqrt(static_cast<double>(part.nbins()));

  BasisRow row;
  row.offset = bin * static_cast<std::size_t>(p + 1);
  row.values.assign(static_cast<std::size_t>(p + 1), 0.0);
  for (int q = deriv; q <= p; ++q) {
    // d^v/dx^v t^q = q!/(q-v)! t^(q-v) / h^v
    double falling = 1.0;
    for (int r = 0; r < deriv; ++r) falling *= static_cast<double>(q - r);
    row.values[static_cast<std::size_t>(q)] =
        scale * falling * std::pow(t, q - deriv) / std::pow(h, deriv);
  }
  return row;
}

// Derivatives of the p+1 nonzero B-splines on one span (de Boor / Cox recurrence
// with the triangular table of knot differences).
BasisRow eval_spline(const BasisSpec& spec, std::size_t bin, double x, int deriv) {
  const Partition& part = spec.partition();
  const int p = spec.degree();
  const auto& tau = part.knots();
  const auto J = static_cast<long>(part.nbins());

  // Extended knot vector with (p+1)-fold boundary knots, accessed lazily.
  auto knot = [&](long idx) {
    const long interior = idx - p;
    if (interior <= 0) return tau.front();
    if (interior >= J) return tau.back();
    return tau[static_cast<std::size_t>(interior)];
  };
  const long span = static_cast<long>(bin) + p;

  const auto P = static_cast<std::size_t>(p);
  std::vector<std::vector<double>> ndu(P + 1, std::vector<double>(P + 1, 0.0));
  std::vector<double> left(P + 1, 0.0), right(P + 1, 0.0);
  ndu[0][0] = 1.0;
  for (std::size_t j = 1; j <= P; ++j) {
    left[j] = x - knot(span + 1 - static_cast<long>(j));
    right[j] = knot(span + static_cast<long>(j)) - x;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  std::vector<double> ders(P + 1, 0.0);
  if (deriv == 0) {
    for (std::size_t j = 0; j <= P; ++j) ders[j] = ndu[j][P];
  } else {
    const auto n = static_cast<std::size_t>(deriv);
    std::vector<std::vector<double>> a(2, std::vector<double>(P + 1, 0.0));
    for (std::size_t r = 0; r <= P; ++r) {
      std::size_t s1 = 0, s2 = 1;
      std::fill(a[0].begin(), a[0].end(), 0.0);
      std::fill(a[1].begin(), a[1].end(), 0.0);
      a[0][0] = 1.0;
      double d = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        d = 0.0;
        const long rk = static_cast<long>(r) - static_cast<long>(k);
        const long pk = static_cast<long>(P) - static_cast<long>(k);
        if (r >= k) {
          a[s2][0] = a[s1][0] / ndu[static_cast<std::size_t>(pk + 1)][static_cast<std::size_t>(rk)];
          d = a[s2][0] * ndu[static_cast<std::size_t>(rk)][static_cast<std::size_t>(pk)];
        }
        const long j1 = rk >= -1 ? 1 : -rk;
        const long j2 = (static_cast<long>(r) - 1 <= pk) ? static_cast<long>(k) - 1
                                                          : static_cast<long>(P) - static_cast<long>(r);
        for (long j = j1; j <= j2; ++j) {
          const auto uj = static_cast<std::size_t>(j);
          a[s2][uj] = (a[s1][uj] - a[s1][uj - 1]) /
                      ndu[static_cast<std::size_t>(pk + 1)][static_cast<std::size_t>(rk + j)];
          d += a[s2][uj] * ndu[static_cast<std::size_t>(rk + j)][static_cast<std::size_t>(pk)];
        }
        if (static_cast<long>(r) <= pk) {
          a[s2][k] = -a[s1][k - 1] / ndu[static_cast<std::size_t>(pk + 1)][r];
          d += a[s2][k] * ndu[r][static_cast<std::size_t>(pk)];
        }
        std::swap(s1, s2);
      }
      ders[r] = d;
    }
    // p! / (p - v)!
    double factor = 1.0;
    for (std::size_t k = 0; k < n; ++k) factor *= static_cast<double>(P - k);
    for (std::size_t j = 0; j <= P; ++j) ders[j] *= factor;
  }

  const double scale = std::sqrt(static_cast<double>(J));
  BasisRow row;
  row.offset = bin;
  row.values.resize(P + 1);
  for (std::size_t j = 0; j <= P; ++j) row.values[j] = scale * ders[j];
  return row;
}

}  // namespace

BasisRow eval_basis(const BasisSpec& spec, double x, int deriv) {
  check_derivative(spec, deriv);
  const std::size_t bin = spec.partition().bin_of(x);
  if (spec.is_spline() && spec.degree() > 0) return eval_spline(spec, bin, x, deriv);
  return eval_piecewise(spec, bin, x, deriv);
}

std::vector<double> eval_basis_dense(const BasisSpec& spec, double x, int deriv) {
  const BasisRow row = eval_basis(spec, x, deriv);
  std::vector<double> out(spec.dimension(), 0.0);
  std::copy(row.values.begin(), row.values.end(),
            out.begin() + static_cast<std::ptrdiff_t>(row.offset));
  return out;
}

void DesignMatrix::push_back(const BasisRow& row) {
  offsets_.push_back(row.offset);
  values_.insert(values_.end(), row.values.begin(), row.values.end());
  values_.resize(offsets_.size() * width_, 0.0);
}

double DesignMatrix::row_dot(std::size_t i, std::span<const double> coef) const {
  const double* v = values_.data() + i * width_;
  const double* c = coef.data() + offsets_[i];
  double acc = 0.0;
  for (std::size_t k = 0; k < width_; ++k) acc += v[k] * c[k];
  return acc;
}

DesignMatrix design_matrix(const BasisSpec& spec, std::span<const double> x, int deriv) {
  check_derivative(spec, deriv);
  DesignMatrix out(spec.dimension(), static_cast<std::size_t>(spec.degree() + 1));
  for (double xi : x) out.push_back(eval_basis(spec, xi, deriv));
  return out;
}

}  // namespace binscatter
