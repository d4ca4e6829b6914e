#include "binscatter/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "binscatter/covariance.hpp"
#include "binscatter/error.hpp"

namespace binscatter {

namespace {

constexpr int kMaxPolyOrder = 8;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= static_cast<double>(i);
  return r;
}

void check_order(int m) {
  if (m < 0 || m > kMaxPolyOrder) {
    std::ostringstream msg;
    msg << "polynomial order " << m << " is not tabled (0.." << kMaxPolyOrder << ")";
    throw Error(ErrorCode::UnsupportedOrder, msg.str());
  }
}

double sample_variance(const std::vector<double>& y) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(y.size());
}

void check_orders(int p, int v) {
  if (p < 0) throw Error(ErrorCode::InvalidArgument, "degree must be nonnegative");
  if (v < 0 || v > p) {
    std::ostringstream msg;
    msg << "derivative order " << v << " must lie in [0, p] with p = " << p;
    throw Error(ErrorCode::InvalidDerivative, msg.str());
  }
}

// Shared tail: ceiling, cap, and degenerate-constant fallbacks.
void finish(SelectorResult& r, const Dataset& data, int p, int v) {
  const std::size_t n = data.n();
  const std::size_t cap = max_bins(n, p);
  const double var_y = sample_variance(data.y);
  if (!(r.bias > 1e-14 * std::max(var_y, std::numeric_limits<double>::min()))) {
    r.fallback = true;
    r.J_raw = std::pow(static_cast<double>(n), 1.0 / (2.0 * p + 3.0));
    r.warnings.push_back("bias constant is numerically zero; using J = ceil(n^(1/(2p+3)))");
  } else if (!(r.variance > 0.0)) {
    r.fallback = true;
    r.J_raw = static_cast<double>(cap);
    r.warnings.push_back("variance constant is zero; using the maximal number of bins");
  } else {
    r.J_raw = imse_bins(p, v, r.bias, r.variance, n);
  }
  double J = std::ceil(r.J_raw);
  if (!std::isfinite(J) || J > static_cast<double>(cap)) {
    std::ostringstream msg;
    msg << "selected J capped at " << cap << " (unrounded " << r.J_raw << ")";
    r.warnings.push_back(msg.str());
    J = static_cast<double>(cap);
  }
  r.J = static_cast<std::size_t>(std::max(1.0, J));
}

}  // namespace

std::vector<double> bernoulli_like_coefficients(PolyKind kind, int m) {
  check_order(m);
  std::vector<double> c(static_cast<std::size_t>(m + 1), 0.0);
  if (kind == PolyKind::RotBias) {
    const double sign = m % 2 == 0 ? 1.0 : -1.0;
    const double denom = binomial(2 * m, m);
    for (int k = 0; k <= m; ++k) {
      const double sk = k % 2 == 0 ? 1.0 : -1.0;
      c[static_cast<std::size_t>(k)] = sign * binomial(m, k) * binomial(m + k, k) * sk / denom;
    }
  } else {
    static constexpr double kBernoulliNumbers[kMaxPolyOrder + 1] = {
        1.0, -1.0 / 2.0, 1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0, 0.0, -1.0 / 30.0};
    for (int k = 0; k <= m; ++k) {
      c[static_cast<std::size_t>(m - k)] = binomial(m, k) * kBernoulliNumbers[k];
    }
  }
  return c;
}

double bernoulli_like_poly(PolyKind kind, int m, double z) {
  const auto c = bernoulli_like_coefficients(kind, m);
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
  return acc;
}

double integrate_product01(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) acc += a[i] * b[j] / static_cast<double>(i + j + 1);
  }
  return acc;
}

double variance_trace_factor(int p, int v) {
  check_orders(p, v);
  const int d = p + 1;
  Eigen::MatrixXd hilbert(d, d), deriv = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      hilbert(i, j) = 1.0 / static_cast<double>(i + j + 1);
      if (i >= v && j >= v) {
        const double ci = factorial(i) / factorial(i - v);
        const double cj = factorial(j) / factorial(j - v);
        deriv(i, j) = ci * cj / static_cast<double>(i + j - 2 * v + 1);
      }
    }
  }
  return hilbert.ldlt().solve(deriv).trace();
}

double imse_bins(int p, int v, double bias, double variance, std::size_t n) {
  const double e = 1.0 / (2.0 * p + 3.0);
  const double ratio = 2.0 * (p - v + 1) * bias / ((1.0 + 2.0 * v) * variance);
  return std::pow(ratio, e) * std::pow(static_cast<double>(n), e);
}

std::size_t max_bins(std::size_t n, int p) {
  return std::max<std::size_t>(1, n / (5 * static_cast<std::size_t>(p + 1)));
}

std::string to_string(SelectMethod m) { return m == SelectMethod::Rot ? "rot" : "dpi"; }

Partition make_partition(std::span<const double> x, BinningScheme scheme, std::size_t J,
                         const std::vector<double>& user) {
  switch (scheme) {
    case BinningScheme::QuantileSpaced: return quantile_knots(x, J);
    case BinningScheme::EvenlySpaced: return even_knots(x, J);
    case BinningScheme::UserSupplied: return user_knots(user);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown binning scheme");
}

SelectorResult rot_select(const Dataset& data, const ModelSpec& model, int p, int s, int v,
                          const RotOverrides& ov) {
  check_orders(p, v);
  if (s != 0 && s != p) {
    throw Error(ErrorCode::UnsupportedSmoothness, "smoothness must be 0 or p");
  }
  const int m = p + 1 - v;
  const double poly_int = [&] {
    const auto c = bernoulli_like_coefficients(PolyKind::RotBias, m);
    return integrate_product01(c, c) / (factorial(m) * factorial(m));
  }();
  const std::size_t n = data.n();
  const auto [lo_it, hi_it] = std::minmax_element(data.x.begin(), data.x.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorCode::DegeneratePartition, "x has zero range");

  for (const auto* vec : {&ov.sigma2, &ov.density, &ov.mu_deriv}) {
    if (*vec && (*vec)->size() != n) {
      throw Error(ErrorCode::InvalidArgument, "override length does not match the sample size");
    }
  }

  // Histogram density on ceil(n^{1/3}) even bins.
  const auto H = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9));
  const Partition hist = even_knots(data.x, H);
  const auto hist_bin = assign_bins(hist, data.x);
  std::vector<double> density;
  if (ov.density) {
    density = *ov.density;
  } else {
    const auto counts = bin_counts(hist, data.x);
    density.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      density[i] = static_cast<double>(counts[hist_bin[i]]) /
                   (static_cast<double>(n) * hist.width(hist_bin[i]));
    }
  }

  const bool need_sigma = !ov.variance_average && !ov.sigma2;
  const bool need_mu = !ov.bias_average && !ov.mu_deriv;
  std::optional<FitResult> global;
  if (need_sigma || need_mu) {
    const BasisSpec gb(p + 2, 0, Partition({lo, hi}, BinningScheme::EvenlySpaced));
    global = fit(data, gb, model);
  }

  SelectorResult r;
  r.method = SelectMethod::Rot;
  if (global) r.warnings = global->warnings;

  if (ov.variance_average) {
    r.variance = variance_trace_factor(p, v) * *ov.variance_average;
  } else {
    std::vector<double> sigma2;
    if (ov.sigma2) {
      sigma2 = *ov.sigma2;
    } else {
      // Squared working residual, averaged within histogram bins.
      std::vector<double> sum(H, 0.0);
      std::vector<std::size_t> cnt(H, 0);
      for (std::size_t i = 0; i < n; ++i) {
        double res = data.y[i] - link(model, global->theta[i]);
        if (model.family == Family::Logit) {
          const double e = link_d1(model, global->theta[i]);
          res /= std::max(e, 1e-10);
        }
        sum[hist_bin[i]] += res * res;
        ++cnt[hist_bin[i]];
      }
      sigma2.resize(n);
      for (std::size_t i = 0; i < n; ++i) sigma2[i] = sum[hist_bin[i]] / static_cast<double>(cnt[hist_bin[i]]);
    }
    double avg = 0.0;
    for (std::size_t i = 0; i < n; ++i) avg += sigma2[i] * std::pow(density[i], 2 * v);
    r.variance = variance_trace_factor(p, v) * avg / static_cast<double>(n);
  }

  if (ov.bias_average) {
    r.bias = poly_int * *ov.bias_average;
  } else {
    std::vector<double> mu;
    if (ov.mu_deriv) {
      mu = *ov.mu_deriv;
    } else {
      mu.resize(n);
      for (std::size_t i = 0; i < n; ++i) mu[i] = predict_mu(*global, data.x[i], p + 1);
    }
    double avg = 0.0;
    for (std::size_t i = 0; i < n; ++i) avg += mu[i] * mu[i] / std::pow(density[i], 2 * m);
    r.bias = poly_int * avg / static_cast<double>(n);
  }

  finish(r, data, p, v);
  return r;
}

SelectorResult dpi_select(const Dataset& data, const ModelSpec& model, int p, int s, int v,
                          BinningScheme scheme, std::optional<SelectorResult> preliminary, bool debias) {
  check_orders(p, v);
  check_order(p + 1);
  if (!preliminary) preliminary = rot_select(data, model, p, s, v);
  const std::size_t J = preliminary->J;
  const Partition part = make_partition(data.x, scheme, J);
  const BasisSpec basis(p, s, part);
  const std::size_t n = data.n();

  SelectorResult r;
  r.method = SelectMethod::Dpi;
  r.preliminary_J = J;

  const FitResult fp = fit(data, basis, model);
  const CovarianceSet cov = covariance(data, fp);
  r.warnings = fp.warnings;
  r.warnings.insert(r.warnings.end(), cov.warnings.begin(), cov.warnings.end());

  const double Jd = static_cast<double>(J);
  double vsum = 0.0;
  for (double xi : data.x) vsum += omega(cov, fp, Target::mu(v), xi);
  r.variance = std::pow(Jd, -(1.0 + 2.0 * v)) * vsum / static_cast<double>(n);

  const BasisSpec rb = basis.raised();
  const FitResult fr = fit(data, rb, model);
  const int m0 = p + 1;
  const int mv = p + 1 - v;
  const auto Kp = static_cast<Eigen::Index>(basis.dimension());
  const auto Kr = static_cast<Eigen::Index>(rb.dimension());

  // The leading error at x_i is linear in the raised coefficients:
  //   e_i = av_i c_i' beta - bv_i' Q^{-1} P beta,  P = n^{-1} sum b_k curv_k a0_k c_k'
  // with c the (p+1)-th derivative row of the raised basis. B is then beta' G beta.
  std::vector<double> a0(n), av(n);
  std::vector<BasisRow> c(n), b0(n), bv(n);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(Kp, Kr);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = data.x[i];
    const std::size_t bin = part.bin_of(xi);
    const double h = part.width(bin);
    const double t = (xi - part.knots()[bin]) / h;
    a0[i] = std::pow(h, m0) / factorial(m0) * bernoulli_like_poly(PolyKind::Bernoulli, m0, t);
    av[i] = std::pow(h, mv) / factorial(mv) * bernoulli_like_poly(PolyKind::Bernoulli, mv, t);
    c[i] = eval_basis(rb, xi, p + 1);
    b0[i] = eval_basis(basis, xi, 0);
    bv[i] = eval_basis(basis, xi, v);
    const double wgt = cov.curvature[i] * a0[i];
    for (std::size_t j = 0; j < b0[i].values.size(); ++j) {
      for (std::size_t k = 0; k < c[i].values.size(); ++k) {
        P(static_cast<Eigen::Index>(b0[i].offset + j), static_cast<Eigen::Index>(c[i].offset + k)) +=
            b0[i].values[j] * wgt * c[i].values[k];
      }
    }
  }
  P /= static_cast<double>(n);
  const Eigen::MatrixXd R = cov.Q_chol.solve(P);  // Kp x Kr

  Eigen::MatrixXd CC = Eigen::MatrixXd::Zero(Kr, Kr);  // sum av^2 c c'
  Eigen::MatrixXd CB = Eigen::MatrixXd::Zero(Kr, Kp);  // sum av c bv'
  Eigen::MatrixXd BB = Eigen::MatrixXd::Zero(Kp, Kp);  // sum bv bv'
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ci = c[i];
    const auto& bi = bv[i];
    for (std::size_t j = 0; j < ci.values.size(); ++j) {
      const auto rj = static_cast<Eigen::Index>(ci.offset + j);
      for (std::size_t k = 0; k < ci.values.size(); ++k) {
        CC(rj, static_cast<Eigen::Index>(ci.offset + k)) += av[i] * av[i] * ci.values[j] * ci.values[k];
      }
      for (std::size_t k = 0; k < bi.values.size(); ++k) {
        CB(rj, static_cast<Eigen::Index>(bi.offset + k)) += av[i] * ci.values[j] * bi.values[k];
      }
    }
    for (std::size_t j = 0; j < bi.values.size(); ++j) {
      for (std::size_t k = 0; k < bi.values.size(); ++k) {
        BB(static_cast<Eigen::Index>(bi.offset + j), static_cast<Eigen::Index>(bi.offset + k)) +=
            bi.values[j] * bi.values[k];
      }
    }
  }
  const Eigen::MatrixXd CBR = CB * R;
  Eigen::MatrixXd G = CC - CBR - CBR.transpose() + R.transpose() * BB * R;
  G /= static_cast<double>(n);

  const double scale = std::pow(Jd, 2.0 * mv);
  double quad = fr.beta.dot(G * fr.beta);
  if (debias) {
    // E[beta' G beta] exceeds the target by tr(G Var(beta)), Var(beta) = Q^{-1} Sigma Q^{-1} / n.
    const CovarianceSet cr = covariance(data, fr);
    const Eigen::MatrixXd X = cr.Q_chol.solve(cr.Sigma_half);
    quad -= (X.transpose() * G * X).trace() / static_cast<double>(n);
  }
  r.bias = scale * std::max(quad, 0.0);

  finish(r, data, p, v);
  return r;
}

int nearest_order(const std::vector<std::pair<int, std::size_t>>& candidates, std::size_t J_target) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "empty polynomial order grid");
  int best = candidates.front().first;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& [p, J] : candidates) {
    const double gap = std::abs(static_cast<double>(J) - static_cast<double>(J_target));
    if (gap < best_gap || (gap == best_gap && p < best)) {
      best = p;
      best_gap = gap;
    }
  }
  return best;
}

int p_select(const Dataset& data, const ModelSpec& model, std::size_t J_target, int v, int p_min,
             int p_max, bool spline, SelectMethod method, BinningScheme scheme) {
  if (p_min > p_max) throw Error(ErrorCode::InvalidArgument, "empty polynomial order grid");
  std::vector<std::pair<int, std::size_t>> candidates;
  for (int p = std::max(p_min, v); p <= p_max; ++p) {
    const int s = spline ? p : 0;
    const SelectorResult r = method == SelectMethod::Rot ? rot_select(data, model, p, s, v)
                                                         : dpi_select(data, model, p, s, v, scheme);
    candidates.emplace_back(p, r.J);
  }
  return nearest_order(candidates, J_target);
}

}  // namespace binscatter
