#include "binscatter/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binscatter/error.hpp"

namespace binscatter {

Target Target::parse(const std::string& text) {
  if (text == "level") return level();
  if (text == "marginal") return marginal();
  if (text == "mu") return mu(0);
  if (text.rfind("mu:", 0) == 0) {
    const std::string tail = text.substr(3);
    char* end = nullptr;
    const long v = std::strtol(tail.c_str(), &end, 10);
    if (!tail.empty() && end == tail.c_str() + tail.size() && v >= 0 && v < 64) {
      return mu(static_cast<int>(v));
    }
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown target '" + text + "' (expected level, marginal, mu or mu:<v>)");
}

std::string Target::to_string() const {
  switch (kind) {
    case TargetKind::Level: return "level";
    case TargetKind::Marginal: return "marginal";
    case TargetKind::Mu: return "mu:" + std::to_string(v);
  }
  return "level";
}

double target_estimate(const FitResult& f, const Target& t, double x) {
  switch (t.kind) {
    case TargetKind::Mu: return predict_mu(f, x, t.v);
    case TargetKind::Level: return predict_level(f, x);
    case TargetKind::Marginal: return predict_marginal(f, x);
  }
  return 0.0;
}

Eigen::VectorXd target_row(const FitResult& f, const Target& t, double x) {
  if (t.kind == TargetKind::Marginal && f.basis.degree() < 1) {
    throw Error(ErrorCode::InvalidDerivative, "marginal effects need degree p >= 1");
  }
  const std::vector<double> b = eval_basis_dense(f.basis, x, t.derivative());
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  if (t.kind != TargetKind::Mu) a *= link_d1(f.model, predict_theta(f, x));
  return a;
}

namespace {

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

std::vector<double> curvature_weights(const Dataset& data, const FitResult& f,
                                      std::vector<std::string>& warnings,
                                      const CovarianceOptions& opt) {
  const std::size_t n = data.n();
  std::vector<double> w(n);
  std::size_t invalid = 0;
  if (f.model.family == Family::Quantile) {
    const double tau = f.model.tau;
    const double h = std::min({0.1, tau, 1.0 - tau}) / 2.0;
    FitOptions fo;
    fo.eval_point = f.eval_point;
    const FitResult up = fit(data, f.basis, ModelSpec::quantile(tau + h), fo);
    const FitResult down = fit(data, f.basis, ModelSpec::quantile(tau - h), fo);
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = up.theta[i] - down.theta[i];
      if (diff > 0.0 && std::isfinite(diff)) {
        w[i] = 2.0 * h / diff;
      } else {
        w[i] = 0.0;
        ++invalid;
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) w[i] = curvature_weight(f.model, data.y[i], f.theta[i]);
  }

  std::vector<double> positive;
  for (double v : w) {
    if (v > 0.0 && std::isfinite(v)) positive.push_back(v);
  }
  if (positive.empty()) {
    throw Error(ErrorCode::SingularCurvature, "all curvature weights are zero");
  }
  const double floor = opt.curvature_floor * median_of(positive);
  std::size_t floored = 0;
  for (double& v : w) {
    if (!(v >= floor)) {
      v = floor;
      ++floored;
    }
  }
  // Zero weights are the normal generalized Hessian for Huber outliers.
  if (floored > 0 && f.model.family != Family::Huber) {
    std::ostringstream msg;
    msg << floored << " curvature weights were raised to the floor " << floor;
    if (invalid > 0) msg << " (" << invalid << " non-positive density quotients)";
    warnings.push_back(msg.str());
  }
  return w;
}

SymmetricBandMatrix weighted_gram(const BasisSpec& basis, std::span<const double> x,
                                  std::span<const double> weights) {
  SymmetricBandMatrix m(basis.dimension(), static_cast<std::size_t>(basis.degree()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const BasisRow row = eval_basis(basis, x[i], 0);
    m.add_outer(row.offset, row.values, weights[i]);
  }
  m.scale(1.0 / static_cast<double>(x.size()));
  return m;
}

SymmetricBandMatrix gram(const Dataset& data, const FitResult& f) {
  std::vector<std::string> ignored;
  const auto w = curvature_weights(data, f, ignored);
  return weighted_gram(f.basis, data.x, w);
}

SymmetricBandMatrix meat(const Dataset& data, const FitResult& f) {
  std::vector<double> w(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) w[i] = score_weight(f.model, data.y[i], f.theta[i]);
  return weighted_gram(f.basis, data.x, w);
}

Eigen::MatrixXd psd_factor(const SymmetricBandMatrix& s, double ridge, std::vector<std::string>* warnings) {
  const auto K = static_cast<Eigen::Index>(s.size());
  const double tr = s.trace();
  if (!(tr > 0.0)) return Eigen::MatrixXd::Zero(K, K);
  if (auto c = BandedCholesky::factor(s, 0.0)) return c->lower_dense();
  double eps = ridge * tr / static_cast<double>(K);
  for (int attempt = 0; attempt < 6; ++attempt, eps *= 10.0) {
    SymmetricBandMatrix r = s;
    r.add_to_diagonal(eps);
    if (auto c = BandedCholesky::factor(r, 0.0)) return c->lower_dense();
  }
  if (warnings) warnings->push_back("meat matrix factored by eigendecomposition");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.to_dense());
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

CovarianceSet covariance(const Dataset& data, const FitResult& f, const CovarianceOptions& opt) {
  std::vector<std::string> warnings;
  std::vector<double> curv = curvature_weights(data, f, warnings, opt);
  SymmetricBandMatrix Q = weighted_gram(f.basis, data.x, curv);
  auto chol = BandedCholesky::factor(Q);
  if (!chol) {
    throw Error(ErrorCode::SingularSystem,
                "the Gram matrix is not positive definite; reduce the number of bins");
  }
  SymmetricBandMatrix S = meat(data, f);
  Eigen::MatrixXd half = psd_factor(S, opt.ridge, &warnings);
  return CovarianceSet{std::move(Q), std::move(S), std::move(*chol), std::move(half), data.n(),
                       std::move(curv), std::move(warnings)};
}

double omega(const CovarianceSet& cov, const Eigen::VectorXd& a) {
  const Eigen::VectorXd s = cov.solve_Q(a);
  return std::max(0.0, s.dot(cov.Sigma.multiply(s)));
}

double omega(const CovarianceSet& cov, const FitResult& f, const Target& t, double x) {
  return omega(cov, target_row(f, t, x));
}

}  // namespace binscatter
