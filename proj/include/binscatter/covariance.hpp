#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "binscatter/banded.hpp"
#include "binscatter/dataset.hpp"
#include "binscatter/estimator.hpp"

namespace binscatter {

enum class TargetKind { Mu, Level, Marginal };

/// Function of interest: mu^{(v)}(x), the level eta(theta(x, w)), or the
/// marginal effect eta'(theta(x, w)) mu'(x).
struct Target {
  TargetKind kind = TargetKind::Level;
  int v = 0;

  static Target mu(int v = 0) { return {TargetKind::Mu, v}; }
  static Target level() { return {TargetKind::Level, 0}; }
  static Target marginal() { return {TargetKind::Marginal, 1}; }

  /// `mu`, `mu:<v>`, `level`, `marginal`.
  static Target parse(const std::string& text);
  std::string to_string() const;
  /// Derivative order of the basis row used by this target.
  int derivative() const noexcept { return kind == TargetKind::Level ? 0 : v; }
};

/// Point estimate of the target at x.
double target_estimate(const FitResult& f, const Target& t, double x);

/// Dense row a(x) with Omega(x) = a' Q^{-1} Sigma Q^{-1} a.
Eigen::VectorXd target_row(const FitResult& f, const Target& t, double x);

struct CovarianceOptions {
  double curvature_floor = 1e-8;  // relative to the median positive weight
  double ridge = 1e-12;           // relative to tr(Sigma)/K
};

/// Per-observation curvature weights Upsilon * eta'^2 after flooring. For
/// quantile models this refits at tau +- h. Warnings are appended to `warnings`.
std::vector<double> curvature_weights(const Dataset& data, const FitResult& f,
                                      std::vector<std::string>& warnings,
                                      const CovarianceOptions& opt = {});

/// n^{-1} sum b b' weight_i.
SymmetricBandMatrix weighted_gram(const BasisSpec& basis, std::span<const double> x,
                                  std::span<const double> weights);

SymmetricBandMatrix gram(const Dataset& data, const FitResult& f);
SymmetricBandMatrix meat(const Dataset& data, const FitResult& f);

struct CovarianceSet {
  SymmetricBandMatrix Q;
  SymmetricBandMatrix Sigma;
  BandedCholesky Q_chol;
  Eigen::MatrixXd Sigma_half;  // K x K with Sigma_half Sigma_half' = Sigma
  std::size_t n = 0;
  std::vector<double> curvature;
  std::vector<std::string> warnings;

  Eigen::VectorXd solve_Q(const Eigen::VectorXd& a) const { return Q_chol.solve(a); }
};

/// Throws SingularSystem if Q is not positive definite.
CovarianceSet covariance(const Dataset& data, const FitResult& f, const CovarianceOptions& opt = {});

/// Factor of a symmetric PSD band matrix with ridge escalation and an
/// eigendecomposition fallback.
Eigen::MatrixXd psd_factor(const SymmetricBandMatrix& s, double ridge, std::vector<std::string>* warnings = nullptr);

/// a' Q^{-1} Sigma Q^{-1} a.
double omega(const CovarianceSet& cov, const Eigen::VectorXd& a);
double omega(const CovarianceSet& cov, const FitResult& f, const Target& t, double x);

}  // namespace binscatter
