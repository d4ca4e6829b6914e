#pragma once

#include <string>
#include <string_view>

namespace binscatter {

enum class Family { LeastSquares, Logit, Quantile, Huber };

/// Loss family plus its tuning constant (quantile level or Huber threshold).
struct ModelSpec {
  Family family = Family::LeastSquares;
  double tau = 0.5;

  static ModelSpec least_squares() { return {Family::LeastSquares, 0.5}; }
  static ModelSpec logit() { return {Family::Logit, 0.5}; }
  static ModelSpec quantile(double tau);
  static ModelSpec huber(double tau);

  /// Parses `ls`, `logit`, `quantile:<tau>`, `huber:<tau>`.
  static ModelSpec parse(std::string_view text);
  std::string to_string() const;

  bool identity_link() const noexcept { return family != Family::Logit; }
};

double logistic(double theta) noexcept;

/// Inverse link eta(theta) and its first two derivatives.
double link(const ModelSpec& m, double theta) noexcept;
double link_d1(const ModelSpec& m, double theta) noexcept;
double link_d2(const ModelSpec& m, double theta) noexcept;

/// Throws DomainError if y is not admissible for the family.
void check_outcome(const ModelSpec& m, double y);

/// rho(y; eta(theta)). Least squares uses the 1/2-scaled loss.
double rho(const ModelSpec& m, double y, double theta);

/// Derivative of the loss with respect to eta.
double psi(const ModelSpec& m, double y, double eta);
/// psi(y, eta) = psi_dagger(y - eta) * psi_ddagger(eta).
double psi_dagger(const ModelSpec& m, double r) noexcept;
double psi_ddagger(const ModelSpec& m, double eta);

/// Per-observation curvature weight Upsilon * eta'(theta)^2 for the smooth
/// families. Quantile weights depend on refits and live in the covariance module.
double curvature_weight(const ModelSpec& m, double y, double theta);

/// psi(y, eta(theta))^2 * eta'(theta)^2.
double score_weight(const ModelSpec& m, double y, double theta);

/// Loss in theta used by the solver. For quantile, `kappa` > 0 selects the
/// Moreau envelope of the check function.
struct LossTerms {
  double value = 0.0;
  double grad = 0.0;  // d/dtheta
  double hess = 0.0;  // (generalized) second derivative, may be 0
  double irls = 0.0;  // strictly positive majorizing weight where available
};

LossTerms theta_loss(const ModelSpec& m, double y, double theta, double kappa = 0.0);

}  // namespace binscatter
