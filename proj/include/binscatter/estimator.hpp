#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "binscatter/banded.hpp"
#include "binscatter/basis.hpp"
#include "binscatter/dataset.hpp"
#include "binscatter/models.hpp"

namespace binscatter {

enum class EvalTag { Mean, Median, User };

/// Value of the controls (original units) at which level and marginal effects
/// are reported.
struct EvalPoint {
  std::vector<double> values;
  EvalTag tag = EvalTag::Mean;

  static EvalPoint mean(const Dataset& data);
  static EvalPoint median(const Dataset& data);
  /// Throws InvalidArgument on a length mismatch or non-finite entries.
  static EvalPoint user(const Dataset& data, std::vector<double> values);
};

struct FitOptions {
  std::optional<EvalPoint> eval_point;  // defaults to the column means
  int max_iterations = 200;
  int max_halvings = 30;
  // Quantile smoothing schedule, as fractions of IQR(y).
  double kappa_start = 0.1;
  double kappa_end = 1e-6;
};

struct FitResult {
  BasisSpec basis;
  ModelSpec model;
  EvalPoint eval_point;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;           // length d; dropped columns hold 0
  std::vector<double> w_means;
  std::vector<double> theta;       // fitted index at each observation
  int iterations = 0;
  bool converged = false;
  double grad_inf_norm = 0.0;
  double objective = 0.0;
  double kappa = 0.0;              // final smoothing level (quantile only)
  std::vector<double> objective_path;  // after each accepted step, per smoothing stage
  std::vector<std::string> warnings;
};

/// Joint M-estimation of (beta, gamma) by damped Newton.
/// Throws SingularSystem, NoConvergence, DomainError.
FitResult fit(const Dataset& data, const BasisSpec& basis, const ModelSpec& model,
              const FitOptions& options = {});

/// b^{(v)}(x)' beta. Derivatives above the degree are identically zero.
double predict_mu(const FitResult& f, double x, int v = 0);
/// mu(x) + (w_eval - mean(w))' gamma.
double predict_theta(const FitResult& f, double x);
/// eta(theta(x, w_eval)).
double predict_level(const FitResult& f, double x);
/// eta'(theta(x, w_eval)) * mu'(x). Throws InvalidDerivative when p = 0.
double predict_marginal(const FitResult& f, double x);

/// (w_eval - mean(w))' gamma.
double control_offset(const FitResult& f);

/// Gradient and Hessian blocks of the sample objective at (beta, gamma).
/// Uses the exact (generalized) second derivative unless `irls` is set.
struct NewtonSystem {
  BlockSystem hessian;
  Eigen::VectorXd grad_beta;
  Eigen::VectorXd grad_gamma;
  double value = 0.0;
};

NewtonSystem newton_system(const Dataset& data, const BasisSpec& basis, const ModelSpec& model,
                           const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma,
                           double kappa = 0.0, bool irls = false);

/// Sample objective sum_i rho(y_i; eta(theta_i)) at given coefficients.
double objective(const Dataset& data, const BasisSpec& basis, const ModelSpec& model,
                 const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma);

}  // namespace binscatter
