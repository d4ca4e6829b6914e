#include "binscatter/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "binscatter/error.hpp"

namespace binscatter {

namespace {

double column_median(Eigen::VectorXd col) {
  const auto n = col.size();
  std::vector<double> v(col.data(), col.data() + n);
  std::sort(v.begin(), v.end());
  const auto m = static_cast<std::size_t>(n);
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

double sample_sd(const std::vector<double>& y) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(y.size() > 1 ? y.size() - 1 : 1));
}

double interquartile_range(std::vector<double> y) {
  std::sort(y.begin(), y.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(y.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, y.size() - 1);
    return y[lo] + (pos - static_cast<double>(lo)) * (y[hi] - y[lo]);
  };
  return q(0.75) - q(0.25);
}

// Index theta = B beta + W gamma for every observation.
Eigen::VectorXd index_values(const DesignMatrix& B, const Eigen::MatrixXd& W,
                             const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  const auto n = static_cast<Eigen::Index>(B.rows());
  Eigen::VectorXd theta(n);
  const std::span<const double> coef(beta.data(), static_cast<std::size_t>(beta.size()));
  for (Eigen::Index i = 0; i < n; ++i) theta(i) = B.row_dot(static_cast<std::size_t>(i), coef);
  if (W.cols() > 0) theta += W * gamma;
  return theta;
}

double total_value(const ModelSpec& m, const std::vector<double>& y, const Eigen::VectorXd& theta,
                   double kappa) {
  double f = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    f += theta_loss(m, y[i], theta(static_cast<Eigen::Index>(i)), kappa).value;
  }
  return f;
}

NewtonSystem assemble(const DesignMatrix& B, const Eigen::MatrixXd& W, const std::vector<double>& y,
                      const ModelSpec& m, const Eigen::VectorXd& theta, double kappa, bool irls,
                      std::size_t bandwidth) {
  const auto K = static_cast<Eigen::Index>(B.cols());
  const auto d = W.cols();
  NewtonSystem sys{BlockSystem{SymmetricBandMatrix(B.cols(), bandwidth), Eigen::MatrixXd::Zero(K, d),
                               Eigen::MatrixXd::Zero(d, d)},
                   Eigen::VectorXd::Zero(K), Eigen::VectorXd::Zero(d), 0.0};
  Eigen::VectorXd h(static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd g(static_cast<Eigen::Index>(y.size()));
  const std::size_t width = B.width();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const LossTerms t = theta_loss(m, y[i], theta(ii), kappa);
    sys.value += t.value;
    const double hi = irls ? t.irls : t.hess;
    h(ii) = hi;
    g(ii) = t.grad;
    const auto row = B.row(i);
    const std::size_t off = B.offset(i);
    for (std::size_t k = 0; k < width; ++k) sys.grad_beta(static_cast<Eigen::Index>(off + k)) += t.grad * row[k];
    if (hi != 0.0) {
      sys.hessian.a.add_outer(off, row, hi);
      if (d > 0) {
        for (std::size_t k = 0; k < width; ++k) {
          sys.hessian.c.row(static_cast<Eigen::Index>(off + k)) += (hi * row[k]) * W.row(ii);
        }
      }
    }
  }
  if (d > 0) {
    sys.grad_gamma = W.transpose() * g;
    sys.hessian.d = W.transpose() * h.asDiagonal() * W;
  }
  return sys;
}

struct StageOutcome {
  int iterations = 0;
  bool converged = false;
  double grad_inf = 0.0;
  double value = 0.0;
};

StageOutcome newton_stage(const DesignMatrix& B, const Eigen::MatrixXd& W, const std::vector<double>& y,
                          const ModelSpec& m, double kappa, std::size_t bandwidth,
                          const FitOptions& opt, double grad_tol, Eigen::VectorXd& beta,
                          Eigen::VectorXd& gamma, std::vector<double>& path) {
  StageOutcome out;
  Eigen::VectorXd theta = index_values(B, W, beta, gamma);
  // Huber and the smoothed check loss have a generalized Hessian that can be
  // singular; fall back to the IRLS majorizer in that case.
  const bool has_fallback = m.family == Family::Huber || m.family == Family::Quantile;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    NewtonSystem sys = assemble(B, W, y, m, theta, kappa, false, bandwidth);
    const double f = sys.value;
    out.value = f;
    out.grad_inf = std::max(sys.grad_beta.cwiseAbs().maxCoeff(),
                            sys.grad_gamma.size() ? sys.grad_gamma.cwiseAbs().maxCoeff() : 0.0);
    if (out.grad_inf <= grad_tol) {
      out.converged = true;
      return out;
    }

    bool accepted = false;
    double f_new = f;
    for (int attempt = 0; attempt < (has_fallback ? 2 : 1) && !accepted; ++attempt) {
      if (attempt == 1) sys = assemble(B, W, y, m, theta, kappa, true, bandwidth);
      const auto step = solve_block(sys.hessian, -sys.grad_beta, -sys.grad_gamma);
      if (!step) {
        if (has_fallback && attempt == 0) continue;
        throw Error(ErrorCode::SingularSystem,
                    "the weighted design is rank deficient; check for collinear controls or reduce "
                    "the number of bins");
      }
      const double slope = sys.grad_beta.dot(step->top) +
                           (sys.grad_gamma.size() ? sys.grad_gamma.dot(step->bottom) : 0.0);
      if (!(slope < 0.0)) continue;
      const Eigen::VectorXd dtheta = index_values(B, W, step->top, step->bottom);
      double t = 1.0;
      for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
        const Eigen::VectorXd trial = theta + t * dtheta;
        const double ft = total_value(m, y, trial, kappa);
        if (std::isfinite(ft) && ft <= f + 1e-4 * t * slope) {
          beta += t * step->top;
          if (gamma.size()) gamma += t * step->bottom;
          theta = trial;
          f_new = ft;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      // No descent available at machine precision: stationary for practical purposes.
      out.converged = true;
      return out;
    }
    ++out.iterations;
    path.push_back(f_new);
    out.value = f_new;
    if (f - f_new <= 1e-12 * std::max(std::abs(f), 1e-300)) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace

EvalPoint EvalPoint::mean(const Dataset& data) { return {data.w_means, EvalTag::Mean}; }

EvalPoint EvalPoint::median(const Dataset& data) {
  const Eigen::MatrixXd raw = data.w_raw();
  EvalPoint ep{{}, EvalTag::Median};
  for (Eigen::Index j = 0; j < raw.cols(); ++j) ep.values.push_back(column_median(raw.col(j)));
  return ep;
}

EvalPoint EvalPoint::user(const Dataset& data, std::vector<double> values) {
  if (values.size() != data.d()) {
    std::ostringstream msg;
    msg << "evaluation point has " << values.size() << " entries but there are " << data.d()
        << " controls";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "evaluation point must be finite");
  }
  return {std::move(values), EvalTag::User};
}

NewtonSystem newton_system(const Dataset& data, const BasisSpec& basis, const ModelSpec& model,
                           const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma, double kappa,
                           bool irls) {
  const DesignMatrix B = design_matrix(basis, data.x);
  const Eigen::VectorXd theta = index_values(B, data.w, beta, gamma);
  return assemble(B, data.w, data.y, model, theta, kappa, irls,
                  static_cast<std::size_t>(basis.degree()));
}

double objective(const Dataset& data, const BasisSpec& basis, const ModelSpec& model,
                 const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma) {
  const DesignMatrix B = design_matrix(basis, data.x);
  const Eigen::VectorXd theta = index_values(B, data.w, beta, gamma);
  double f = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) f += rho(model, data.y[i], theta(static_cast<Eigen::Index>(i)));
  return f;
}

FitResult fit(const Dataset& data, const BasisSpec& basis, const ModelSpec& model,
              const FitOptions& options) {
  for (double yi : data.y) check_outcome(model, yi);
  const std::size_t K = basis.dimension();
  const std::size_t n = data.n();

  const auto counts = bin_counts(basis.partition(), data.x);
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) {
      std::ostringstream msg;
      msg << "bin " << j << " of " << counts.size() << " has no observations; reduce the number of bins";
      throw Error(ErrorCode::SingularSystem, msg.str());
    }
  }

  FitResult res{basis, model, options.eval_point ? *options.eval_point : EvalPoint::mean(data),
                Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K)),
                Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.d())), data.w_means,
                {}, 0, false, 0.0, 0.0, 0.0, {}, {}};
  if (res.eval_point.values.size() != data.d()) {
    throw Error(ErrorCode::InvalidArgument, "evaluation point does not match the number of controls");
  }

  // Constant controls carry no information once centered; drop them.
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < data.w.cols(); ++j) {
    const double scale = std::max(1.0, std::abs(data.w_means[static_cast<std::size_t>(j)]));
    if (data.w.col(j).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      res.warnings.push_back("control '" + data.w_names[static_cast<std::size_t>(j)] +
                             "' is constant and was dropped");
    } else {
      active.push_back(j);
    }
  }
  Eigen::MatrixXd W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) W.col(static_cast<Eigen::Index>(k)) = data.w.col(active[k]);

  if (n <= K + active.size()) {
    std::ostringstream msg;
    msg << "n = " << n << " does not exceed the number of parameters " << K + active.size()
        << "; reduce the number of bins or the degree";
    throw Error(ErrorCode::SingularSystem, msg.str());
  }

  const DesignMatrix B = design_matrix(basis, data.x);
  const auto bandwidth = static_cast<std::size_t>(basis.degree());
  const double grad_tol = 1e-8 * static_cast<double>(n) * (1.0 + sample_sd(data.y));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(W.cols());

  StageOutcome st;
  if (model.family == Family::Quantile) {
    double scale = interquartile_range(data.y);
    if (!(scale > 0.0)) scale = sample_sd(data.y);
    if (!(scale > 0.0)) scale = 1.0;
    double kappa = options.kappa_start * scale;
    const double kappa_end = options.kappa_end * scale;
    int total = 0;
    while (true) {
      st = newton_stage(B, W, data.y, model, kappa, bandwidth, options, grad_tol, beta, gamma,
                        res.objective_path);
      total += st.iterations;
      if (!st.converged) break;
      res.kappa = kappa;
      if (kappa <= kappa_end * (1.0 + 1e-12)) break;
      kappa = std::max(0.5 * kappa, kappa_end);
    }
    st.iterations = total;
  } else {
    st = newton_stage(B, W, data.y, model, 0.0, bandwidth, options, grad_tol, beta, gamma,
                      res.objective_path);
  }
  if (!st.converged) {
    std::ostringstream msg;
    msg << "solver did not converge in " << options.max_iterations << " iterations (gradient "
        << st.grad_inf << ")";
    throw Error(ErrorCode::NoConvergence, msg.str());
  }

  res.beta = beta;
  for (std::size_t k = 0; k < active.size(); ++k) res.gamma(active[k]) = gamma(static_cast<Eigen::Index>(k));
  res.iterations = st.iterations;
  res.converged = true;
  res.grad_inf_norm = st.grad_inf;
  res.objective = st.value;
  const Eigen::VectorXd theta = index_values(B, W, beta, gamma);
  res.theta.assign(theta.data(), theta.data() + theta.size());

  const double ratio = quasi_uniform_ratio(basis.partition());
  if (ratio > kDefaultQuasiUniformWarning) {
    std::ostringstream msg;
    msg << "bin widths are far from uniform (max/min ratio " << ratio << ")";
    res.warnings.push_back(msg.str());
  }
  return res;
}

double control_offset(const FitResult& f) {
  double off = 0.0;
  for (std::size_t j = 0; j < f.w_means.size(); ++j) {
    off += (f.eval_point.values[j] - f.w_means[j]) * f.gamma(static_cast<Eigen::Index>(j));
  }
  return off;
}

double predict_mu(const FitResult& f, double x, int v) {
  if (v < 0) throw Error(ErrorCode::InvalidDerivative, "derivative order must be nonnegative");
  if (v > f.basis.degree()) {
    f.basis.partition().bin_of(x);  // support check
    return 0.0;
  }
  const BasisRow row = eval_basis(f.basis, x, v);
  return row.dot(std::span<const double>(f.beta.data(), static_cast<std::size_t>(f.beta.size())));
}

double predict_theta(const FitResult& f, double x) { return predict_mu(f, x, 0) + control_offset(f); }

double predict_level(const FitResult& f, double x) { return link(f.model, predict_theta(f, x)); }

double predict_marginal(const FitResult& f, double x) {
  if (f.basis.degree() < 1) {
    throw Error(ErrorCode::InvalidDerivative, "marginal effects need degree p >= 1");
  }
  return link_d1(f.model, predict_theta(f, x)) * predict_mu(f, x, 1);
}

}  // namespace binscatter
