#include <algorithm>
#include <numeric>

#include "binscatter/estimator.hpp"
#include "support.hpp"

using namespace binscatter;

namespace {

double sd(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0;
  for (double a : v) s += (a - m) * (a - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Dataset with_controls(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  std::normal_distribution<double> N;
  std::vector<double> x(n), y(n);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = U(rng);
    y[i] = std::sin(3 * x[i]) + N(rng);
    for (std::size_t k = 0; k < d; ++k) {
      const double v = N(rng) + x[i];
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
      y[i] += 0.5 * static_cast<double>(k + 1) * v;
    }
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < d; ++k) names.push_back("w" + std::to_string(k));
  return Dataset::from_columns(y, x, w, names);
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("piecewise constant least squares gives bin means") {
  const std::vector<double> x{0.1, 0.2, 0.3, 0.6, 0.7, 0.9};
  const std::vector<double> y{1, 2, 6, -1, 0, 4};
  const Dataset data = Dataset::from_columns(y, x);
  const FitResult f = fit(data, BasisSpec(0, 0, user_knots({0.1, 0.5, 0.9})), ModelSpec::least_squares());
  CHECK(f.converged);
  CHECK(predict_mu(f, 0.2) == doctest::Approx(3.0));
  CHECK(predict_mu(f, 0.6) == doctest::Approx(1.0));
  CHECK(predict_level(f, 0.6) == predict_mu(f, 0.6));
  CHECK(predict_mu(f, 0.25, 1) == 0.0);
  CHECK_ERROR(predict_marginal(f, 0.25), ErrorCode::InvalidDerivative);
  CHECK_ERROR(predict_mu(f, 2.0, 1), ErrorCode::OutOfSupport);
}

TEST_CASE("logit level and marginal effect at a zero index") {
  // one bin, linear: theta(x) = 4x - 2 so theta(0.5) = 0 and mu'(0.5) = 4
  const BasisSpec b(1, 1, user_knots({0, 1}));
  FitResult f{b, ModelSpec::logit(), EvalPoint{}, Eigen::Vector2d(-2, 2), Eigen::VectorXd(), {}, {}, 0, true,
              0.0, 0.0, 0.0, {}, {}};
  CHECK(predict_level(f, 0.5) == doctest::Approx(0.5));
  CHECK(predict_mu(f, 0.5, 1) == doctest::Approx(4.0));
  CHECK(predict_marginal(f, 0.5) == doctest::Approx(1.0));
  f.model = ModelSpec::least_squares();
  CHECK(predict_marginal(f, 0.3) == doctest::Approx(predict_mu(f, 0.3, 1)));
}

TEST_CASE("stationarity at convergence") {
  const Dataset data = with_controls(21, 1500, 2);
  std::vector<double> yb(data.n());
  for (std::size_t i = 0; i < yb.size(); ++i) yb[i] = data.y[i] > 1.0 ? 1.0 : 0.0;
  const Dataset bin = Dataset::from_columns(yb, data.x, data.w_raw(), data.w_names);
  const BasisSpec basis(2, 2, quantile_knots(data.x, 6));
  for (const ModelSpec& m : {ModelSpec::least_squares(), ModelSpec::logit(), ModelSpec::huber(1.0)}) {
    const Dataset& d = m.family == Family::Logit ? bin : data;
    const FitResult f = fit(d, basis, m);
    const NewtonSystem sys = newton_system(d, basis, m, f.beta, f.gamma);
    const double g = std::max(sys.grad_beta.cwiseAbs().maxCoeff(), sys.grad_gamma.cwiseAbs().maxCoeff());
    CHECK(g <= 1e-6 * static_cast<double>(d.n()) * sd(d.y));
  }
}

TEST_CASE("quantile fit is stationary for the final smoothing level") {
  const Dataset data = with_controls(22, 1200, 1);
  const BasisSpec basis(1, 1, quantile_knots(data.x, 5));
  const FitResult f = fit(data, basis, ModelSpec::quantile(0.7));
  CHECK(f.kappa > 0);
  const NewtonSystem sys = newton_system(data, basis, f.model, f.beta, f.gamma, f.kappa);
  CHECK(sys.grad_beta.cwiseAbs().maxCoeff() <= 1e-6 * static_cast<double>(data.n()) * sd(data.y));
  // the check-loss objective cannot be beaten by small coordinate moves
  const double base = objective(data, basis, f.model, f.beta, f.gamma);
  for (Eigen::Index k = 0; k < f.beta.size(); ++k) {
    for (double h : {-1e-3, 1e-3}) {
      Eigen::VectorXd b = f.beta;
      b(k) += h;
      CHECK(objective(data, basis, f.model, b, f.gamma) >= base - 1e-6);
    }
  }
}

TEST_CASE("control coefficients are recovered") {
  const Dataset data = with_controls(23, 4000, 2);
  const FitResult f = fit(data, BasisSpec(1, 1, quantile_knots(data.x, 8)), ModelSpec::least_squares());
  CHECK(std::abs(f.gamma(0) - 0.5) < 0.1);
  CHECK(std::abs(f.gamma(1) - 1.0) < 0.1);
  CHECK(control_offset(f) == doctest::Approx(0.0));
}

TEST_CASE("user evaluation point shifts the level by the control offset") {
  const Dataset data = with_controls(24, 800, 1);
  FitOptions opt;
  opt.eval_point = EvalPoint::user(data, {data.w_means[0] + 2.0});
  const BasisSpec b(0, 0, quantile_knots(data.x, 4));
  const FitResult at_mean = fit(data, b, ModelSpec::least_squares());
  const FitResult shifted = fit(data, b, ModelSpec::least_squares(), opt);
  CHECK(predict_level(shifted, 0.5) - predict_level(at_mean, 0.5) == doctest::Approx(2.0 * at_mean.gamma(0)));
  CHECK_ERROR(EvalPoint::user(data, {1.0, 2.0}), ErrorCode::InvalidArgument);
  const EvalPoint med = EvalPoint::median(data);
  CHECK(med.tag == EvalTag::Median);
  CHECK(med.values.size() == 1);
}

TEST_CASE("least squares is affine equivariant") {
  const auto s = testing::uniform_sample(25, 700, [](double x) { return x * x; });
  const BasisSpec b(2, 2, quantile_knots(s.x, 5));
  const FitResult f = fit(Dataset::from_columns(s.y, s.x), b, ModelSpec::least_squares());
  std::vector<double> y2(s.y.size());
  for (std::size_t i = 0; i < y2.size(); ++i) y2[i] = -3.0 * s.y[i] + 7.0;
  const FitResult g = fit(Dataset::from_columns(y2, s.x), b, ModelSpec::least_squares());
  for (double x : {0.05, 0.3, 0.77}) {
    CHECK(std::abs(predict_level(g, x) - (-3.0 * predict_level(f, x) + 7.0)) <= 1e-10);
  }
}

TEST_CASE("banded Newton step equals a dense solve") {
  const Dataset data = with_controls(26, 500, 3);
  const BasisSpec basis(3, 3, quantile_knots(data.x, 9));
  const auto K = static_cast<Eigen::Index>(basis.dimension());
  const Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(K, -1, 1);
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(3, 0.2);
  const NewtonSystem sys = newton_system(data, basis, ModelSpec::least_squares(), beta, gamma);
  const auto step = solve_block(sys.hessian, -sys.grad_beta, -sys.grad_gamma);
  REQUIRE(step.has_value());
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(data.n()), K + 3);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto row = eval_basis_dense(basis, data.x[i]);
    for (Eigen::Index k = 0; k < K; ++k) Z(static_cast<Eigen::Index>(i), k) = row[static_cast<std::size_t>(k)];
    Z.row(static_cast<Eigen::Index>(i)).tail(3) = data.w.row(static_cast<Eigen::Index>(i));
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.y.data(), static_cast<Eigen::Index>(data.n()));
  Eigen::VectorXd coef(K + 3);
  coef << beta, gamma;
  const Eigen::VectorXd dense = (Z.transpose() * Z).ldlt().solve(Z.transpose() * (y - Z * coef));
  Eigen::VectorXd got(K + 3);
  got << step->top, step->bottom;
  CHECK((dense - got).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, dense.cwiseAbs().maxCoeff()));
}

TEST_CASE("objective path never increases") {
  const auto s = testing::uniform_sample(27, 2000, [](double x) { return 2 * x; });
  std::vector<double> yb(s.y.size());
  for (std::size_t i = 0; i < yb.size(); ++i) yb[i] = s.y[i] > 1 ? 1 : 0;
  const BasisSpec b(1, 1, quantile_knots(s.x, 10));
  for (const ModelSpec& m : {ModelSpec::logit(), ModelSpec::huber(0.3)}) {
    const FitResult f = fit(Dataset::from_columns(m.family == Family::Logit ? yb : s.y, s.x), b, m);
    for (std::size_t k = 1; k < f.objective_path.size(); ++k) CHECK(f.objective_path[k] <= f.objective_path[k - 1]);
  }
}

TEST_CASE("constant controls are dropped with a warning") {
  const auto s = testing::uniform_sample(28, 300, [](double x) { return x; });
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(300, 1, 4.0);
  const Dataset data = Dataset::from_columns(s.y, s.x, w, {"c"});
  const FitResult f = fit(data, BasisSpec(0, 0, quantile_knots(s.x, 3)), ModelSpec::least_squares());
  CHECK(f.gamma(0) == 0.0);
  REQUIRE(!f.warnings.empty());
  CHECK(f.warnings.front().find("constant") != std::string::npos);
}

TEST_CASE("infeasible fits are reported") {
  const std::vector<double> x{0.0, 0.1, 0.2, 0.9, 1.0};
  const std::vector<double> y{1, 2, 3, 4, 5};
  const Dataset data = Dataset::from_columns(y, x);
  CHECK_ERROR(fit(data, BasisSpec(0, 0, user_knots({0, 0.4, 0.6, 1})), ModelSpec::least_squares()),
              ErrorCode::SingularSystem);
  CHECK_ERROR(fit(data, BasisSpec(1, 0, user_knots({0, 0.3, 0.6, 1})), ModelSpec::least_squares()),
              ErrorCode::SingularSystem);
  const std::vector<double> bad{0, 1, 2, 0, 1};
  CHECK_ERROR(fit(Dataset::from_columns(bad, x), BasisSpec(0, 0, user_knots({0, 1})), ModelSpec::logit()),
              ErrorCode::DomainError);
}

TEST_CASE("controls collinear with the basis are singular") {
  const auto s = testing::uniform_sample(29, 400, [](double x) { return x; });
  Eigen::MatrixXd w(400, 1);
  for (Eigen::Index i = 0; i < 400; ++i) w(i, 0) = s.x[static_cast<std::size_t>(i)] < 0.5 ? 1.0 : 0.0;
  const Dataset data = Dataset::from_columns(s.y, s.x, w, {"step"});
  CHECK_ERROR(fit(data, BasisSpec(0, 0, user_knots({0, 0.5, 1})), ModelSpec::least_squares()),
              ErrorCode::SingularSystem);
}

}
