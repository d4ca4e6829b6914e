#include "binscatter/models.hpp"
#include "support.hpp"

using namespace binscatter;

TEST_SUITE("models") {

TEST_CASE("loss values") {
  CHECK(rho(ModelSpec::least_squares(), 3, 1) == doctest::Approx(2.0));  // half-scaled squared error
  CHECK(rho(ModelSpec::quantile(0.5), 3, 1) == doctest::Approx(1.0));
  CHECK(rho(ModelSpec::quantile(0.25), 0, 1) == doctest::Approx(0.75));
  CHECK(rho(ModelSpec::huber(1), 3, 1) == doctest::Approx(3.0));
  CHECK(rho(ModelSpec::huber(1), 1.5, 1) == doctest::Approx(0.25));
  CHECK(rho(ModelSpec::logit(), 1, 0) == doctest::Approx(std::log(2.0)));
  CHECK(rho(ModelSpec::logit(), 0, 800) == doctest::Approx(800.0));
}

TEST_CASE("score values") {
  CHECK(psi(ModelSpec::quantile(0.25), 0, 1) == doctest::Approx(0.75));
  CHECK(psi(ModelSpec::least_squares(), 2.5, 2.5) == 0.0);
  CHECK(psi(ModelSpec::logit(), 1, 0.5) == doctest::Approx(-2.0));
  CHECK(psi(ModelSpec::huber(1), 3, 1) == doctest::Approx(-2.0));
  CHECK_ERROR(psi(ModelSpec::logit(), 1, 1.0), ErrorCode::DomainError);
}

TEST_CASE("curvature and score weights") {
  CHECK(curvature_weight(ModelSpec::least_squares(), 7, -3) == 1.0);
  CHECK(curvature_weight(ModelSpec::logit(), 1, 0) == doctest::Approx(0.25));
  CHECK(curvature_weight(ModelSpec::huber(1), 0.5, 0) == 2.0);
  CHECK(curvature_weight(ModelSpec::huber(1), 5, 0) == 0.0);
  CHECK(score_weight(ModelSpec::logit(), 1, 0) == doctest::Approx(0.25));
  CHECK(score_weight(ModelSpec::quantile(0.3), 0, 1) == doctest::Approx(0.49));
  CHECK(score_weight(ModelSpec::least_squares(), 3, 1) == doctest::Approx(4.0));
}

TEST_CASE("psi is the derivative of rho in eta") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0, 1);
  for (int k = 0; k < 500; ++k) {
    const double eta_id = 6 * U(rng) - 3, y_id = 6 * U(rng) - 3;
    const double eta_lg = 0.02 + 0.96 * U(rng), y_lg = U(rng) < 0.5 ? 0.0 : 1.0;
    struct Case {
      ModelSpec m;
      double y, eta;
    };
    for (const Case& c : {Case{ModelSpec::least_squares(), y_id, eta_id}, Case{ModelSpec::huber(0.8), y_id, eta_id},
                          Case{ModelSpec::logit(), y_lg, eta_lg}}) {
      if (c.m.family == Family::Huber && std::abs(std::abs(c.y - c.eta) - 0.8) < 1e-4) continue;
      auto r = [&](double e) { return rho(c.m, c.y, c.m.family == Family::Logit ? std::log(e / (1 - e)) : e); };
      const double d = 1e-6 * (1 + std::abs(c.eta));
      const double fd = (r(c.eta + d) - r(c.eta - d)) / (2 * d);
      const double an = psi(c.m, c.y, c.eta);
      CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("losses are convex in the index") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0, 1);
  for (const ModelSpec& m : {ModelSpec::least_squares(), ModelSpec::logit(), ModelSpec::quantile(0.3),
                             ModelSpec::huber(0.5)}) {
    for (int k = 0; k < 100; ++k) {
      const double y = m.family == Family::Logit ? (U(rng) < 0.5 ? 0.0 : 1.0) : 4 * U(rng) - 2;
      const double t1 = 8 * U(rng) - 4, t2 = 8 * U(rng) - 4, lam = U(rng);
      CHECK(rho(m, y, lam * t1 + (1 - lam) * t2) <= lam * rho(m, y, t1) + (1 - lam) * rho(m, y, t2) + 1e-12);
    }
  }
}

TEST_CASE("score factorizes through the residual") {
  const ModelSpec lg = ModelSpec::logit();
  const double eta = 0.3;
  CHECK(psi(lg, 1, eta) == doctest::Approx(psi_dagger(lg, 1 - eta) * psi_ddagger(lg, eta)));
  CHECK(psi_ddagger(ModelSpec::huber(1), 5) == 1.0);
  CHECK(psi_dagger(ModelSpec::quantile(0.4), -1) == doctest::Approx(0.6));
  CHECK(psi_dagger(ModelSpec::quantile(0.4), 1) == doctest::Approx(-0.4));
}

TEST_CASE("population first-order condition for quantiles") {
  // y uniform on {1, 2, 3, 4}
  const std::vector<double> support{1, 2, 3, 4};
  auto mean_psi = [&](double tau, double eta) {
    double s = 0;
    for (double y : support) s += psi(ModelSpec::quantile(tau), y, eta);
    return s / 4;
  };
  CHECK(mean_psi(0.5, 2.5) == doctest::Approx(0.0));
  CHECK(mean_psi(0.5, 1.5) < 0);
  CHECK(mean_psi(0.5, 3.5) > 0);
  CHECK(mean_psi(0.75, 3.5) == doctest::Approx(0.0));
  CHECK(mean_psi(0.75, 2.5) < 0);
}

TEST_CASE("links") {
  CHECK(link(ModelSpec::logit(), 0) == 0.5);
  CHECK(link_d1(ModelSpec::logit(), 0) == 0.25);
  CHECK(link_d2(ModelSpec::logit(), 0) == 0.0);
  CHECK(link(ModelSpec::huber(1), 2.5) == 2.5);
  CHECK(link_d1(ModelSpec::quantile(0.5), 2.5) == 1.0);
  CHECK(logistic(-800) >= 0.0);
  CHECK(logistic(800) == 1.0);
}

TEST_CASE("smoothed quantile loss converges to the check loss") {
  const ModelSpec m = ModelSpec::quantile(0.3);
  for (double r : {-2.0, -0.1, 0.05, 1.0}) {
    const LossTerms exact = theta_loss(m, r, 0.0, 0.0);
    const LossTerms smooth = theta_loss(m, r, 0.0, 1e-8);
    CHECK(std::abs(exact.value - smooth.value) <= 1e-8);
    CHECK(smooth.grad == doctest::Approx(exact.grad));
    CHECK(smooth.irls > 0);
  }
}

TEST_CASE("parsing and validation") {
  CHECK(ModelSpec::parse("ls").family == Family::LeastSquares);
  CHECK(ModelSpec::parse("logit").family == Family::Logit);
  CHECK(ModelSpec::parse("quantile:0.25").tau == 0.25);
  CHECK(ModelSpec::parse("huber:1.5").tau == 1.5);
  CHECK(ModelSpec::parse(ModelSpec::quantile(0.1).to_string()).tau == 0.1);
  CHECK_ERROR(ModelSpec::parse("probit"), ErrorCode::InvalidArgument);
  CHECK_ERROR(ModelSpec::parse("quantile:1.2"), ErrorCode::InvalidArgument);
  CHECK_ERROR(ModelSpec::parse("huber:x"), ErrorCode::InvalidArgument);
  CHECK_ERROR(ModelSpec::huber(0), ErrorCode::InvalidArgument);
  CHECK_ERROR(check_outcome(ModelSpec::logit(), 2), ErrorCode::DomainError);
  CHECK_ERROR(check_outcome(ModelSpec::least_squares(), NAN), ErrorCode::DomainError);
}

}
