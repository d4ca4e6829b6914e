#include <numeric>

#include "binscatter/basis.hpp"
#include "support.hpp"

using namespace binscatter;

namespace {

const double r2 = std::sqrt(2.0);

void check_vec(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

}  // namespace

TEST_SUITE("basis") {

TEST_CASE("piecewise linear element values") {
  const BasisSpec b(1, 0, user_knots({0, 0.5, 1}));
  CHECK(b.dimension() == 4);
  check_vec(eval_basis_dense(b, 0.25), {r2, r2 / 2, 0, 0});
}

TEST_CASE("linear spline is a scaled hat basis") {
  const BasisSpec b(1, 1, user_knots({0, 0.5, 1}));
  CHECK(b.dimension() == 3);
  check_vec(eval_basis_dense(b, 0.5), {0, r2, 0});
  check_vec(eval_basis_dense(b, 0.25), {r2 / 2, r2 / 2, 0});
}

TEST_CASE("piecewise constant is a scaled indicator") {
  const BasisSpec b(0, 0, user_knots({0, 0.5, 1}));
  check_vec(eval_basis_dense(b, 0.1), {r2, 0});
  check_vec(eval_basis_dense(b, 0.7), {0, r2});
  check_vec(eval_basis_dense(b, 1.0), {0, r2});
}

TEST_CASE("dimension follows (p+1)J - s(J-1)") {
  const Partition part = even_knots(std::vector<double>{0, 1}, 5);
  for (int p = 0; p <= 3; ++p) {
    CHECK(BasisSpec(p, 0, part).dimension() == static_cast<std::size_t>((p + 1) * 5));
    CHECK(BasisSpec(p, p, part).dimension() == static_cast<std::size_t>((p + 1) * 5 - p * 4));
  }
}

TEST_CASE("intermediate smoothness is rejected") {
  const Partition part = even_knots(std::vector<double>{0, 1}, 3);
  CHECK_ERROR(BasisSpec(3, 1, part), ErrorCode::UnsupportedSmoothness);
  CHECK_ERROR(BasisSpec(2, 3, part), ErrorCode::UnsupportedSmoothness);
}

TEST_CASE("raised keeps the smoothness family") {
  const Partition part = even_knots(std::vector<double>{0, 1}, 3);
  const BasisSpec pw = BasisSpec(1, 0, part).raised();
  CHECK(pw.degree() == 2);
  CHECK(pw.smoothness() == 0);
  const BasisSpec sp = BasisSpec(1, 1, part).raised();
  CHECK(sp.degree() == 2);
  CHECK(sp.smoothness() == 2);
  // degree 0 counts as a spline, so it is raised to a continuous linear spline
  CHECK(BasisSpec(0, 0, part).raised().smoothness() == 1);
}

TEST_CASE("derivative orders beyond the degree and points outside the support") {
  const BasisSpec b(1, 1, user_knots({0, 0.5, 1}));
  CHECK_ERROR(eval_basis(b, 0.3, 2), ErrorCode::InvalidDerivative);
  CHECK_ERROR(eval_basis(b, 0.3, -1), ErrorCode::InvalidDerivative);
  CHECK_ERROR(eval_basis(b, 1.5, 0), ErrorCode::OutOfSupport);
}

TEST_CASE("spline bases sum to sqrt(J)") {
  const auto s = testing::uniform_sample(5, 300, [](double) { return 0.0; });
  const Partition part = quantile_knots(s.x, 6);
  for (int p = 1; p <= 3; ++p) {
    const BasisSpec b(p, p, part);
    for (double x : s.x) {
      const auto row = eval_basis(b, x);
      const double sum = std::accumulate(row.values.begin(), row.values.end(), 0.0);
      CHECK(std::abs(sum / std::sqrt(6.0) - 1.0) <= 1e-12);
      CHECK(row.values.size() <= static_cast<std::size_t>(p + 1));
    }
  }
}

TEST_CASE("derivatives match central differences") {
  const Partition part = user_knots({0, 0.15, 0.4, 0.7, 1});
  for (int p = 1; p <= 3; ++p) {
    for (int s : {0, p}) {
      const BasisSpec b(p, s, part);
      for (double x : {0.07, 0.3, 0.55, 0.91}) {
        for (int v = 1; v <= p; ++v) {
          const double h = 1e-5;
          const auto up = eval_basis_dense(b, x + h, v - 1);
          const auto dn = eval_basis_dense(b, x - h, v - 1);
          const auto d = eval_basis_dense(b, x, v);
          double scale = 0;
          for (double a : d) scale = std::max(scale, std::abs(a));
          for (std::size_t k = 0; k < d.size(); ++k) {
            CHECK(std::abs((up[k] - dn[k]) / (2 * h) - d[k]) <= 1e-6 * std::max(scale, 1.0));
          }
        }
      }
    }
  }
}

TEST_CASE("sparse rows and the design matrix agree with the dense evaluation") {
  const Partition part = user_knots({0, 0.3, 0.6, 1});
  const std::vector<double> xs{0.0, 0.1, 0.3, 0.45, 0.99, 1.0};
  const BasisSpec b(2, 2, part);
  const DesignMatrix B = design_matrix(b, xs);
  CHECK(B.rows() == xs.size());
  CHECK(B.cols() == b.dimension());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto dense = eval_basis_dense(b, xs[i]);
    std::vector<double> rebuilt(b.dimension(), 0.0);
    const auto row = B.row(i);
    for (std::size_t k = 0; k < row.size() && B.offset(i) + k < rebuilt.size(); ++k) rebuilt[B.offset(i) + k] = row[k];
    for (std::size_t k = 0; k < dense.size(); ++k) CHECK(rebuilt[k] == doctest::Approx(dense[k]).epsilon(1e-15));
  }
}

TEST_CASE("indicator design has one nonzero per row") {
  const std::vector<double> xs{0.1, 0.6, 0.9};
  const DesignMatrix B = design_matrix(BasisSpec(0, 0, user_knots({0, 0.5, 1})), xs);
  CHECK(B.rows() == 3);
  CHECK(B.cols() == 2);
  for (std::size_t i = 0; i < 3; ++i) {
    int nnz = 0;
    for (double v : B.row(i)) {
      if (v != 0.0) {
        ++nnz;
        CHECK(v == doctest::Approx(r2));
      }
    }
    CHECK(nnz == 1);
  }
}

}
