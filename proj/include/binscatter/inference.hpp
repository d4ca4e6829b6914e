#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "binscatter/covariance.hpp"
#include "binscatter/dataset.hpp"
#include "binscatter/estimator.hpp"
#include "binscatter/selector.hpp"

namespace binscatter {

/// How J and the knots are chosen.
struct BinningConfig {
  BinningScheme scheme = BinningScheme::QuantileSpaced;
  std::optional<std::size_t> nbins;  // fixed J; otherwise selected
  SelectMethod method = SelectMethod::Rot;
  std::vector<double> user_knots;
};

struct InferenceConfig {
  double alpha = 0.05;
  int nsims = 50000;
  std::uint64_t seed = 0;
  bool rbc = true;
  int grid_per_bin = 20;
  unsigned threads = 1;
  Target target = Target::level();
};

/// Fits shared by bands and tests: degree p for point estimates and the
/// inference fit (degree p+1 on the same partition under robust bias correction).
struct Prepared {
  Partition partition;
  std::optional<SelectorResult> selector;
  FitResult point;
  FitResult infer;
  CovarianceSet cov;
  std::vector<std::string> warnings;
};

Prepared prepare(const Dataset& data, const ModelSpec& model, int p, int s, const Target& target,
                 const BinningConfig& binning, bool rbc = true, const FitOptions& fit_options = {});

/// `per_bin` equally spaced points in every bin, plus the upper knot.
std::vector<double> default_grid(const Partition& part, int per_bin = 20);

/// One Gaussian block: process value at grid point g is loadings.row(g) * N with
/// N ~ N(0, I_K) drawn from its own stream.
struct GaussianComponent {
  Eigen::MatrixXd loadings;  // G x K
  std::uint32_t stream = 0;
};

/// Rows L' Q^{-1} a(x_g) / sqrt(Omega(x_g)), zero where Omega vanishes.
Eigen::MatrixXd studentized_loadings(const CovarianceSet& cov, const FitResult& f,
                                     const Target& t, const std::vector<double>& grid);

enum class Sided { Two, Upper };

/// Per-draw sup over the grid of |Z| (two-sided) or Z (upper). Deterministic in
/// the seed for any thread count.
std::vector<double> simulate_sup(const std::vector<GaussianComponent>& components, Sided sided,
                                 int nsims, std::uint64_t seed, unsigned threads = 1);

std::vector<double> simulate_sup(const CovarianceSet& cov, const FitResult& f, const Target& t,
                                 const std::vector<double>& grid, Sided sided, int nsims,
                                 std::uint64_t seed, unsigned threads = 1);

/// Empirical (1 - alpha) quantile of the simulated sups.
double critical_value(std::vector<double> sups, double alpha);

/// (1 + #{sups >= stat}) / (nsims + 1).
double simulated_p_value(const std::vector<double>& sups, double stat);

struct BandResult {
  std::vector<double> grid;
  std::vector<double> estimate;  // degree-p fit
  std::vector<double> center;    // inference fit
  std::vector<double> se;
  std::vector<double> lower;
  std::vector<double> upper;
  double critical_value = 0.0;
  Target target;
};

struct TestResult {
  std::string kind;
  double statistic = 0.0;
  double p_value = 1.0;
  Sided sided = Sided::Two;
  std::size_t J = 0;
  int p_point = 0;
  int p_infer = 0;
};

BandResult confidence_band(const Prepared& prep, const InferenceConfig& cfg,
                           std::optional<std::vector<double>> grid = std::nullopt);

BandResult confidence_band(const Dataset& data, const ModelSpec& model, int p, int s,
                           const BinningConfig& binning, const InferenceConfig& cfg);

/// Null for specification tests: a global polynomial of degree q fitted with the
/// same loss, or user values on the grid.
struct NullSpec {
  std::optional<int> degree;
  std::vector<double> grid;
  std::vector<double> values;

  static NullSpec polynomial(int q) { return {q, {}, {}}; }
  static NullSpec on_grid(std::vector<double> g, std::vector<double> v) {
    return {std::nullopt, std::move(g), std::move(v)};
  }
};

/// Values of the null function on the grid for the configured target.
std::vector<double> null_values(const Dataset& data, const Prepared& prep, const NullSpec& null,
                                const Target& t, const std::vector<double>& grid);

TestResult spec_test(const Dataset& data, const Prepared& prep, const NullSpec& null,
                     const InferenceConfig& cfg);

enum class ShapeDirection { AtMost, AtLeast };

/// H0: target <= reference (AtMost) or target >= reference (AtLeast). The
/// reference is zero unless `reference` is given.
struct ShapeNull {
  ShapeDirection direction = ShapeDirection::AtMost;
  std::optional<NullSpec> reference;

  static ShapeNull decreasing() { return {ShapeDirection::AtMost, std::nullopt}; }
  static ShapeNull increasing() { return {ShapeDirection::AtLeast, std::nullopt}; }
};

TestResult shape_test(const Dataset& data, const Prepared& prep, const ShapeNull& null,
                      const InferenceConfig& cfg);

struct GroupComparison {
  std::vector<std::string> labels;  // {group 0, group 1}
  BandResult band;                  // difference group 1 - group 0
  TestResult test;
  Prepared group0;
  Prepared group1;
};

/// Requires exactly two distinct labels; the lexicographically larger one is
/// group 1. Throws EmptyGroup, NoCommonSupport.
GroupComparison compare_groups(const Dataset& data, const ModelSpec& model, int p, int s,
                               const BinningConfig& binning, const InferenceConfig& cfg);

struct Interval {
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// estimate +- z_{1-alpha/2} sqrt(Omega(x)/n) from the inference fit.
Interval pointwise_ci(const FitResult& f, const CovarianceSet& cov, double x, const Target& t,
                      double alpha);

}  // namespace binscatter
