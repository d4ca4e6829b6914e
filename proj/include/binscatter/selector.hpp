#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "binscatter/dataset.hpp"
#include "binscatter/estimator.hpp"
#include "binscatter/models.hpp"
#include "binscatter/partition.hpp"

namespace binscatter {

enum class PolyKind { RotBias, Bernoulli };

/// rot_B: (-1)^m sum_k C(m,k) C(m+k,k) (-z)^k / C(2m,m).
/// Bernoulli: the m-th Bernoulli polynomial.
/// Throws UnsupportedOrder for m outside [0, 8].
double bernoulli_like_poly(PolyKind kind, int m, double z);

/// Power-basis coefficients c_0..c_m of the same polynomials.
std::vector<double> bernoulli_like_coefficients(PolyKind kind, int m);

/// Exact integral over [0,1] of the product of two polynomials given by
/// power-basis coefficients.
double integrate_product01(const std::vector<double>& a, const std::vector<double>& b);

/// tr{ (int phi phi')^{-1} int phi^{(v)} phi^{(v)}' } with phi = (1, z, ..., z^p).
double variance_trace_factor(int p, int v);

/// Unrounded IMSE-optimal bin count (2(p-v+1) B / ((1+2v) V))^{1/(2p+3)} n^{1/(2p+3)}.
double imse_bins(int p, int v, double bias, double variance, std::size_t n);

/// Largest J allowed by the feasibility cap floor(n / (5(p+1))), at least 1.
std::size_t max_bins(std::size_t n, int p);

enum class SelectMethod { Rot, Dpi };

std::string to_string(SelectMethod m);

struct SelectorResult {
  std::size_t J = 1;
  double variance = 0.0;  // V
  double bias = 0.0;      // B
  double J_raw = 0.0;     // before ceiling and capping
  SelectMethod method = SelectMethod::Rot;
  std::optional<std::size_t> preliminary_J;
  bool fallback = false;
  std::vector<std::string> warnings;
};

/// Exact-value overrides for the rule-of-thumb plug-ins. Per-observation
/// vectors replace sigma^2(x_i), f(x_i), mu^{(p+1)}(x_i); the averages replace
/// n^{-1} sum sigma^2 f^{2v} and n^{-1} sum (mu^{(p+1)})^2 / f^{2p+2-2v}.
struct RotOverrides {
  std::optional<std::vector<double>> sigma2;
  std::optional<std::vector<double>> density;
  std::optional<std::vector<double>> mu_deriv;
  std::optional<double> variance_average;
  std::optional<double> bias_average;
};

SelectorResult rot_select(const Dataset& data, const ModelSpec& model, int p, int s, int v,
                          const RotOverrides& overrides = {});

/// Direct plug-in on a preliminary partition (built with `scheme`, J from
/// `preliminary` or ROT). With `debias`, the sampling variance of the
/// estimated (p+1)-th derivative is subtracted from the squared bias term;
/// without it the bias constant is inflated by that variance, which does not
/// shrink at the preliminary J.
SelectorResult dpi_select(const Dataset& data, const ModelSpec& model, int p, int s, int v,
                          BinningScheme scheme = BinningScheme::QuantileSpaced,
                          std::optional<SelectorResult> preliminary = std::nullopt, bool debias = true);

/// Grid entry minimizing |J(p) - J_target|, ties to the smaller p.
int nearest_order(const std::vector<std::pair<int, std::size_t>>& candidates, std::size_t J_target);

/// Polynomial order for a fixed J by inverting the selector over [p_min, p_max].
/// `spline` selects s = p for every candidate, otherwise s = 0.
int p_select(const Dataset& data, const ModelSpec& model, std::size_t J_target, int v, int p_min,
             int p_max, bool spline, SelectMethod method = SelectMethod::Rot,
             BinningScheme scheme = BinningScheme::QuantileSpaced);

/// Partition for x with J bins under a scheme. User knots ignore J.
Partition make_partition(std::span<const double> x, BinningScheme scheme, std::size_t J,
                         const std::vector<double>& user = {});

}  // namespace binscatter
