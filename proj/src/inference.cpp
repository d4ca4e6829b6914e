#include "binscatter/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "binscatter/error.hpp"
#include "binscatter/rng.hpp"

namespace binscatter {

namespace {

constexpr int kChunk = 256;

void validate(const InferenceConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "level alpha must lie in (0, 1)");
  }
  if (cfg.nsims < 1000) throw Error(ErrorCode::InvalidArgument, "nsims must be at least 1000");
  if (cfg.grid_per_bin < 1) throw Error(ErrorCode::InvalidArgument, "grid density must be positive");
}

double se_of(const CovarianceSet& cov, const FitResult& f, const Target& t, double x) {
  return std::sqrt(omega(cov, f, t, x) / static_cast<double>(cov.n));
}

// sup over g of diff_g / se_g (signed) or |diff_g| / se_g.
double sup_statistic(const std::vector<double>& diff, const std::vector<double>& se, Sided sided) {
  double stat = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < diff.size(); ++g) {
    const double d = sided == Sided::Two ? std::abs(diff[g]) : diff[g];
    double z;
    if (se[g] > 0.0) {
      z = d / se[g];
    } else if (d == 0.0) {
      z = 0.0;
    } else {
      z = std::copysign(std::numeric_limits<double>::infinity(), d);
    }
    stat = std::max(stat, z);
  }
  return stat;
}

std::vector<double> grid_in_support(const std::vector<double>& grid, const Partition& part) {
  for (double x : grid) {
    if (!part.contains(x)) {
      std::ostringstream msg;
      msg << "grid point " << x << " lies outside the support";
      throw Error(ErrorCode::OutOfSupport, msg.str());
    }
  }
  return grid;
}

}  // namespace

std::vector<double> default_grid(const Partition& part, int per_bin) {
  std::vector<double> grid;
  const auto& k = part.knots();
  for (std::size_t j = 0; j + 1 < k.size(); ++j) {
    for (int i = 0; i < per_bin; ++i) {
      grid.push_back(k[j] + (k[j + 1] - k[j]) * static_cast<double>(i) / static_cast<double>(per_bin));
    }
  }
  grid.push_back(k.back());
  return grid;
}

Prepared prepare(const Dataset& data, const ModelSpec& model, int p, int s, const Target& target,
                 const BinningConfig& binning, bool rbc, const FitOptions& fit_options) {
  const int v = target.derivative();
  if (v > p) {
    std::ostringstream msg;
    msg << "target " << target.to_string() << " needs degree p >= " << v;
    throw Error(ErrorCode::InvalidDerivative, msg.str());
  }
  std::optional<SelectorResult> sel;
  std::size_t J = 0;
  if (binning.scheme != BinningScheme::UserSupplied) {
    if (binning.nbins) {
      J = *binning.nbins;
    } else {
      sel = binning.method == SelectMethod::Rot ? rot_select(data, model, p, s, v)
                                                : dpi_select(data, model, p, s, v, binning.scheme);
      J = sel->J;
    }
  }
  Partition part = make_partition(data.x, binning.scheme, J, binning.user_knots);
  const BasisSpec basis(p, s, part);
  FitResult point = fit(data, basis, model, fit_options);
  FitResult infer = rbc ? fit(data, basis.raised(), model, fit_options) : point;
  CovarianceSet cov = covariance(data, infer);

  std::vector<std::string> warnings;
  std::set<std::string> seen;
  auto add = [&](const std::vector<std::string>& w) {
    for (const auto& m : w) {
      if (seen.insert(m).second) warnings.push_back(m);
    }
  };
  if (sel) add(sel->warnings);
  add(point.warnings);
  add(infer.warnings);
  add(cov.warnings);
  return Prepared{std::move(part), std::move(sel), std::move(point), std::move(infer),
                  std::move(cov), std::move(warnings)};
}

Eigen::MatrixXd studentized_loadings(const CovarianceSet& cov, const FitResult& f, const Target& t,
                                     const std::vector<double>& grid) {
  const auto K = cov.Sigma_half.rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), K);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const Eigen::VectorXd s = cov.solve_Q(target_row(f, t, grid[g]));
    const double om = s.dot(cov.Sigma.multiply(s));
    const auto gi = static_cast<Eigen::Index>(g);
    if (om > 0.0 && std::isfinite(om)) {
      out.row(gi) = (cov.Sigma_half.transpose() * s).transpose() / std::sqrt(om);
    } else {
      out.row(gi).setZero();
    }
  }
  return out;
}

std::vector<double> simulate_sup(const std::vector<GaussianComponent>& components, Sided sided,
                                 int nsims, std::uint64_t seed, unsigned threads) {
  if (nsims < 1) throw Error(ErrorCode::InvalidArgument, "nsims must be positive");
  if (components.empty()) throw Error(ErrorCode::InvalidArgument, "no Gaussian components");
  const auto G = components.front().loadings.rows();
  for (const auto& c : components) {
    if (c.loadings.rows() != G) throw Error(ErrorCode::InvalidArgument, "component grids differ");
  }
  std::vector<double> sups(static_cast<std::size_t>(nsims));
  const int nchunks = (nsims + kChunk - 1) / kChunk;

  auto run_chunk = [&](int chunk) {
    const int first = chunk * kChunk;
    const int m = std::min(kChunk, nsims - first);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(G, m);
    for (const auto& comp : components) {
      const auto K = comp.loadings.cols();
      Eigen::MatrixXd Z(K, m);
      const NormalStream normals(seed, comp.stream);
      for (int j = 0; j < m; ++j) {
        normals.fill(static_cast<std::uint64_t>(first + j), static_cast<std::size_t>(K), Z.col(j).data());
      }
      T.noalias() += comp.loadings * Z;
    }
    for (int j = 0; j < m; ++j) {
      const double s = sided == Sided::Two ? T.col(j).cwiseAbs().maxCoeff() : T.col(j).maxCoeff();
      sups[static_cast<std::size_t>(first + j)] = G > 0 ? s : 0.0;
    }
  };

  const unsigned nthreads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(nchunks)));
  if (nthreads == 1) {
    for (int c = 0; c < nchunks; ++c) run_chunk(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (int c = next++; c < nchunks; c = next++) run_chunk(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  return sups;
}

std::vector<double> simulate_sup(const CovarianceSet& cov, const FitResult& f, const Target& t,
                                 const std::vector<double>& grid, Sided sided, int nsims,
                                 std::uint64_t seed, unsigned threads) {
  return simulate_sup({GaussianComponent{studentized_loadings(cov, f, t, grid), 0}}, sided, nsims,
                      seed, threads);
}

double critical_value(std::vector<double> sups, double alpha) {
  if (sups.empty()) throw Error(ErrorCode::InvalidArgument, "no simulated statistics");
  const auto N = static_cast<double>(sups.size());
  auto idx = static_cast<std::size_t>(std::ceil((1.0 - alpha) * N - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, sups.size()) - 1;
  std::nth_element(sups.begin(), sups.begin() + static_cast<std::ptrdiff_t>(idx), sups.end());
  return sups[idx];
}

double simulated_p_value(const std::vector<double>& sups, double stat) {
  const auto count = std::count_if(sups.begin(), sups.end(), [&](double s) { return s >= stat; });
  return (1.0 + static_cast<double>(count)) / (static_cast<double>(sups.size()) + 1.0);
}

BandResult confidence_band(const Prepared& prep, const InferenceConfig& cfg,
                           std::optional<std::vector<double>> grid) {
  validate(cfg);
  BandResult b;
  b.target = cfg.target;
  b.grid = grid ? grid_in_support(*grid, prep.partition) : default_grid(prep.partition, cfg.grid_per_bin);
  const auto sups = simulate_sup(prep.cov, prep.infer, cfg.target, b.grid, Sided::Two, cfg.nsims,
                                 cfg.seed, cfg.threads);
  b.critical_value = critical_value(sups, cfg.alpha);
  for (double x : b.grid) {
    b.estimate.push_back(target_estimate(prep.point, cfg.target, x));
    const double c = target_estimate(prep.infer, cfg.target, x);
    const double se = se_of(prep.cov, prep.infer, cfg.target, x);
    b.center.push_back(c);
    b.se.push_back(se);
    b.lower.push_back(c - b.critical_value * se);
    b.upper.push_back(c + b.critical_value * se);
  }
  return b;
}

BandResult confidence_band(const Dataset& data, const ModelSpec& model, int p, int s,
                           const BinningConfig& binning, const InferenceConfig& cfg) {
  validate(cfg);
  const Prepared prep = prepare(data, model, p, s, cfg.target, binning, cfg.rbc);
  return confidence_band(prep, cfg);
}

std::vector<double> null_values(const Dataset& data, const Prepared& prep, const NullSpec& null,
                                const Target& t, const std::vector<double>& grid) {
  if (!null.degree) {
    if (null.values.size() != grid.size()) {
      throw Error(ErrorCode::InvalidArgument, "null values do not match the evaluation grid");
    }
    return null.values;
  }
  const int q = *null.degree;
  if (q < 0) throw Error(ErrorCode::InvalidArgument, "null polynomial degree must be nonnegative");
  std::optional<FitResult> nf;
  try {
    const Partition whole({prep.partition.lower(), prep.partition.upper()}, BinningScheme::EvenlySpaced);
    FitOptions fo;
    fo.eval_point = prep.infer.eval_point;
    nf = fit(data, BasisSpec(q, 0, whole), prep.infer.model, fo);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoConvergence || e.code() == ErrorCode::SingularSystem ||
        e.code() == ErrorCode::DomainError) {
      throw Error(ErrorCode::NullFitFailure, std::string("parametric null fit failed: ") + e.what());
    }
    throw;
  }
  std::vector<double> out;
  for (double x : grid) {
    if (t.kind == TargetKind::Marginal && q < 1) {
      out.push_back(0.0);
    } else {
      out.push_back(target_estimate(*nf, t, x));
    }
  }
  return out;
}

TestResult spec_test(const Dataset& data, const Prepared& prep, const NullSpec& null,
                     const InferenceConfig& cfg) {
  validate(cfg);
  const std::vector<double> grid = null.degree ? default_grid(prep.partition, cfg.grid_per_bin)
                                               : grid_in_support(null.grid, prep.partition);
  const auto m = null_values(data, prep, null, cfg.target, grid);
  std::vector<double> diff, se;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    diff.push_back(target_estimate(prep.infer, cfg.target, grid[g]) - m[g]);
    se.push_back(se_of(prep.cov, prep.infer, cfg.target, grid[g]));
  }
  TestResult r;
  r.kind = null.degree ? "spec:poly" + std::to_string(*null.degree) : "spec:values";
  r.sided = Sided::Two;
  r.statistic = sup_statistic(diff, se, Sided::Two);
  const auto sups = simulate_sup(prep.cov, prep.infer, cfg.target, grid, Sided::Two, cfg.nsims,
                                 cfg.seed, cfg.threads);
  r.p_value = simulated_p_value(sups, r.statistic);
  r.J = prep.partition.nbins();
  r.p_point = prep.point.basis.degree();
  r.p_infer = prep.infer.basis.degree();
  return r;
}

TestResult shape_test(const Dataset& data, const Prepared& prep, const ShapeNull& null,
                      const InferenceConfig& cfg) {
  validate(cfg);
  std::vector<double> grid;
  if (null.reference && !null.reference->degree) {
    grid = grid_in_support(null.reference->grid, prep.partition);
  } else {
    grid = default_grid(prep.partition, cfg.grid_per_bin);
  }
  std::vector<double> ref(grid.size(), 0.0);
  if (null.reference) ref = null_values(data, prep, *null.reference, cfg.target, grid);

  const double sign = null.direction == ShapeDirection::AtMost ? 1.0 : -1.0;
  std::vector<double> diff, se;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    diff.push_back(sign * (target_estimate(prep.infer, cfg.target, grid[g]) - ref[g]));
    se.push_back(se_of(prep.cov, prep.infer, cfg.target, grid[g]));
  }
  TestResult r;
  r.kind = null.direction == ShapeDirection::AtMost ? "shape:at-most" : "shape:at-least";
  r.sided = Sided::Upper;
  r.statistic = sup_statistic(diff, se, Sided::Upper);
  Eigen::MatrixXd L = sign * studentized_loadings(prep.cov, prep.infer, cfg.target, grid);
  const auto sups = simulate_sup({GaussianComponent{std::move(L), 0}}, Sided::Upper, cfg.nsims,
                                 cfg.seed, cfg.threads);
  r.p_value = simulated_p_value(sups, r.statistic);
  r.J = prep.partition.nbins();
  r.p_point = prep.point.basis.degree();
  r.p_infer = prep.infer.basis.degree();
  return r;
}

GroupComparison compare_groups(const Dataset& data, const ModelSpec& model, int p, int s,
                               const BinningConfig& binning, const InferenceConfig& cfg) {
  validate(cfg);
  if (!data.has_groups()) throw Error(ErrorCode::InvalidArgument, "comparison needs group labels");
  const std::set<std::string> labels(data.group.begin(), data.group.end());
  if (labels.size() < 2) throw Error(ErrorCode::EmptyGroup, "only one group is present");
  if (labels.size() > 2) {
    throw Error(ErrorCode::InvalidArgument, "comparison supports exactly two groups");
  }
  const std::vector<std::string> names(labels.begin(), labels.end());
  std::vector<std::vector<std::size_t>> rows(2);
  for (std::size_t i = 0; i < data.n(); ++i) rows[data.group[i] == names[1] ? 1 : 0].push_back(i);
  for (int g = 0; g < 2; ++g) {
    if (rows[static_cast<std::size_t>(g)].size() < 2) {
      throw Error(ErrorCode::EmptyGroup, "group '" + names[static_cast<std::size_t>(g)] + "' has too few rows");
    }
  }
  const Dataset d0 = data.subset(rows[0]);
  const Dataset d1 = data.subset(rows[1]);
  Prepared p0 = prepare(d0, model, p, s, cfg.target, binning, cfg.rbc);
  Prepared p1 = prepare(d1, model, p, s, cfg.target, binning, cfg.rbc);

  std::vector<double> grid;
  for (double x : default_grid(p1.partition, cfg.grid_per_bin)) {
    if (p0.partition.contains(x)) grid.push_back(x);
  }
  if (grid.empty()) throw Error(ErrorCode::NoCommonSupport, "the group supports do not overlap");

  const auto G = static_cast<Eigen::Index>(grid.size());
  const double n0 = static_cast<double>(d0.n()), n1 = static_cast<double>(d1.n());
  Eigen::MatrixXd L0(G, p0.cov.Sigma_half.cols()), L1(G, p1.cov.Sigma_half.cols());
  BandResult b;
  b.target = cfg.target;
  b.grid = grid;
  std::vector<double> diff;
  for (Eigen::Index g = 0; g < G; ++g) {
    const double x = grid[static_cast<std::size_t>(g)];
    const Eigen::VectorXd s0 = p0.cov.solve_Q(target_row(p0.infer, cfg.target, x));
    const Eigen::VectorXd s1 = p1.cov.solve_Q(target_row(p1.infer, cfg.target, x));
    const double om0 = std::max(0.0, s0.dot(p0.cov.Sigma.multiply(s0)));
    const double om1 = std::max(0.0, s1.dot(p1.cov.Sigma.multiply(s1)));
    const double se = std::sqrt(om0 / n0 + om1 / n1);
    if (se > 0.0) {
      L1.row(g) = (p1.cov.Sigma_half.transpose() * s1).transpose() / (std::sqrt(n1) * se);
      L0.row(g) = -(p0.cov.Sigma_half.transpose() * s0).transpose() / (std::sqrt(n0) * se);
    } else {
      L0.row(g).setZero();
      L1.row(g).setZero();
    }
    b.estimate.push_back(target_estimate(p1.point, cfg.target, x) - target_estimate(p0.point, cfg.target, x));
    b.center.push_back(target_estimate(p1.infer, cfg.target, x) - target_estimate(p0.infer, cfg.target, x));
    b.se.push_back(se);
    diff.push_back(b.center.back());
  }
  const auto sups = simulate_sup({GaussianComponent{std::move(L1), 1}, GaussianComponent{std::move(L0), 2}},
                                 Sided::Two, cfg.nsims, cfg.seed, cfg.threads);
  b.critical_value = critical_value(sups, cfg.alpha);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    b.lower.push_back(b.center[g] - b.critical_value * b.se[g]);
    b.upper.push_back(b.center[g] + b.critical_value * b.se[g]);
  }
  TestResult t;
  t.kind = "compare";
  t.sided = Sided::Two;
  t.statistic = sup_statistic(diff, b.se, Sided::Two);
  t.p_value = simulated_p_value(sups, t.statistic);
  t.J = p1.partition.nbins();
  t.p_point = p;
  t.p_infer = p1.infer.basis.degree();
  return GroupComparison{names, std::move(b), t, std::move(p0), std::move(p1)};
}

Interval pointwise_ci(const FitResult& f, const CovarianceSet& cov, double x, const Target& t,
                      double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
  Interval iv;
  iv.estimate = target_estimate(f, t, x);
  iv.se = se_of(cov, f, t, x);
  iv.lower = iv.estimate - z * iv.se;
  iv.upper = iv.estimate + z * iv.se;
  return iv;
}

}  // namespace binscatter
