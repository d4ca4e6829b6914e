#include "binscatter/dataset.hpp"

#include <cmath>
#include <set>

#include "binscatter/error.hpp"

namespace binscatter {

Dataset Dataset::from_columns(std::vector<double> y, std::vector<double> x,
                              const Eigen::MatrixXd& w_raw, std::vector<std::string> w_names,
                              std::vector<std::string> group) {
  const std::size_t n = y.size();
  if (x.size() != n) throw Error(ErrorCode::InvalidArgument, "y and x differ in length");
  if (n < 2) throw Error(ErrorCode::EmptyData, "need at least two observations");
  const bool has_w = w_raw.cols() > 0;
  if (has_w && static_cast<std::size_t>(w_raw.rows()) != n) {
    throw Error(ErrorCode::InvalidArgument, "w has the wrong number of rows");
  }
  if (!group.empty() && group.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "group labels have the wrong length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(x[i])) {
      throw Error(ErrorCode::InvalidArgument, "y and x must be finite");
    }
  }
  if (has_w && !w_raw.allFinite()) throw Error(ErrorCode::InvalidArgument, "w must be finite");

  Dataset out;
  out.y = std::move(y);
  out.x = std::move(x);
  out.group = std::move(group);
  const auto d = has_w ? w_raw.cols() : Eigen::Index{0};
  if (w_names.empty()) {
    for (Eigen::Index j = 0; j < d; ++j) w_names.push_back("w" + std::to_string(j + 1));
  }
  if (static_cast<Eigen::Index>(w_names.size()) != d) {
    throw Error(ErrorCode::InvalidArgument, "w_names does not match the number of w columns");
  }
  if (std::set<std::string>(w_names.begin(), w_names.end()).size() != w_names.size()) {
    throw Error(ErrorCode::SchemaError, "control column names must be unique");
  }
  out.w_names = std::move(w_names);
  out.w = Eigen::MatrixXd(static_cast<Eigen::Index>(n), d);
  out.w_means.assign(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = w_raw.col(j).mean();
    out.w_means[static_cast<std::size_t>(j)] = mean;
    out.w.col(j) = w_raw.col(j).array() - mean;
  }
  return out;
}

Eigen::MatrixXd Dataset::w_raw() const {
  Eigen::MatrixXd raw = w;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    raw.col(j).array() += w_means[static_cast<std::size_t>(j)];
  }
  return raw;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  std::vector<double> ys, xs;
  std::vector<std::string> gs;
  const Eigen::MatrixXd raw = w_raw();
  Eigen::MatrixXd ws(static_cast<Eigen::Index>(rows.size()), raw.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    ys.push_back(y[i]);
    xs.push_back(x[i]);
    if (has_groups()) gs.push_back(group[i]);
    if (raw.cols() > 0) ws.row(static_cast<Eigen::Index>(k)) = raw.row(static_cast<Eigen::Index>(i));
  }
  Dataset out = from_columns(std::move(ys), std::move(xs), ws, w_names, std::move(gs));
  out.dropped_rows = 0;
  return out;
}

}  // namespace binscatter
