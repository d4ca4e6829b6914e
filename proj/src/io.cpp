#include "binscatter/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "binscatter/error.hpp"

namespace binscatter {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::SchemaError, "column '" + name + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& y_col, const std::string& x_col,
                 const std::vector<std::string>& w_cols, const std::string& group_col) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, "'" + path + "' has no header row");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  const std::size_t iy = find_column(header, y_col);
  const std::size_t ix = find_column(header, x_col);
  std::vector<std::size_t> iw;
  for (const auto& w : w_cols) iw.push_back(find_column(header, w));
  const bool has_group = !group_col.empty();
  const std::size_t ig = has_group ? find_column(header, group_col) : 0;

  std::vector<double> y, x;
  std::vector<std::vector<double>> wrows;
  std::vector<std::string> group;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line) == "\r") continue;
    const auto f = split_csv_line(line);
    auto get = [&](std::size_t k) -> std::string { return k < f.size() ? f[k] : std::string(); };
    double yv = 0.0, xv = 0.0;
    bool ok = parse_number(get(iy), yv) && parse_number(get(ix), xv);
    std::vector<double> wv(iw.size());
    for (std::size_t k = 0; ok && k < iw.size(); ++k) ok = parse_number(get(iw[k]), wv[k]);
    std::string g;
    if (ok && has_group) {
      g = trim(get(ig));
      ok = !g.empty();
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    y.push_back(yv);
    x.push_back(xv);
    wrows.push_back(std::move(wv));
    if (has_group) group.push_back(std::move(g));
  }
  if (y.size() < 2) {
    std::ostringstream msg;
    msg << "'" << path << "' has " << y.size() << " usable rows after dropping " << dropped;
    throw Error(ErrorCode::EmptyData, msg.str());
  }
  Eigen::MatrixXd w(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(iw.size()));
  for (std::size_t i = 0; i < wrows.size(); ++i) {
    for (std::size_t k = 0; k < iw.size(); ++k) {
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = wrows[i][k];
    }
  }
  Dataset d = Dataset::from_columns(std::move(y), std::move(x), w, w_cols, std::move(group));
  d.dropped_rows = dropped;
  return d;
}

Dots binscatter_dots(const Dataset& data, const FitResult& point) {
  const Partition& part = point.basis.partition();
  std::vector<double> sum(part.nbins(), 0.0);
  std::vector<std::size_t> cnt(part.nbins(), 0);
  for (double xi : data.x) {
    const std::size_t j = part.bin_of(xi);
    sum[j] += xi;
    ++cnt[j];
  }
  Dots d;
  for (std::size_t j = 0; j < part.nbins(); ++j) {
    if (cnt[j] == 0) continue;
    const double xm = sum[j] / static_cast<double>(cnt[j]);
    d.x.push_back(xm);
    d.y.push_back(predict_level(point, xm));
  }
  return d;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string render_svg(const Dots& dots, const BandResult* band, const std::string& title) {
  constexpr double W = 640, H = 480, left = 60, right = 20, top = 30, bottom = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto extend = [](double v, double& lo, double& hi) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (std::size_t i = 0; i < dots.x.size(); ++i) {
    extend(dots.x[i], xmin, xmax);
    extend(dots.y[i], ymin, ymax);
  }
  if (band) {
    for (std::size_t g = 0; g < band->grid.size(); ++g) {
      extend(band->grid[g], xmin, xmax);
      extend(band->lower[g], ymin, ymax);
      extend(band->upper[g], ymin, ymax);
      extend(band->center[g], ymin, ymax);
    }
  }
  if (!(xmax > xmin)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (!(ymax > ymin)) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double px0 = left, px1 = W - right, py0 = H - bottom, py1 = top;
  auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
  auto sy = [&](double y) { return py0 + (y - ymin) / (ymax - ymin) * (py1 - py0); };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" data-xmin=\"" << fmt(xmin) << "\" data-xmax=\""
    << fmt(xmax) << "\" data-ymin=\"" << fmt(ymin) << "\" data-ymax=\"" << fmt(ymax)
    << "\" data-px0=\"" << fmt(px0) << "\" data-px1=\"" << fmt(px1) << "\" data-py0=\"" << fmt(py0)
    << "\" data-py1=\"" << fmt(py1) << "\">\n";
  s << "  <rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "  <g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  s << "    <line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\"" << py0 << "\"/>\n";
  s << "    <line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0 << "\" y2=\"" << py1 << "\"/>\n";
  s << "  </g>\n";
  s << "  <g id=\"labels\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "    <text x=\"" << px0 << "\" y=\"" << py0 + 16 << "\">" << fmt(xmin) << "</text>\n";
  s << "    <text x=\"" << px1 << "\" y=\"" << py0 + 16 << "\" text-anchor=\"end\">" << fmt(xmax) << "</text>\n";
  s << "    <text x=\"" << px0 - 4 << "\" y=\"" << py0 << "\" text-anchor=\"end\">" << fmt(ymin) << "</text>\n";
  s << "    <text x=\"" << px0 - 4 << "\" y=\"" << py1 + 8 << "\" text-anchor=\"end\">" << fmt(ymax) << "</text>\n";
  if (!title.empty()) {
    std::string esc;
    for (char c : title) {
      if (c == '<') esc += "&lt;";
      else if (c == '>') esc += "&gt;";
      else if (c == '&') esc += "&amp;";
      else esc += c;
    }
    s << "    <text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">" << esc << "</text>\n";
  }
  s << "  </g>\n";

  if (band && !band->grid.empty()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::ostringstream pts;
    for (std::size_t g = 0; g < band->grid.size(); ++g) {
      pts << fmt(sx(band->grid[g])) << ',' << fmt(sy(band->upper[g])) << ' ';
      hi = std::max(hi, band->upper[g]);
    }
    for (std::size_t g = band->grid.size(); g-- > 0;) {
      pts << fmt(sx(band->grid[g])) << ',' << fmt(sy(band->lower[g]));
      if (g > 0) pts << ' ';
      lo = std::min(lo, band->lower[g]);
    }
    s << "  <polygon id=\"band\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" data-ylo=\""
      << fmt(lo) << "\" data-yhi=\"" << fmt(hi) << "\" points=\"" << pts.str() << "\"/>\n";
    s << "  <polyline id=\"center\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
    for (std::size_t g = 0; g < band->grid.size(); ++g) {
      if (g > 0) s << ' ';
      s << fmt(sx(band->grid[g])) << ',' << fmt(sy(band->center[g]));
    }
    s << "\"/>\n";
  }
  s << "  <g id=\"dots\" fill=\"#d62728\">\n";
  for (std::size_t i = 0; i < dots.x.size(); ++i) {
    s << "    <circle cx=\"" << fmt(sx(dots.x[i])) << "\" cy=\"" << fmt(sy(dots.y[i])) << "\" r=\"3\"/>\n";
  }
  s << "  </g>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace binscatter
