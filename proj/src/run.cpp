#include "binscatter/run.hpp"

#include <set>
#include <sstream>

#include "binscatter/error.hpp"
#include "binscatter/inference.hpp"
#include "binscatter/io.hpp"

namespace binscatter {

using nlohmann::json;

namespace {

const std::set<std::string> kSubcommands = {"fit", "select", "band", "test-spec", "test-shape", "compare"};

bool needs_seed(const std::string& sub) {
  return sub == "band" || sub == "test-spec" || sub == "test-shape" || sub == "compare";
}

void fail(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

std::vector<double> parse_csv_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) fail("cannot parse " + what + " value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) fail("empty " + what + " list");
  return out;
}

int parse_int(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size()) fail("cannot parse " + what + " '" + text + "'");
  return static_cast<int>(v);
}

std::pair<int, int> parse_pselect(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) fail("--pselect expects <pmin>:<pmax>");
  const int lo = parse_int(text.substr(0, colon), "pselect bound");
  const int hi = parse_int(text.substr(colon + 1), "pselect bound");
  if (lo < 0 || hi < lo) fail("--pselect needs 0 <= pmin <= pmax");
  return {lo, hi};
}

int parse_null(const std::string& text) {
  if (text.rfind("poly:", 0) != 0) fail("--null expects poly:<q>");
  const int q = parse_int(text.substr(5), "null degree");
  if (q < 0) fail("null degree must be nonnegative");
  return q;
}

Target resolve_target(const RunConfig& c) {
  if (!c.target.empty()) return Target::parse(c.target);
  if (c.subcommand == "test-shape") return Target::marginal();
  return c.v > 0 ? Target::mu(c.v) : Target::level();
}

BinningConfig resolve_binning(const RunConfig& c) {
  BinningConfig b;
  if (c.binspos == "qs") {
    b.scheme = BinningScheme::QuantileSpaced;
  } else if (c.binspos == "es") {
    b.scheme = BinningScheme::EvenlySpaced;
  } else if (c.binspos.rfind("user:", 0) == 0) {
    b.scheme = BinningScheme::UserSupplied;
    b.user_knots = parse_csv_numbers(c.binspos.substr(5), "knot");
  } else {
    fail("--binspos expects qs, es or user:<csv>");
  }
  b.nbins = c.nbins;
  b.method = c.nbins_select == "dpi" ? SelectMethod::Dpi : SelectMethod::Rot;
  return b;
}

EvalPoint resolve_eval_point(const RunConfig& c, const Dataset& data) {
  if (c.at == "mean") return EvalPoint::mean(data);
  if (c.at == "median") return EvalPoint::median(data);
  if (c.at.rfind("value:", 0) == 0) return EvalPoint::user(data, parse_csv_numbers(c.at.substr(6), "evaluation point"));
  fail("--at expects mean, median or value:<csv>");
  return {};
}

json selector_json(const SelectorResult& r) {
  json j{{"method", to_string(r.method)}, {"J", r.J}, {"V", r.variance}, {"B", r.bias},
         {"J_unrounded", r.J_raw}, {"fallback", r.fallback}};
  j["preliminary_J"] = r.preliminary_J ? json(*r.preliminary_J) : json(nullptr);
  return j;
}

json vec(const std::vector<double>& v) { return json(v); }

json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

std::string eval_tag(EvalTag t) {
  switch (t) {
    case EvalTag::Mean: return "mean";
    case EvalTag::Median: return "median";
    case EvalTag::User: return "user";
  }
  return "mean";
}

json fit_json(const FitResult& f) {
  return json{{"beta", vec(f.beta)},
              {"gamma", vec(f.gamma)},
              {"converged", f.converged},
              {"iterations", f.iterations},
              {"model", f.model.to_string()},
              {"p", f.basis.degree()},
              {"s", f.basis.smoothness()},
              {"grad_inf_norm", f.grad_inf_norm},
              {"objective", f.objective},
              {"eval_point", json{{"tag", eval_tag(f.eval_point.tag)}, {"values", vec(f.eval_point.values)}}}};
}

json band_json(const BandResult& b, int p_infer) {
  return json{{"grid", vec(b.grid)},   {"estimate", vec(b.estimate)}, {"center", vec(b.center)},
              {"se", vec(b.se)},       {"cval", b.critical_value},    {"lower", vec(b.lower)},
              {"upper", vec(b.upper)}, {"target", b.target.to_string()}, {"p_infer", p_infer}};
}

json test_json(const TestResult& t) {
  return json{{"kind", t.kind},
              {"statistic", t.statistic},
              {"p_value", t.p_value},
              {"sided", t.sided == Sided::Two ? "two" : "one"},
              {"J", t.J},
              {"p_point", t.p_point},
              {"p_infer", t.p_infer}};
}

void add_warnings(json& doc, const std::vector<std::string>& w) {
  for (const auto& m : w) doc["warnings"].push_back(m);
}

}  // namespace

json config_to_json(const RunConfig& c) {
  json j{{"subcommand", c.subcommand}, {"data", c.data},     {"y", c.y},
         {"x", c.x},                   {"w", c.w},           {"group", c.group},
         {"model", c.model},           {"p", c.p},           {"s", c.s},
         {"v", c.v},                   {"nbins_select", c.nbins_select},
         {"binspos", c.binspos},       {"level", c.level},   {"nsims", c.nsims},
         {"at", c.at},                 {"target", c.target}, {"pselect", c.pselect},
         {"null", c.null_spec},        {"shape", c.shape}};
  j["nbins"] = c.nbins ? json(*c.nbins) : json(nullptr);
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  return j;
}

RunConfig config_from_json(const json& in) {
  const json& j = in.contains("meta") ? in.at("meta").at("config") : in;
  RunConfig c;
  try {
    c.subcommand = j.at("subcommand").get<std::string>();
    c.data = j.at("data").get<std::string>();
    c.y = j.at("y").get<std::string>();
    c.x = j.at("x").get<std::string>();
    c.w = j.value("w", std::vector<std::string>{});
    c.group = j.value("group", "");
    c.model = j.value("model", "ls");
    c.p = j.value("p", 0);
    c.s = j.value("s", "p");
    c.v = j.value("v", 0);
    if (j.contains("nbins") && !j["nbins"].is_null()) c.nbins = j["nbins"].get<std::size_t>();
    c.nbins_select = j.value("nbins_select", "rot");
    c.binspos = j.value("binspos", "qs");
    c.level = j.value("level", 0.05);
    c.nsims = j.value("nsims", 50000);
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    c.at = j.value("at", "mean");
    c.target = j.value("target", "");
    c.pselect = j.value("pselect", "");
    c.null_spec = j.value("null", "poly:1");
    c.shape = j.value("shape", "decreasing");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("invalid config: ") + e.what());
  }
  return c;
}

void validate_config(const RunConfig& c) {
  if (!kSubcommands.count(c.subcommand)) fail("unknown subcommand '" + c.subcommand + "'");
  if (c.data.empty() || c.y.empty() || c.x.empty()) fail("--data, --y and --x are required");
  ModelSpec::parse(c.model);
  if (c.p < 0) fail("--p must be nonnegative");
  if (c.s != "0" && c.s != "p") fail("--s expects 0 or p");
  if (c.v < 0 || c.v > c.p) fail("--v must lie in [0, p]");
  if (c.nbins && *c.nbins < 1) fail("--nbins must be positive");
  if (c.nbins_select != "rot" && c.nbins_select != "dpi") fail("--nbins-select expects rot or dpi");
  resolve_binning(c);
  if (!(c.level > 0.0 && c.level < 1.0)) fail("--level must lie in (0, 1)");
  if (c.nsims < 1000) fail("--nsims must be at least 1000");
  if (needs_seed(c.subcommand) && !c.seed) fail("--seed is required for " + c.subcommand);
  if (c.at != "mean" && c.at != "median" && c.at.rfind("value:", 0) != 0) fail("--at expects mean, median or value:<csv>");
  const Target t = resolve_target(c);
  if (t.derivative() > c.p) fail("target " + t.to_string() + " needs --p >= " + std::to_string(t.derivative()));
  if (c.subcommand == "compare" && c.group.empty()) fail("compare needs --group");
  if (!c.pselect.empty()) {
    parse_pselect(c.pselect);
    if (!c.nbins) fail("--pselect needs a fixed --nbins");
  }
  if (c.subcommand == "test-spec") parse_null(c.null_spec);
  if (c.shape != "decreasing" && c.shape != "increasing") fail("--shape expects decreasing or increasing");
  if (c.threads < 1) fail("--threads must be positive");
}

RunOutput run(const RunConfig& c) {
  validate_config(c);
  const Dataset data = load_csv(c.data, c.y, c.x, c.w, c.subcommand == "compare" ? c.group : "");
  const ModelSpec model = ModelSpec::parse(c.model);
  const Target target = resolve_target(c);
  const BinningConfig binning = resolve_binning(c);

  RunOutput out;
  json& doc = out.document;
  doc["meta"] = json{{"version", kVersion}, {"config", config_to_json(c)}};
  doc["meta"]["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  doc["partition"] = nullptr;
  doc["fit"] = nullptr;
  doc["selector"] = nullptr;
  doc["band"] = nullptr;
  doc["tests"] = json::array();
  doc["warnings"] = json::array();
  if (data.dropped_rows > 0) {
    doc["warnings"].push_back(std::to_string(data.dropped_rows) +
                              " rows dropped for missing or non-numeric values");
  }
  doc["n"] = data.n();

  int p = c.p;
  const int v = target.derivative();
  if (!c.pselect.empty()) {
    const auto [lo, hi] = parse_pselect(c.pselect);
    p = p_select(data, model, *c.nbins, v, lo, hi, c.s == "p", binning.method, binning.scheme);
    doc["selector"] = json{{"method", "pselect"}, {"J", *c.nbins}, {"p", p}, {"grid", json::array({lo, hi})}};
  }
  const int s = c.s == "p" ? p : 0;

  FitOptions fo;
  fo.eval_point = resolve_eval_point(c, data);

  InferenceConfig cfg;
  cfg.alpha = c.level;
  cfg.nsims = c.nsims;
  cfg.seed = c.seed.value_or(0);
  cfg.threads = c.threads;
  cfg.target = target;

  if (c.subcommand == "select") {
    if (c.pselect.empty()) {
      const SelectorResult r = binning.method == SelectMethod::Rot
                                   ? rot_select(data, model, p, s, v)
                                   : dpi_select(data, model, p, s, v, binning.scheme);
      doc["selector"] = selector_json(r);
      add_warnings(doc, r.warnings);
      if (binning.scheme != BinningScheme::UserSupplied) {
        doc["partition"] = json{{"knots", make_partition(data.x, binning.scheme, r.J).knots()},
                                {"scheme", to_string(binning.scheme)}};
      }
    }
    return out;
  }

  if (c.subcommand == "fit") {
    std::optional<SelectorResult> sel;
    std::size_t J = binning.nbins.value_or(0);
    if (binning.scheme != BinningScheme::UserSupplied && !binning.nbins) {
      sel = binning.method == SelectMethod::Rot ? rot_select(data, model, p, s, v)
                                                : dpi_select(data, model, p, s, v, binning.scheme);
      J = sel->J;
      doc["selector"] = selector_json(*sel);
      add_warnings(doc, sel->warnings);
    }
    const Partition part = make_partition(data.x, binning.scheme, J, binning.user_knots);
    const FitResult f = fit(data, BasisSpec(p, s, part), model, fo);
    doc["partition"] = json{{"knots", part.knots()}, {"scheme", to_string(part.scheme())}};
    doc["fit"] = fit_json(f);
    add_warnings(doc, f.warnings);
    return out;
  }

  if (c.subcommand == "compare") {
    const GroupComparison gc = compare_groups(data, model, p, s, binning, cfg);
    json parts, fits;
    for (int g = 0; g < 2; ++g) {
      const Prepared& pr = g == 0 ? gc.group0 : gc.group1;
      const std::string& label = gc.labels[static_cast<std::size_t>(g)];
      parts[label] = json{{"knots", pr.partition.knots()}, {"scheme", to_string(pr.partition.scheme())}};
      fits[label] = fit_json(pr.point);
      if (pr.selector) doc["selector"][label] = selector_json(*pr.selector);
      add_warnings(doc, pr.warnings);
    }
    doc["partition"] = json{{"groups", parts}};
    doc["fit"] = json{{"groups", fits}, {"labels", gc.labels}};
    doc["band"] = band_json(gc.band, gc.test.p_infer);
    doc["tests"].push_back(test_json(gc.test));
    out.svg = render_svg(Dots{}, &gc.band, "difference " + gc.labels[1] + " - " + gc.labels[0]);
    return out;
  }

  const Prepared prep = prepare(data, model, p, s, target, binning, true, fo);
  doc["partition"] = json{{"knots", prep.partition.knots()}, {"scheme", to_string(prep.partition.scheme())}};
  doc["fit"] = fit_json(prep.point);
  if (prep.selector) doc["selector"] = selector_json(*prep.selector);
  add_warnings(doc, prep.warnings);

  if (c.subcommand == "band") {
    const BandResult b = confidence_band(prep, cfg);
    doc["band"] = band_json(b, prep.infer.basis.degree());
    const Dots dots = target.kind == TargetKind::Level ? binscatter_dots(data, prep.point) : Dots{};
    out.svg = render_svg(dots, &b, c.y + " vs " + c.x);
  } else if (c.subcommand == "test-spec") {
    doc["tests"].push_back(test_json(spec_test(data, prep, NullSpec::polynomial(parse_null(c.null_spec)), cfg)));
  } else if (c.subcommand == "test-shape") {
    const ShapeNull null = c.shape == "decreasing" ? ShapeNull::decreasing() : ShapeNull::increasing();
    doc["tests"].push_back(test_json(shape_test(data, prep, null, cfg)));
  }
  return out;
}

std::string dump_document(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace binscatter
