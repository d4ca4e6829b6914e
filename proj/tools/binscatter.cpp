// Command-line front end: binscatter <subcommand> [flags]. See README.md.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "binscatter/error.hpp"
#include "binscatter/run.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void add_common(CLI::App* app, binscatter::RunConfig& c, std::string& out, std::string& plot,
                std::string& config_path, std::string& seed_text) {
  app->add_option("--data", c.data, "CSV file with a header row");
  app->add_option("--y", c.y, "outcome column");
  app->add_option("--x", c.x, "running variable column");
  app->add_option("--w", c.w, "control columns")->delimiter(',');
  app->add_option("--group", c.group, "group label column (compare)");
  app->add_option("--model", c.model, "ls | logit | quantile:<tau> | huber:<tau>");
  app->add_option("--p", c.p, "polynomial degree");
  app->add_option("--s", c.s, "smoothness: 0 or p");
  app->add_option("--v", c.v, "derivative order");
  auto* nb = app->add_option("--nbins", c.nbins, "fixed number of bins");
  auto* ns = app->add_option("--nbins-select", c.nbins_select, "rot | dpi");
  nb->excludes(ns);
  app->add_option("--binspos", c.binspos, "qs | es | user:<csv>");
  app->add_option("--level", c.level, "significance level alpha");
  app->add_option("--nsims", c.nsims, "simulation draws");
  app->add_option("--seed", seed_text, "64-bit seed");
  app->add_option("--at", c.at, "mean | median | value:<csv>");
  app->add_option("--target", c.target, "level | marginal | mu | mu:<v>");
  app->add_option("--pselect", c.pselect, "<pmin>:<pmax>, needs --nbins");
  app->add_option("--null", c.null_spec, "poly:<q> (test-spec)");
  app->add_option("--shape", c.shape, "decreasing | increasing (test-shape)");
  app->add_option("--threads", c.threads, "simulation threads");
  app->add_option("--out", out, "JSON output path")->required();
  app->add_option("--plot", plot, "SVG output path");
  app->add_option("--config", config_path, "rerun a recorded config (JSON)");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw binscatter::Error(binscatter::ErrorCode::FileError, "cannot write '" + path + "'");
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear binscatter estimation and inference"};
  app.require_subcommand(1);
  binscatter::RunConfig cfg;
  std::string out, plot, config_path, seed_text;
  for (const char* name : {"fit", "select", "band", "test-spec", "test-shape", "compare"}) {
    add_common(app.add_subcommand(name, std::string(name) + " subcommand"), cfg, out, plot, config_path,
               seed_text);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw binscatter::Error(binscatter::ErrorCode::FileError, "cannot open '" + config_path + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw binscatter::Error(binscatter::ErrorCode::SchemaError, e.what());
      }
      const unsigned threads = cfg.threads;
      cfg = binscatter::config_from_json(j);
      cfg.threads = threads;
      if (cfg.subcommand != sub) {
        throw binscatter::Error(binscatter::ErrorCode::InvalidArgument,
                                "config records subcommand '" + cfg.subcommand + "'");
      }
    } else {
      cfg.subcommand = sub;
      if (!seed_text.empty()) {
        std::size_t pos = 0;
        unsigned long long s = 0;
        try {
          s = std::stoull(seed_text, &pos);
        } catch (const std::exception&) {
          pos = 0;
        }
        if (pos != seed_text.size() || seed_text.front() == '-') {
          throw binscatter::Error(binscatter::ErrorCode::InvalidArgument, "--seed expects an unsigned integer");
        }
        cfg.seed = s;
      }
    }
    const binscatter::RunOutput res = binscatter::run(cfg);
    write_file(out, binscatter::dump_document(res.document));
    if (!plot.empty()) {
      if (res.svg.empty()) {
        std::cerr << "warning: no band computed; --plot ignored\n";
      } else {
        write_file(plot, res.svg);
      }
    }
  } catch (const binscatter::Error& e) {
    std::cerr << "error [" << binscatter::to_string(e.code()) << "]: " << e.what() << "\n";
    return binscatter::is_validation_error(e.code()) ? kExitValidation : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
