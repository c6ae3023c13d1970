// Command-line front end: simulate, train, estimate, benchmark, bootstrap, presets.
//
// Exit codes: 0 success, 1 usage, 2 config / schema / format, 3 runtime.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "lfi/experiment.hpp"
#include "lfi/text.hpp"
#include "lfi/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace lfi;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Experiment config file");
  cmd->add_option("--preset", c.preset_name, "Shipped preset name (see `lfi presets`)");
  cmd->add_option("--seed", c.seed, "Overrides the config seed and LFI_SEED");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

/// Config from --config or --preset (default preset ricker-desk), then seed overrides.
ExperimentConfig resolve(const Common& c) {
  if (!c.config_path.empty() && !c.preset_name.empty()) throw UsageError("use either --config or --preset, not both");
  ExperimentConfig cfg = !c.config_path.empty() ? ExperimentConfig::load(c.config_path)
                                                : preset(c.preset_name.empty() ? "ricker-desk" : c.preset_name);
  if (const char* env = std::getenv("LFI_SEED")) {
    std::uint64_t s = 0;
    const std::string text(env);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), s);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty())
      throw ConfigError("LFI_SEED must be a non-negative integer, got '" + text + "'");
    cfg.seed = s;
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
}

Vector parse_theta(const std::string& text, const GenerativeModel& model) {
  Vector theta;
  try {
    theta = parse_vector(text, "--theta");
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (theta.size() != model.parameter_dimension())
    throw UsageError("--theta needs " + std::to_string(model.parameter_dimension()) + " components for model " +
                     model.name());
  return theta;
}

nlohmann::json to_json(const Eigen::Ref<const Vector>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// An estimator from a saved bundle or a configured estimator key.
struct ResolvedEstimator {
  std::unique_ptr<GenerativeModel> model;
  EstimatorSet set;
  Estimator estimator;
};

ResolvedEstimator resolve_estimator(const ExperimentConfig& cfg, const std::string& bundle, const std::string& key,
                                    std::size_t jobs) {
  ResolvedEstimator r;
  r.model = make_model(cfg);
  if (!bundle.empty()) {
    FittedReconstructionMap map = load_map(bundle);
    if (map.model != cfg.model)
      throw SchemaMismatch("bundle is for model '" + map.model + "' but the config selects '" + cfg.model + "'");
    if (key.empty() || key == "rm" || key == "rmdr") {
      const std::string name = map.reduces_dimension() ? "RM-DR" : "RM";
      r.estimator = make_map_estimator(name, std::move(map));
      return r;
    }
    if (key == "rmdrlo") {
      const auto* fn = dynamic_cast<const FnModel*>(r.model.get());
      if (!fn) throw ConfigError("estimator rmdrlo needs the fn model");
      if (!map.reduces_dimension()) throw ConfigError("estimator rmdrlo needs an RM-DR bundle");
      r.estimator = make_rmdrlo_estimator(*fn, std::move(map), cfg.rmdrlo_budget);
      return r;
    }
    throw UsageError("--bundle applies to rm, rmdr or rmdrlo, not '" + key + "'");
  }
  if (key.empty()) throw UsageError("give --bundle or --estimator");
  ExperimentConfig one = cfg;
  one.estimators = {key};
  r.set = build_estimators(one, *r.model, jobs);
  r.estimator = r.set.estimators.front();
  return r;
}

// --- Subcommands -----------------------------------------------------------------------

int cmd_simulate(const Common& common, const std::string& theta_text, Index reps, const std::string& out) {
  if (reps < 1) throw UsageError("--reps must be >= 1");
  const ExperimentConfig cfg = resolve(common);
  const auto model = make_model(cfg);
  const Vector theta = parse_theta(theta_text, *model);
  fs::create_directories(out);
  const std::uint64_t seed = hash_combine64(cfg.seed, hash_string("simulate"));
  for (Index i = 0; i < reps; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    write_dataset_csv(model->simulate(theta, rng), (fs::path(out) / ("sim_" + std::to_string(i + 1) + ".csv")).string());
  }
  std::cout << "wrote " << reps << " dataset(s) to " << out << '\n';
  return 0;
}

int cmd_train(const Common& common, const std::string& method, std::optional<Index> n, const std::string& out) {
  if (method != "rm" && method != "rmdr") throw UsageError("--method must be rm or rmdr");
  ExperimentConfig cfg = resolve(common);
  if (n) cfg.train_n = *n;
  cfg.validate();
  const auto model = make_model(cfg);
  const FitOptions fit = fit_options(cfg, common.jobs);
  const FittedReconstructionMap map =
      method == "rm" ? fit_rm(*model, fit) : fit_rmdr(*model, make_pipeline(cfg, *model), fit);
  fs::create_directories(out);
  save_map(map, (fs::path(out) / "model.bin").string());
  map.history.write_csv((fs::path(out) / "history.csv").string());
  std::cout << "final validation loss " << format_double(map.history.best_val_loss()) << " (epoch "
            << map.history.best_epoch << " of " << map.history.val_loss.size() << ")\n";
  return 0;
}

int cmd_estimate(const Common& common, const std::string& bundle, const std::string& key, const std::string& data,
                 const std::string& out) {
  const ExperimentConfig cfg = resolve(common);
  const Dataset y = read_dataset_csv(data);
  ResolvedEstimator r = resolve_estimator(cfg, bundle, key, common.jobs);
  const std::uint64_t seed = hash_combine64(cfg.seed, hash_string("estimate"));
  const EstimateRecord rec = r.estimator.run(y, seed);
  nlohmann::json j;
  j["estimator"] = r.estimator.name;
  j["model"] = cfg.model;
  j["parameters"] = r.model->parameter_names();
  j["theta_hat"] = to_json(rec.theta);
  j["diagnostics"] = nlohmann::json::object();
  for (const auto& [k, v] : rec.diagnostics) j["diagnostics"][k] = v;
  j["seeds"] = {{"config", cfg.seed}, {"estimator", seed}};
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

int cmd_benchmark(const Common& common, std::string out) {
  const ExperimentConfig cfg = resolve(common);
  if (out.empty()) out = cfg.output;
  const auto model = make_model(cfg);
  const TestGrid grid = make_grid(cfg, *model);
  const EstimatorSet set = build_estimators(cfg, *model, common.jobs);
  BenchmarkOptions opt;
  opt.jobs = common.jobs;
  const BenchmarkResult result = run_benchmark(*model, set.estimators, grid, opt);
  write_benchmark(result, out);

  std::ostringstream m;
  m << "# benchmark manifest\n";
  m << "model " << model->name() << '\n';
  m << "model_constants " << model->constants() << '\n';
  m << "grid_seed " << grid.seed << '\n';
  m << "grid_points " << grid.size() << '\n';
  m << "replicates " << grid.replicates << '\n';
  for (const auto& [key, map] : set.maps) m << "map " << display_name(key) << ' ' << map.provenance << '\n';
  for (const auto& r : result.reports) {
    m << "estimator " << r.estimator << " valid=" << (r.valid ? "true" : "false") << " failed=" << r.failed_cells
      << '/' << r.total_cells << '\n';
    for (const auto& note : r.notes) m << "note " << r.estimator << ' ' << note << '\n';
  }
  m << "\n# config\n" << cfg.emit();
  write_text(fs::path(out) / "manifest.txt", m.str());

  std::cout << "estimator IBIAS2 IVAR IMSE\n";
  for (const auto& r : result.reports)
    std::cout << r.estimator << ' ' << format_double(r.ibias2) << ' ' << format_double(r.ivar) << ' '
              << format_double(r.imse) << (r.valid ? "" : " (invalid)") << '\n';
  return 0;
}

int cmd_bootstrap(const Common& common, const std::string& bundle, const std::string& key, const std::string& data,
                  std::optional<Index> b, std::optional<double> alpha, bool region, const std::string& out,
                  bool self_test) {
  const ExperimentConfig cfg = resolve(common);
  const double a = alpha.value_or(cfg.bootstrap_alpha);
  if (!(a > 0.0 && a < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (self_test) {
    const double coverage =
        gaussian_mean_coverage(200, b.value_or(cfg.bootstrap_b), a, hash_combine64(cfg.seed, hash_string("coverage")),
                               common.jobs);
    const bool ok = coverage >= 0.85 && coverage <= 0.95;
    std::cout << "coverage " << format_double(coverage) << " over 200 replications (nominal "
              << format_double(1.0 - a) << ") " << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? 0 : 3;
  }
  if (data.empty()) throw UsageError("--data is required");
  if (out.empty()) throw UsageError("--out is required");
  const Dataset y = read_dataset_csv(data);
  ResolvedEstimator r = resolve_estimator(cfg, bundle, key, common.jobs);
  const std::uint64_t seed = hash_combine64(cfg.seed, hash_string("bootstrap"));
  const Vector theta_hat = r.estimator.run(y, seed).theta;
  const Index reps = b.value_or(cfg.bootstrap_b);
  BootstrapOptions opt;
  opt.jobs = common.jobs;
  const BootstrapResult res = bootstrap_run(r.estimator, *r.model, theta_hat, reps, hash_combine64(seed, 1), opt);
  const auto names = r.model->parameter_names();
  fs::create_directories(out);
  write_bootstrap_csv(res, names, (fs::path(out) / "bootstrap.csv").string());
  std::ostringstream iv;
  iv << "parameter,estimate,lo,hi\n";
  for (Index j = 0; j < res.estimates.cols(); ++j) {
    const auto [lo, hi] = bootstrap_interval(res, j, a);
    iv << names[static_cast<std::size_t>(j)] << ',' << format_double(res.theta_hat[j]) << ',' << format_double(lo)
       << ',' << format_double(hi) << '\n';
  }
  write_text(fs::path(out) / "intervals.csv", iv.str());
  const bool with_region = region || cfg.bootstrap_region;
  write_text(fs::path(out) / "report.txt", "estimator " + r.estimator.name + "\n" +
                                               bootstrap_report(res, names, a, with_region));
  std::cout << iv.str();
  if (static_cast<double>(res.failed) > 0.1 * static_cast<double>(reps)) {
    std::cerr << "error: " << res.failed << " of " << reps << " bootstrap replicates failed\n";
    return 3;
  }
  return 0;
}

int cmd_presets(const std::string& show, const std::string& canonicalize) {
  if (!show.empty()) {
    std::cout << preset(show).emit();
  } else if (!canonicalize.empty()) {
    std::cout << ExperimentConfig::load(canonicalize).emit();
  } else {
    for (const auto& n : preset_names()) std::cout << n << '\n';
  }
  return 0;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-free parameter estimation with reconstruction maps"};
  app.require_subcommand(1);

  Common common;
  std::string theta, out, bundle, estimator, data, method, show, canonicalize;
  Index reps = 1;
  std::optional<Index> n, b;
  std::optional<double> alpha;
  bool region = false, self_test = false;

  auto* sim = app.add_subcommand("simulate", "Write sim_<i>.csv datasets at theta");
  add_common(sim, common);
  sim->add_option("--theta", theta, "Comma-separated parameter vector")->required();
  sim->add_option("--reps", reps, "Number of datasets");
  sim->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Fit an RM or RM-DR map; writes model.bin and history.csv");
  add_common(train, common);
  train->add_option("--method", method, "rm or rmdr")->required();
  train->add_option("--n", n, "Training pairs (overrides the config)");
  train->add_option("--out", out, "Output directory")->required();

  auto* est = app.add_subcommand("estimate", "Estimate theta from a dataset CSV; prints a JSON record");
  add_common(est, common);
  est->add_option("--bundle", bundle, "Saved map (model.bin)");
  est->add_option("--estimator", estimator, "rm, rmdr, sle, abc, rmdrlo or mle");
  est->add_option("--data", data, "Dataset CSV")->required();
  est->add_option("--out", out, "JSON output file (default stdout)");

  auto* bench = app.add_subcommand("benchmark", "Paired benchmark over the configured test grid");
  add_common(bench, common);
  bench->add_option("--out", out, "Output directory (default: config output)");

  auto* boot = app.add_subcommand("bootstrap", "Parametric bootstrap intervals and region");
  add_common(boot, common);
  boot->add_option("--bundle", bundle, "Saved map (model.bin)");
  boot->add_option("--estimator", estimator, "rm, rmdr, sle, abc, rmdrlo or mle");
  boot->add_option("--data", data, "Dataset CSV");
  boot->add_option("--b", b, "Bootstrap replicates")->check(CLI::PositiveNumber);
  boot->add_option("--alpha", alpha, "Interval level is 1 - alpha");
  boot->add_flag("--region", region, "Also report the confidence ellipsoid");
  boot->add_option("--out", out, "Output directory");
  boot->add_flag("--self-test", self_test, "Gaussian-mean coverage check");

  auto* pre = app.add_subcommand("presets", "List presets, print one, or canonicalize a config file");
  pre->add_option("--show", show, "Print the named preset as a config file");
  pre->add_option("--canonicalize", canonicalize, "Print a config file in canonical form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*sim) return guarded([&] { return cmd_simulate(common, theta, reps, out); });
  if (*train) return guarded([&] { return cmd_train(common, method, n, out); });
  if (*est) return guarded([&] { return cmd_estimate(common, bundle, estimator, data, out); });
  if (*bench) return guarded([&] { return cmd_benchmark(common, out); });
  if (*boot) return guarded([&] { return cmd_bootstrap(common, bundle, estimator, data, b, alpha, region, out, self_test); });
  return guarded([&] { return cmd_presets(show, canonicalize); });
}
