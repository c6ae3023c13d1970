#include "lfi/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lfi/text.hpp"

namespace lfi {

std::unique_ptr<GenerativeModel> make_model(const ExperimentConfig& c) {
  try {
    if (c.model == "ricker") return std::make_unique<RickerModel>(c.ricker_m, c.ricker_n0);
    if (c.model == "mg1") return std::make_unique<Mg1Model>(c.mg1_n);
    if (c.model == "lv") {
      LvSettings s;
      s.t_end = c.lv_t_end;
      s.grid_points = c.lv_grid_points;
      return std::make_unique<LvModel>(s);
    }
    if (c.model == "fn") return std::make_unique<FnModel>(c.fn_noise_sd);
    if (c.model == "gauss-mean") return std::make_unique<GaussianMeanModel>(c.gauss_m, c.gauss_sd, c.gauss_lo, c.gauss_hi);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model constants: ") + e.what());
  }
  throw ConfigError("unknown model '" + c.model + "'");
}

SummaryPipeline make_pipeline(const ExperimentConfig& c, const GenerativeModel& model) {
  if (!c.use_pipeline) throw ConfigError("no summary pipeline configured ([pipeline] id = none)");
  try {
    return SummaryPipeline::for_model(model, c.pipeline);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("pipeline options: ") + e.what());
  }
}

FitOptions fit_options(const ExperimentConfig& c, std::size_t jobs) {
  FitOptions o;
  o.n = c.train_n;
  o.validation_fraction = c.validation_fraction;
  o.data_seed = hash_combine64(c.seed, hash_string("train-data"));
  o.jobs = jobs;
  o.train = c.train;
  o.train.seed = hash_combine64(c.seed, hash_string("train-init"));
  return o;
}

SleConfig sle_config(const ExperimentConfig& c) {
  SleConfig s;
  s.n_s = c.sle_n_s;
  s.search.iterations_per_dim = c.sle_iterations_per_dim;
  s.seed = hash_combine64(c.seed, hash_string("sle"));
  return s;
}

std::string display_name(const std::string& key) {
  static const std::map<std::string, std::string> names{{"rm", "RM"},   {"rmdr", "RM-DR"},     {"sle", "SLE"},
                                                        {"abc", "ABC"}, {"rmdrlo", "RM-DRLO"}, {"mle", "MLE"}};
  auto it = names.find(key);
  return it == names.end() ? key : it->second;
}

EstimatorSet build_estimators(const ExperimentConfig& c, const GenerativeModel& model, std::size_t jobs) {
  if (c.estimators.empty()) throw ConfigError("the estimator set is empty");
  c.validate();
  EstimatorSet set;
  const FitOptions fit = fit_options(c, jobs);
  auto need_rmdr = [&] {
    if (!set.maps.count("rmdr")) set.maps.emplace("rmdr", fit_rmdr(model, make_pipeline(c, model), fit));
    return set.maps.at("rmdr");
  };
  for (const auto& key : c.estimators) {
    if (key == "rm") {
      if (!set.maps.count("rm")) set.maps.emplace("rm", fit_rm(model, fit));
      set.estimators.push_back(make_map_estimator("RM", set.maps.at("rm")));
    } else if (key == "rmdr") {
      set.estimators.push_back(make_map_estimator("RM-DR", need_rmdr()));
    } else if (key == "sle") {
      set.estimators.push_back(make_sle_estimator(model, make_pipeline(c, model), sle_config(c)));
    } else if (key == "abc") {
      set.estimators.push_back(make_abc_estimator(model, make_pipeline(c, model), c.abc));
    } else if (key == "rmdrlo" || key == "mle") {
      const auto* fn = dynamic_cast<const FnModel*>(&model);
      if (!fn) throw ConfigError("estimator " + key + " needs the fn model");
      set.estimators.push_back(key == "mle" ? make_fn_mle_estimator(*fn) : make_rmdrlo_estimator(*fn, need_rmdr(), c.rmdrlo_budget));
    } else {
      throw ConfigError("unknown estimator '" + key + "'");
    }
  }
  return set;
}

TestGrid make_grid(const ExperimentConfig& c, const GenerativeModel& model) {
  const std::uint64_t seed = hash_combine64(c.seed, hash_string("test-grid"));
  try {
    if (c.grid_mode == "fn") return TestGrid::fn_grid(c.fn_stride, c.grid_l, seed);
    if (c.grid_mode == "explicit") return TestGrid::explicit_points(model, c.grid_points, c.grid_l, seed);
    return TestGrid::uniform(model, c.grid_q, c.grid_l, seed);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
}

// --- Dataset CSV ------------------------------------------------------------------------

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const bool timed = data.time.size() > 0;
  out << (timed ? "t" : "n");
  for (const auto& n : data.names) out << ',' << n;
  out << '\n';
  for (Index i = 0; i < data.length(); ++i) {
    out << (timed ? format_double(data.time[i]) : std::to_string(i + 1));
    for (Index j = 0; j < data.series_count(); ++j) out << ',' << format_double(data.values(i, j));
    out << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read dataset '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> FormatError {
    return FormatError(path + ":" + std::to_string(line_no) + ": " + what);
  };
  ++line_no;
  if (!std::getline(in, line)) throw fail("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line, ',');
  for (auto& h : header) h = trim(h);
  if (header.size() < 2 || (header[0] != "t" && header[0] != "n"))
    throw fail("header must be 't' or 'n' followed by series names");
  const bool timed = header[0] == "t";
  const std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<double> time, values;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
    double first = 0.0;
    if (!parse_double(cells[0], first)) throw fail("cannot parse '" + trim(cells[0]) + "' as a number");
    if (timed) time.push_back(first);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v)) throw fail("cannot parse '" + trim(cells[j]) + "' as a number");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw fail("no data rows");
  const auto cols = static_cast<Index>(names.size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  try {
    return Dataset(names, std::move(m), timed ? Vector(Eigen::Map<const Vector>(time.data(), rows)) : Vector());
  } catch (const InvalidArgument& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace lfi
