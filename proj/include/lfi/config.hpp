#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lfi/estimators.hpp"

namespace lfi {

/// Sectioned key = value text. Keys before the first section live in "".
/// `#` and `;` start comment lines. Duplicate keys are rejected.
struct IniDocument {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static IniDocument parse(std::string_view text);
  /// Sections and keys in lexicographic order, one blank line between sections.
  std::string emit() const;
};

/// Everything one experiment needs; see `presets()` for the shipped protocols.
struct ExperimentConfig {
  static constexpr int kSchema = 1;

  // [experiment]
  std::uint64_t seed = 1;
  std::string output = "out";

  // [model]
  std::string model = "ricker";
  Index ricker_m = 1000;
  double ricker_n0 = 2.0;
  Index mg1_n = 1000;
  double lv_t_end = 30.0;
  Index lv_grid_points = 1000;
  double fn_noise_sd = 0.06;
  Index gauss_m = 100;
  double gauss_sd = 1.0;
  double gauss_lo = -5.0;
  double gauss_hi = 5.0;

  // [pipeline]
  bool use_pipeline = true;  ///< id = none disables summaries (RM only)
  PipelineOptions pipeline;

  // [train]
  Index train_n = 2000;
  double validation_fraction = 0.25;
  TrainConfig train;

  // [grid]
  std::string grid_mode = "uniform";  ///< uniform | explicit | fn
  Index grid_q = 30;
  Index grid_l = 10;
  Index fn_stride = 5;
  std::vector<Vector> grid_points;

  // [estimators]
  std::vector<std::string> estimators{"rm", "rmdr"};

  // [sle]
  Index sle_n_s = 100;
  Index sle_iterations_per_dim = 200;

  // [abc]
  AbcConfig abc;

  // [rmdrlo]
  Index rmdrlo_budget = 2000;

  // [bootstrap]
  Index bootstrap_b = 200;
  double bootstrap_alpha = 0.1;
  bool bootstrap_region = false;

  /// Rejects unknown sections or keys, keys for a model other than the selected
  /// one, and a schema other than kSchema. Errors are ConfigError.
  static ExperimentConfig from_ini(const IniDocument& doc);
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::string& path);
  IniDocument to_ini() const;
  std::string emit() const { return to_ini().emit(); }
  void validate() const;
};

/// Shipped protocol presets by name, in lexicographic order.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

}  // namespace lfi
