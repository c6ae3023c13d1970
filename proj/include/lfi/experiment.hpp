#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lfi/config.hpp"
#include "lfi/evaluation.hpp"

namespace lfi {

std::unique_ptr<GenerativeModel> make_model(const ExperimentConfig& config);
/// The model's shipped pipeline with the configured options; throws ConfigError
/// when the config disables summaries.
SummaryPipeline make_pipeline(const ExperimentConfig& config, const GenerativeModel& model);

/// Training pairs come from hash(seed, "train-data") for both map types, so
/// RM and RM-DR see the same design points; weights from hash(seed, "train-init").
FitOptions fit_options(const ExperimentConfig& config, std::size_t jobs);
SleConfig sle_config(const ExperimentConfig& config);

/// Trains maps as needed and wraps every configured estimator. Owns the
/// trained maps; `model` must outlive the returned estimators.
struct EstimatorSet {
  std::vector<Estimator> estimators;
  std::map<std::string, FittedReconstructionMap> maps;  ///< "rm", "rmdr" when trained
};
EstimatorSet build_estimators(const ExperimentConfig& config, const GenerativeModel& model, std::size_t jobs);

TestGrid make_grid(const ExperimentConfig& config, const GenerativeModel& model);

/// Display names used in reports: RM, RM-DR, SLE, ABC, RM-DRLO, MLE.
std::string display_name(const std::string& estimator_key);

// --- Dataset CSV ------------------------------------------------------------------------

/// Header `t,<series...>` with the time grid, or `n,<series...>` with 1-based
/// indices when the dataset has no time grid.
void write_dataset_csv(const Dataset& data, const std::string& path);
/// Inverse of write_dataset_csv; FormatError names the offending line.
Dataset read_dataset_csv(const std::string& path);

}  // namespace lfi
