#pragma once

#include <string>
#include <vector>

#include "lfi/numeric.hpp"
#include "lfi/simulators.hpp"

namespace lfi {

/// Input standardization and the affine map from a parameter box to [0, 1]^d.
/// Default-constructed instances are the identity.
struct Standardizer {
  Vector in_mean;
  Vector in_sd;
  Vector out_lo;
  Vector out_width;

  static constexpr double kSdFloor = 1e-12;

  /// Per-column mean and sd (divisor n) of `x` (rows are samples); sd floored.
  static Standardizer fit(const Eigen::Ref<const Matrix>& x, const DesignBox& target_box, bool standardize_inputs = true,
                          bool scale_targets = true);

  Vector standardize(const Eigen::Ref<const Vector>& x) const;
  Vector destandardize(const Eigen::Ref<const Vector>& z) const;
  Vector to_unit(const Eigen::Ref<const Vector>& theta) const;
  Vector from_unit(const Eigen::Ref<const Vector>& u) const;
};

struct DenseLayer {
  Matrix w;  ///< out x in
  Vector b;  ///< out
};

/// Fully-connected network with ReLU hidden layers and identity output.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  /// Zero weights and biases. sizes = (input, hidden..., output).
  explicit MlpNetwork(std::vector<Index> sizes);
  /// Uniform weights on +-sqrt(6 / fan_in), zero biases.
  static MlpNetwork he_uniform(std::vector<Index> sizes, RngStream& rng);

  const std::vector<Index>& sizes() const { return sizes_; }
  Index input_size() const { return sizes_.front(); }
  Index output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return layers_.size(); }
  DenseLayer& layer(std::size_t l) { return layers_[l]; }
  const DenseLayer& layer(std::size_t l) const { return layers_[l]; }
  Index parameter_count() const;

  /// The raw composition f_L o h_L o ... o f_1 o h_1.
  Vector forward(const Eigen::Ref<const Vector>& x) const;
  /// Columns of `x` are inputs; returns outputs as columns.
  Matrix forward_columns(const Eigen::Ref<const Matrix>& x) const;

  /// Scaling fitted at training time; `predict` applies it around `forward`.
  Standardizer scaling;
  Vector predict(const Eigen::Ref<const Vector>& x) const;

 private:
  std::vector<Index> sizes_;
  std::vector<DenseLayer> layers_;
};

struct Gradients {
  std::vector<Matrix> w;
  std::vector<Vector> b;

  static Gradients zeros_like(const MlpNetwork& net);
};

/// Mean over columns of ||N(x_i) - t_i||^2 and its exact gradient. Columns of
/// `x` and `targets` are paired samples. ReLU'(0) is taken as 0.
double loss_and_gradient(const MlpNetwork& net, const Eigen::Ref<const Matrix>& x,
                         const Eigen::Ref<const Matrix>& targets, Gradients* grad);

struct AdamState {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  Gradients m;
  Gradients v;

  AdamState() = default;
  AdamState(const MlpNetwork& net, double alpha, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
};

/// One bias-corrected Adam update in place.
void adam_step(AdamState& state, MlpNetwork& net, const Gradients& grad);

struct TrainConfig {
  std::vector<Index> hidden{32, 32};
  Index batch_size = 128;
  Index max_epochs = 500;
  Index patience = 25;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool standardize_inputs = true;
  bool scale_targets = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  Index best_epoch = 0;  ///< 1-based epoch of the returned snapshot
  bool stopped_early = false;

  double best_val_loss() const { return val_loss.at(static_cast<std::size_t>(best_epoch - 1)); }
  void write_csv(const std::string& path) const;
};

struct TrainResult {
  MlpNetwork network;
  TrainHistory history;
};

/// Mini-batch Adam with validation early stopping. Rows of `x_*` are inputs,
/// rows of `theta_*` are targets in parameter units; `target_box` defines the
/// [0, 1] target scaling. Returns the minimum-validation-loss snapshot with
/// its scaling installed.
TrainResult train(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& theta_train,
                  const Eigen::Ref<const Matrix>& x_val, const Eigen::Ref<const Matrix>& theta_val,
                  const DesignBox& target_box, const TrainConfig& cfg);

/// Network plus the metadata needed to apply it to raw datasets.
struct ModelBundle {
  std::string model;              ///< generative model name
  std::string pipeline_manifest;  ///< empty for maps on raw data
  std::string provenance;
  MlpNetwork network;
};

void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

}  // namespace lfi
