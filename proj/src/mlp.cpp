#include "lfi/mlp.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "lfi/binary_io.hpp"
#include "lfi/text.hpp"

namespace lfi {

// --- Standardizer ------------------------------------------------------------------

Standardizer Standardizer::fit(const Eigen::Ref<const Matrix>& x, const DesignBox& target_box, bool standardize_inputs,
                               bool scale_targets) {
  if (x.rows() < 1) throw InvalidArgument("standardizer: no samples");
  Standardizer s;
  const Index k = x.cols();
  if (standardize_inputs) {
    s.in_mean = x.colwise().mean().transpose();
    s.in_sd.resize(k);
    for (Index j = 0; j < k; ++j) {
      const double var = (x.col(j).array() - s.in_mean[j]).square().mean();
      s.in_sd[j] = std::max(std::sqrt(var), kSdFloor);
    }
  } else {
    s.in_mean = Vector::Zero(k);
    s.in_sd = Vector::Ones(k);
  }
  if (scale_targets) {
    s.out_lo = target_box.lo;
    s.out_width = target_box.width();
  } else {
    s.out_lo = Vector::Zero(target_box.dim());
    s.out_width = Vector::Ones(target_box.dim());
  }
  return s;
}

Vector Standardizer::standardize(const Eigen::Ref<const Vector>& x) const {
  if (in_mean.size() == 0) return x;
  if (x.size() != in_mean.size())
    throw InvalidArgument("standardizer: input has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(in_mean.size()));
  return (x - in_mean).cwiseQuotient(in_sd);
}

Vector Standardizer::destandardize(const Eigen::Ref<const Vector>& z) const {
  if (in_mean.size() == 0) return z;
  return z.cwiseProduct(in_sd) + in_mean;
}

Vector Standardizer::to_unit(const Eigen::Ref<const Vector>& theta) const {
  if (out_lo.size() == 0) return theta;
  return (theta - out_lo).cwiseQuotient(out_width);
}

Vector Standardizer::from_unit(const Eigen::Ref<const Vector>& u) const {
  if (out_lo.size() == 0) return u;
  return u.cwiseProduct(out_width) + out_lo;
}

// --- Network -----------------------------------------------------------------------

MlpNetwork::MlpNetwork(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw InvalidArgument("mlp: need at least input and output sizes");
  for (Index s : sizes_)
    if (s < 1) throw InvalidArgument("mlp: layer sizes must be >= 1");
  for (std::size_t l = 1; l < sizes_.size(); ++l)
    layers_.push_back({Matrix::Zero(sizes_[l], sizes_[l - 1]), Vector::Zero(sizes_[l])});
}

MlpNetwork MlpNetwork::he_uniform(std::vector<Index> sizes, RngStream& rng) {
  MlpNetwork net(std::move(sizes));
  for (auto& layer : net.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.w.cols()));
    for (Index i = 0; i < layer.w.size(); ++i) layer.w(i) = bound * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

Index MlpNetwork::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

Vector MlpNetwork::forward(const Eigen::Ref<const Vector>& x) const {
  if (layers_.empty()) throw InvalidArgument("mlp: empty network");
  if (x.size() != input_size())
    throw InvalidArgument("mlp: input has " + std::to_string(x.size()) + " entries, network expects " +
                          std::to_string(input_size()));
  Vector h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector a = layers_[l].w * h + layers_[l].b;
    if (l + 1 < layers_.size()) a = a.cwiseMax(0.0);
    h = std::move(a);
  }
  return h;
}

Matrix MlpNetwork::forward_columns(const Eigen::Ref<const Matrix>& x) const {
  if (x.rows() != input_size()) throw InvalidArgument("mlp: batch input dimension mismatch");
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix a = layers_[l].w * h;
    a.colwise() += layers_[l].b;
    if (l + 1 < layers_.size()) a = a.cwiseMax(0.0);
    h = std::move(a);
  }
  return h;
}

Vector MlpNetwork::predict(const Eigen::Ref<const Vector>& x) const {
  return scaling.from_unit(forward(scaling.standardize(x)));
}

// --- Gradients / Adam --------------------------------------------------------------

Gradients Gradients::zeros_like(const MlpNetwork& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    g.w.push_back(Matrix::Zero(net.layer(l).w.rows(), net.layer(l).w.cols()));
    g.b.push_back(Vector::Zero(net.layer(l).b.size()));
  }
  return g;
}

double loss_and_gradient(const MlpNetwork& net, const Eigen::Ref<const Matrix>& x,
                         const Eigen::Ref<const Matrix>& targets, Gradients* grad) {
  const Index n = x.cols();
  if (n < 1) throw InvalidArgument("loss_and_gradient: empty batch");
  if (x.rows() != net.input_size() || targets.rows() != net.output_size() || targets.cols() != n)
    throw InvalidArgument("loss_and_gradient: batch shape mismatch");
  const std::size_t depth = net.layer_count();
  // Pre-activations a[l] and activations h[l] (h[0] = input).
  std::vector<Matrix> h(depth + 1);
  std::vector<Matrix> a(depth);
  h[0] = x;
  for (std::size_t l = 0; l < depth; ++l) {
    a[l] = net.layer(l).w * h[l];
    a[l].colwise() += net.layer(l).b;
    h[l + 1] = l + 1 < depth ? Matrix(a[l].cwiseMax(0.0)) : a[l];
  }
  const Matrix residual = h[depth] - targets;
  const double loss = residual.squaredNorm() / static_cast<double>(n);
  if (!grad) return loss;

  if (grad->w.size() != depth) *grad = Gradients::zeros_like(net);
  Matrix delta = (2.0 / static_cast<double>(n)) * residual;
  for (std::size_t l = depth; l-- > 0;) {
    grad->w[l].noalias() = delta * h[l].transpose();
    grad->b[l] = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = net.layer(l).w.transpose() * delta;
      delta = back.cwiseProduct((a[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

AdamState::AdamState(const MlpNetwork& net, double alpha_, double beta1_, double beta2_, double epsilon_)
    : alpha(alpha_), beta1(beta1_), beta2(beta2_), epsilon(epsilon_), m(Gradients::zeros_like(net)),
      v(Gradients::zeros_like(net)) {}

void adam_step(AdamState& s, MlpNetwork& net, const Gradients& g) {
  if (s.m.w.size() != net.layer_count() || g.w.size() != net.layer_count())
    throw InvalidArgument("adam_step: state and gradient shapes do not match the network");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseAbs2();
    param.array() -= s.alpha * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    if (g.w[l].rows() != net.layer(l).w.rows() || g.w[l].cols() != net.layer(l).w.cols())
      throw InvalidArgument("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    update(net.layer(l).w, s.m.w[l], s.v.w[l], g.w[l]);
    update(net.layer(l).b, s.m.b[l], s.v.b[l], g.b[l]);
  }
}

// --- Training ----------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 0 || patience > max_epochs) throw ConfigError("train: patience must lie in [0, max_epochs]");
  if (!(alpha > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
  for (Index h : hidden)
    if (h < 1) throw ConfigError("train: hidden layer sizes must be >= 1");
}

void TrainHistory::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < val_loss.size(); ++e)
    out << (e + 1) << ',' << format_double(train_loss[e]) << ',' << format_double(val_loss[e]) << '\n';
}

namespace {

/// Standardized inputs and unit-scaled targets, samples as columns.
void prepare(const Standardizer& s, const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& theta,
             Matrix& xs, Matrix& ts) {
  xs = ((x.rowwise() - s.in_mean.transpose()).array().rowwise() / s.in_sd.transpose().array()).matrix().transpose();
  ts = ((theta.rowwise() - s.out_lo.transpose()).array().rowwise() / s.out_width.transpose().array())
           .matrix()
           .transpose();
}

double mean_loss(const MlpNetwork& net, const Matrix& x, const Matrix& t) {
  constexpr Index chunk = 4096;
  double total = 0.0;
  for (Index start = 0; start < x.cols(); start += chunk) {
    const Index len = std::min(chunk, x.cols() - start);
    total += (net.forward_columns(x.middleCols(start, len)) - t.middleCols(start, len)).squaredNorm();
  }
  return total / static_cast<double>(x.cols());
}

}  // namespace

TrainResult train(const Eigen::Ref<const Matrix>& x_train, const Eigen::Ref<const Matrix>& theta_train,
                  const Eigen::Ref<const Matrix>& x_val, const Eigen::Ref<const Matrix>& theta_val,
                  const DesignBox& target_box, const TrainConfig& cfg) {
  cfg.validate();
  if (x_train.rows() < 1 || x_val.rows() < 1) throw InvalidArgument("train: empty training or validation set");
  if (x_train.rows() != theta_train.rows() || x_val.rows() != theta_val.rows())
    throw InvalidArgument("train: input and target row counts differ");
  if (x_train.cols() != x_val.cols() || theta_train.cols() != theta_val.cols() ||
      theta_train.cols() != target_box.dim())
    throw InvalidArgument("train: training and validation dimensions differ");

  const Standardizer scaling = Standardizer::fit(x_train, target_box, cfg.standardize_inputs, cfg.scale_targets);
  Matrix xt, tt, xv, tv;
  prepare(scaling, x_train, theta_train, xt, tt);
  prepare(scaling, x_val, theta_val, xv, tv);

  std::vector<Index> sizes{x_train.cols()};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(theta_train.cols());
  RngStream init_rng(cfg.seed, 0);
  MlpNetwork net = MlpNetwork::he_uniform(sizes, init_rng);
  AdamState adam(net, cfg.alpha, cfg.beta1, cfg.beta2, cfg.epsilon);
  Gradients grad = Gradients::zeros_like(net);
  RngStream shuffle_rng(cfg.seed, 1);

  const Index n = xt.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Matrix bx(xt.rows(), std::min(cfg.batch_size, n)), bt(tt.rows(), std::min(cfg.batch_size, n));

  TrainResult result;
  MlpNetwork best = net;
  double best_val = std::numeric_limits<double>::infinity();
  Index since_improvement = 0;
  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Index>(shuffle_rng.uniform() * static_cast<double>(i + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_loss = 0.0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index len = std::min(cfg.batch_size, n - start);
      for (Index c = 0; c < len; ++c) {
        const Index src = order[static_cast<std::size_t>(start + c)];
        bx.col(c) = xt.col(src);
        bt.col(c) = tt.col(src);
      }
      const double loss = loss_and_gradient(net, bx.leftCols(len), bt.leftCols(len), &grad);
      if (!std::isfinite(loss)) throw DivergenceError("train: non-finite loss in epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(len);
      adam_step(adam, net, grad);
    }
    const double val = mean_loss(net, xv, tv);
    if (!std::isfinite(val)) throw DivergenceError("train: non-finite validation loss in epoch " + std::to_string(epoch));
    result.history.train_loss.push_back(epoch_loss / static_cast<double>(n));
    result.history.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = net;
      result.history.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement > cfg.patience) {
      result.history.stopped_early = true;
      break;
    }
  }
  best.scaling = scaling;
  result.network = std::move(best);
  return result;
}

// --- Bundle I/O --------------------------------------------------------------------

namespace {

constexpr std::uint64_t kBundleVersion = 1;

}  // namespace

void save_model(const ModelBundle& bundle, const std::string& path) {
  const MlpNetwork& net = bundle.network;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write("LFIM", 4);
  binary::write_u64(out, kBundleVersion);
  binary::write_string(out, bundle.model);
  binary::write_string(out, bundle.pipeline_manifest);
  binary::write_string(out, bundle.provenance);
  binary::write_u64(out, net.sizes().size());
  for (Index s : net.sizes()) binary::write_u64(out, static_cast<std::uint64_t>(s));
  binary::write_vector(out, net.scaling.in_mean);
  binary::write_vector(out, net.scaling.in_sd);
  binary::write_vector(out, net.scaling.out_lo);
  binary::write_vector(out, net.scaling.out_width);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    for (Index i = 0; i < layer.w.size(); ++i) binary::write_f64(out, layer.w(i));
    for (Index i = 0; i < layer.b.size(); ++i) binary::write_f64(out, layer.b[i]);
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  binary::expect_magic(in, "LFIM");
  const auto version = binary::read_u64(in, "version");
  if (version != kBundleVersion) throw FormatError("unsupported model bundle version " + std::to_string(version));
  ModelBundle b;
  b.model = binary::read_string(in, "model name", 256);
  b.pipeline_manifest = binary::read_string(in, "pipeline manifest", 1u << 20);
  b.provenance = binary::read_string(in, "provenance", 1u << 20);
  const auto count = binary::read_u64(in, "layer count");
  if (count < 2 || count > 64) throw FormatError("implausible layer count in model bundle");
  std::vector<Index> sizes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto s = binary::read_u64(in, "layer size");
    if (s < 1 || s > (1u << 24)) throw FormatError("implausible layer size in model bundle");
    sizes.push_back(static_cast<Index>(s));
  }
  MlpNetwork net(sizes);
  net.scaling.in_mean = binary::read_vector(in, "input means");
  net.scaling.in_sd = binary::read_vector(in, "input sds");
  net.scaling.out_lo = binary::read_vector(in, "output offsets");
  net.scaling.out_width = binary::read_vector(in, "output widths");
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto& layer = net.layer(l);
    for (Index i = 0; i < layer.w.size(); ++i) layer.w(i) = binary::read_f64(in, "weights");
    for (Index i = 0; i < layer.b.size(); ++i) layer.b[i] = binary::read_f64(in, "biases");
  }
  b.network = std::move(net);
  return b;
}

}  // namespace lfi
