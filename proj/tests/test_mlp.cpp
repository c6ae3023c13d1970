#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lfi/mlp.hpp"

using namespace lfi;

namespace {

MlpNetwork random_net(std::vector<Index> sizes, RngStream& rng) {
  MlpNetwork net = MlpNetwork::he_uniform(std::move(sizes), rng);
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (Index i = 0; i < net.layer(l).b.size(); ++i) net.layer(l).b[i] = sample_normal(rng, 0.0, 0.3);
  return net;
}

Matrix random_matrix(Index r, Index c, RngStream& rng) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m(i) = sample_normal(rng, 0.0, 1.0);
  return m;
}

double param_ref(MlpNetwork& net, std::size_t l, bool weight, Index i, double* set = nullptr) {
  double& p = weight ? net.layer(l).w(i) : net.layer(l).b[i];
  if (set) p = *set;
  return p;
}

}  // namespace

TEST_CASE("forward with zero parameters is zero") {
  MlpNetwork net({4, 8, 8, 3});
  CHECK(net.forward(Vector::Ones(4)).isZero());
  CHECK_THROWS_AS(net.forward(Vector::Ones(5)), InvalidArgument);
}

TEST_CASE("single linear layer is an affine map") {
  RngStream rng(1);
  MlpNetwork net = random_net({3, 2}, rng);
  const Vector x{{0.5, -1.0, 2.0}};
  Matrix a(2, 4);
  a << net.layer(0).w, net.layer(0).b;
  Vector x1(4);
  x1 << x, 1.0;
  CHECK((net.forward(x) - a * x1).norm() < 1e-14);
}

TEST_CASE("two-layer forward matches an explicit composition") {
  RngStream rng(2);
  MlpNetwork net = random_net({3, 5, 2}, rng);
  const Vector x{{0.1, -0.7, 1.3}};
  Vector h(5);
  for (Index i = 0; i < 5; ++i) {
    double s = net.layer(0).b[i];
    for (Index j = 0; j < 3; ++j) s += net.layer(0).w(i, j) * x[j];
    h[i] = s > 0.0 ? s : 0.0;
  }
  Vector out(2);
  for (Index i = 0; i < 2; ++i) {
    double s = net.layer(1).b[i];
    for (Index j = 0; j < 5; ++j) s += net.layer(1).w(i, j) * h[j];
    out[i] = s;
  }
  CHECK((net.forward(x) - out).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((net.forward_columns(x) - out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rescaling hidden weights leaves a bias-free one-hidden-layer net unchanged") {
  RngStream rng(3);
  MlpNetwork net = MlpNetwork::he_uniform({4, 6, 2}, rng);
  const Vector x = random_matrix(4, 1, rng);
  const Vector before = net.forward(x);
  net.layer(0).w *= 3.7;
  net.layer(1).w /= 3.7;
  CHECK((net.forward(x) - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss is zero at the targets") {
  RngStream rng(4);
  MlpNetwork net = random_net({3, 4, 2}, rng);
  const Matrix x = random_matrix(3, 5, rng);
  const Matrix t = net.forward_columns(x);
  Gradients g;
  CHECK(loss_and_gradient(net, x, t, &g) == 0.0);
  for (const auto& gw : g.w) CHECK(gw.isZero());
  for (const auto& gb : g.b) CHECK(gb.isZero());
}

TEST_CASE("linear layer gradient closed form") {
  RngStream rng(5);
  MlpNetwork net = random_net({3, 2}, rng);
  const Vector x{{1.0, 2.0, -1.0}};
  const Vector t{{0.3, -0.2}};
  Gradients g;
  loss_and_gradient(net, x, t, &g);
  const Vector r = net.forward(x) - t;
  CHECK((g.w[0] - 2.0 * r * x.transpose()).norm() < 1e-13);
  CHECK((g.b[0] - 2.0 * r).norm() < 1e-13);
}

TEST_CASE("gradients match central differences") {
  for (int inst = 0; inst < 20; ++inst) {
    RngStream rng(100, inst);
    const Index k = 2 + inst % 4, d = 1 + inst % 3, n = 1 + inst % 5;
    MlpNetwork net = random_net({k, 6, 5, d}, rng);
    const Matrix x = random_matrix(k, n, rng);
    const Matrix t = random_matrix(d, n, rng);
    Gradients g;
    loss_and_gradient(net, x, t, &g);
    const double h = 1e-5;
    for (std::size_t l = 0; l < net.layer_count(); ++l)
      for (bool weight : {true, false}) {
        const Index count = weight ? net.layer(l).w.size() : net.layer(l).b.size();
        for (Index i = 0; i < count; ++i) {
          const double orig = param_ref(net, l, weight, i);
          double v = orig + h;
          param_ref(net, l, weight, i, &v);
          const double up = loss_and_gradient(net, x, t, nullptr);
          v = orig - h;
          param_ref(net, l, weight, i, &v);
          const double down = loss_and_gradient(net, x, t, nullptr);
          param_ref(net, l, weight, i, const_cast<double*>(&orig));
          const double fd = (up - down) / (2.0 * h);
          const double an = weight ? g.w[l](i) : g.b[l][i];
          if (std::abs(an) > 1e-8) CHECK(std::abs(an - fd) / std::abs(an) < 1e-5);
          else CHECK(std::abs(fd) < 1e-7);
        }
      }
  }
}

TEST_CASE("adam with zero gradient leaves weights unchanged") {
  RngStream rng(6);
  MlpNetwork net = random_net({3, 4, 2}, rng);
  const MlpNetwork before = net;
  AdamState s(net, 1e-3);
  adam_step(s, net, Gradients::zeros_like(net));
  CHECK(net.layer(0).w == before.layer(0).w);
  CHECK(s.step == 1);
}

TEST_CASE("adam first step is alpha times the gradient sign") {
  MlpNetwork net({1, 1});
  AdamState s(net, 0.01);
  Gradients g = Gradients::zeros_like(net);
  g.w[0](0, 0) = 0.5;
  g.b[0][0] = -3.0;
  adam_step(s, net, g);
  // Bias-corrected first step: -alpha * g / (|g| + eps).
  CHECK(net.layer(0).w(0, 0) == doctest::Approx(-0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(net.layer(0).b[0] == doctest::Approx(0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam under a constant gradient moves by alpha per step") {
  MlpNetwork net({1, 1});
  AdamState s(net, 0.01);
  Gradients g = Gradients::zeros_like(net);
  g.w[0](0, 0) = 2.0;
  double prev = 0.0, last_step = 0.0;
  for (int i = 0; i < 1000; ++i) {
    adam_step(s, net, g);
    const double w = net.layer(0).w(0, 0);
    REQUIRE(w < prev);
    last_step = prev - w;
    prev = w;
  }
  CHECK(last_step == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("standardizer round trip") {
  RngStream rng(7);
  const Matrix x = random_matrix(50, 4, rng) * 100.0;
  const DesignBox box(Vector{{2.0, 0.0}}, Vector{{5.0, 0.3}});
  const Standardizer s = Standardizer::fit(x, box);
  for (Index i = 0; i < 10; ++i) {
    const Vector v = x.row(i).transpose();
    CHECK((s.destandardize(s.standardize(v)) - v).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + v.cwiseAbs().maxCoeff()));
  }
  const Vector th{{3.1, 0.17}};
  CHECK((s.from_unit(s.to_unit(th)) - th).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(s.to_unit(box.lo).isZero());
  Matrix constant = Matrix::Ones(5, 2);
  CHECK(Standardizer::fit(constant, box).in_sd.minCoeff() == Standardizer::kSdFloor);
}

namespace {

struct Linear1d {
  Matrix x, t, xv, tv;
  DesignBox box{Vector{{-1.0}}, Vector{{3.0}}};
  Linear1d() {
    RngStream rng(8);
    x.resize(50, 1);
    t.resize(50, 1);
    for (Index i = 0; i < 50; ++i) {
      x(i, 0) = 2.0 * rng.uniform() - 1.0;
      t(i, 0) = 1.0 + 1.5 * x(i, 0);
    }
    xv = x.topRows(10);
    tv = t.topRows(10);
  }
};

}  // namespace

TEST_CASE("training fits a linear relation") {
  Linear1d d;
  TrainConfig cfg;
  cfg.hidden = {8};
  cfg.batch_size = 10;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.alpha = 1e-2;
  const TrainResult r = train(d.x, d.t, d.xv, d.tv, d.box, cfg);
  CHECK(r.history.train_loss.back() < 1e-3);
  double best = INFINITY;
  for (double v : r.history.val_loss) best = std::min(best, v);
  CHECK(r.history.best_val_loss() == best);
}

TEST_CASE("training is deterministic given the seed") {
  Linear1d d;
  TrainConfig cfg;
  cfg.hidden = {8, 8};
  cfg.max_epochs = 30;
  cfg.seed = 42;
  const TrainResult a = train(d.x, d.t, d.xv, d.tv, d.box, cfg);
  const TrainResult b = train(d.x, d.t, d.xv, d.tv, d.box, cfg);
  for (std::size_t l = 0; l < a.network.layer_count(); ++l) CHECK(a.network.layer(l).w == b.network.layer(l).w);
  cfg.seed = 43;
  const TrainResult c = train(d.x, d.t, d.xv, d.tv, d.box, cfg);
  CHECK(c.network.layer(0).w != a.network.layer(0).w);
}

TEST_CASE("early stopping returns the best snapshot") {
  Linear1d d;
  bool saw_epoch_two_stop = false;
  for (double alpha : {0.3, 1.0, 3.0, 10.0}) {
    TrainConfig cfg;
    cfg.hidden = {4};
    cfg.patience = 0;
    cfg.batch_size = 50;
    cfg.alpha = alpha;
    const TrainResult r = train(d.x, d.t, d.xv, d.tv, d.box, cfg);
    const auto& h = r.history;
    if (h.stopped_early) {
      CHECK(static_cast<Index>(h.val_loss.size()) == h.best_epoch + 1);
      CHECK(h.val_loss.back() >= h.best_val_loss());
    }
    if (h.val_loss.size() == 2 && h.best_epoch == 1) saw_epoch_two_stop = true;
    // The returned network reproduces the best validation loss.
    double loss = 0.0;
    for (Index i = 0; i < d.xv.rows(); ++i) {
      const Vector u = r.network.scaling.to_unit(d.tv.row(i).transpose());
      const Vector p = r.network.forward(r.network.scaling.standardize(d.xv.row(i).transpose()));
      loss += (p - u).squaredNorm();
    }
    CHECK(loss / double(d.xv.rows()) == doctest::Approx(h.best_val_loss()).epsilon(1e-10));
  }
  CHECK(saw_epoch_two_stop);
}

TEST_CASE("training config validation") {
  Linear1d d;
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(d.x, d.t, d.xv, d.tv, d.box, cfg), ConfigError);
  cfg = {};
  cfg.patience = 600;
  CHECK_THROWS_AS(train(d.x, d.t, d.xv, d.tv, d.box, cfg), ConfigError);
}

TEST_CASE("divergent training raises") {
  Linear1d d;
  TrainConfig cfg;
  cfg.alpha = 1e300;
  cfg.hidden = {4};
  cfg.max_epochs = 50;
  CHECK_THROWS_AS(train(d.x, d.t * 1e300, d.xv, d.tv * 1e300, d.box, cfg), DivergenceError);
}

TEST_CASE("model bundle round trip and corruption") {
  RngStream rng(9);
  ModelBundle b;
  b.model = "ricker";
  b.pipeline_manifest = "pipeline=ricker\n";
  b.provenance = "seed=1";
  b.network = random_net({4, 5, 3}, rng);
  b.network.scaling = Standardizer::fit(random_matrix(10, 4, rng), DesignBox(Vector{{0, 0, 0.}}, Vector{{1, 2, 3.}}));
  const auto path = (std::filesystem::temp_directory_path() / "lfi_bundle.bin").string();
  save_model(b, path);
  const ModelBundle back = load_model(path);
  CHECK(back.model == "ricker");
  CHECK(back.pipeline_manifest == b.pipeline_manifest);
  for (int i = 0; i < 20; ++i) {
    const Vector x = random_matrix(4, 1, rng);
    CHECK((back.network.predict(x) - b.network.predict(x)).cwiseAbs().maxCoeff() <= 1e-15);
  }
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_model(path), FormatError);
  save_model(b, path);
  std::filesystem::resize_file(path, 60);
  CHECK_THROWS_AS(load_model(path), FormatError);
  std::remove(path.c_str());
}
