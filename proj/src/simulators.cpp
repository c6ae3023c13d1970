#include "lfi/simulators.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "lfi/text.hpp"

namespace lfi {

namespace {

std::atomic<std::uint64_t> g_simulations{0};

constexpr double kRickerLatentCap = 1e12;

void require_dim(const ParameterVector& theta, Index d, const std::string& model) {
  if (theta.size() != d)
    throw InvalidArgument(model + ": expected " + std::to_string(d) + " parameters, got " +
                          std::to_string(theta.size()));
  if (!theta.allFinite()) throw InvalidArgument(model + ": parameters must be finite");
}

}  // namespace

// --- DesignBox / Dataset ---------------------------------------------------

DesignBox::DesignBox(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw InvalidArgument("design box: bound lengths differ");
  if (lo.size() == 0) throw InvalidArgument("design box: empty");
  for (Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw InvalidArgument("design box: require finite lo < hi in component " + std::to_string(i));
}

bool DesignBox::contains(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != lo.size()) return false;
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Vector DesignBox::clamp(const Eigen::Ref<const Vector>& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

Dataset::Dataset(std::vector<std::string> names_, Matrix values_, Vector time_)
    : names(std::move(names_)), values(std::move(values_)), time(std::move(time_)) {
  if (static_cast<Index>(names.size()) != values.cols())
    throw InvalidArgument("dataset: " + std::to_string(names.size()) + " names for " +
                          std::to_string(values.cols()) + " series");
  if (values.rows() < 1) throw InvalidArgument("dataset: series must have length >= 1");
  if (time.size() != 0) {
    if (time.size() != values.rows()) throw InvalidArgument("dataset: time grid length differs from series length");
    for (Index i = 1; i < time.size(); ++i)
      if (!(time[i] > time[i - 1])) throw InvalidArgument("dataset: time grid must be strictly increasing");
  }
}

Vector Dataset::series(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return values.col(static_cast<Index>(j));
  throw SchemaMismatch("dataset has no series named '" + name + "'");
}

Vector Dataset::flatten() const { return values.reshaped(); }

// --- GenerativeModel ---------------------------------------------------------

void GenerativeModel::set_design(DesignBox box) {
  if (box.dim() != design_.dim())
    throw InvalidArgument(name() + ": design box dimension " + std::to_string(box.dim()) + " != " +
                          std::to_string(design_.dim()));
  design_ = std::move(box);
}

Dataset GenerativeModel::simulate(const ParameterVector& theta, RngStream& rng) const {
  require_dim(theta, parameter_dimension(), name());
  g_simulations.fetch_add(1, std::memory_order_relaxed);
  return do_simulate(theta, rng);
}

std::uint64_t simulation_count() { return g_simulations.load(); }

// --- Ricker ------------------------------------------------------------------

Dataset simulate_ricker(const ParameterVector& theta, Index m, double n0, RngStream& rng) {
  require_dim(theta, 3, "ricker");
  const double eta = theta[0], sigma = theta[1], delta = theta[2];
  if (m < 1) throw InvalidArgument("ricker: m must be >= 1");
  if (!(n0 > 0.0)) throw InvalidArgument("ricker: initial population must be > 0");
  if (sigma < 0.0) throw InvalidArgument("ricker: sigma must be >= 0");
  if (!(delta > 0.0)) throw InvalidArgument("ricker: delta must be > 0");
  Matrix y(m, 1);
  double n = n0;
  for (Index t = 0; t < m; ++t) {
    const double eps = sample_normal(rng, 0.0, sigma);
    n = ricker_step(eta, n, eps);
    if (!std::isfinite(n) || n > kRickerLatentCap)
      throw SimulationError("ricker: latent population overflow at t=" + std::to_string(t + 1));
    y(t, 0) = static_cast<double>(sample_poisson(rng, delta * n));
  }
  return Dataset({"count"}, std::move(y));
}

RickerModel::RickerModel(Index m, double n0)
    : GenerativeModel(DesignBox(Vector{{2.0, 0.0, 1.0}}, Vector{{5.0, 0.3, 4.0}})), m_(m), n0_(n0) {
  if (m < 1 || !(n0 > 0.0)) throw InvalidArgument("ricker: need m >= 1 and n0 > 0");
}

std::string RickerModel::constants() const {
  return "m=" + std::to_string(m_) + ";n0=" + format_double(n0_);
}

Dataset RickerModel::do_simulate(const ParameterVector& theta, RngStream& rng) const {
  return simulate_ricker(theta, m_, n0_, rng);
}

// --- M/G/1 -------------------------------------------------------------------

Vector mg1_interdepartures(const Eigen::Ref<const Vector>& service, const Eigen::Ref<const Vector>& arrival_gaps) {
  if (service.size() != arrival_gaps.size() || service.size() < 1)
    throw InvalidArgument("mg1: service and arrival sequences must have equal positive length");
  Vector y(service.size());
  // lag = (arrival time of customer n) - (departure time of customer n-1)
  double lag = arrival_gaps[0];
  for (Index i = 0; i < service.size(); ++i) {
    if (i > 0) lag += arrival_gaps[i] - y[i - 1];
    y[i] = lag <= 0.0 ? service[i] : service[i] + lag;
  }
  return y;
}

Dataset simulate_mg1(const ParameterVector& theta, Index n, RngStream& rng) {
  require_dim(theta, 3, "mg1");
  if (!(theta[0] >= 0.0) || !(theta[1] > theta[0])) throw InvalidArgument("mg1: require 0 <= theta1 < theta2");
  if (!(theta[2] > 0.0)) throw InvalidArgument("mg1: arrival rate theta3 must be > 0");
  if (n < 1) throw InvalidArgument("mg1: n must be >= 1");
  Vector service(n), gaps(n);
  for (Index i = 0; i < n; ++i) {
    service[i] = theta[0] + (theta[1] - theta[0]) * rng.uniform();
    gaps[i] = i == 0 ? 0.0 : sample_exponential(rng, theta[2]);
  }
  Matrix y = mg1_interdepartures(service, gaps);
  if (!y.allFinite()) throw SimulationError("mg1: non-finite inter-departure time");
  return Dataset({"interdeparture"}, std::move(y));
}

Mg1Model::Mg1Model(Index n)
    : GenerativeModel(DesignBox(Vector{{0.0, 0.0, 0.0}}, Vector{{10.0, 10.0, 1.0 / 3.0}})), n_(n) {
  if (n < 1) throw InvalidArgument("mg1: n must be >= 1");
}

std::string Mg1Model::constants() const { return "n=" + std::to_string(n_) + ";design=(theta1,theta2-theta1,theta3)"; }

ParameterVector Mg1Model::to_parameter(const Vector& u) const { return Vector{{u[0], u[0] + u[1], u[2]}}; }

Vector Mg1Model::to_design(const ParameterVector& theta) const {
  return Vector{{theta[0], theta[1] - theta[0], theta[2]}};
}

DesignBox Mg1Model::parameter_bounds() const {
  const auto& b = design();
  return DesignBox(Vector{{b.lo[0], b.lo[0] + b.lo[1], b.lo[2]}}, Vector{{b.hi[0], b.hi[0] + b.hi[1], b.hi[2]}});
}

Dataset Mg1Model::do_simulate(const ParameterVector& theta, RngStream& rng) const {
  return simulate_mg1(theta, n_, rng);
}

// --- Lotka-Volterra ------------------------------------------------------------

Dataset simulate_lv(const ParameterVector& theta, const LvSettings& s, RngStream& rng,
                    std::vector<LvEvent>* event_log) {
  require_dim(theta, 3, "lv");
  if (!(theta.array() > 0.0).all()) throw InvalidArgument("lv: rates must be > 0");
  if (s.prey0 < 0 || s.predator0 < 0) throw InvalidArgument("lv: initial counts must be >= 0");
  if (s.grid_points < 2) throw InvalidArgument("lv: need at least 2 grid points");
  if (!(s.t_end > 0.0)) throw InvalidArgument("lv: t_end must be > 0");

  const Index g = s.grid_points;
  Vector grid(g);
  for (Index j = 0; j < g; ++j) grid[j] = s.t_end * static_cast<double>(j) / static_cast<double>(g - 1);

  Matrix out(g, 2);
  std::int64_t u = s.prey0, v = s.predator0;
  double t = 0.0;
  Index next = 0;
  std::uint64_t events = 0;
  Vector hazard(3);
  while (next < g) {
    const double du = static_cast<double>(u), dv = static_cast<double>(v);
    hazard << theta[0] * du, theta[1] * du * dv, theta[2] * dv;
    const double total = hazard.sum();
    const double t_next = total > 0.0 ? t + sample_exponential(rng, total) : INFINITY;
    // Grid points strictly before the next event see the current state.
    while (next < g && grid[next] < t_next) {
      out(next, 0) = du;
      out(next, 1) = dv;
      ++next;
    }
    if (next >= g) break;
    if (++events > s.max_events)
      throw SimulationError("lv: event budget exhausted at simulated time t=" + std::to_string(t));
    switch (sample_event_index(rng, hazard)) {
      case 0: ++u; break;
      case 1: --u; ++v; break;
      default: --v; break;
    }
    t = t_next;
    if (event_log) event_log->push_back({t, u, v});
  }
  return Dataset({"prey", "predator"}, std::move(out), std::move(grid));
}

LvModel::LvModel(LvSettings settings)
    : GenerativeModel(DesignBox(Vector{{0.3, 0.005, 0.1}}, Vector{{0.6, 0.01, 0.4}})), settings_(settings) {}

std::string LvModel::constants() const {
  std::ostringstream os;
  os << "prey0=" << settings_.prey0 << ";predator0=" << settings_.predator0 << ";t_end=" << format_double(settings_.t_end)
     << ";grid_points=" << settings_.grid_points << ";max_events=" << settings_.max_events;
  return os.str();
}

Dataset LvModel::do_simulate(const ParameterVector& theta, RngStream& rng) const {
  return simulate_lv(theta, settings_, rng);
}

// --- FitzHugh-Nagumo -----------------------------------------------------------

namespace {

struct FnState {
  double v;
  double r;
};

inline FnState fn_rhs(const FnState& s, double th1, double th2, double tau, double zeta) {
  return {tau * (s.v - s.v * s.v * s.v / 3.0 + s.r + zeta), -(s.v - th1 + th2 * s.r) / tau};
}

/// RK4 trajectory on k * step, k = 0..steps; voltage and recovery columns.
Matrix fn_rk4(double th1, double th2, double tau, double zeta, double step, Index steps) {
  Matrix out(steps + 1, 2);
  FnState s{0.0, 0.0};
  out(0, 0) = 0.0;
  out(0, 1) = 0.0;
  const double h = step;
  for (Index k = 1; k <= steps; ++k) {
    const FnState k1 = fn_rhs(s, th1, th2, tau, zeta);
    const FnState k2 = fn_rhs({s.v + 0.5 * h * k1.v, s.r + 0.5 * h * k1.r}, th1, th2, tau, zeta);
    const FnState k3 = fn_rhs({s.v + 0.5 * h * k2.v, s.r + 0.5 * h * k2.r}, th1, th2, tau, zeta);
    const FnState k4 = fn_rhs({s.v + h * k3.v, s.r + h * k3.r}, th1, th2, tau, zeta);
    s.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    s.r += h / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
    if (!std::isfinite(s.v) || !std::isfinite(s.r) || std::abs(s.v) > 1e6)
      throw SimulationError("fn: solver state diverged at t=" + std::to_string(static_cast<double>(k) * h));
    out(k, 0) = s.v;
    out(k, 1) = s.r;
  }
  return out;
}

Index steps_for(double t_end, double step) {
  return static_cast<Index>(std::floor(t_end / step + 1e-9));
}

/// Solver grid indices of observation times; each must sit on the grid.
std::vector<Index> obs_indices(const Vector& obs_times, double step) {
  std::vector<Index> idx(static_cast<std::size_t>(obs_times.size()));
  for (Index i = 0; i < obs_times.size(); ++i) {
    const double k = std::round(obs_times[i] / step);
    if (obs_times[i] < 0.0 || std::abs(k * step - obs_times[i]) > 1e-9 * std::max(1.0, obs_times[i]))
      throw InvalidArgument("fn: observation time " + format_double(obs_times[i]) +
                            " is not a multiple of the solver step");
    idx[static_cast<std::size_t>(i)] = static_cast<Index>(k);
  }
  return idx;
}

}  // namespace

Dataset solve_fn_ode(const ParameterVector& theta, double tau, double zeta, double step, double t_end) {
  require_dim(theta, 2, "fn");
  if (!(step > 0.0) || !(t_end >= step)) throw InvalidArgument("fn: require step > 0 and t_end >= step");
  const Index steps = steps_for(t_end, step);
  Matrix traj = fn_rk4(theta[0], theta[1], tau, zeta, step, steps);
  Vector time(steps + 1);
  for (Index k = 0; k <= steps; ++k) time[k] = static_cast<double>(k) * step;
  return Dataset({"voltage", "recovery"}, std::move(traj), std::move(time));
}

Vector fn_default_obs_times(Index count, double spacing) {
  Vector t(count);
  for (Index i = 0; i < count; ++i) t[i] = spacing * static_cast<double>(i + 1);
  return t;
}

namespace {

Vector fn_voltage_at(const ParameterVector& theta, const Vector& obs_times, const FnConstants& c) {
  require_dim(theta, 2, "fn");
  if (obs_times.size() < 1) throw InvalidArgument("fn: no observation times");
  const auto idx = obs_indices(obs_times, c.step);
  Index last = 0;
  for (Index k : idx) last = std::max(last, k);
  const Matrix traj = fn_rk4(theta[0], theta[1], c.tau, c.zeta, c.step, std::max<Index>(last, 1));
  Vector v(obs_times.size());
  for (Index i = 0; i < v.size(); ++i) v[i] = traj(idx[static_cast<std::size_t>(i)], 0);
  return v;
}

}  // namespace

Dataset simulate_fn(const ParameterVector& theta, double noise_sd, const Vector& obs_times, RngStream& rng,
                    const FnConstants& constants) {
  if (!(noise_sd >= 0.0)) throw InvalidArgument("fn: noise sd must be >= 0");
  Matrix y = fn_voltage_at(theta, obs_times, constants);
  for (Index i = 0; i < y.rows(); ++i) y(i, 0) = sample_normal(rng, y(i, 0), noise_sd);
  return Dataset({"voltage"}, std::move(y), obs_times);
}

FnModel::FnModel(double noise_sd, Vector obs_times, FnConstants constants)
    : GenerativeModel(DesignBox(Vector{{-0.2, -0.4}}, Vector{{1.0, 1.2}})),
      noise_sd_(noise_sd),
      obs_times_(std::move(obs_times)),
      constants_(constants) {
  if (!(noise_sd >= 0.0)) throw InvalidArgument("fn: noise sd must be >= 0");
  obs_indices(obs_times_, constants_.step);
}

std::string FnModel::constants() const {
  return "tau=" + format_double(constants_.tau) + ";zeta=" + format_double(constants_.zeta) +
         ";step=" + format_double(constants_.step) + ";noise_sd=" + format_double(noise_sd_) +
         ";obs=" + std::to_string(obs_times_.size()) + "@" + format_double(obs_times_[0]);
}

Vector FnModel::voltage(const ParameterVector& theta) const { return fn_voltage_at(theta, obs_times_, constants_); }

double FnModel::log_likelihood(const ParameterVector& theta, const Eigen::Ref<const Vector>& y) const {
  if (y.size() != obs_times_.size()) throw InvalidArgument("fn: observation length mismatch");
  if (!(noise_sd_ > 0.0)) throw InvalidArgument("fn: log-likelihood needs noise sd > 0");
  const Vector v = voltage(theta);
  const double m = static_cast<double>(y.size());
  return -0.5 * (y - v).squaredNorm() / (noise_sd_ * noise_sd_) - m * std::log(noise_sd_) -
         0.5 * m * std::log(2.0 * M_PI);
}

Dataset FnModel::do_simulate(const ParameterVector& theta, RngStream& rng) const {
  return simulate_fn(theta, noise_sd_, obs_times_, rng, constants_);
}

// --- Gaussian toy ----------------------------------------------------------------

GaussianMeanModel::GaussianMeanModel(Index m, double sd, double lo, double hi)
    : GenerativeModel(DesignBox(Vector{{lo}}, Vector{{hi}})), m_(m), sd_(sd) {
  if (m < 1 || !(sd > 0.0)) throw InvalidArgument("gauss-mean: need m >= 1 and sd > 0");
}

std::string GaussianMeanModel::constants() const { return "m=" + std::to_string(m_) + ";sd=" + format_double(sd_); }

Dataset GaussianMeanModel::do_simulate(const ParameterVector& theta, RngStream& rng) const {
  Matrix y(m_, 1);
  for (Index i = 0; i < m_; ++i) y(i, 0) = sample_normal(rng, theta[0], sd_);
  return Dataset({"y"}, std::move(y));
}

// --- Factory ---------------------------------------------------------------------

std::unique_ptr<GenerativeModel> make_model(const std::string& name) {
  if (name == "ricker") return std::make_unique<RickerModel>();
  if (name == "mg1") return std::make_unique<Mg1Model>();
  if (name == "lv") return std::make_unique<LvModel>();
  if (name == "fn") return std::make_unique<FnModel>();
  if (name == "gauss-mean") return std::make_unique<GaussianMeanModel>(100, 1.0, -5.0, 5.0);
  throw ConfigError("unknown model '" + name + "' (expected ricker, mg1, lv, fn, gauss-mean)");
}

}  // namespace lfi
