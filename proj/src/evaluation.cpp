#include "lfi/evaluation.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lfi/parallel.hpp"
#include "lfi/text.hpp"

namespace lfi {

namespace {

constexpr std::uint64_t kGridStream = 0x67726964ull;

void check_grid(const TestGrid& g) {
  if (g.points.empty()) throw InvalidArgument("test grid: need at least one point");
  if (g.replicates < 1) throw InvalidArgument("test grid: need at least one replicate");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

// --- Test grids -----------------------------------------------------------------

TestGrid TestGrid::uniform(const GenerativeModel& model, Index q, Index l, std::uint64_t seed) {
  if (q < 1 || l < 1) throw InvalidArgument("test grid: Q and L must be >= 1");
  TestGrid g;
  g.replicates = l;
  g.mode = GridMode::uniform_sample;
  g.seed = seed;
  const DesignBox& box = model.design();
  for (Index i = 0; i < q; ++i) {
    RngStream rng = RngStream(seed, static_cast<std::uint64_t>(i)).substream(kGridStream);
    g.points.push_back(model.to_parameter(sample_uniform_box(rng, box.lo, box.hi)));
  }
  return g;
}

TestGrid TestGrid::explicit_points(const GenerativeModel& model, std::vector<ParameterVector> points, Index l,
                                   std::uint64_t seed) {
  TestGrid g;
  g.points = std::move(points);
  g.replicates = l;
  g.mode = GridMode::explicit_grid;
  g.seed = seed;
  check_grid(g);
  const DesignBox bounds = model.parameter_bounds();
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    if (g.points[i].size() != bounds.dim() || !bounds.contains(g.points[i]))
      throw InvalidArgument("test grid: point " + std::to_string(i) + " (" + join_doubles(g.points[i]) +
                            ") lies outside the parameter bounds");
  }
  return g;
}

TestGrid TestGrid::fn_grid(Index stride, Index l, std::uint64_t seed) {
  if (stride < 1 || 40 % stride != 0) throw InvalidArgument("fn grid: stride must divide 40");
  if (l < 1) throw InvalidArgument("test grid: L must be >= 1");
  TestGrid g;
  g.replicates = l;
  g.mode = GridMode::explicit_grid;
  g.seed = seed;
  for (Index j = 0; j <= 40; j += stride)
    for (Index k = 0; k <= 40; k += stride)
      g.points.push_back(Vector{{-0.2 + 0.03 * static_cast<double>(j), -0.4 + 0.04 * static_cast<double>(k)}});
  return g;
}

RngStream cell_stream(const TestGrid& grid, Index q, Index l) {
  return RngStream(grid.seed, static_cast<std::uint64_t>(q)).substream(static_cast<std::uint64_t>(l));
}

std::uint64_t cell_seed(const TestGrid& grid, Index q, Index l) {
  return hash_combine64(hash_combine64(grid.seed, static_cast<std::uint64_t>(q)), static_cast<std::uint64_t>(l));
}

// --- Decompositions --------------------------------------------------------------

MseParts mse_decompose(const ParameterVector& theta, const std::vector<ParameterVector>& estimates) {
  if (estimates.empty()) throw InvalidArgument("mse_decompose: need at least one estimate");
  Vector mean = Vector::Zero(theta.size());
  for (const auto& e : estimates) {
    if (e.size() != theta.size())
      throw InvalidArgument("mse_decompose: estimate has " + std::to_string(e.size()) + " components, expected " +
                            std::to_string(theta.size()));
    mean += e;
  }
  const auto n = static_cast<double>(estimates.size());
  mean /= n;
  MseParts p;
  p.bias2 = (theta - mean).squaredNorm();
  for (const auto& e : estimates) {
    p.var += (e - mean).squaredNorm();
    p.mse += (theta - e).squaredNorm();
  }
  p.var /= n;
  p.mse /= n;
  return p;
}

EvalReport reduce_partial(const TestGrid& grid, const EstimateTable& estimates) {
  check_grid(grid);
  if (static_cast<Index>(estimates.size()) != grid.size())
    throw InvalidArgument("estimate table has " + std::to_string(estimates.size()) + " rows, grid has " +
                          std::to_string(grid.size()));
  EvalReport r;
  r.estimates = estimates;
  Index q_used = 0;
  for (Index q = 0; q < grid.size(); ++q) {
    const auto& row = estimates[static_cast<std::size_t>(q)];
    if (static_cast<Index>(row.size()) != grid.replicates)
      throw InvalidArgument("estimate table row " + std::to_string(q) + " has the wrong number of replicates");
    std::vector<ParameterVector> ok;
    for (const auto& e : row)
      if (e) ok.push_back(*e);
    r.total_cells += grid.replicates;
    r.failed_cells += grid.replicates - static_cast<Index>(ok.size());
    ThetaMetrics m;
    m.q = q;
    m.theta = grid.points[static_cast<std::size_t>(q)];
    m.n_ok = static_cast<Index>(ok.size());
    if (!ok.empty()) {
      m.parts = mse_decompose(m.theta, ok);
      r.ibias2 += m.parts.bias2;
      r.ivar += m.parts.var;
      ++q_used;
    } else {
      m.parts = {std::nan(""), std::nan(""), std::nan("")};
      r.notes.push_back("theta point " + std::to_string(q) + " has no successful estimates");
    }
    r.per_theta.push_back(std::move(m));
  }
  if (q_used > 0) {
    r.ibias2 /= static_cast<double>(q_used);
    r.ivar /= static_cast<double>(q_used);
  } else {
    r.ibias2 = r.ivar = std::nan("");
  }
  r.imse = r.ibias2 + r.ivar;
  if (r.failed_cells > 0)
    r.notes.push_back(std::to_string(r.failed_cells) + " of " + std::to_string(r.total_cells) +
                      " cells failed and were excluded");
  return r;
}

EvalReport imse_decompose(const TestGrid& grid, const EstimateTable& estimates) {
  check_grid(grid);
  std::ostringstream missing;
  Index count = 0;
  for (std::size_t q = 0; q < estimates.size(); ++q)
    for (std::size_t l = 0; l < estimates[q].size(); ++l)
      if (!estimates[q][l]) {
        if (count < 20) missing << (count ? " " : "") << "(" << q << "," << l << ")";
        ++count;
      }
  if (count > 0)
    throw IncompleteGridError("missing estimates for " + std::to_string(count) + " cell(s): " + missing.str() +
                              (count > 20 ? " ..." : ""));
  return reduce_partial(grid, estimates);
}

// --- Benchmarks ---------------------------------------------------------------------

std::uint64_t dataset_digest(const Dataset& data) {
  std::uint64_t h = hash_string("dataset");
  for (const auto& n : data.names) h = hash_combine64(h, hash_string(n));
  h = hash_combine64(h, static_cast<std::uint64_t>(data.values.rows()));
  for (Index j = 0; j < data.values.cols(); ++j)
    for (Index i = 0; i < data.values.rows(); ++i) h = hash_combine64(h, std::bit_cast<std::uint64_t>(data.values(i, j)));
  for (Index i = 0; i < data.time.size(); ++i) h = hash_combine64(h, std::bit_cast<std::uint64_t>(data.time[i]));
  return h;
}

BenchmarkResult run_benchmark(const GenerativeModel& model, const std::vector<Estimator>& estimators,
                              const TestGrid& grid, const BenchmarkOptions& options) {
  check_grid(grid);
  if (estimators.empty()) throw ConfigError("benchmark: the estimator set is empty");
  const auto q_count = static_cast<std::size_t>(grid.size());
  const auto l_count = static_cast<std::size_t>(grid.replicates);
  const std::size_t e_count = estimators.size();

  std::vector<EstimateTable> tables(e_count, EstimateTable(q_count, std::vector<std::optional<ParameterVector>>(l_count)));
  BenchmarkResult result;
  result.grid = grid;
  result.parameter_names = model.parameter_names();
  result.data_digest.assign(q_count, std::vector<std::uint64_t>(l_count, 0));
  using Diagnostics = std::map<std::string, double>;
  std::vector<std::vector<Diagnostics>> diag(e_count, std::vector<Diagnostics>(q_count * l_count));
  std::vector<std::uint64_t> name_hash;
  for (const auto& e : estimators) name_hash.push_back(hash_string(e.name));

  parallel_for(q_count * l_count, options.jobs, [&](std::size_t cell) {
    const std::size_t q = cell / l_count, l = cell % l_count;
    Dataset y;
    try {
      RngStream rng = cell_stream(grid, static_cast<Index>(q), static_cast<Index>(l));
      y = model.simulate(grid.points[q], rng);
    } catch (const Error&) {
      return;
    }
    result.data_digest[q][l] = dataset_digest(y);
    const std::uint64_t seed = cell_seed(grid, static_cast<Index>(q), static_cast<Index>(l));
    for (std::size_t e = 0; e < e_count; ++e) {
      try {
        EstimateRecord rec = estimators[e].run(y, hash_combine64(seed, name_hash[e]));
        if (rec.theta.size() == grid.points[q].size() && rec.theta.allFinite()) {
          tables[e][q][l] = std::move(rec.theta);
          diag[e][cell] = std::move(rec.diagnostics);
        }
      } catch (const Error&) {
      } catch (const InvalidArgument&) {
      }
    }
  });

  for (std::size_t e = 0; e < e_count; ++e) {
    EvalReport r = reduce_partial(grid, tables[e]);
    r.estimator = estimators[e].name;
    std::map<std::string, Index> counts;
    for (std::size_t cell = 0; cell < diag[e].size(); ++cell)
      for (const auto& [k, v] : diag[e][cell]) {
        r.diagnostics[k] += v;
        ++counts[k];
      }
    for (auto& [k, v] : r.diagnostics) v /= static_cast<double>(counts[k]);
    const double frac = static_cast<double>(r.failed_cells) / static_cast<double>(r.total_cells);
    if (frac > options.max_failure_fraction) {
      r.valid = false;
      r.notes.push_back("invalid: failure fraction " + format_double(frac) + " exceeds " +
                        format_double(options.max_failure_fraction));
    }
    result.reports.push_back(std::move(r));
  }
  return result;
}

void write_benchmark(const BenchmarkResult& result, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  std::string names;
  for (const auto& n : result.parameter_names) names += "," + n;

  auto per = open_out(root / "per_theta.csv");
  per << "estimator,q" << names << ",bias2,var,mse,n_ok\n";
  for (const auto& r : result.reports)
    for (const auto& m : r.per_theta)
      per << r.estimator << ',' << m.q << ',' << join_doubles(m.theta) << ',' << format_double(m.parts.bias2) << ','
          << format_double(m.parts.var) << ',' << format_double(m.parts.mse) << ',' << m.n_ok << '\n';

  auto integ = open_out(root / "integrated.csv");
  integ << "estimator,IBIAS2,IVAR,IMSE\n";
  for (const auto& r : result.reports)
    integ << r.estimator << ',' << format_double(r.ibias2) << ',' << format_double(r.ivar) << ','
          << format_double(r.imse) << '\n';

  auto raw = open_out(root / "estimates.csv");
  raw << "estimator,q,l,data_digest";
  for (const auto& n : result.parameter_names) raw << ",hat_" << n;
  raw << '\n';
  for (const auto& r : result.reports)
    for (std::size_t q = 0; q < r.estimates.size(); ++q)
      for (std::size_t l = 0; l < r.estimates[q].size(); ++l) {
        raw << r.estimator << ',' << q << ',' << l << ',' << result.data_digest[q][l];
        if (const auto& e = r.estimates[q][l]) {
          raw << ',' << join_doubles(*e);
        } else {
          for (std::size_t j = 0; j < result.parameter_names.size(); ++j) raw << ",nan";
        }
        raw << '\n';
      }
}

}  // namespace lfi
