#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfi/estimators.hpp"

namespace lfi {

// --- Test grids -----------------------------------------------------------------

enum class GridMode { uniform_sample, explicit_grid };

/// Test parameters theta_q (model units) with L replicate datasets each.
struct TestGrid {
  std::vector<ParameterVector> points;
  Index replicates = 1;
  GridMode mode = GridMode::explicit_grid;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(points.size()); }

  /// Q points drawn uniformly from the model's design box; point q uses
  /// RngStream(seed, q) substream 0x67726964 so it never collides with cell data.
  static TestGrid uniform(const GenerativeModel& model, Index q, Index l, std::uint64_t seed);
  /// Explicit points, each checked against the model's parameter bounds.
  static TestGrid explicit_points(const GenerativeModel& model, std::vector<ParameterVector> points, Index l,
                                  std::uint64_t seed);
  /// FN grid (-0.2 + 0.03 j, -0.4 + 0.04 k) for j, k in 0..40 step `stride`;
  /// stride 1 gives 41 x 41 points, stride 5 the 9 x 9 sub-grid. Row-major in j.
  static TestGrid fn_grid(Index stride, Index l, std::uint64_t seed);
};

/// Data for cell (q, l) draws from RngStream(seed, q).substream(l).
RngStream cell_stream(const TestGrid& grid, Index q, Index l);
std::uint64_t cell_seed(const TestGrid& grid, Index q, Index l);

// --- Decompositions --------------------------------------------------------------

struct MseParts {
  double bias2 = 0.0;
  double var = 0.0;
  double mse = 0.0;
};

/// bias2 = |theta - mean|^2, var = mean |est - mean|^2, mse = mean |theta - est|^2.
MseParts mse_decompose(const ParameterVector& theta, const std::vector<ParameterVector>& estimates);

/// Estimates indexed [q][l]; empty optional marks a failed cell.
using EstimateTable = std::vector<std::vector<std::optional<ParameterVector>>>;

struct ThetaMetrics {
  Index q = 0;
  ParameterVector theta;
  MseParts parts;
  Index n_ok = 0;
};

struct EvalReport {
  std::string estimator;
  std::vector<ThetaMetrics> per_theta;
  double ibias2 = 0.0;
  double ivar = 0.0;
  double imse = 0.0;
  Index failed_cells = 0;
  Index total_cells = 0;
  bool valid = true;  ///< false when more than 5% of cells failed
  std::vector<std::string> notes;
  EstimateTable estimates;
  std::map<std::string, double> diagnostics;  ///< estimator diagnostics averaged over successful cells
};

/// Integrated metrics over a complete table; throws IncompleteGridError
/// listing the missing (q, l) cells.
EvalReport imse_decompose(const TestGrid& grid, const EstimateTable& estimates);

/// Same reduction, but failed cells are excluded and counted.
EvalReport reduce_partial(const TestGrid& grid, const EstimateTable& estimates);

// --- Benchmarks ---------------------------------------------------------------------

struct BenchmarkOptions {
  std::size_t jobs = 1;
  double max_failure_fraction = 0.05;
};

struct BenchmarkResult {
  TestGrid grid;
  std::vector<std::string> parameter_names;
  std::vector<EvalReport> reports;        ///< one per estimator, in input order
  std::vector<std::vector<std::uint64_t>> data_digest;  ///< [q][l], 0 when the cell's data failed
};

/// Paired design: every estimator sees the same dataset in cell (q, l).
/// Estimator e in cell (q, l) receives seed hash(cell_seed, hash_string(name)).
BenchmarkResult run_benchmark(const GenerativeModel& model, const std::vector<Estimator>& estimators,
                              const TestGrid& grid, const BenchmarkOptions& options = {});

/// Order-sensitive digest of a dataset's names, values and time column.
std::uint64_t dataset_digest(const Dataset& data);

/// Writes per_theta.csv, integrated.csv and estimates.csv into `dir`.
void write_benchmark(const BenchmarkResult& result, const std::string& dir);

}  // namespace lfi
