#include <fstream>

#include "lfi/binary_io.hpp"
#include "lfi/parallel.hpp"
#include "lfi/simulators.hpp"
#include "lfi/text.hpp"

namespace lfi {

namespace {

constexpr std::uint64_t kTrainingSetVersion = 1;

}  // namespace

TrainingSet TrainingSet::slice(Index begin, Index end) const {
  if (begin < 0 || end > size() || begin > end) throw InvalidArgument("training set: bad slice bounds");
  TrainingSet out{model, design, base_seed, theta.middleRows(begin, end - begin), data.middleRows(begin, end - begin)};
  return out;
}

TrainingSet generate_training_pairs(const GenerativeModel& model, Index n, std::uint64_t base_seed,
                                    const Featurizer& featurize, const PairGenerationOptions& options) {
  if (n < 1) throw InvalidArgument("generate_training_pairs: n must be >= 1");
  if (options.retry_cap < 0) throw InvalidArgument("generate_training_pairs: retry cap must be >= 0");
  const DesignBox& box = model.design();
  const Index d = model.parameter_dimension();

  std::vector<Vector> thetas(static_cast<std::size_t>(n));
  std::vector<Vector> rows(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), options.jobs, [&](std::size_t i) {
    const RngStream root(base_seed, i);
    std::string last_error;
    for (int attempt = 0; attempt <= options.retry_cap; ++attempt) {
      RngStream rng = attempt == 0 ? root : root.substream(static_cast<std::uint64_t>(attempt));
      const Vector u = sample_uniform_box(rng, box.lo, box.hi);
      const ParameterVector theta = model.to_parameter(u);
      try {
        const Dataset y = model.simulate(theta, rng);
        Vector row = featurize ? featurize(y) : y.flatten();
        thetas[i] = theta;
        rows[i] = std::move(row);
        return;
      } catch (const SimulationError& e) {
        last_error = e.what();
      } catch (const SummaryError& e) {
        last_error = e.what();
      }
    }
    throw SimulationError("training pair " + std::to_string(i) + " failed after " +
                          std::to_string(options.retry_cap) + " retries: " + last_error);
  });

  const Index width = rows[0].size();
  TrainingSet set;
  set.model = model.name();
  set.design = box;
  set.base_seed = base_seed;
  set.theta.resize(n, d);
  set.data.resize(n, width);
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (rows[k].size() != width) throw SummaryError("training pair " + std::to_string(i) + " has inconsistent width");
    set.theta.row(i) = thetas[k].transpose();
    set.data.row(i) = rows[k].transpose();
  }
  return set;
}

void save_training_set(const TrainingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write("LFI1", 4);
  binary::write_u64(out, kTrainingSetVersion);
  binary::write_string(out, set.model);
  binary::write_u64(out, static_cast<std::uint64_t>(set.theta.cols()));
  binary::write_u64(out, static_cast<std::uint64_t>(set.data.cols()));
  binary::write_u64(out, static_cast<std::uint64_t>(set.size()));
  binary::write_u64(out, set.base_seed);
  binary::write_vector(out, set.design.lo);
  binary::write_vector(out, set.design.hi);
  for (Index i = 0; i < set.size(); ++i) {
    for (Index j = 0; j < set.theta.cols(); ++j) binary::write_f64(out, set.theta(i, j));
    for (Index j = 0; j < set.data.cols(); ++j) binary::write_f64(out, set.data(i, j));
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

TrainingSet load_training_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  binary::expect_magic(in, "LFI1");
  const auto version = binary::read_u64(in, "version");
  if (version != kTrainingSetVersion)
    throw FormatError("unsupported training set version " + std::to_string(version));
  TrainingSet set;
  set.model = binary::read_string(in, "model name", 256);
  const auto d = binary::read_u64(in, "d");
  const auto width = binary::read_u64(in, "width");
  const auto n = binary::read_u64(in, "N");
  if (d == 0 || d > 1024 || width > (1u << 24) || n > (1ull << 32))
    throw FormatError("implausible training set header");
  set.base_seed = binary::read_u64(in, "base seed");
  Vector lo = binary::read_vector(in, "design lo", d);
  Vector hi = binary::read_vector(in, "design hi", d);
  set.design = DesignBox(std::move(lo), std::move(hi));
  set.theta.resize(static_cast<Index>(n), static_cast<Index>(d));
  set.data.resize(static_cast<Index>(n), static_cast<Index>(width));
  for (Index i = 0; i < set.theta.rows(); ++i) {
    for (Index j = 0; j < set.theta.cols(); ++j) set.theta(i, j) = binary::read_f64(in, "theta record");
    for (Index j = 0; j < set.data.cols(); ++j) set.data(i, j) = binary::read_f64(in, "data record");
  }
  return set;
}

void export_training_set_csv(const TrainingSet& set, const std::vector<std::string>& theta_names,
                             const std::string& path) {
  if (static_cast<Index>(theta_names.size()) != set.theta.cols())
    throw InvalidArgument("export_training_set_csv: theta name count mismatch");
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (const auto& n : theta_names) out << n << ',';
  for (Index j = 0; j < set.data.cols(); ++j) out << "x" << j << (j + 1 < set.data.cols() ? "," : "\n");
  for (Index i = 0; i < set.size(); ++i) {
    out << join_doubles(set.theta.row(i).transpose()) << ',' << join_doubles(set.data.row(i).transpose()) << '\n';
  }
}

}  // namespace lfi
