#include "lfi/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "lfi/text.hpp"

namespace lfi {

// --- INI text -----------------------------------------------------------------------

IniDocument IniDocument::parse(std::string_view text) {
  IniDocument doc;
  doc.sections[""];
  std::string section;
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    const std::string where = "config line " + std::to_string(i + 1) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      if (doc.sections.count(section) && section != "") throw ConfigError(where + "duplicate section [" + section + "]");
      doc.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    auto& sec = doc.sections[section];
    if (sec.count(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    sec[key] = value;
  }
  return doc;
}

std::string IniDocument::emit() const {
  std::string out;
  if (auto it = sections.find(""); it != sections.end())
    for (const auto& [k, v] : it->second) out += k + " = " + v + "\n";
  for (const auto& [name, keys] : sections) {
    if (name.empty()) continue;
    if (!out.empty()) out += "\n";
    out += "[" + name + "]\n";
    for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
  }
  return out;
}

// --- Typed access -------------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(const IniDocument& doc) : doc_(doc) {}

  bool has(const std::string& section, const std::string& key) const {
    auto s = doc_.sections.find(section);
    return s != doc_.sections.end() && s->second.count(key);
  }

  const std::string* raw(const std::string& section, const std::string& key) {
    auto s = doc_.sections.find(section);
    if (s == doc_.sections.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used_.insert(section + "\n" + key);
    return &k->second;
  }

  void str(const std::string& s, const std::string& k, std::string& out) {
    if (auto v = raw(s, k)) out = *v;
  }

  void real(const std::string& s, const std::string& k, double& out) {
    if (auto v = raw(s, k))
      if (!parse_double(*v, out)) fail(s, k, "a number");
  }

  template <class Int>
  void integer(const std::string& s, const std::string& k, Int& out) {
    if (auto v = raw(s, k)) {
      const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
      if (res.ec != std::errc{} || res.ptr != v->data() + v->size()) fail(s, k, "an integer");
    }
  }

  void boolean(const std::string& s, const std::string& k, bool& out) {
    if (auto v = raw(s, k)) {
      if (*v == "true") out = true;
      else if (*v == "false") out = false;
      else fail(s, k, "true or false");
    }
  }

  void list(const std::string& s, const std::string& k, std::vector<std::string>& out) {
    if (auto v = raw(s, k)) {
      out.clear();
      for (const auto& part : split(*v, ',')) {
        const std::string t = trim(part);
        if (!t.empty()) out.push_back(t);
      }
    }
  }

  void reals(const std::string& s, const std::string& k, std::vector<double>& out) {
    if (auto v = raw(s, k)) {
      try {
        const Vector x = parse_vector(*v, "[" + s + "] " + k);
        out.assign(x.begin(), x.end());
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  void check_all_used() const {
    for (const auto& [section, keys] : doc_.sections)
      for (const auto& [key, value] : keys)
        if (!used_.count(section + "\n" + key))
          throw ConfigError("unknown config key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
  }

 private:
  [[noreturn]] static void fail(const std::string& s, const std::string& k, const std::string& what) {
    throw ConfigError("config key [" + s + "] " + k + " must be " + what);
  }
  const IniDocument& doc_;
  std::set<std::string> used_;
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

template <class T>
std::string join_numbers(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) out += format_double(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

const std::set<std::string> kEstimators{"rm", "rmdr", "sle", "abc", "rmdrlo", "mle"};

}  // namespace

ExperimentConfig ExperimentConfig::from_ini(const IniDocument& doc) {
  Reader r(doc);
  int schema = 0;
  r.integer("", "schema", schema);
  if (schema != kSchema)
    throw ConfigError("config schema " + std::to_string(schema) + " is not supported (expected " +
                      std::to_string(kSchema) + ")");
  ExperimentConfig c;
  r.integer("experiment", "seed", c.seed);
  r.str("experiment", "output", c.output);

  r.str("model", "name", c.model);
  const std::map<std::string, std::string> owner{
      {"ricker_m", "ricker"}, {"ricker_n0", "ricker"}, {"mg1_n", "mg1"}, {"lv_t_end", "lv"},
      {"lv_grid_points", "lv"}, {"fn_noise_sd", "fn"}, {"gauss_m", "gauss-mean"}, {"gauss_sd", "gauss-mean"},
      {"gauss_lo", "gauss-mean"}, {"gauss_hi", "gauss-mean"}};
  for (const auto& [key, model] : owner)
    if (r.has("model", key) && model != c.model)
      throw ConfigError("config key [model] " + key + " applies to model '" + model + "', not '" + c.model + "'");
  r.integer("model", "ricker_m", c.ricker_m);
  r.real("model", "ricker_n0", c.ricker_n0);
  r.integer("model", "mg1_n", c.mg1_n);
  r.real("model", "lv_t_end", c.lv_t_end);
  r.integer("model", "lv_grid_points", c.lv_grid_points);
  r.real("model", "fn_noise_sd", c.fn_noise_sd);
  r.integer("model", "gauss_m", c.gauss_m);
  r.real("model", "gauss_sd", c.gauss_sd);
  r.real("model", "gauss_lo", c.gauss_lo);
  r.real("model", "gauss_hi", c.gauss_hi);

  std::string pipeline_id = "default";
  r.str("pipeline", "id", pipeline_id);
  if (pipeline_id != "default" && pipeline_id != "none")
    throw ConfigError("config key [pipeline] id must be 'default' or 'none'");
  c.use_pipeline = pipeline_id == "default";
  r.integer("pipeline", "fourier_k", c.pipeline.fourier_k);
  r.boolean("pipeline", "ricker_max", c.pipeline.ricker_max);
  r.integer("pipeline", "bspline_k", c.pipeline.bspline_k);

  r.integer("train", "n", c.train_n);
  r.real("train", "validation_fraction", c.validation_fraction);
  std::vector<std::string> hidden;
  r.list("train", "hidden", hidden);
  if (r.has("train", "hidden")) {
    c.train.hidden.clear();
    for (const auto& h : hidden) {
      Index v = 0;
      const auto res = std::from_chars(h.data(), h.data() + h.size(), v);
      if (res.ec != std::errc{} || res.ptr != h.data() + h.size())
        throw ConfigError("config key [train] hidden must be a list of integers");
      c.train.hidden.push_back(v);
    }
  }
  r.integer("train", "batch", c.train.batch_size);
  r.integer("train", "max_epochs", c.train.max_epochs);
  r.integer("train", "patience", c.train.patience);
  r.real("train", "alpha", c.train.alpha);

  r.str("grid", "mode", c.grid_mode);
  r.integer("grid", "q", c.grid_q);
  r.integer("grid", "l", c.grid_l);
  r.integer("grid", "fn_stride", c.fn_stride);
  if (auto v = r.raw("grid", "points")) {
    c.grid_points.clear();
    for (const auto& p : split(*v, ';')) {
      if (trim(p).empty()) continue;
      try {
        c.grid_points.push_back(parse_vector(p, "[grid] points"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  r.list("estimators", "list", c.estimators);

  r.integer("sle", "n_s", c.sle_n_s);
  r.integer("sle", "iterations_per_dim", c.sle_iterations_per_dim);

  r.real("abc", "bandwidth", c.abc.bandwidth);
  r.integer("abc", "chain_length", c.abc.chain_length);
  r.integer("abc", "burn_in", c.abc.burn_in);
  r.reals("abc", "temperatures", c.abc.temperatures);
  r.integer("abc", "swap_every", c.abc.swap_every);
  r.integer("abc", "pilot_simulations", c.abc.pilot_simulations);
  r.real("abc", "pilot_quantile", c.abc.pilot_quantile);
  r.real("abc", "acceptance_lo", c.abc.target_acceptance_lo);
  r.real("abc", "acceptance_hi", c.abc.target_acceptance_hi);
  r.integer("abc", "tuning_rounds", c.abc.tuning_rounds);
  r.integer("abc", "tuning_steps", c.abc.tuning_steps);

  r.integer("rmdrlo", "budget", c.rmdrlo_budget);

  r.integer("bootstrap", "b", c.bootstrap_b);
  r.real("bootstrap", "alpha", c.bootstrap_alpha);
  r.boolean("bootstrap", "region", c.bootstrap_region);

  r.check_all_used();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  const std::set<std::string> models{"ricker", "mg1", "lv", "fn", "gauss-mean"};
  if (!models.count(model)) throw ConfigError("unknown model '" + model + "' (expected ricker, mg1, lv, fn, gauss-mean)");
  if (grid_mode != "uniform" && grid_mode != "explicit" && grid_mode != "fn")
    throw ConfigError("grid mode must be uniform, explicit or fn");
  if (grid_mode == "fn" && model != "fn") throw ConfigError("grid mode fn requires model fn");
  if (grid_mode == "explicit" && grid_points.empty()) throw ConfigError("explicit grid needs [grid] points");
  if (grid_q < 1 || grid_l < 1) throw ConfigError("grid q and l must be >= 1");
  if (train_n < 2) throw ConfigError("train n must be >= 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("train validation_fraction must lie in (0, 1)");
  train.validate();
  for (const auto& e : estimators)
    if (!kEstimators.count(e)) throw ConfigError("unknown estimator '" + e + "' (expected rm, rmdr, sle, abc, rmdrlo, mle)");
  for (const auto& e : {"rmdrlo", "mle"})
    if (std::count(estimators.begin(), estimators.end(), e) && model != "fn")
      throw ConfigError(std::string("estimator ") + e + " needs the fn model's likelihood");
  if (!use_pipeline)
    for (const auto& e : estimators)
      if (e != "rm" && e != "mle") throw ConfigError("estimator " + e + " needs a summary pipeline ([pipeline] id = none)");
  if (sle_n_s < 2 || sle_iterations_per_dim < 0) throw ConfigError("sle settings out of range");
  abc.validate();
  if (rmdrlo_budget < 1) throw ConfigError("rmdrlo budget must be >= 1");
  if (bootstrap_b < 1) throw ConfigError("bootstrap b must be >= 1");
  if (!(bootstrap_alpha > 0.0 && bootstrap_alpha < 1.0)) throw ConfigError("bootstrap alpha must lie in (0, 1)");
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) { return from_ini(IniDocument::parse(text)); }

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

IniDocument ExperimentConfig::to_ini() const {
  IniDocument d;
  d.sections[""]["schema"] = std::to_string(kSchema);
  auto& ex = d.sections["experiment"];
  ex["seed"] = std::to_string(seed);
  ex["output"] = output;

  auto& m = d.sections["model"];
  m["name"] = model;
  if (model == "ricker") {
    m["ricker_m"] = std::to_string(ricker_m);
    m["ricker_n0"] = format_double(ricker_n0);
  } else if (model == "mg1") {
    m["mg1_n"] = std::to_string(mg1_n);
  } else if (model == "lv") {
    m["lv_t_end"] = format_double(lv_t_end);
    m["lv_grid_points"] = std::to_string(lv_grid_points);
  } else if (model == "fn") {
    m["fn_noise_sd"] = format_double(fn_noise_sd);
  } else if (model == "gauss-mean") {
    m["gauss_m"] = std::to_string(gauss_m);
    m["gauss_sd"] = format_double(gauss_sd);
    m["gauss_lo"] = format_double(gauss_lo);
    m["gauss_hi"] = format_double(gauss_hi);
  }

  auto& p = d.sections["pipeline"];
  p["id"] = use_pipeline ? "default" : "none";
  p["fourier_k"] = std::to_string(pipeline.fourier_k);
  p["ricker_max"] = pipeline.ricker_max ? "true" : "false";
  p["bspline_k"] = std::to_string(pipeline.bspline_k);

  auto& t = d.sections["train"];
  t["n"] = std::to_string(train_n);
  t["validation_fraction"] = format_double(validation_fraction);
  t["hidden"] = join_numbers(train.hidden);
  t["batch"] = std::to_string(train.batch_size);
  t["max_epochs"] = std::to_string(train.max_epochs);
  t["patience"] = std::to_string(train.patience);
  t["alpha"] = format_double(train.alpha);

  auto& g = d.sections["grid"];
  g["mode"] = grid_mode;
  g["q"] = std::to_string(grid_q);
  g["l"] = std::to_string(grid_l);
  g["fn_stride"] = std::to_string(fn_stride);
  std::string pts;
  for (std::size_t i = 0; i < grid_points.size(); ++i) pts += (i ? ";" : "") + join_doubles(grid_points[i]);
  g["points"] = pts;

  d.sections["estimators"]["list"] = join(estimators);

  auto& s = d.sections["sle"];
  s["n_s"] = std::to_string(sle_n_s);
  s["iterations_per_dim"] = std::to_string(sle_iterations_per_dim);

  auto& a = d.sections["abc"];
  a["bandwidth"] = format_double(abc.bandwidth);
  a["chain_length"] = std::to_string(abc.chain_length);
  a["burn_in"] = std::to_string(abc.burn_in);
  a["temperatures"] = join_numbers(abc.temperatures);
  a["swap_every"] = std::to_string(abc.swap_every);
  a["pilot_simulations"] = std::to_string(abc.pilot_simulations);
  a["pilot_quantile"] = format_double(abc.pilot_quantile);
  a["acceptance_lo"] = format_double(abc.target_acceptance_lo);
  a["acceptance_hi"] = format_double(abc.target_acceptance_hi);
  a["tuning_rounds"] = std::to_string(abc.tuning_rounds);
  a["tuning_steps"] = std::to_string(abc.tuning_steps);

  d.sections["rmdrlo"]["budget"] = std::to_string(rmdrlo_budget);

  auto& b = d.sections["bootstrap"];
  b["b"] = std::to_string(bootstrap_b);
  b["alpha"] = format_double(bootstrap_alpha);
  b["region"] = bootstrap_region ? "true" : "false";
  return d;
}

// --- Presets -------------------------------------------------------------------------

namespace {

ExperimentConfig scaled(ExperimentConfig c, bool paper, Index desk_n, Index desk_q, Index desk_l) {
  c.train_n = paper ? 125000 : desk_n;
  c.grid_q = paper ? 200 : desk_q;
  c.grid_l = paper ? 100 : desk_l;
  return c;
}

std::map<std::string, ExperimentConfig> build_presets() {
  std::map<std::string, ExperimentConfig> out;
  for (bool paper : {false, true}) {
    const std::string scale = paper ? "-paper" : "-desk";
    ExperimentConfig base;

    ExperimentConfig ricker = scaled(base, paper, 20000, 30, 10);
    ricker.model = "ricker";
    ricker.output = "ricker" + scale;
    out["ricker" + scale] = ricker;

    ExperimentConfig table1 = scaled(base, paper, 20000, 3, 20);
    table1.model = "ricker";
    table1.grid_mode = "explicit";
    table1.grid_points = {Vector{{2.5, 0.2, 1.5}}, Vector{{4.0, 0.2, 3.0}}, Vector{{4.5, 0.2, 3.5}}};
    table1.grid_q = 3;
    table1.estimators = {"rm", "rmdr", "sle", "abc"};
    table1.output = "ricker-table1" + scale;
    out["ricker-table1" + scale] = table1;

    ExperimentConfig mg1 = scaled(base, paper, 20000, 30, 10);
    mg1.model = "mg1";
    mg1.output = "mg1" + scale;
    out["mg1" + scale] = mg1;

    ExperimentConfig lv = scaled(base, paper, 5000, 20, 5);
    lv.model = "lv";
    lv.output = "lv" + scale;
    out["lv" + scale] = lv;

    ExperimentConfig fn = scaled(base, paper, 20000, 1, 5);
    fn.model = "fn";
    fn.grid_mode = "fn";
    fn.fn_stride = paper ? 1 : 5;
    fn.estimators = paper ? std::vector<std::string>{"rm", "rmdr", "mle"} : std::vector<std::string>{"rm", "rmdr"};
    fn.output = "fn-grid" + scale;
    out["fn-grid" + scale] = fn;

    ExperimentConfig drlo = scaled(base, paper, 20000, 10, 1);
    drlo.model = "fn";
    drlo.estimators = {"rmdr", "rmdrlo", "mle"};
    drlo.output = "fn-drlo" + scale;
    out["fn-drlo" + scale] = drlo;
  }
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : build_presets()) names.push_back(k);
  return names;
}

ExperimentConfig preset(const std::string& name) {
  auto all = build_presets();
  auto it = all.find(name);
  if (it == all.end()) throw ConfigError("unknown preset '" + name + "' (see `lfi presets`)");
  return it->second;
}

}  // namespace lfi
