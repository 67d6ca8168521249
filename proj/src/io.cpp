#include "qresp/io.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qresp/liouville.hpp"
#include "qresp/version.hpp"

namespace qresp::io {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace {

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest(const std::string& key, const std::set<std::string>& known) {
  std::string best;
  int best_d = 4;
  for (const auto& k : known) {
    const int d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

struct ErrorSink {
  std::vector<ConfigError> errors;
  void add(const std::string& msg, int line = 0) { errors.push_back({msg, line}); }
  bool ok() const { return errors.empty(); }
};

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where, ErrorSink& sink) {
  if (!obj.is_object()) return;
  for (const auto& [key, _] : obj.items()) {
    if (known.count(key)) continue;
    std::string msg = where + ": unknown key \"" + key + "\"";
    const std::string s = suggest(key, known);
    if (!s.empty()) msg += " (did you mean \"" + s + "\"?)";
    sink.add(msg);
  }
}

RealMatrix parse_real_matrix(const json& rows, const std::string& where, ErrorSink& sink) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
    sink.add(where + ": expected an array of rows");
    return {};
  }
  const size_t n = rows.size(), m = rows[0].size();
  RealMatrix out(n, m);
  for (size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != m) {
      sink.add(where + ": row " + std::to_string(i) + " has inconsistent length");
      return {};
    }
    for (size_t j = 0; j < m; ++j) {
      if (!rows[i][j].is_number()) {
        sink.add(where + ": entry (" + std::to_string(i) + "," + std::to_string(j) +
                 ") is not a number");
        return {};
      }
      out(i, j) = rows[i][j].get<double>();
    }
  }
  return out;
}

Operator parse_operator(const json& spec, const std::string& where, ErrorSink& sink) {
  json re, im;
  if (spec.is_array()) {
    re = spec;
  } else if (spec.is_object()) {
    reject_unknown_keys(spec, {"re", "im"}, where, sink);
    if (!spec.contains("re")) {
      sink.add(where + ": missing \"re\"");
      return {};
    }
    re = spec["re"];
    if (spec.contains("im")) im = spec["im"];
  } else {
    sink.add(where + ": expected a matrix (array of rows or {re, im})");
    return {};
  }
  RealMatrix mre = parse_real_matrix(re, where + ".re", sink);
  if (!sink.ok()) return {};
  Operator out = mre.cast<Complex>();
  if (!im.is_null()) {
    RealMatrix mim = parse_real_matrix(im, where + ".im", sink);
    if (!sink.ok()) return {};
    if (mim.rows() != mre.rows() || mim.cols() != mre.cols()) {
      sink.add(where + ": re and im shapes differ");
      return {};
    }
    out += Complex(0, 1) * mim.cast<Complex>();
  }
  return out;
}

MatterModel parse_inline_model(const json& m, ErrorSink& sink) {
  reject_unknown_keys(m,
                      {"sys_dim", "noise_dim", "H", "L", "dissipators", "sys_grading", "omega0",
                       "measured_state", "ground_state", "noise_initial"},
                      "model", sink);
  MatterModel model;
  for (const char* req : {"sys_dim", "H", "L", "sys_grading"})
    if (!m.contains(req)) sink.add(std::string("model: missing required key \"") + req + "\"");
  if (!sink.ok()) return model;
  model.sys_dim = m["sys_dim"].get<int>();
  model.noise_dim = m.value("noise_dim", 1);
  model.H = parse_operator(m["H"], "model.H", sink);
  model.L = parse_operator(m["L"], "model.L", sink);
  if (m.contains("dissipators"))
    for (size_t i = 0; i < m["dissipators"].size(); ++i)
      model.dissipators.push_back(
          parse_operator(m["dissipators"][i], "model.dissipators[" + std::to_string(i) + "]", sink));
  model.sys_grading = m["sys_grading"].get<std::vector<int>>();
  model.omega0 = m.value("omega0", 0.0);
  model.measured_state = m.value("measured_state", 1);
  model.ground_state = m.value("ground_state", 0);
  if (m.contains("noise_initial")) {
    model.noise_initial = parse_operator(m["noise_initial"], "model.noise_initial", sink);
  } else {
    model.noise_initial = DensityMatrix::Zero(model.noise_dim, model.noise_dim);
    model.noise_initial(0, 0) = 1.0;
  }
  return model;
}

int line_of_offset(const std::string& text, size_t offset) {
  int line = 1;
  for (size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

void require_positive(double v, const char* name, ErrorSink& sink) {
  if (!(v > 0) || !std::isfinite(v))
    sink.add(std::string(name) + " must be a positive finite number (paper units)");
}

}  // namespace

MatterModel RunConfig::prepared_model() const {
  auto violations = validate(model);
  if (!violations.empty())
    throw std::runtime_error("config model is invalid: " + violations.front());
  return rotating_frame(model);
}

CompositeModel RunConfig::composite() const {
  CompositeModel c;
  c.matter = prepared_model();
  c.mode = ModeSpec{1, 1};
  if (aux_enabled) c.aux = aux_matched_to_L(c.matter, std::sqrt(chi2));
  c.manifold_cap = manifold_cap;
  return c;
}

ProtocolRunSpec RunConfig::protocol_spec(int workers) const {
  ProtocolRunSpec spec;
  spec.composite = composite();
  spec.dt = dt;
  spec.t_max_m = t_max_m;
  spec.t_max_int = t_max_int;
  spec.t_gamma = t_gamma;
  spec.n_gamma = n_gamma;
  spec.workers = workers;
  return spec;
}

Wavepacket RunConfig::wavepacket() const {
  const double step = wp_dt.value_or(dt);
  double start = wp_t_start.value_or(wp_t0 - 5.0 * wp_sigma_t);
  // snap to the table grid so convolution indices stay integral
  start = wp_t0 + std::round((start - wp_t0) / step) * step;
  const int samples = wp_samples.value_or(static_cast<int>(std::llround(10.0 * wp_sigma_t / step)) + 1);
  return gaussian_wavepacket(wp_sigma_t, wp_t0, start, step, samples,
                             [](const std::string& w) { std::cerr << "warning: " << w << "\n"; });
}

std::variant<RunConfig, std::vector<ConfigError>> parse_config(const std::string& text) {
  ErrorSink sink;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    sink.add(std::string("syntax error: ") + e.what(), line_of_offset(text, e.byte));
    return sink.errors;
  }
  if (!root.is_object()) {
    sink.add("config must be a JSON object with at least a \"model\" key");
    return sink.errors;
  }
  reject_unknown_keys(root,
                      {"model", "grid", "pulse", "aux", "wavepacket", "sampling", "probe",
                       "auxcheck", "budget", "output"},
                      "config", sink);
  if (!root.contains("model")) {
    sink.add(
        "missing required key \"model\" (preset name or inline object); "
        "optional keys: grid, pulse, aux, wavepacket, sampling, probe, auxcheck, budget, output");
    return sink.errors;
  }

  RunConfig cfg;
  const json& mj = root["model"];
  if (mj.is_string()) {
    cfg.model_name = mj.get<std::string>();
    try {
      cfg.model = preset_by_name(cfg.model_name);
    } catch (const std::exception& e) {
      sink.add(e.what());
    }
  } else {
    cfg.model_name = "inline";
    cfg.model = parse_inline_model(mj, sink);
  }

  if (root.contains("grid")) {
    const json& g = root["grid"];
    reject_unknown_keys(g, {"dt", "t_max_m", "t_max_int"}, "grid", sink);
    cfg.dt = g.value("dt", cfg.dt);
    cfg.t_max_m = g.value("t_max_m", cfg.t_max_m);
    cfg.t_max_int = g.value("t_max_int", cfg.t_max_int);
  }
  if (root.contains("pulse")) {
    const json& p = root["pulse"];
    reject_unknown_keys(p, {"t_gamma", "n_gamma"}, "pulse", sink);
    cfg.t_gamma = p.value("t_gamma", cfg.t_gamma);
    cfg.n_gamma = p.value("n_gamma", cfg.n_gamma);
  }
  if (root.contains("aux")) {
    const json& a = root["aux"];
    reject_unknown_keys(a, {"enabled", "chi2"}, "aux", sink);
    cfg.aux_enabled = a.value("enabled", true);
    cfg.chi2 = a.value("chi2", cfg.chi2);
  }
  if (root.contains("wavepacket")) {
    const json& w = root["wavepacket"];
    reject_unknown_keys(
        w, {"shape", "sigma_t", "t0", "t_start", "samples", "dt", "diagonal_weight"}, "wavepacket",
        sink);
    cfg.wp_shape = w.value("shape", cfg.wp_shape);
    if (cfg.wp_shape != "gaussian")
      sink.add("wavepacket.shape: only \"gaussian\" is supported");
    cfg.wp_sigma_t = w.value("sigma_t", cfg.wp_sigma_t);
    cfg.wp_t0 = w.value("t0", cfg.wp_t0);
    if (w.contains("t_start")) cfg.wp_t_start = w["t_start"].get<double>();
    if (w.contains("samples")) cfg.wp_samples = w["samples"].get<int>();
    if (w.contains("dt")) cfg.wp_dt = w["dt"].get<double>();
    const std::string dw = w.value("diagonal_weight", "half");
    if (dw == "half")
      cfg.diag_weight = DiagonalWeight::Half;
    else if (dw == "full")
      cfg.diag_weight = DiagonalWeight::Full;
    else
      sink.add("wavepacket.diagonal_weight must be \"half\" or \"full\"");
  }
  if (root.contains("sampling")) {
    const json& s = root["sampling"];
    reject_unknown_keys(s, {"enabled", "trials", "seed"}, "sampling", sink);
    cfg.sampling_enabled = s.value("enabled", true);
    cfg.trials = s.value("trials", cfg.trials);
    cfg.seed = s.value("seed", cfg.seed);
    if (cfg.trials < 1) sink.add("sampling.trials must be at least 1");
  }
  if (root.contains("probe")) {
    const json& p = root["probe"];
    reject_unknown_keys(p, {"t_m", "t_int", "t"}, "probe", sink);
    cfg.probe_t_m = p.value("t_m", cfg.probe_t_m);
    cfg.probe_t_int = p.value("t_int", cfg.probe_t_int);
    cfg.probe_t = p.value("t", cfg.probe_t);
  }
  if (root.contains("auxcheck")) {
    const json& a = root["auxcheck"];
    reject_unknown_keys(a, {"chi2_list", "t_max", "steps"}, "auxcheck", sink);
    if (a.contains("chi2_list")) cfg.auxcheck_chi2 = a["chi2_list"].get<std::vector<double>>();
    cfg.auxcheck_t_max = a.value("t_max", cfg.auxcheck_t_max);
    cfg.auxcheck_steps = a.value("steps", cfg.auxcheck_steps);
  }
  if (root.contains("budget")) {
    const json& b = root["budget"];
    reject_unknown_keys(b, {"target_sigma_p", "p_typical"}, "budget", sink);
    cfg.budget_target_sigma_p = b.value("target_sigma_p", cfg.budget_target_sigma_p);
    cfg.budget_p_typical = b.value("p_typical", cfg.budget_p_typical);
  }
  if (root.contains("output")) {
    const json& o = root["output"];
    reject_unknown_keys(o, {"dir"}, "output", sink);
    cfg.out_dir = o.value("dir", cfg.out_dir);
  }

  require_positive(cfg.dt, "grid.dt", sink);
  require_positive(cfg.t_max_m, "grid.t_max_m", sink);
  require_positive(cfg.t_max_int, "grid.t_max_int", sink);
  require_positive(cfg.t_gamma, "pulse.t_gamma", sink);
  if (cfg.n_gamma < 0 || !std::isfinite(cfg.n_gamma)) sink.add("pulse.n_gamma must be >= 0");
  require_positive(cfg.chi2, "aux.chi2", sink);
  require_positive(cfg.wp_sigma_t, "wavepacket.sigma_t", sink);
  if (sink.ok()) {
    auto violations = validate(cfg.model);
    for (const auto& v : violations) sink.add("model: " + v);
  }
  if (!sink.ok()) return sink.errors;

  cfg.canonical = root.dump();
  cfg.config_hash = fnv1a64(cfg.canonical);
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto parsed = parse_config(ss.str());
  if (std::holds_alternative<std::vector<ConfigError>>(parsed))
    throw std::runtime_error(path.string() + ":\n" +
                             config_errors_to_string(std::get<std::vector<ConfigError>>(parsed)));
  return std::get<RunConfig>(parsed);
}

std::string config_errors_to_string(const std::vector<ConfigError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (e.line > 0) out += "line " + std::to_string(e.line) + ": ";
    out += e.message + "\n";
  }
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

json table_meta(const GreensTable& t, std::uint64_t config_hash) {
  json meta;
  meta["schema"] = "greens_table";
  meta["dt"] = t.dt;
  meta["rows_t_m"] = t.rows();
  meta["cols_t_int"] = t.cols();
  meta["source"] = t.source;
  meta["model_hash"] = t.model_hash;
  meta["t_gamma"] = t.t_gamma;
  meta["n_gamma"] = t.n_gamma;
  meta["chi"] = t.chi;
  meta["small_parameter"] = t.small_parameter;
  meta["trials"] = t.trials;
  meta["seed"] = t.seed;
  meta["config_hash"] = config_hash;
  meta["rng"] = kRngAlgorithm;
  meta["version"] = kVersion;
  return meta;
}

}  // namespace

void write_table(const GreensTable& table, const std::filesystem::path& path,
                 std::uint64_t config_hash) {
  std::string out = "t_m,t_int,G,sigma_G\n";
  for (int m = 0; m < table.rows(); ++m)
    for (int k = 0; k < table.cols(); ++k)
      out += fmt17(m * table.dt) + "," + fmt17(k * table.dt) + "," + fmt17(table.values(m, k)) +
             "," + fmt17(table.errors(m, k)) + "\n";
  atomic_write(path, out);
  atomic_write(path.string() + ".meta.json", table_meta(table, config_hash).dump(2) + "\n");
}

GreensTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_m,t_int,G,sigma_G")
    throw std::runtime_error(path.string() + ": bad header \"" + line +
                             "\" (expected \"t_m,t_int,G,sigma_G\")");
  std::vector<std::array<double, 4>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 4> vals{};
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(ss, cell, ','))
        throw std::runtime_error(path.string() + ": row " + std::to_string(lineno) +
                                 " has fewer than 4 columns");
      try {
        vals[c] = std::stod(cell);
      } catch (...) {
        throw std::runtime_error(path.string() + ": row " + std::to_string(lineno) + " column " +
                                 std::to_string(c + 1) + ": not a number: \"" + cell + "\"");
      }
    }
    if (std::getline(ss, cell, ','))
      throw std::runtime_error(path.string() + ": row " + std::to_string(lineno) +
                               " has more than 4 columns");
    rows.push_back(vals);
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");

  std::set<double> tms, tints;
  for (const auto& r : rows) {
    tms.insert(r[0]);
    tints.insert(r[1]);
  }
  const int m_count = static_cast<int>(tms.size());
  const int k_count = static_cast<int>(tints.size());
  if (static_cast<int>(rows.size()) != m_count * k_count)
    throw std::runtime_error(path.string() + ": grid is not rectangular (" +
                             std::to_string(rows.size()) + " rows for " + std::to_string(m_count) +
                             "x" + std::to_string(k_count) + ")");
  GreensTable t;
  const double dt_m = m_count > 1 ? (*std::next(tms.begin()) - *tms.begin()) : 0.0;
  const double dt_k = k_count > 1 ? (*std::next(tints.begin()) - *tints.begin()) : 0.0;
  t.dt = m_count > 1 ? dt_m : dt_k;
  if (m_count > 1 && k_count > 1 && std::abs(dt_m - dt_k) > 1e-9 * std::max(1.0, t.dt))
    throw std::runtime_error(path.string() + ": t_m and t_int spacings differ");
  t.values.resize(m_count, k_count);
  t.errors.resize(m_count, k_count);
  std::map<double, int> m_index, k_index;
  int idx = 0;
  for (double v : tms) m_index[v] = idx++;
  idx = 0;
  for (double v : tints) k_index[v] = idx++;
  for (const auto& r : rows) {
    t.values(m_index[r[0]], k_index[r[1]]) = r[2];
    t.errors(m_index[r[0]], k_index[r[1]]) = r[3];
  }

  const auto meta_path = path.string() + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    json meta = json::parse(meta_in, nullptr, false);
    if (!meta.is_discarded()) {
      t.source = meta.value("source", "");
      t.model_hash = meta.value("model_hash", 0ull);
      t.t_gamma = meta.value("t_gamma", 0.0);
      t.n_gamma = meta.value("n_gamma", 0.0);
      t.chi = meta.value("chi", 0.0);
      t.small_parameter = meta.value("small_parameter", 0.0);
      t.trials = meta.value("trials", static_cast<std::int64_t>(0));
      t.seed = meta.value("seed", 0ull);
    }
  }
  return t;
}

void write_curve(const PopulationCurve& curve, const std::filesystem::path& path) {
  std::string out = "t,P,sigma_P\n";
  for (Eigen::Index i = 0; i < curve.times.size(); ++i)
    out += fmt17(curve.times(i)) + "," + fmt17(curve.values(i)) + "," + fmt17(curve.errors(i)) +
           "\n";
  atomic_write(path, out);
}

void write_budget(const Budget& b, const std::filesystem::path& path) {
  json j;
  j["schema"] = "budget";
  j["target_sigma_p"] = b.target_sigma_p;
  j["target_sigma_g"] = b.target_sigma_g;
  j["dt"] = b.dt;
  j["domain"] = b.domain;
  j["n_per_point_two_pulse"] = b.n_per_point;
  j["n_per_point_single_pulse"] = b.n_single_per_point;
  j["grid_m"] = b.grid_m;
  j["grid_k"] = b.grid_k;
  j["total_experiments_per_interval_accounting"] = b.total_per_interval;
  j["total_experiments_per_grid_point_accounting"] = b.total_per_grid_point;
  j["note"] =
      "per-interval accounting multiplies N by T/dt; per-grid-point accounting by the full "
      "two-dimensional grid";
  atomic_write(path, j.dump(2) + "\n");
}

void write_elimination_report(const EliminationReport& r, const std::filesystem::path& path) {
  json j;
  j["schema"] = "elimination_report";
  j["chi"] = r.chis;
  json chi2 = json::array();
  for (double c : r.chis) chi2.push_back(c * c);
  j["chi2"] = chi2;
  j["max_trace_distance"] = r.max_error;
  j["fitted_exponent_in_chi"] = r.fitted_exponent;
  j["times"] = std::vector<double>(r.times.data(), r.times.data() + r.times.size());
  j["curves"] = r.curves;
  atomic_write(path, j.dump(2) + "\n");
}

namespace {

std::filesystem::path ensure_out_dir(const RunConfig& cfg, const CommandOptions& opt) {
  std::filesystem::path dir = opt.out_dir.value_or(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_run_meta(const std::filesystem::path& dir, const std::string& command,
                    const RunConfig& cfg, std::uint64_t seed, double wall_ms,
                    const std::vector<std::string>& outputs) {
  json j;
  j["schema"] = "run_meta";
  j["command"] = command;
  j["config_hash"] = cfg.config_hash;
  j["model"] = cfg.model_name;
  j["seed"] = seed;
  j["rng"] = kRngAlgorithm;
  j["version"] = kVersion;
  j["wall_time_ms"] = wall_ms;
  j["outputs"] = outputs;
  atomic_write(dir / (command + ".meta.json"), j.dump(2) + "\n");
}

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_ = clock::now();
};

GreensTable oracle_table(const RunConfig& cfg, double dt, double t_max_m, double t_max_int) {
  MatterModel m = restrict_matter(cfg.prepared_model(), cfg.manifold_cap);
  GreensTable t = greens_table_exact(m, dt, t_max_m, t_max_int);
  t.model_hash = fnv1a64(cfg.model_name == "inline" ? cfg.canonical : cfg.model_name);
  return t;
}

void write_population_grid(const ProtocolResult& r, const std::filesystem::path& dir) {
  std::string one = "t_m,P1,sigma_P1\n";
  for (Eigen::Index j = 0; j < r.p_one.size(); ++j)
    one += fmt17(j * r.dt) + "," + fmt17(r.p_one(j)) + "," + fmt17(r.sigma_one(j)) + "\n";
  atomic_write(dir / "single_pulse.csv", one);

  std::string two = "t_m,t_int,P2,sigma_P2\n";
  for (int m = 0; m < r.m_count; ++m)
    for (int k = 1; k < r.k_count; ++k)
      two += fmt17(m * r.dt) + "," + fmt17(k * r.dt) + "," + fmt17(r.p_two(m, k)) + "," +
             fmt17(r.sigma_two(m, k)) + "\n";
  atomic_write(dir / "two_pulse.csv", two);
}

}  // namespace

void cmd_oracle(const RunConfig& cfg, const CommandOptions& opt) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  GreensTable t = oracle_table(cfg, cfg.dt, cfg.t_max_m, cfg.t_max_int);
  write_table(t, dir / "greens_exact.csv", cfg.config_hash);
  write_run_meta(dir, "oracle", cfg, 0, sw.ms(), {"greens_exact.csv"});
}

void cmd_protocol(const RunConfig& cfg, const CommandOptions& opt) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  ProtocolResult r = protocol_run(cfg.protocol_spec(opt.workers));
  write_population_grid(r, dir);
  r.reconstruction.model_hash = fnv1a64(cfg.model_name == "inline" ? cfg.canonical : cfg.model_name);
  write_table(r.reconstruction, dir / "greens_recon.csv", cfg.config_hash);
  write_run_meta(dir, "protocol", cfg, 0, sw.ms(),
                 {"single_pulse.csv", "two_pulse.csv", "greens_recon.csv"});
}

void cmd_sample(const RunConfig& cfg, const CommandOptions& opt) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);
  ProtocolResult r =
      sampled_protocol_run(cfg.protocol_spec(opt.workers), cfg.trials, seed, opt.exact_sampling);
  write_population_grid(r, dir);
  r.reconstruction.model_hash = fnv1a64(cfg.model_name == "inline" ? cfg.canonical : cfg.model_name);
  write_table(r.reconstruction, dir / "greens_sampled.csv", cfg.config_hash);
  write_run_meta(dir, "sample", cfg, seed, sw.ms(),
                 {"single_pulse.csv", "two_pulse.csv", "greens_sampled.csv"});
}

void cmd_convolve(const RunConfig& cfg, const CommandOptions& opt) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  GreensTable table;
  if (opt.table_path) {
    table = read_table(*opt.table_path);
  } else {
    const auto def = dir / "greens_exact.csv";
    if (!std::filesystem::exists(def))
      throw std::runtime_error("convolve: no --table given and " + def.string() + " not found");
    table = read_table(def);
  }
  const Wavepacket wp = cfg.wavepacket();
  if (wp.norm_defect() > 1e-6)
    throw std::runtime_error("convolve: wavepacket normalization defect above 1e-6");

  const double t_last = wp.t_start + cfg.t_max_m;
  const int n_times = static_cast<int>(std::llround((t_last - wp.t_start) / wp.dt)) + 1;
  RealVector times(n_times);
  for (int i = 0; i < n_times; ++i) times(i) = wp.t_start + i * wp.dt;
  auto warn = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
  PopulationCurve curve = convolve_curve(table, wp, times, cfg.diag_weight, warn);
  const bool noisy = table.errors.cwiseAbs().maxCoeff() > 0;
  if (noisy)
    for (int i = 0; i < n_times; ++i)
      curve.errors(i) = sigma_population_full(wp, table, times(i));
  write_curve(curve, dir / "population.csv");
  write_run_meta(dir, "convolve", cfg, 0, sw.ms(), {"population.csv"});
}

void cmd_auxcheck(const RunConfig& cfg, const CommandOptions& opt) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  MatterModel m = restrict_matter(cfg.prepared_model(), cfg.manifold_cap);
  std::vector<double> chis;
  for (double c2 : cfg.auxcheck_chi2) chis.push_back(std::sqrt(c2));
  RealVector times(cfg.auxcheck_steps);
  for (int i = 0; i < cfg.auxcheck_steps; ++i)
    times(i) = cfg.auxcheck_t_max * (i + 1) / cfg.auxcheck_steps;
  DensityMatrix init = DensityMatrix::Zero(m.dim(), m.dim());
  for (int a = 0; a < m.noise_dim; ++a)
    for (int b = 0; b < m.noise_dim; ++b)
      init(m.measured_state * m.noise_dim + a, m.measured_state * m.noise_dim + b) =
          m.noise_initial(a, b);
  EliminationReport report = compare_elimination_matched(m, chis, times, init);
  write_elimination_report(report, dir / "auxcheck.json");
  write_run_meta(dir, "auxcheck", cfg, 0, sw.ms(), {"auxcheck.json"});
}

void cmd_budget(const RunConfig& cfg, const CommandOptions& opt) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  const double target = opt.target_sigma.value_or(cfg.budget_target_sigma_p);
  Budget b = plan_budget(target, cfg.dt, cfg.t_max_m, cfg.budget_p_typical, cfg.n_gamma);
  write_budget(b, dir / "budget.json");
  write_run_meta(dir, "budget", cfg, 0, sw.ms(), {"budget.json"});
}

void cmd_sweep(const RunConfig& cfg, const CommandOptions& opt, const std::string& axis,
               const std::vector<double>& values) {
  Stopwatch sw;
  const auto dir = ensure_out_dir(cfg, opt);
  if (values.empty()) throw std::runtime_error("sweep: empty value list");

  static const std::set<std::string> axes = {"dt", "t_gamma", "n_gamma", "chi2", "trials",
                                             "sigma_t"};
  if (!axes.count(axis)) {
    std::string msg = "sweep: unknown axis \"" + axis + "\" (axes:";
    for (const auto& a : axes) msg += " " + a;
    throw std::runtime_error(msg + ")");
  }

  // Exact references shared across points: the continuum response at the
  // (grid-snapped) probe and a fine-grid convolution reference. ref_dt of
  // 1/2 keeps every snapped probe time on the reference grid as long as
  // swept dt values are multiples of 1/2.
  const double ref_dt = 0.5;
  if (axis == "dt")
    for (double v : values)
      if (std::abs(v / ref_dt - std::llround(v / ref_dt)) > 1e-9)
        throw std::runtime_error("sweep: dt values must be multiples of 0.5");
  MatterModel oracle_model = restrict_matter(cfg.prepared_model(), cfg.manifold_cap);
  RunConfig ref_cfg = cfg;
  ref_cfg.wp_dt = ref_dt;
  ref_cfg.wp_samples.reset();
  ref_cfg.wp_t_start.reset();
  const Wavepacket ref_wp = ref_cfg.wavepacket();
  const double ref_span = (cfg.probe_t - ref_wp.t_start) + cfg.dt + 1.0;
  GreensTable ref_table = greens_table_exact(oracle_model, ref_dt, ref_span, ref_span,
                                             std::size_t(1) << 33);

  struct Row {
    double value = 0, g_recon = 0, g_exact = 0, p_recon = 0, p_exact_ref = 0;
  };
  std::vector<Row> rows(values.size());

  parallel_for(static_cast<int>(values.size()), opt.workers, [&](int idx) {
    RunConfig point = cfg;
    const double v = values[idx];
    if (axis == "dt")
      point.dt = v;
    else if (axis == "t_gamma")
      point.t_gamma = v;
    else if (axis == "n_gamma")
      point.n_gamma = v;
    else if (axis == "chi2")
      point.chi2 = v;
    else if (axis == "trials")
      point.trials = static_cast<std::int64_t>(v);
    else if (axis == "sigma_t")
      point.wp_sigma_t = v;

    ProtocolResult r;
    if (point.sampling_enabled)
      r = sampled_protocol_run(point.protocol_spec(1), point.trials,
                               derive_seed(point.seed, 3, static_cast<std::uint64_t>(idx)),
                               opt.exact_sampling);
    else
      r = protocol_run(point.protocol_spec(1));

    const auto sub = dir / (axis + "_" + std::to_string(idx));
    std::filesystem::create_directories(sub);
    write_table(r.reconstruction, sub / "greens_recon.csv", point.config_hash);

    Row row;
    row.value = v;
    // probes snapped to the point grid so the comparison is like for like
    const int pm = std::max(0, static_cast<int>(std::llround(point.probe_t_m / point.dt)));
    const int pk = std::max(0, static_cast<int>(std::llround(point.probe_t_int / point.dt)));
    row.g_exact = greens_exact(oracle_model, pm * point.dt, pk * point.dt);
    if (pm < r.reconstruction.rows() && pk < r.reconstruction.cols())
      row.g_recon = r.reconstruction.values(pm, pk);
    else
      row.g_recon = std::numeric_limits<double>::quiet_NaN();
    const Wavepacket wp = point.wavepacket();
    const double t_probe =
        point.wp_t0 + std::round((point.probe_t - point.wp_t0) / wp.dt) * wp.dt;
    row.p_recon = convolve(r.reconstruction, wp, t_probe, point.diag_weight);
    row.p_exact_ref = convolve(ref_table, ref_wp, t_probe, point.diag_weight);
    rows[idx] = row;
  });

  std::string out = "axis,value,G_recon_probe,G_exact_probe,P_recon_probe,P_exact_ref\n";
  for (const auto& r : rows)
    out += axis + "," + fmt17(r.value) + "," + fmt17(r.g_recon) + "," + fmt17(r.g_exact) + "," +
           fmt17(r.p_recon) + "," + fmt17(r.p_exact_ref) + "\n";
  atomic_write(dir / "sweep.csv", out);
  write_run_meta(dir, "sweep", cfg, cfg.seed, sw.ms(), {"sweep.csv"});
}

}  // namespace qresp::io
