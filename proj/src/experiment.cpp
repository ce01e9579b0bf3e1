#include "dicke/experiment.hpp"

#include "dicke/errors.hpp"
#include "dicke/model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#ifndef DICKE_VERSION
#define DICKE_VERSION "0.0.0"
#endif

namespace dicke {

using nlohmann::json;

const char* version() { return DICKE_VERSION; }

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::map<std::string, ModelKind>& model_names() {
  static const std::map<std::string, ModelKind> m{
      {"static-dicke", ModelKind::static_dicke},
      {"driven-dicke", ModelKind::driven_dicke},
      {"effective", ModelKind::effective},
      {"effective-largeN", ModelKind::effective_large_n}};
  return m;
}

bool has_boson(ModelKind m) { return m != ModelKind::effective_large_n; }

// Runs f(0) .. f(n-1) on up to `workers` threads. f must not throw.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const std::size_t w =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)),
                              1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  const auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      f(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (std::size_t k = 1; k < w; ++k) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

// --- config parsing --------------------------------------------------------

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const {
    used_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& at(const std::string& key) const {
    used_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
    return d;
  }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer())
      throw ConfigError(field(key), "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true/false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  mutable std::set<std::string> used_;
};

// Numbers are taken as given; strings must carry a unit and are converted
// with the absolute omega_0 as the unit.
struct FrequencyContext {
  std::optional<double> omega_0_abs;

  double resolve(const json& v, const std::string& field) const {
    if (v.is_number()) {
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ConfigError(field, "must be finite");
      return d;
    }
    if (!v.is_string())
      throw ConfigError(field, "expected a number or a frequency string");
    if (!omega_0_abs)
      throw ConfigError(field, "absolute frequencies need physics.omega_0 "
                               "given with a unit");
    try {
      return parse_absolute_frequency(v.get<std::string>()) / *omega_0_abs;
    } catch (const InvalidArgument& e) {
      throw ConfigError(field, e.what());
    }
  }
};

const std::set<std::string>& frequency_parameters() {
  static const std::set<std::string> s{"delta_p", "omega_0", "g",    "g_d",
                                       "omega",   "q",       "q_over_n"};
  return s;
}

std::vector<double> parse_grid(const Reader& r, const std::string& param,
                               const FrequencyContext& fc) {
  const bool freq = frequency_parameters().count(param) > 0;
  const auto value = [&](const json& v, const std::string& field) {
    if (freq && param != "omega_0") return fc.resolve(v, field);
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<double>();
  };
  std::vector<double> out;
  if (r.has("values")) {
    const json& arr = r.at("values");
    if (!arr.is_array()) throw ConfigError(r.field("values"), "expected a list");
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(value(arr[i], r.field("values") + "[" +
                                      std::to_string(i) + "]"));
  } else if (r.has("start")) {
    const double a = value(r.at("start"), r.field("start"));
    if (!r.has("stop")) throw ConfigError(r.field("stop"), "missing");
    const double b = value(r.at("stop"), r.field("stop"));
    const int count = r.integer("count", 0);
    if (count < 1) throw ConfigError(r.field("count"), "must be >= 1");
    for (int i = 0; i < count; ++i)
      out.push_back(count == 1 ? a : a + (b - a) * i / (count - 1));
  } else {
    throw ConfigError(r.field("values"), "sweep needs values or start/stop");
  }
  if (out.empty()) throw ConfigError(r.field("values"), "grid is empty");
  for (double v : out)
    if (!std::isfinite(v)) throw ConfigError(r.field("values"), "non-finite");
  return out;
}

std::string method_name(Method m) {
  return m == Method::rk4 ? "rk4" : "midpoint-exponential";
}

// --- model evaluation ------------------------------------------------------

StaticParams static_params(const ExperimentConfig& c) {
  StaticParams p;
  p.delta_p = c.physics.delta_p;
  p.omega_0 = c.physics.omega_0;
  p.g = c.physics.g;
  p.n_atoms = c.physics.n_atoms;
  return p;
}

DriveParams drive_params(const ExperimentConfig& c) {
  return {c.physics.g_d, c.physics.omega};
}

TrajectorySource make_source(const ExperimentConfig& c, int n_max) {
  const int n = c.physics.n_atoms;
  const HilbertDims dims(n, c.model == ModelKind::effective_large_n ? 0 : n_max);
  EvolveOptions opt;
  opt.norm_tol = c.integrator.norm_tol;
  opt.krylov_tol = c.integrator.krylov_tol;
  opt.krylov_max_dim = c.integrator.krylov_max_dim;
  opt.checkpoint_every = resolved_horizon(c) / 16.0;
  const StateVector psi0 = initial_state(dims);

  switch (c.model) {
    case ModelKind::static_dicke: {
      const DickeSpace space(dims);
      return static_trajectory_source(h_static(static_params(c), space), psi0,
                                      opt);
    }
    case ModelKind::effective: {
      const DickeSpace space(dims);
      return static_trajectory_source(
          h_effective(static_params(c), drive_params(c), space), psi0, opt);
    }
    case ModelKind::effective_large_n:
      return static_trajectory_source(
          h_effective_large_n(c.physics.omega_0, effective_q(c), n), psi0,
          opt);
    case ModelKind::driven_dicke: {
      auto space = std::make_shared<DickeSpace>(dims);
      auto model = std::make_shared<DrivenDicke>(static_params(c),
                                                 drive_params(c), *space);
      const IntegratorConfig icfg = c.integrator;
      return [space, model, psi0, icfg](std::span<const double> t) {
        DrivenHamiltonian h{[model](double s) { return model->at(s); },
                            model->omega()};
        return evolve_driven(h, psi0, t, icfg);
      };
    }
  }
  throw InvalidArgument("unknown model");
}

void append(Trajectory& into, Trajectory&& more) {
  for (std::size_t i = 0; i < more.times.size(); ++i) {
    into.times.push_back(more.times[i]);
    into.moments.push_back(more.moments[i]);
    into.photon_number.push_back(more.photon_number[i]);
  }
}

// Merges sample streams (coarse then refined) into time order.
Trajectory sorted(const Trajectory& t) {
  std::vector<std::size_t> order(t.times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return t.times[a] < t.times[b];
  });
  Trajectory out;
  for (auto i : order) {
    out.times.push_back(t.times[i]);
    out.moments.push_back(t.moments[i]);
    out.photon_number.push_back(t.photon_number[i]);
  }
  return out;
}

std::string json_line(const json& j) { return j.dump(); }

std::string header(const ExperimentConfig* cfg, const std::string& kind,
                   const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream os;
  os << "# dataset: " << kind << "\n";
  os << "# version: " << version() << "\n";
  os << "# units: frequencies in omega_0, times in 1/omega_0\n";
  if (cfg) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(*cfg)));
    os << "# config_hash: " << hash << "\n";
    os << "# config: " << json_line(cfg->to_json()) << "\n";
  }
  for (const auto& [k, v] : extra) os << "# " << k << ": " << v << "\n";
  return os.str();
}

}  // namespace

std::string to_string(ModelKind m) {
  for (const auto& [k, v] : model_names())
    if (v == m) return k;
  return "unknown";
}

ModelKind model_from_string(const std::string& s) {
  const auto it = model_names().find(s);
  if (it == model_names().end())
    throw ConfigError("model", "unknown model '" + s +
                                   "' (static-dicke, driven-dicke, effective, "
                                   "effective-largeN)");
  return it->second;
}

const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> v{"delta_p", "omega_0",    "g",
                                          "g_d",     "omega",      "q",
                                          "q_over_n", "n_atoms", "fock_cutoff"};
  return v;
}

double parse_absolute_frequency(const std::string& text) {
  static const std::regex re(
      R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]+)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re))
    throw InvalidArgument("cannot read frequency '" + text +
                          "' (expected e.g. \"0.5 GHz\")");
  const double v = std::stod(m[1].str());
  const std::string unit = m[2].str();
  static const std::map<std::string, double> scale{
      {"Hz", kTwoPi},          {"kHz", kTwoPi * 1e3}, {"MHz", kTwoPi * 1e6},
      {"GHz", kTwoPi * 1e9},   {"THz", kTwoPi * 1e12}, {"rad/s", 1.0}};
  const auto it = scale.find(unit);
  if (it == scale.end())
    throw InvalidArgument("unknown frequency unit '" + unit + "'");
  return v * it->second;
}

void ExperimentConfig::validate() const {
  if (physics.n_atoms < 1) throw ConfigError("physics.n_atoms", "must be >= 1");
  if (!(physics.omega_0 > 0.0))
    throw ConfigError("physics.omega_0", "must be > 0");
  if (physics.delta_p < 0.0)
    throw ConfigError("physics.delta_p",
                      "must be >= 0 (negative values are unstable)");
  if (model == ModelKind::driven_dicke || model == ModelKind::effective ||
      (model == ModelKind::effective_large_n && !physics.q)) {
    if (!(physics.omega > 0.0))
      throw ConfigError("physics.omega", "must be > 0");
  }
  if (physics.q && *physics.q < 0.0)
    throw ConfigError("physics.q", "must be >= 0");
  if (has_boson(model) && fock_cutoff < 0)
    throw ConfigError("dims.fock_cutoff", "must be >= 0");
  if (!(integrator.dt > 0.0)) throw ConfigError("integrator.dt", "must be > 0");
  if (integrator.steps_per_drive_period < 16)
    throw ConfigError("integrator.steps_per_drive_period", "must be >= 16");
  if (!(integrator.norm_tol > 0.0))
    throw ConfigError("integrator.norm_tol", "must be > 0");
  if (integrator.krylov_max_dim < 2)
    throw ConfigError("integrator.krylov_max_dim", "must be >= 2");
  if (!(scan.coarse_dt > 0.0)) throw ConfigError("scan.coarse_dt", "must be > 0");
  if (scan.horizon < 0.0) throw ConfigError("scan.horizon", "must be > 0");
  if (sweep) {
    const auto& names = sweep_parameters();
    if (std::find(names.begin(), names.end(), sweep->parameter) == names.end())
      throw ConfigError("sweep.parameter",
                        "unrecognized parameter '" + sweep->parameter + "'");
    if (sweep->values.empty())
      throw ConfigError("sweep.values", "grid is empty");
    for (double v : sweep->values)
      if (!std::isfinite(v)) throw ConfigError("sweep.values", "non-finite");
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["model"] = to_string(model);
  json& p = j["physics"];
  p["delta_p"] = physics.delta_p;
  p["omega_0"] = physics.omega_0;
  p["g"] = physics.g;
  p["g_d"] = physics.g_d;
  p["omega"] = physics.omega;
  p["n_atoms"] = physics.n_atoms;
  p["q"] = physics.q ? json(*physics.q) : json(nullptr);
  j["dims"]["fock_cutoff"] = fock_cutoff;
  json& in = j["integrator"];
  in["dt"] = integrator.dt;
  in["method"] = method_name(integrator.method);
  in["norm_tol"] = integrator.norm_tol;
  in["steps_per_drive_period"] = integrator.steps_per_drive_period;
  in["max_steps"] = integrator.max_steps;
  in["krylov_tol"] = integrator.krylov_tol;
  in["krylov_max_dim"] = integrator.krylov_max_dim;
  in["dense_exp_max_dim"] = integrator.dense_exp_max_dim;
  json& s = j["scan"];
  s["horizon"] = scan.horizon > 0.0 ? json(scan.horizon) : json("default");
  s["coarse_dt"] = scan.coarse_dt;
  s["refine"] = scan.refine;
  s["eps"] = scan.eps >= 0.0 ? json(scan.eps) : json("default");
  if (sweep) {
    j["sweep"]["parameter"] = sweep->parameter;
    j["sweep"]["values"] = sweep->values;
  }
  j["convergence"]["check"] = check_convergence;
  j["output"]["path"] = output_path;
  return j;
}

ExperimentConfig parse_config(const json& doc) {
  const Reader root(doc, "");
  ExperimentConfig c;
  c.model = model_from_string(root.string("model", "driven-dicke"));

  if (root.has("physics")) {
    const Reader r(root.at("physics"), "physics");
    FrequencyContext fc;
    if (r.has("omega_0")) {
      const json& w0 = r.at("omega_0");
      if (w0.is_string()) {
        try {
          fc.omega_0_abs = parse_absolute_frequency(w0.get<std::string>());
        } catch (const InvalidArgument& e) {
          throw ConfigError("physics.omega_0", e.what());
        }
        c.physics.omega_0 = 1.0;
      } else {
        c.physics.omega_0 = r.number("omega_0", 1.0);
      }
    }
    const auto freq = [&](const std::string& key, double fallback) {
      return r.has(key) ? fc.resolve(r.at(key), r.field(key)) : fallback;
    };
    c.physics.delta_p = freq("delta_p", c.physics.delta_p);
    c.physics.g = freq("g", c.physics.g);
    c.physics.g_d = freq("g_d", c.physics.g_d);
    c.physics.omega = freq("omega", c.physics.omega);
    if (r.has("q")) c.physics.q = freq("q", 0.0);
    c.physics.n_atoms = r.integer("n_atoms", c.physics.n_atoms);
    r.reject_unknown();

    if (root.has("sweep")) {
      const Reader sw(root.at("sweep"), "sweep");
      SweepAxis axis;
      axis.parameter = sw.string("parameter", "");
      axis.values = parse_grid(sw, axis.parameter, fc);
      sw.reject_unknown();
      c.sweep = axis;
    }
  } else if (root.has("sweep")) {
    const Reader sw(root.at("sweep"), "sweep");
    SweepAxis axis;
    axis.parameter = sw.string("parameter", "");
    axis.values = parse_grid(sw, axis.parameter, FrequencyContext{});
    sw.reject_unknown();
    c.sweep = axis;
  }

  if (root.has("dims")) {
    const Reader r(root.at("dims"), "dims");
    c.fock_cutoff = r.integer("fock_cutoff", c.fock_cutoff);
    if (r.has("n_atoms"))
      throw ConfigError("dims.n_atoms", "set physics.n_atoms instead");
    r.reject_unknown();
  }
  if (root.has("integrator")) {
    const Reader r(root.at("integrator"), "integrator");
    c.integrator.dt = r.number("dt", c.integrator.dt);
    const std::string m = r.string("method", method_name(c.integrator.method));
    if (m == "midpoint-exponential")
      c.integrator.method = Method::midpoint_exponential;
    else if (m == "rk4")
      c.integrator.method = Method::rk4;
    else
      throw ConfigError("integrator.method",
                        "expected midpoint-exponential or rk4");
    c.integrator.norm_tol = r.number("norm_tol", c.integrator.norm_tol);
    c.integrator.steps_per_drive_period =
        r.integer("steps_per_drive_period", c.integrator.steps_per_drive_period);
    if (r.has("max_steps")) {
      const json& v = r.at("max_steps");
      if (!v.is_number_unsigned())
        throw ConfigError("integrator.max_steps", "expected a positive integer");
      c.integrator.max_steps = v.get<std::size_t>();
    }
    c.integrator.krylov_tol = r.number("krylov_tol", c.integrator.krylov_tol);
    c.integrator.krylov_max_dim =
        r.integer("krylov_max_dim", c.integrator.krylov_max_dim);
    c.integrator.dense_exp_max_dim = r.integer(
        "dense_exp_max_dim", static_cast<int>(c.integrator.dense_exp_max_dim));
    r.reject_unknown();
  }
  if (root.has("scan")) {
    const Reader r(root.at("scan"), "scan");
    if (r.has("horizon") && r.at("horizon").is_string()) {
      if (r.at("horizon").get<std::string>() != "default")
        throw ConfigError("scan.horizon", "expected a number or \"default\"");
    } else {
      c.scan.horizon = r.number("horizon", 0.0);
      if (r.has("horizon") && !(c.scan.horizon > 0.0))
        throw ConfigError("scan.horizon", "must be > 0");
    }
    c.scan.coarse_dt = r.number("coarse_dt", c.scan.coarse_dt);
    c.scan.refine = r.boolean("refine", c.scan.refine);
    if (r.has("eps") && r.at("eps").is_string()) {
      if (r.at("eps").get<std::string>() != "default")
        throw ConfigError("scan.eps", "expected a number or \"default\"");
    } else {
      c.scan.eps = r.number("eps", -1.0);
    }
    r.reject_unknown();
  }
  if (root.has("convergence")) {
    const Reader r(root.at("convergence"), "convergence");
    c.check_convergence = r.boolean("check", false);
    r.reject_unknown();
  }
  if (root.has("output")) {
    const Reader r(root.at("output"), "output");
    c.output_path = r.string("path", "");
    const std::string fmt = r.string("format", "csv");
    if (fmt != "csv") throw ConfigError("output.format", "only csv is written");
    r.reject_unknown();
  }
  root.has("sweep");
  root.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("--set", "empty key in '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = cfg.to_json().dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

void set_parameter(ExperimentConfig& cfg, const std::string& name,
                   double value) {
  Physics& p = cfg.physics;
  if (name == "delta_p") p.delta_p = value;
  else if (name == "omega_0") p.omega_0 = value;
  else if (name == "g") p.g = value;
  else if (name == "g_d") p.g_d = value;
  else if (name == "omega") p.omega = value;
  else if (name == "q") p.q = value;
  else if (name == "q_over_n") p.q = value * p.n_atoms;
  else if (name == "n_atoms" || name == "fock_cutoff") {
    if (value != std::round(value))
      throw ConfigError("sweep.values", name + " needs integer values");
    if (name == "n_atoms")
      p.n_atoms = static_cast<int>(value);
    else
      cfg.fock_cutoff = static_cast<int>(value);
  } else {
    throw ConfigError("sweep.parameter", "unrecognized parameter '" + name + "'");
  }
}

double effective_q(const ExperimentConfig& cfg) {
  if (cfg.physics.q) return *cfg.physics.q;
  if (cfg.model == ModelKind::static_dicke) return 0.0;
  return q_of(cfg.physics.delta_p, cfg.physics.g_d, cfg.physics.omega);
}

double resolved_horizon(const ExperimentConfig& cfg) {
  if (cfg.scan.horizon > 0.0) return cfg.scan.horizon;
  const double w = cfg.model == ModelKind::driven_dicke ? cfg.physics.omega
                                                         : 0.0;
  return default_horizon(cfg.physics.omega_0, effective_q(cfg), w);
}

std::vector<double> coarse_xi_trace(const ExperimentConfig& cfg, int n_max) {
  ScanSettings s = cfg.scan;
  s.horizon = resolved_horizon(cfg);
  const auto count =
      static_cast<std::size_t>(std::floor(s.horizon / s.coarse_dt + 1e-9));
  std::vector<double> t(count + 1);
  for (std::size_t k = 0; k <= count; ++k)
    t[k] = static_cast<double>(k) * s.coarse_dt;
  const Trajectory tr = make_source(cfg, n_max)(t);
  std::vector<double> xi(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    try {
      xi[k] = xi_squared(tr.moments[k], cfg.physics.n_atoms, t[k], s.eps).xi_sq;
    } catch (const UndefinedDirection&) {
      xi[k] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return xi;
}

SingleResult run_single(const ExperimentConfig& cfg) {
  cfg.validate();
  SingleResult out;
  out.horizon = resolved_horizon(cfg);
  ScanSettings s = cfg.scan;
  s.horizon = out.horizon;
  const TrajectorySource src = make_source(cfg, cfg.fock_cutoff);
  Trajectory all;
  const MomentSource moments = [&](std::span<const double> t) {
    Trajectory tr = src(t);
    std::vector<SpinMoments> m = tr.moments;
    append(all, std::move(tr));
    return m;
  };
  out.msf = msf_scan(moments, cfg.physics.n_atoms, s);
  out.trajectory = sorted(all);
  if (cfg.check_convergence && has_boson(cfg.model)) {
    ConvergenceScenario sc{[&cfg](int n) { return coarse_xi_trace(cfg, n); }};
    out.convergence = check_fock_convergence(sc, cfg.fock_cutoff);
  }
  return out;
}

std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  if (!cfg.sweep) throw ConfigError("sweep", "missing sweep section");
  const auto& values = cfg.sweep->values;
  std::vector<ResultRecord> out(values.size());
  const std::uint64_t hash = config_hash(cfg);
  parallel_for(values.size(), workers, [&](std::size_t i) {
    ResultRecord& rec = out[i];
    rec.config_hash = hash;
    rec.value = values[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ExperimentConfig point = cfg;
      point.sweep.reset();
      set_parameter(point, cfg.sweep->parameter, values[i]);
      point.validate();
      const SingleResult r = run_single(point);
      rec.xi_m_sq = r.msf.xi_m_sq;
      rec.db = r.msf.xi_m_sq > 0.0 ? db(r.msf.xi_m_sq)
                                   : std::numeric_limits<double>::infinity();
      rec.t_star = r.msf.t_star;
      rec.horizon = r.horizon;
      rec.n_max = has_boson(point.model) ? point.fock_cutoff : 0;
      if (r.convergence)
        rec.status = r.convergence->converged ? "converged" : "not-converged";
      else
        rec.status = "ok";
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.xi_m_sq = rec.db = rec.t_star = rec.horizon =
          std::numeric_limits<double>::quiet_NaN();
      rec.status = std::string("error: ") + e.what();
    }
    rec.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  });
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string single_dataset(const ExperimentConfig& cfg, const SingleResult& r) {
  std::vector<std::pair<std::string, std::string>> extra{
      {"horizon", format_number(r.horizon)},
      {"xi_m_sq", format_number(r.msf.xi_m_sq)},
      {"db", format_number(r.msf.xi_m_sq > 0.0 ? db(r.msf.xi_m_sq)
                                               : INFINITY)},
      {"t_star", format_number(r.msf.t_star)},
      {"refined", r.msf.refined ? "true" : "false"},
      {"excluded_samples", std::to_string(r.msf.excluded_times.size())}};
  if (r.convergence) {
    extra.emplace_back("convergence",
                       std::string(r.convergence->converged ? "converged"
                                                            : "not-converged") +
                           " n_max=" + std::to_string(r.convergence->n_max) +
                           " check=" + std::to_string(r.convergence->n_max_check) +
                           " change=" + format_number(r.convergence->max_change));
  }
  std::ostringstream os;
  os << header(&cfg, "trajectory", extra);
  os << "t,sx,sy,sz,photon_number,xi_sq,db,mean_spin_len,valid\n";
  const int n = cfg.physics.n_atoms;
  for (std::size_t i = 0; i < r.trajectory.times.size(); ++i) {
    const auto& m = r.trajectory.moments[i];
    os << format_number(r.trajectory.times[i]) << ',' << format_number(m.mean(0))
       << ',' << format_number(m.mean(1)) << ',' << format_number(m.mean(2))
       << ',' << format_number(r.trajectory.photon_number[i]) << ',';
    try {
      const SqueezeSample s = xi_squared(m, n, r.trajectory.times[i], cfg.scan.eps);
      os << format_number(s.xi_sq) << ',' << format_number(s.db) << ','
         << format_number(s.mean_spin_len) << ",1\n";
    } catch (const UndefinedDirection&) {
      os << "nan,nan," << format_number(m.mean.norm()) << ",0\n";
    }
  }
  return os.str();
}

std::string sweep_dataset(const ExperimentConfig& cfg,
                          const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  os << header(&cfg, "sweep",
               {{"horizon", cfg.scan.horizon > 0.0
                                ? format_number(cfg.scan.horizon)
                                : "default per point (column horizon)"}});
  const std::string param = cfg.sweep ? cfg.sweep->parameter : "value";
  os << param << ",xi_m_sq,db,t_star,horizon,n_max,status\n";
  for (const auto& r : records) {
    os << format_number(r.value) << ',' << format_number(r.xi_m_sq) << ','
       << format_number(r.db) << ',' << format_number(r.t_star) << ','
       << format_number(r.horizon) << ',' << r.n_max << ','
       << csv_field(r.status) << '\n';
  }
  return os.str();
}

// --- figures ---------------------------------------------------------------

namespace {

ExperimentConfig desk_driven(double omega, double g_d) {
  ExperimentConfig c;
  c.model = ModelKind::driven_dicke;
  c.physics.n_atoms = 10;
  c.physics.delta_p = 1.0;
  c.physics.omega_0 = 1.0;
  c.physics.omega = omega;
  c.physics.g_d = g_d;
  c.fock_cutoff = 30;
  return c;
}

struct Row {
  std::vector<std::string> cells;
  bool failed = false;
};

std::string table(const std::string& name,
                  const std::vector<std::pair<std::string, std::string>>& meta,
                  const std::string& columns, const std::vector<Row>& rows) {
  std::ostringstream os;
  os << header(nullptr, name, meta) << columns << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.cells.size(); ++i)
      os << (i ? "," : "") << csv_field(r.cells[i]);
    os << '\n';
  }
  return os.str();
}

std::string grid_text(const std::vector<double>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i)
    s += (i ? " " : "") + format_number(g[i]);
  return s;
}

Row msf_row(const std::string& series, const std::string& param, double value,
            const ExperimentConfig& c) {
  Row row;
  try {
    const SingleResult r = run_single(c);
    row.cells = {series,
                 param,
                 format_number(value),
                 format_number(r.msf.xi_m_sq),
                 format_number(db(r.msf.xi_m_sq)),
                 format_number(r.msf.t_star),
                 format_number(r.horizon),
                 std::to_string(has_boson(c.model) ? c.fock_cutoff : 0),
                 "ok"};
  } catch (const std::exception& e) {
    row.failed = true;
    row.cells = {series, param, format_number(value), "nan", "nan", "nan",
                 "nan", std::to_string(c.fock_cutoff),
                 std::string("error: ") + e.what()};
  }
  return row;
}

constexpr const char* kMsfColumns =
    "series,parameter,value,xi_m_sq,db,t_star,horizon,n_max,status";

FigureResult fig2(const FigureOptions& opt) {
  const std::vector<double> drive =
      opt.grid.value_or(std::vector<double>{2, 4, 6, 8, 10});
  const std::vector<double> couplings{0,    0.25, 0.5, 0.75, 1.0, 1.25,
                                      1.5,  2.0,  2.5, 3.0,  50.0};
  const std::size_t nd = drive.size();
  std::vector<Row> rows(nd + couplings.size());
  parallel_for(rows.size(), opt.workers, [&](std::size_t i) {
    if (i < nd) {
      rows[i] = msf_row("driven", "g_d", drive[i], desk_driven(10.0, drive[i]));
      return;
    }
    const double g = couplings[i - nd];
    ExperimentConfig c;
    c.model = ModelKind::static_dicke;
    c.physics.n_atoms = 10;
    c.physics.delta_p = 1.0;
    c.physics.g = g;
    c.fock_cutoff = static_cutoff_estimate(g, static_params(c),
                                           resolved_horizon(c));
    rows[i] = msf_row("undriven", "g", g, c);
  });
  FigureResult f{"fig2", {}, false};
  for (const auto& r : rows) f.partial_failure |= r.failed;
  f.dataset = table("fig2",
                    {{"system", "N=10 delta_p=1 omega_0=1"},
                     {"driven", "omega=10 n_max=30 g_d grid " + grid_text(drive)},
                     {"undriven", "static coupling g, n_max per point from the "
                                  "displacement estimate"},
                     {"horizon", "default per point (column horizon)"}},
                    kMsfColumns, rows);
  return f;
}

FigureResult fig3(const FigureOptions& opt) {
  const std::vector<double> omegas = opt.grid.value_or(
      std::vector<double>{10, 15, 20, 30, 40, 60, 80, 100});
  std::vector<Row> rows(omegas.size());
  parallel_for(rows.size(), opt.workers, [&](std::size_t i) {
    rows[i] = msf_row("driven", "omega", omegas[i], desk_driven(omegas[i], 20.0));
  });
  FigureResult f{"fig3", {}, false};
  for (const auto& r : rows) f.partial_failure |= r.failed;
  f.dataset = table("fig3",
                    {{"system", "N=10 delta_p=1 omega_0=1 g_d=20 n_max=30"},
                     {"horizon", "default per point (column horizon)"}},
                    kMsfColumns, rows);
  return f;
}

FigureResult fig4(const FigureOptions& opt) {
  const std::vector<double> drive =
      opt.grid.value_or(std::vector<double>{5, 10, 15, 20});
  const double strongest = *std::max_element(drive.begin(), drive.end());
  // Cutoff from the convergence check at the strongest drive.
  const ExperimentConfig probe = desk_driven(20.0, strongest);
  const ConvergenceScenario sc{
      [&probe](int n) { return coarse_xi_trace(probe, n); }};
  const ConvergenceReport conv = find_converged_cutoff(sc, 10, 5, 60);
  std::vector<Row> rows(drive.size());
  parallel_for(rows.size(), opt.workers, [&](std::size_t i) {
    Row row;
    try {
      ExperimentConfig d = desk_driven(20.0, drive[i]);
      d.fock_cutoff = conv.n_max;
      ExperimentConfig e = d;
      e.model = ModelKind::effective;
      const SingleResult rd = run_single(d);
      const SingleResult re = run_single(e);
      const double rel =
          std::abs(rd.msf.xi_m_sq - re.msf.xi_m_sq) / re.msf.xi_m_sq;
      row.cells = {format_number(drive[i]),       format_number(rd.msf.xi_m_sq),
                   format_number(db(rd.msf.xi_m_sq)), format_number(re.msf.xi_m_sq),
                   format_number(db(re.msf.xi_m_sq)), format_number(rel),
                   format_number(rd.horizon),     std::to_string(conv.n_max),
                   "ok"};
    } catch (const std::exception& ex) {
      row.failed = true;
      row.cells = {format_number(drive[i]), "nan", "nan", "nan", "nan", "nan",
                   "nan", std::to_string(conv.n_max),
                   std::string("error: ") + ex.what()};
    }
    rows[i] = std::move(row);
  });
  FigureResult f{"fig4", {}, !conv.converged};
  for (const auto& r : rows) f.partial_failure |= r.failed;
  f.dataset = table(
      "fig4",
      {{"system", "N=10 delta_p=1 omega_0=1 omega=20"},
       {"fock_cutoff", std::to_string(conv.n_max) + " (" +
                           (conv.converged ? "converged" : "NOT converged") +
                           ", change " + format_number(conv.max_change) +
                           " vs n_max=" + std::to_string(conv.n_max_check) +
                           " at g_d=" + format_number(strongest) + ")"},
       {"horizon", "default per point (column horizon)"}},
      "g_d,xi_m_sq_driven,db_driven,xi_m_sq_effective,db_effective,"
      "rel_diff,horizon,n_max,status",
      rows);
  return f;
}

FigureResult fig5(const FigureOptions& opt) {
  const std::vector<double> qn =
      opt.grid.value_or(std::vector<double>{0.01, 0.1, 1.0});
  const Fig5Result r = run_fig5(100, qn, 20.0, 0.05);
  std::string cols = "t";
  for (double v : qn) cols += ",sz_norm_q_over_n=" + format_number(v);
  std::vector<Row> rows(r.times.size());
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    rows[k].cells.push_back(format_number(r.times[k]));
    for (const auto& s : r.series) rows[k].cells.push_back(format_number(s.sz_norm[k]));
  }
  FigureResult f{"fig5", {}, false};
  f.dataset = table("fig5",
                    {{"system", "effective-largeN N=100 omega_0=1"},
                     {"quantity", "2<S_z(t)>/N"}},
                    cols, rows);
  return f;
}

FigureResult fig6(const FigureOptions& opt) {
  const std::vector<double> drive =
      opt.grid.value_or(std::vector<double>{5, 10, 15, 20});
  std::vector<Row> rows(drive.size());
  parallel_for(rows.size(), opt.workers, [&](std::size_t i) {
    Row row;
    try {
      ExperimentConfig c;
      c.model = ModelKind::effective_large_n;
      c.physics.n_atoms = 100;
      c.physics.delta_p = 1.0;
      c.physics.omega = 20.0;
      c.physics.g_d = drive[i];
      const SingleResult r = run_single(c);
      const double q = effective_q(c);
      const double xa = msf_analytic(FrozenSpinParams(1.0, q, 100));
      double dev = 0.0;
      for (const auto& m : r.trajectory.moments)
        dev = std::max(dev, std::abs(2.0 * m.mean(2) / 100.0 + 1.0));
      row.cells = {format_number(drive[i]),
                   format_number(q),
                   format_number(r.msf.xi_m_sq),
                   format_number(db(r.msf.xi_m_sq)),
                   format_number(xa),
                   format_number(db(xa)),
                   format_number(std::abs(r.msf.xi_m_sq - xa) / xa),
                   format_number(dev),
                   format_number(r.horizon),
                   "ok"};
    } catch (const std::exception& ex) {
      row.failed = true;
      row.cells = {format_number(drive[i]), "nan", "nan", "nan", "nan", "nan",
                   "nan", "nan", "nan", std::string("error: ") + ex.what()};
    }
    rows[i] = std::move(row);
  });
  FigureResult f{"fig6", {}, false};
  for (const auto& r : rows) f.partial_failure |= r.failed;
  f.dataset = table("fig6",
                    {{"system", "effective-largeN N=100 delta_p=1 omega_0=1 "
                                "omega=20"},
                     {"horizon", "default per point (column horizon)"}},
                    "g_d,q,xi_m_sq_numeric,db_numeric,xi_m_sq_analytic,"
                    "db_analytic,rel_diff,max_sz_deviation,horizon,status",
                    rows);
  return f;
}

}  // namespace

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> v{"fig2", "fig3", "fig4", "fig5",
                                          "fig6"};
  return v;
}

FigureResult run_figure(const std::string& name, const FigureOptions& opt) {
  if (name == "fig2") return fig2(opt);
  if (name == "fig3") return fig3(opt);
  if (name == "fig4") return fig4(opt);
  if (name == "fig5") return fig5(opt);
  if (name == "fig6") return fig6(opt);
  throw ConfigError("fig", "unknown figure '" + name + "' (fig2 .. fig6)");
}

Fig5Result run_fig5(int n_atoms, std::span<const double> q_over_n,
                    double t_max, double dt) {
  if (!(t_max > 0.0) || !(dt > 0.0))
    throw InvalidArgument("fig5 needs t_max > 0 and dt > 0");
  Fig5Result out;
  const auto count = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9));
  for (std::size_t k = 0; k <= count; ++k)
    out.times.push_back(static_cast<double>(k) * dt);
  const StateVector psi0 = initial_state(HilbertDims(n_atoms, 0));
  for (double qn : q_over_n) {
    if (qn < 0.0) throw InvalidArgument("q/N must be >= 0");
    const Operator h = h_effective_large_n(1.0, qn * n_atoms, n_atoms);
    const Trajectory tr = evolve_static(h, psi0, out.times);
    Fig5Series s{qn, {}};
    for (const auto& m : tr.moments) s.sz_norm.push_back(2.0 * m.mean(2) / n_atoms);
    out.series.push_back(std::move(s));
  }
  return out;
}

// --- reports ---------------------------------------------------------------

const std::vector<std::string>& report_presets() {
  static const std::vector<std::string> v{"rb87", "q1e4"};
  return v;
}

ExperimentInputs report_preset(const std::string& name) {
  ExperimentInputs in;
  if (name == "rb87") {
    in.omega = kTwoPi * 0.5e9;
    in.g_d = kTwoPi * 0.5e9;
    in.delta_p = kTwoPi * 0.05e9;
    // chosen so that the quoted q = 2 pi x 250 MHz equals 1e4 omega_0
    in.omega_0 = kTwoPi * 25e3;
    in.n_atoms = 100000;
    in.gamma = kTwoPi * 3e6;
    in.kappa = kTwoPi * 1.3e6;
    in.quoted_q = kTwoPi * 250e6;
    in.quoted_t_min = 0.5e-9;
    return in;
  }
  if (name == "q1e4") {
    in.omega_0 = 1.0;
    in.delta_p = 2e4;
    in.g_d = 2e5;
    in.omega = 2e5;
    in.n_atoms = 100000;
    return in;
  }
  throw ConfigError("--preset", "unknown report preset '" + name + "'");
}

ExperimentInputs parse_report_inputs(const json& doc) {
  const Reader root(doc, "");
  if (!root.has("report")) throw ConfigError("report", "missing section");
  const Reader r(root.at("report"), "report");
  ExperimentInputs in;
  if (r.has("preset")) in = report_preset(r.string("preset", ""));
  const auto freq = [&](const std::string& key, double fallback) {
    if (!r.has(key)) return fallback;
    const json& v = r.at(key);
    if (v.is_number()) return v.get<double>();
    if (!v.is_string())
      throw ConfigError(r.field(key), "expected a number or frequency string");
    try {
      return parse_absolute_frequency(v.get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError(r.field(key), e.what());
    }
  };
  const auto seconds = [&](const std::string& key) -> std::optional<double> {
    if (!r.has(key)) return std::nullopt;
    const json& v = r.at(key);
    if (v.is_number()) return v.get<double>();
    static const std::regex re(
        R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(s|ms|us|ns|ps)\s*$)");
    std::smatch m;
    const std::string text = v.is_string() ? v.get<std::string>() : "";
    if (!std::regex_match(text, m, re))
      throw ConfigError(r.field(key), "expected seconds or e.g. \"0.5 ns\"");
    static const std::map<std::string, double> scale{
        {"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"ps", 1e-12}};
    return std::stod(m[1].str()) * scale.at(m[2].str());
  };
  in.delta_p = freq("delta_p", in.delta_p);
  in.g_d = freq("g_d", in.g_d);
  in.omega = freq("omega", in.omega);
  in.omega_0 = freq("omega_0", in.omega_0);
  in.gamma = freq("gamma", in.gamma);
  if (r.has("kappa")) in.kappa = freq("kappa", 0.0);
  if (r.has("quoted_q")) in.quoted_q = freq("quoted_q", 0.0);
  if (auto t = seconds("quoted_t_min")) in.quoted_t_min = t;
  in.n_atoms = r.integer("n_atoms", in.n_atoms);
  in.high_frequency_ratio =
      r.number("high_frequency_ratio", in.high_frequency_ratio);
  in.validity_ratio = r.number("validity_ratio", in.validity_ratio);
  r.reject_unknown();
  root.reject_unknown();
  if (in.n_atoms < 1) throw ConfigError("report.n_atoms", "must be >= 1");
  if (!(in.omega_0 > 0.0)) throw ConfigError("report.omega_0", "must be > 0");
  if (!(in.omega > 0.0)) throw ConfigError("report.omega", "must be > 0");
  if (in.delta_p < 0.0) throw ConfigError("report.delta_p", "must be >= 0");
  return in;
}

json report_json(const ExperimentReport& r) {
  json j;
  const auto& in = r.inputs;
  j["inputs"] = {{"delta_p", in.delta_p},
                 {"g_d", in.g_d},
                 {"omega", in.omega},
                 {"omega_0", in.omega_0},
                 {"n_atoms", in.n_atoms},
                 {"gamma", in.gamma},
                 {"kappa", in.kappa ? json(*in.kappa) : json(nullptr)},
                 {"quoted_q", in.quoted_q ? json(*in.quoted_q) : json(nullptr)},
                 {"quoted_t_min",
                  in.quoted_t_min ? json(*in.quoted_t_min) : json(nullptr)},
                 {"high_frequency_ratio", in.high_frequency_ratio},
                 {"validity_ratio", in.validity_ratio}};
  j["q"] = r.q;
  j["q_over_omega_0"] = r.q_over_omega_0;
  j["eta"] = r.eta;
  j["xi_m_sq"] = r.xi_m_sq;
  j["squeezing_db"] = r.squeezing_db;
  j["t_opt"] = r.t_opt;
  j["t_drive_quarter"] = r.t_drive_quarter;
  j["tau_atom"] = r.tau_atom ? json(*r.tau_atom) : json(nullptr);
  j["within_decay_time"] = r.within_decay_time;
  j["high_frequency_ok"] = r.high_frequency_ok;
  j["frozen_spin_valid"] = r.frozen_spin_valid;
  j["warnings"] = r.warnings;
  j["discrepancies"] = r.discrepancies;
  j["version"] = version();
  return j;
}

std::string report_text(const ExperimentReport& r) {
  const auto& in = r.inputs;
  std::ostringstream os;
  const auto f = [](double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6g", v);
    return std::string(b);
  };
  const auto hz = [&](double w) { return f(w / kTwoPi) + " (x 2pi)"; };
  char dbs[32];
  std::snprintf(dbs, sizeof dbs, "%.1f", r.squeezing_db);
  os << "inputs: delta_p=" << f(in.delta_p) << " g_d=" << f(in.g_d)
     << " omega=" << f(in.omega) << " omega_0=" << f(in.omega_0)
     << " N=" << in.n_atoms << "\n";
  if (in.gamma > 0.0) os << "gamma = " << hz(in.gamma) << "\n";
  if (in.kappa) os << "kappa = " << hz(*in.kappa) << " (metadata)\n";
  os << "q = " << f(r.q) << " = " << hz(r.q) << "\n";
  os << "q/omega_0 = " << f(r.q_over_omega_0) << "\n";
  os << "eta = " << f(r.eta) << "\n";
  os << "xi_M^2 = " << f(r.xi_m_sq) << "\n";
  os << "MSF = " << dbs << " dB\n";
  os << "t_opt = pi/(2 eta) = " << f(r.t_opt) << "\n";
  os << "pi/(2 omega) = " << f(r.t_drive_quarter) << "\n";
  if (r.tau_atom)
    os << "tau_atom = 1/gamma = " << f(*r.tau_atom)
       << (r.within_decay_time ? " (t_opt well inside)" : " (t_opt NOT << tau_atom)")
       << "\n";
  os << "high-frequency condition: " << (r.high_frequency_ok ? "ok" : "FAILED")
     << "\n";
  os << "frozen-spin validity: " << (r.frozen_spin_valid ? "ok" : "FAILED")
     << "\n";
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  for (const auto& d : r.discrepancies) os << "discrepancy: " << d << "\n";
  return os.str();
}

}  // namespace dicke
