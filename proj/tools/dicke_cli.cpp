#include "dicke/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;

enum Exit { ok = 0, config_error = 1, numerical_failure = 2, partial_failure = 3 };

struct Common {
  std::string config;
  std::string out;
  int workers = 1;
  long long seed = 0;  // reserved: the dynamics are deterministic
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c, bool with_workers) {
  sub->add_option("--config", c.config, "JSON configuration file");
  sub->add_option("--out", c.out, "output file (default: output.path or stdout)");
  if (with_workers)
    sub->add_option("--workers", c.workers, "worker threads")
        ->check(CLI::Range(1, 1024));
  sub->add_option("--seed", c.seed, "reserved; has no effect");
  sub->add_option("--set", c.overrides, "override, e.g. physics.g_d=12")
      ->take_all();
}

json read_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw dicke::ConfigError("--config", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw dicke::ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
}

dicke::ExperimentConfig load(const Common& c) {
  json doc = read_document(c.config);
  for (const auto& s : c.overrides) dicke::apply_override(doc, s);
  return dicke::parse_config(doc);
}

void emit(const std::string& bytes, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dicke::ConfigError("--out", "cannot write '" + path + "'");
  out << bytes;
  if (!out) throw dicke::ConfigError("--out", "write failed for '" + path + "'");
}

std::string target(const Common& c, const dicke::ExperimentConfig* cfg) {
  if (!c.out.empty()) return c.out;
  return cfg ? cfg->output_path : std::string();
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw dicke::ConfigError("--grid", "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw dicke::ConfigError("--grid", "grid is empty");
  return out;
}

int simulate(const Common& c) {
  const dicke::ExperimentConfig cfg = load(c);
  if (cfg.sweep)
    throw dicke::ConfigError("sweep", "simulate runs one point; use 'sweep'");
  const dicke::SingleResult r = dicke::run_single(cfg);
  emit(dicke::single_dataset(cfg, r), target(c, &cfg));
  std::cerr << "xi_m_sq " << dicke::format_number(r.msf.xi_m_sq) << " at t "
            << dicke::format_number(r.msf.t_star) << "\n";
  if (r.convergence && !r.convergence->converged) {
    std::cerr << "not converged in the Fock cutoff (change "
              << dicke::format_number(r.convergence->max_change) << ")\n";
    return numerical_failure;
  }
  return ok;
}

int sweep(const Common& c) {
  const dicke::ExperimentConfig cfg = load(c);
  if (!cfg.sweep) throw dicke::ConfigError("sweep", "missing sweep section");
  const auto records = dicke::run_sweep(cfg, c.workers);
  emit(dicke::sweep_dataset(cfg, records), target(c, &cfg));
  bool failed = false;
  for (const auto& r : records) {
    if (r.failed) {
      failed = true;
      std::cerr << cfg.sweep->parameter << "=" << dicke::format_number(r.value)
                << ": " << r.status << "\n";
    }
  }
  return failed ? partial_failure : ok;
}

int figure(const Common& c, const std::string& name, const std::string& grid) {
  dicke::FigureOptions opt;
  opt.workers = c.workers;
  if (!grid.empty()) opt.grid = parse_grid(grid);
  const dicke::FigureResult f = dicke::run_figure(name, opt);
  emit(f.dataset, c.out);
  return f.partial_failure ? partial_failure : ok;
}

int converge(const Common& c, int search_limit, int step) {
  const dicke::ExperimentConfig cfg = load(c);
  if (cfg.model == dicke::ModelKind::effective_large_n)
    throw dicke::ConfigError("model", "effective-largeN has no Fock mode");
  const dicke::ConvergenceScenario sc{
      [&cfg](int n) { return dicke::coarse_xi_trace(cfg, n); }};
  const dicke::ConvergenceReport r =
      search_limit > 0
          ? dicke::find_converged_cutoff(sc, cfg.fock_cutoff, step, search_limit)
          : dicke::check_fock_convergence(sc, cfg.fock_cutoff);
  json j{{"version", dicke::version()},
         {"config", cfg.to_json()},
         {"n_max", r.n_max},
         {"n_max_check", r.n_max_check},
         {"max_change", r.max_change},
         {"converged", r.converged}};
  emit(j.dump(2) + "\n", target(c, &cfg));
  return r.converged ? ok : numerical_failure;
}

int report(const Common& c, const std::string& preset, const std::string& format) {
  dicke::ExperimentInputs in;
  if (!c.config.empty() || !c.overrides.empty()) {
    json doc = read_document(c.config);
    if (!preset.empty()) doc["report"]["preset"] = preset;
    for (const auto& s : c.overrides) dicke::apply_override(doc, s);
    in = dicke::parse_report_inputs(doc);
  } else {
    in = dicke::report_preset(preset.empty() ? "rb87" : preset);
  }
  const dicke::ExperimentReport r = dicke::experiment_report(in);
  emit(format == "json" ? dicke::report_json(r).dump(2) + "\n"
                        : dicke::report_text(r),
       c.out);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driven Dicke model spin-squeezing simulations"};
  app.set_version_flag("--version", std::string(dicke::version()));
  app.require_subcommand(1);

  Common sim_opts, sweep_opts, fig_opts, conv_opts, rep_opts;
  auto* sim = app.add_subcommand("simulate", "run a single configuration");
  add_common(sim, sim_opts, false);

  auto* sw = app.add_subcommand("sweep", "run the configured parameter grid");
  add_common(sw, sweep_opts, true);

  std::string fig_name, fig_grid;
  auto* fig = app.add_subcommand("fig", "named figure dataset (fig2 .. fig6)");
  fig->add_option("name", fig_name, "figure name")
      ->required()
      ->check(CLI::IsMember(dicke::figure_names()));
  fig->add_option("--grid", fig_grid, "comma separated primary grid");
  fig->add_option("--out", fig_opts.out, "output file (default stdout)");
  fig->add_option("--workers", fig_opts.workers, "worker threads")
      ->check(CLI::Range(1, 1024));
  fig->add_option("--seed", fig_opts.seed, "reserved; has no effect");

  int search_limit = 0, search_step = 5;
  auto* conv = app.add_subcommand("converge", "Fock cutoff convergence check");
  add_common(conv, conv_opts, false);
  conv->add_option("--search", search_limit,
                   "raise the cutoff from dims.fock_cutoff up to this limit");
  conv->add_option("--step", search_step, "cutoff increment when searching")
      ->check(CLI::PositiveNumber);

  std::string preset, format = "text";
  auto* rep = app.add_subcommand("report", "analytic experiment report");
  add_common(rep, rep_opts, false);
  rep->add_option("--preset", preset, "rb87 or q1e4")
      ->check(CLI::IsMember(dicke::report_presets()));
  rep->add_option("--format", format, "text or json")
      ->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*sim) return simulate(sim_opts);
    if (*sw) return sweep(sweep_opts);
    if (*fig) return figure(fig_opts, fig_name, fig_grid);
    if (*conv) return converge(conv_opts, search_limit, search_step);
    if (*rep) return report(rep_opts, preset, format);
  } catch (const dicke::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_failure;
  }
  return config_error;
}
