#pragma once

#include "dicke/analytic.hpp"
#include "dicke/errors.hpp"
#include "dicke/propagator.hpp"
#include "dicke/squeezing.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dicke {

// Configuration problem; the message starts with the offending field path.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : InvalidArgument(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Raised when a convergence requirement is not met.
class NotConverged : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

const char* version();

enum class ModelKind { static_dicke, driven_dicke, effective, effective_large_n };

std::string to_string(ModelKind m);
ModelKind model_from_string(const std::string& s);

// Frequencies are stored in units where omega_0 has the value omega_0.
// Absolute inputs ("25 kHz") are converted with omega_0 as the unit.
struct Physics {
  double delta_p = 1.0;
  double omega_0 = 1.0;
  double g = 0.0;
  double g_d = 0.0;
  double omega = 20.0;
  int n_atoms = 10;
  std::optional<double> q;  // effective-largeN only; default q_of(...)
};

struct SweepAxis {
  std::string parameter;
  std::vector<double> values;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::driven_dicke;
  Physics physics;
  int fock_cutoff = 30;
  IntegratorConfig integrator;
  ScanSettings scan;  // horizon <= 0 selects default_horizon
  std::optional<SweepAxis> sweep;
  bool check_convergence = false;
  std::string output_path;

  void validate() const;
  // Canonical snapshot; parse_config(to_json()) reproduces the config.
  nlohmann::json to_json() const;
};

// Names accepted as sweep axes.
const std::vector<std::string>& sweep_parameters();

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

// "physics.g_d=12" style override applied to a raw config document. The
// value is parsed as JSON when possible, otherwise kept as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Angular frequency in rad/s of "<value> <unit>" with unit Hz, kHz, MHz,
// GHz (times 2 pi) or rad/s.
double parse_absolute_frequency(const std::string& text);

// 64-bit FNV-1a of the canonical snapshot.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Sets a named parameter (see sweep_parameters()).
void set_parameter(ExperimentConfig& cfg, const std::string& name,
                   double value);

double effective_q(const ExperimentConfig& cfg);
double resolved_horizon(const ExperimentConfig& cfg);

struct SingleResult {
  MsfResult msf;
  Trajectory trajectory;  // every sampled time, coarse and refined
  double horizon = 0.0;
  std::optional<ConvergenceReport> convergence;
};

SingleResult run_single(const ExperimentConfig& cfg);

// xi_R^2 on the coarse grid (NaN where undefined) at a given Fock cutoff.
std::vector<double> coarse_xi_trace(const ExperimentConfig& cfg, int n_max);

struct ResultRecord {
  std::uint64_t config_hash = 0;
  double value = 0.0;
  double xi_m_sq = 0.0;
  double db = 0.0;
  double t_star = 0.0;
  double horizon = 0.0;
  int n_max = 0;
  std::string status;  // ok, converged, not-converged, or error: ...
  double wall_time = 0.0;
  bool failed = false;
};

// Grid points run on a pool of `workers` threads; records come back in grid
// order.
std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg, int workers);

// CSV datasets. Headers carry the version, the config snapshot and its hash;
// values use 12 significant digits. Wall times are not part of the bytes.
std::string single_dataset(const ExperimentConfig& cfg, const SingleResult& r);
std::string sweep_dataset(const ExperimentConfig& cfg,
                          const std::vector<ResultRecord>& records);

std::string format_number(double v);

// Named figure datasets: fig2 .. fig6.
struct FigureOptions {
  int workers = 1;
  std::optional<std::vector<double>> grid;  // replaces the primary grid
};

struct FigureResult {
  std::string name;
  std::string dataset;
  bool partial_failure = false;
};

const std::vector<std::string>& figure_names();
FigureResult run_figure(const std::string& name, const FigureOptions& opt = {});

// Series 2<S_z(t)>/N for each q/N under the effective-largeN model.
struct Fig5Series {
  double q_over_n = 0.0;
  std::vector<double> sz_norm;
};

struct Fig5Result {
  std::vector<double> times;
  std::vector<Fig5Series> series;
};

Fig5Result run_fig5(int n_atoms, std::span<const double> q_over_n,
                    double t_max, double dt);

// Reports.
const std::vector<std::string>& report_presets();
ExperimentInputs report_preset(const std::string& name);
ExperimentInputs parse_report_inputs(const nlohmann::json& doc);
nlohmann::json report_json(const ExperimentReport& r);
std::string report_text(const ExperimentReport& r);

}  // namespace dicke
