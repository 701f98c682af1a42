#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cavityqfi/scaling.hpp"

namespace cavityqfi {

struct RegimePoint {
  double kappa_over_g = 1.0;
  double gamma_over_g = 1.0;
};

/// One experiment description: probes x N values x regime points, plus the
/// estimation target and the numerical knobs. Round-trips losslessly through
/// its JSON form.
struct SweepConfig {
  std::vector<std::string> probes;
  std::vector<int> n_values;
  std::vector<RegimePoint> regimes;
  std::string target = "coupling";  // or "detuning"
  double detuning_over_g = 0.1;
  double t_end = 20.0;
  int n_samples = 1000;
  double rtol = 1e-8;
  double atol = 1e-10;
  double eps_eig_rel = 1e-10;
  double fd_delta_rel = 1e-4;
  int n_cav_extra = 2;
  int threads = 1;
  bool fit = true;
  // grids for the `map` command
  std::vector<double> kappa_grid;
  std::vector<double> gamma_grid;

  void validate(bool for_map = false) const;  // throws ConfigError
  PipelineSettings pipeline_settings() const;
  EstimationTarget estimation_target() const;

  std::string to_json_string(int indent = 2) const;
  static SweepConfig from_json_string(const std::string& text);
  static SweepConfig load(const std::string& path);
};

/// FNV-1a hash of the canonical JSON form, as fixed-width hex.
std::string config_hash(const SweepConfig& config);

/// One output record; fields appear in CSV column order.
struct ResultRow {
  std::string probe;
  int n_qubits = 0;
  double kappa_over_g = 0.0;
  double gamma_over_g = 0.0;
  std::string target;
  double max_qfi = 0.0;
  double t_at_max = 0.0;
  std::string fit_id;  // empty when the row belongs to no fit
  long steps_accepted = 0;
  long steps_rejected = 0;
  std::string version;
  std::string config_hash;
};

struct FitRow {
  std::string fit_id;
  std::string probe;
  double kappa_over_g = 0.0;
  double gamma_over_g = 0.0;
  std::string target;
  ScalingFit fit;
  int n_points = 0;
};

struct ErrorRow {
  std::string probe;
  int n_qubits = 0;
  double kappa_over_g = 0.0;
  double gamma_over_g = 0.0;
  std::string message;
};

struct SweepOutcome {
  std::vector<ResultRow> rows;   // sorted by (probe, N, kappa/g, gamma/g)
  std::vector<FitRow> fits;
  std::vector<ErrorRow> errors;
};

/// Full pipeline for a single config point.
ResultRow run_single(const ProbeSpec& probe, int n_qubits, const RegimePoint& regime,
                     const SweepConfig& config);

/// Executes every point (parallel over config.threads), sorts rows, and fits
/// per (probe, regime) family when enabled. Per-point failures land in
/// `errors` and do not abort the sweep.
SweepOutcome run_sweep(const SweepConfig& config);

struct MapRow {
  std::string probe;
  double kappa_over_g = 0.0;
  double gamma_over_g = 0.0;
  std::string target;
  ScalingFit fit;
  bool converged = false;
  int n_points = 0;
  std::string error;
};

std::vector<MapRow> run_map(const SweepConfig& config);

// ---- deterministic emission -------------------------------------------
// Shortest round-trip decimal formatting keeps files byte-stable across
// runs and thread counts.

std::string format_double(double v);

std::string results_csv(const std::vector<ResultRow>& rows);
std::string fits_csv(const std::vector<FitRow>& fits);
std::string errors_csv(const std::vector<ErrorRow>& errors);
std::string map_csv(const std::vector<MapRow>& rows);
std::string trace_csv(const QfiTrace& trace);
std::string metadata_json(const SweepConfig& config, const std::string& command);

void write_file(const std::string& path, const std::string& content);

/// Minimal CSV-with-header reader for the `fit` command; returns the named
/// columns. Throws ConfigError on missing columns or unparseable numbers.
std::pair<std::vector<double>, std::vector<double>> read_csv_columns(
    const std::string& path, const std::string& x_column, const std::string& y_column);

}  // namespace cavityqfi
