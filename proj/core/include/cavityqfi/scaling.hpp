#pragma once

#include <span>
#include <string>
#include <vector>

#include "cavityqfi/qfi.hpp"

namespace cavityqfi {

struct FitOptions {
  int max_iterations = 200;
  double step_tol = 1e-12;      // relative parameter step
  double residual_tol = 1e-14;  // relative residual decrease
  std::vector<double> b_starts = {0.5, 1.0, 1.5, 2.0};
};

/// Result of fitting y(N) = a N^b + c by damped Gauss-Newton
/// (Levenberg-Marquardt) with multi-start over b.
struct ScalingFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double residual_norm = 0.0;
  double stderr_a = 0.0;
  double stderr_b = 0.0;
  double stderr_c = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Requires >= 4 distinct N values and positive values. The best-residual
/// start wins; residual ties go to the smaller |b|. When no start converges
/// the fit is returned with converged = false and b must not be used.
ScalingFit fit_power_law(std::span<const double> ns, std::span<const double> values,
                         const FitOptions& opts = {});

/// Pipeline knobs shared by sweeps and maps: one parameter point is
/// (probe, N, kappa/g, gamma/g) with g = 1 fixing the units.
struct PipelineSettings {
  double g = 1.0;
  int n_cav_extra = 2;
  double detuning_over_g = 0.1;  // omega_q for detuning runs
  TimeGrid grid{20.0, 1000};
  EstimationTarget target{TargetKind::Coupling, 1e-4};
  QfiOptions qfi;
  int threads = 1;
};

SystemParams params_for_point(int n_qubits, double kappa_over_g, double gamma_over_g,
                              const PipelineSettings& settings);

/// Runs the full pipeline for one point and returns the QFI trace.
QfiTrace run_point(const ProbeSpec& probe, int n_qubits, double kappa_over_g,
                   double gamma_over_g, const PipelineSettings& settings);

struct ExponentMapEntry {
  double kappa_over_g = 0.0;
  double gamma_over_g = 0.0;
  ScalingFit fit;
  bool ok = false;           // pipeline completed at this grid point
  std::string error;         // failure message when !ok
  int n_points = 0;
};

/// Fitted scaling exponents over a (kappa/g, gamma/g) grid for one probe.
struct ExponentMap {
  std::string probe;
  std::vector<ExponentMapEntry> entries;
};

struct MapBounds {
  double lo = 0.2;
  double hi = 3.0;
};

/// Runs max-QFI over n_values at every grid point and fits aN^b + c.
/// Individual point failures are recorded and the map completes. Throws
/// ConfigError for empty grids or grids outside bounds.
ExponentMap exponent_map(const ProbeSpec& probe, std::span<const double> kappa_grid,
                         std::span<const double> gamma_grid, std::span<const int> n_values,
                         const PipelineSettings& settings, const MapBounds& bounds = {},
                         const FitOptions& fit_opts = {});

}  // namespace cavityqfi
