#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cavityqfi/evolve.hpp"
#include "cavityqfi/model.hpp"

namespace cavityqfi {

enum class TargetKind { Coupling, Detuning };

/// Which parameter the QFI refers to, plus the central-difference step
/// (relative to g) used for the state derivative.
struct EstimationTarget {
  TargetKind kind = TargetKind::Coupling;
  double delta_rel = 1e-4;

  std::string name() const { return kind == TargetKind::Coupling ? "coupling" : "detuning"; }
};

/// Eigensystem of every block of a HybridState with eigenvalues below
/// eps_floor (relative to the block trace) clipped to exactly zero.
struct SpectralDecomp {
  std::vector<RealVector> eigenvalues;
  std::vector<DenseMatrix> eigenvectors;
  double min_raw_eigenvalue = 0.0;  // before clipping, across blocks
};

SpectralDecomp decompose(const HybridState& state, double eps_eig_rel);

struct QfiOptions {
  IntegratorOptions integrator;
  double eps_eig_rel = 1e-10;   // eigenvalue floor, relative to the block trace
  double pair_cutoff = 1e-12;   // keep pairs with lambda_a + lambda_b above this
  bool refine_max = true;       // golden-section refinement of the peak
  double refine_time_tol = 1e-3;  // final bracket width, units of 1/g
  bool fd_check = true;         // step-halving cross-check at the peak
  double fd_check_rel_tol = 1e-3;
  bool collect_observables = false;  // jz/photons/purity/trace per sample
  bool collect_invariants = false;   // adds min eigenvalue per sample (costly)
  bool quiet = false;                // suppress warning prints to stderr
};

/// Time-resolved QFI with its maximum over time.
struct QfiTrace {
  std::vector<double> times;
  std::vector<double> values;
  double max_value = 0.0;
  double t_at_max = 0.0;
  bool max_at_horizon = false;

  // step-halving cross-check of the parameter derivative at t_at_max
  bool fd_check_performed = false;
  bool fd_check_ok = true;
  double fd_value = 0.0;       // F at t_at_max from the delta derivative
  double fd_value_half = 0.0;  // same from the delta/2 derivative
  double fd_rel_diff = 0.0;

  StepStats stats;

  // optional per-sample observables of the central trajectory
  std::vector<double> jz, photons, purity, trace, excitations, min_eig;
};

/// QFI of Eq.-fisher1 form, F = sum 2|<a|drho|b>|^2/(la+lb) over pairs with
/// la+lb above the cutoff; block-diagonal structure makes the sum decompose
/// over sectors. Inputs must be Hermitian (checked); throws ConfigError.
double qfi_at_time(const HybridState& rho, const HybridState& drho, double eps_eig_rel = 1e-10,
                   double pair_cutoff = 1e-12);

/// Same sum evaluated against a precomputed decomposition of rho.
double qfi_from_decomp(const SpectralDecomp& decomp, const HybridState& drho,
                       double pair_cutoff = 1e-12);

/// Monolithic single-matrix variant used by the full-basis oracle.
double qfi_spectral_dense(const DenseMatrix& rho, const DenseMatrix& drho, double eps_eig_rel,
                          double pair_cutoff);

/// Coarse argmax over samples, ties broken toward earlier time.
/// Returns (index, argmax-is-final-sample).
std::pair<int, bool> argmax_samples(std::span<const double> values);

/// Cramer-Rao bound: variance of any unbiased estimator after M experiments
/// is at least 1/(M F). Throws ConfigError for F <= 0 or M < 1.
double crb_variance(double fisher_information, long experiments);

/// Parameters shifted by `shift` along the estimation target (g for coupling,
/// omega_q for detuning).
SystemParams shifted_params(const SystemParams& params, const EstimationTarget& target,
                            double shift);

/// Central-difference derivative trajectory (rho(theta+d) - rho(theta-d))/2d
/// on the grid, from two full integrations.
struct DerivativeTrajectory {
  std::vector<double> times;
  std::vector<HybridState> derivatives;
  StepStats stats;
};

DerivativeTrajectory drho_dtheta(const SystemParams& params, const ProbeState& probe,
                                 const EstimationTarget& target, const TimeGrid& grid,
                                 const QfiOptions& opts = {});

/// Full pipeline for one parameter point: three lockstep integrations,
/// F(theta, t) on the grid, peak search with golden-section refinement on
/// re-integrated F, and the step-halving derivative check at the peak.
QfiTrace compute_qfi_trace(const SystemParams& params, const ProbeState& probe,
                           const EstimationTarget& target, const TimeGrid& grid,
                           const QfiOptions& opts = {});

}  // namespace cavityqfi
