#pragma once

#include <vector>

#include "cavityqfi/evolve.hpp"
#include "cavityqfi/model.hpp"
#include "cavityqfi/qfi.hpp"

namespace cavityqfi {

/// Brute-force reference on the unreduced 2^N (x) Fock space: a literal
/// transcription of the master equation with one sigma_- dissipator per
/// qubit. Deliberately simple; capped at small N.
class FullSystem {
 public:
  static constexpr int kMaxQubits = 5;

  /// Throws ConfigError for N > kMaxQubits unless allow_large is set
  /// (then N <= 6).
  explicit FullSystem(const SystemParams& params, bool allow_large = false);

  const SystemParams& params() const { return params_; }
  Eigen::Index dim() const { return dim_; }

  /// out = -i[H, rho] + kappa D[a](rho) + gamma sum_j D[sigma_-^j](rho)
  void rhs(const Eigen::Ref<const DenseMatrix>& rho, Eigen::Ref<DenseMatrix> out) const;

  const SpMatrix& hamiltonian() const { return h_; }
  const SpMatrix& annihilation() const { return a_; }
  const std::vector<SpMatrix>& sigma_minus() const { return sigma_minus_; }

  /// Probe (x) vacuum as a full density matrix.
  DenseMatrix prepare_probe(const ProbeState& probe) const;
  /// Arbitrary qubit-register state (dimension 2^N) (x) vacuum; used for
  /// permutation-invariance checks with non-symmetric states.
  DenseMatrix prepare_from_qubit_state(const DenseVector& psi_qubits) const;

  double expectation_jz(const DenseMatrix& rho) const;
  double expectation_photons(const DenseMatrix& rho) const;
  static double purity(const DenseMatrix& rho) { return (rho * rho).trace().real(); }

 private:
  SystemParams params_;
  Eigen::Index dim_ = 0;
  int fock_ = 0;
  SpMatrix h_;
  SpMatrix a_;
  SpMatrix a_dag_a_;
  std::vector<SpMatrix> sigma_minus_;
  SpMatrix decay_diag_;  // sum_j sigma_+^j sigma_-^j (diagonal)
  SpMatrix jz_;
};

/// Generator factory mirroring the symmetric-basis build_liouvillian.
FullSystem full_liouvillian(const SystemParams& params, bool allow_large = false);

/// Reference trajectory of a full-basis run: observables and QFI on the grid.
struct FullRunResult {
  std::vector<double> times;
  std::vector<double> qfi;
  std::vector<double> jz, photons, purity, trace;
  double max_qfi = 0.0;
  double t_at_max = 0.0;
  StepStats stats;
};

/// Same integrator and QFI tolerances as the main path, different basis.
FullRunResult full_evolve_and_qfi(const SystemParams& params, const ProbeState& probe,
                                  const EstimationTarget& target, const TimeGrid& grid,
                                  const QfiOptions& opts = {});

/// Observable trajectory for an arbitrary initial full-space density matrix.
struct FullObservableTrajectory {
  std::vector<double> times;
  std::vector<double> jz, photons, purity;
  StepStats stats;
};

FullObservableTrajectory full_evolve_observables(const FullSystem& system,
                                                 const DenseMatrix& rho0, const TimeGrid& grid,
                                                 const IntegratorOptions& opts = {});

}  // namespace cavityqfi
