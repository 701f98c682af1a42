#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cavityqfi/common.hpp"
#include "cavityqfi/dicke_space.hpp"

namespace cavityqfi {

/// Physical rates and sizes of the qubits-cavity system. The coupling g sets
/// the global time/frequency scale; all rates share its units.
struct SystemParams {
  int n_qubits = 1;
  double coupling = 1.0;  // g
  double kappa = 0.0;     // cavity decay
  double gamma = 0.0;     // per-qubit decay
  double omega_q = 0.0;   // qubit frequency (0 at resonance)
  double omega_c = 0.0;   // cavity frequency (0 throughout)
  int n_cav_max = 3;      // Fock truncation (highest photon number kept)

  double detuning() const { return omega_q - omega_c; }

  /// Throws ConfigError unless g > 0, kappa/gamma >= 0 and n_cav_max >= N.
  void validate() const;

  /// Resonant parameter set with rates given as ratios of g and the default
  /// Fock headroom n_cav_max = N + extra.
  static SystemParams resonant(int n_qubits, double g, double kappa_over_g, double gamma_over_g,
                               int n_cav_extra = 2);
};

enum class ProbeKind { Ghz, XPolarized, Dicke, Excited, Ground };

/// Initial qubit register state; the cavity always starts in vacuum.
/// Dicke(0) prepares the same state as Ground, Dicke(N) the same as Excited.
struct ProbeState {
  ProbeKind kind = ProbeKind::Ground;
  int excitations = 0;  // meaningful for Dicke only

  static ProbeState ghz() { return {ProbeKind::Ghz, 0}; }
  static ProbeState x_polarized() { return {ProbeKind::XPolarized, 0}; }
  static ProbeState dicke(int n) { return {ProbeKind::Dicke, n}; }
  static ProbeState excited() { return {ProbeKind::Excited, 0}; }
  static ProbeState ground() { return {ProbeKind::Ground, 0}; }

  std::string name() const;
};

/// Symbolic probe family for sweeps over N: fixed probes plus "dicke-half"
/// which resolves to Dicke(floor(N/2)) per system size.
struct ProbeSpec {
  enum class Family { Ghz, XPolarized, DickeN, DickeHalf, Excited, Ground };
  Family family = Family::Ground;
  int excitations = 0;  // DickeN only

  ProbeState resolve(int n_qubits) const;
  std::string name() const;
  static ProbeSpec parse(const std::string& text);  // throws ConfigError
};

/// Storage layout of a block-diagonal hybrid state: one dense Hermitian block
/// per spin sector, each of dimension (2j+1)(n_cav_max+1), flattened
/// column-major into a single vector (sector order follows DickeSpace).
class StateLayout {
 public:
  struct Block {
    int two_j = 0;
    int spin_dim = 0;
    int dim = 0;              // spin_dim * fock_dim
    std::int64_t offset = 0;  // start of the block in the flat vector
    std::int64_t degeneracy = 0;
  };

  StateLayout(const DickeSpace& space, int n_cav_max);

  int n_qubits() const { return n_qubits_; }
  int n_cav_max() const { return n_cav_max_; }
  int fock_dim() const { return n_cav_max_ + 1; }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  const Block& block(int i) const { return blocks_.at(static_cast<std::size_t>(i)); }
  std::int64_t total_size() const { return total_size_; }

  bool compatible(const StateLayout& other) const;

 private:
  int n_qubits_;
  int n_cav_max_;
  std::vector<Block> blocks_;
  std::int64_t total_size_ = 0;
};

std::shared_ptr<const StateLayout> make_layout(const SystemParams& params, const DickeSpace& space);

/// Block-diagonal density matrix over (Dicke sector) (x) (cavity Fock space).
/// Blocks are trace-weighted: rho_j = d_j sigma_j, so the physical trace is
/// the plain sum of block traces and purity carries 1/d_j weights.
class HybridState {
 public:
  explicit HybridState(std::shared_ptr<const StateLayout> layout);

  const StateLayout& layout() const { return *layout_; }
  std::shared_ptr<const StateLayout> layout_ptr() const { return layout_; }

  DenseVector& data() { return data_; }
  const DenseVector& data() const { return data_; }

  Eigen::Map<DenseMatrix> block(int i);
  Eigen::Map<const DenseMatrix> block(int i) const;

  double trace() const;
  double purity() const;  // tr(rho_full^2) = sum_j tr(rho_j^2)/d_j
  double min_eigenvalue() const;
  double hermiticity_error() const;  // max_j ||rho_j - rho_j^dag||_max
  void hermitize();

 private:
  std::shared_ptr<const StateLayout> layout_;
  DenseVector data_;
};

/// GKSL generator on the block space: within-sector coherent + cavity-decay
/// superoperators and local-emission transfer blocks coupling j to j, j+-1.
class Liouvillian {
 public:
  Liouvillian(const SystemParams& params, const DickeSpace& space);

  const SystemParams& params() const { return params_; }
  std::shared_ptr<const StateLayout> layout() const { return layout_; }

  /// out = L(x) on the flattened block vector. out is overwritten.
  void apply(const DenseVector& x, DenseVector& out) const;

  HybridState apply(const HybridState& state) const;

  std::int64_t nonzeros() const;

 private:
  struct Transfer {
    int source = 0;
    int target = 0;
    SpMatrix op;
  };

  SystemParams params_;
  std::shared_ptr<const StateLayout> layout_;
  std::vector<SpMatrix> diagonal_;
  std::vector<Transfer> transfers_;
};

/// Per-sector Hamiltonian blocks H_j = omega_q Jz (x) 1 + omega_c 1 (x) n
/// + g (J- (x) a^dag + J+ (x) a), ordered as the layout blocks.
std::vector<SpMatrix> build_hamiltonian(const SystemParams& params, const DickeSpace& space);

/// Full generator of Eq. (1)-type dynamics on the symmetric block space.
/// Throws ConfigError when n_cav_max < n_qubits (truncation guard would be
/// impossible to satisfy).
Liouvillian build_liouvillian(const SystemParams& params, const DickeSpace& space);

/// Pure probe state in the j = N/2 sector with the cavity in vacuum.
HybridState prepare_probe(const ProbeState& probe, const SystemParams& params,
                          const DickeSpace& space);

/// Population in the two highest Fock levels, summed over sectors. The
/// evolution driver aborts when this exceeds its threshold.
double truncation_guard(const HybridState& state);

double expectation_jz(const HybridState& state);
double expectation_photons(const HybridState& state);
/// <J_z> + N/2 + <a^dag a>; non-increasing in time for this model.
double total_excitations(const HybridState& state);

}  // namespace cavityqfi
