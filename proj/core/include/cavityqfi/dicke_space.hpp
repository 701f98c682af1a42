#pragma once

#include <cstdint>
#include <vector>

#include "cavityqfi/common.hpp"

namespace cavityqfi {

// Total-spin sectors of N spin-1/2 systems. Half-integer labels (j, m) are
// stored as twice their value so sector arithmetic stays in exact integers.

/// One total-spin sector: spin j, dimension 2j+1, multiplicity d_j.
struct SectorInfo {
  int two_j = 0;
  int dim = 0;
  std::int64_t degeneracy = 0;
};

/// Enumeration of the permutationally symmetric state space of N qubits,
/// one sector per total spin j = N/2, N/2-1, ..., (0 or 1/2).
class DickeSpace {
 public:
  static constexpr int kDefaultMaxQubits = 24;

  explicit DickeSpace(int n_qubits, int max_qubits = kDefaultMaxQubits);

  int n_qubits() const { return n_qubits_; }
  const std::vector<SectorInfo>& sectors() const { return sectors_; }
  int n_sectors() const { return static_cast<int>(sectors_.size()); }
  const SectorInfo& sector(int index) const { return sectors_.at(static_cast<std::size_t>(index)); }

  /// Index of the sector with the given 2j, or -1 when absent.
  int sector_index(int two_j) const;

  /// Exact identity sum_j d_j (2j+1); equals 2^N for a correct enumeration.
  std::int64_t dimension_sum() const;

 private:
  int n_qubits_;
  std::vector<SectorInfo> sectors_;
};

/// Lists the spin sectors of n_qubits spin-1/2 systems with exact integer
/// degeneracies. Throws ConfigError for n_qubits < 1 or > max_qubits.
DickeSpace enumerate_sectors(int n_qubits, int max_qubits = DickeSpace::kDefaultMaxQubits);

/// Multiplicity d_j of the spin-j irrep in (1/2)^(x)N, computed by exact
/// integer recursion over spin-coupling paths. two_j must lie on the ladder
/// {N, N-2, ..., N mod 2}.
std::int64_t degeneracy(int n_qubits, int two_j);

/// Collective spin matrices within one sector, basis ordered by m ascending
/// (row k corresponds to m = -j + k).
struct OperatorBlocks {
  RealMatrix j_minus;
  RealMatrix j_plus;
  RealMatrix j_z;
};

/// <j,m-1|J-|j,m> = sqrt(j(j+1) - m(m-1)); J+ is the transpose; J_z = diag(m).
OperatorBlocks sector_operators(int two_j);

/// Branching weights of the local emission channel sum_l D[sigma_-^(l)],
/// expressed on trace-weighted sector blocks rho_j = d_j sigma_j: the state
/// |j,m> feeds (j-1,m-1), (j,m-1) and (j+1,m-1) with these rates. Weights of
/// transitions whose target state does not exist are exactly zero.
struct EmissionWeights {
  double down = 0.0;  // onto (j-1, m-1)
  double same = 0.0;  // onto (j,   m-1)
  double up = 0.0;    // onto (j+1, m-1)
};

/// Weights for source level (j, m); amplitudes are their square roots and
/// multiply like g(m) g(m') on coherences |j,m><j,m'|. Throws ConfigError for
/// (j, m) outside the valid ladder.
EmissionWeights local_emission_coefficients(int n_qubits, int two_j, int two_m);

}  // namespace cavityqfi
