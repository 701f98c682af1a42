#include "cavityqfi/dicke_space.hpp"

#include <cmath>
#include <string>

namespace cavityqfi {

namespace {

// Multiplicities of every 2j after coupling n spins 1/2, by the Pascal-like
// recursion d_{n+1}(j) = d_n(j-1/2) + d_n(j+1/2). Index = two_j.
std::vector<std::int64_t> degeneracy_table(int n_qubits) {
  std::vector<std::int64_t> cur(2, 0);
  cur[1] = 1;  // one spin: j = 1/2
  for (int n = 2; n <= n_qubits; ++n) {
    std::vector<std::int64_t> next(static_cast<std::size_t>(n) + 1, 0);
    for (int tj = 0; tj < static_cast<int>(cur.size()); ++tj) {
      if (cur[static_cast<std::size_t>(tj)] == 0) continue;
      if (tj + 1 <= n) next[static_cast<std::size_t>(tj + 1)] += cur[static_cast<std::size_t>(tj)];
      if (tj - 1 >= 0) next[static_cast<std::size_t>(tj - 1)] += cur[static_cast<std::size_t>(tj)];
    }
    cur = std::move(next);
  }
  return cur;
}

void check_sector_label(int n_qubits, int two_j) {
  if (two_j < 0 || two_j > n_qubits || (n_qubits - two_j) % 2 != 0) {
    throw ConfigError("invalid sector label 2j=" + std::to_string(two_j) + " for N=" +
                      std::to_string(n_qubits));
  }
}

}  // namespace

DickeSpace::DickeSpace(int n_qubits, int max_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1) throw ConfigError("n_qubits must be at least 1");
  if (n_qubits > max_qubits) {
    throw ConfigError("n_qubits=" + std::to_string(n_qubits) + " exceeds the configured maximum " +
                      std::to_string(max_qubits));
  }
  const auto table = degeneracy_table(n_qubits);
  for (int two_j = n_qubits; two_j >= 0; two_j -= 2) {
    sectors_.push_back(SectorInfo{two_j, two_j + 1, table[static_cast<std::size_t>(two_j)]});
  }
}

int DickeSpace::sector_index(int two_j) const {
  // sectors run j = N/2 downward in steps of 1
  if (two_j < 0 || two_j > n_qubits_ || (n_qubits_ - two_j) % 2 != 0) return -1;
  return (n_qubits_ - two_j) / 2;
}

std::int64_t DickeSpace::dimension_sum() const {
  std::int64_t total = 0;
  for (const auto& s : sectors_) total += s.degeneracy * static_cast<std::int64_t>(s.dim);
  return total;
}

DickeSpace enumerate_sectors(int n_qubits, int max_qubits) {
  return DickeSpace(n_qubits, max_qubits);
}

std::int64_t degeneracy(int n_qubits, int two_j) {
  if (n_qubits < 1) throw ConfigError("n_qubits must be at least 1");
  check_sector_label(n_qubits, two_j);
  return degeneracy_table(n_qubits)[static_cast<std::size_t>(two_j)];
}

OperatorBlocks sector_operators(int two_j) {
  if (two_j < 0) throw ConfigError("negative spin sector");
  const int dim = two_j + 1;
  const double j = 0.5 * two_j;
  OperatorBlocks ops;
  ops.j_minus = RealMatrix::Zero(dim, dim);
  ops.j_z = RealMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = -j + k;
    ops.j_z(k, k) = m;
    if (k > 0) ops.j_minus(k - 1, k) = std::sqrt(j * (j + 1) - m * (m - 1));
  }
  ops.j_plus = ops.j_minus.transpose();
  return ops;
}

EmissionWeights local_emission_coefficients(int n_qubits, int two_j, int two_m) {
  check_sector_label(n_qubits, two_j);
  if (std::abs(two_m) > two_j || (two_j - two_m) % 2 != 0) {
    throw ConfigError("invalid 2m=" + std::to_string(two_m) + " in sector 2j=" +
                      std::to_string(two_j));
  }
  const double j = 0.5 * two_j;
  const double m = 0.5 * two_m;
  const double half_n = 0.5 * n_qubits;
  EmissionWeights w;
  // (j+m), (j-m) are exact nonnegative integers, so every factor below is >= 0
  // and transitions onto nonexistent target states vanish identically.
  if (two_j > 0) {
    w.same = (j + m) * (j - m + 1) * (half_n + 1) / (2.0 * j * (j + 1));
    w.down = (j + m) * (j + m - 1) * (half_n + j + 1) / (2.0 * j * (2 * j + 1));
  }
  w.up = (j - m + 1) * (j - m + 2) * (half_n - j) / (2.0 * (j + 1) * (2 * j + 1));
  return w;
}

}  // namespace cavityqfi
