#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <functional>
#include <map>

#include "cavityqfi/dicke_space.hpp"

using namespace cavityqfi;

namespace {

// Brute-force oracle: explicitly walk every spin-coupling path
// 1/2 -> j2 -> ... -> jN and count arrivals per final 2j. Exponential on
// purpose; independent of the Pascal-table recursion in the library.
std::map<int, std::int64_t> path_count_oracle(int n_qubits) {
  std::map<int, std::int64_t> counts;
  std::function<void(int, int)> walk = [&](int step, int two_j) {
    if (step == n_qubits) {
      ++counts[two_j];
      return;
    }
    walk(step + 1, two_j + 1);
    if (two_j >= 1) walk(step + 1, two_j - 1);
  };
  walk(1, 1);
  return counts;
}

}  // namespace

TEST_CASE("sector enumeration for small N") {
  const DickeSpace two = enumerate_sectors(2);
  REQUIRE(two.n_sectors() == 2);
  CHECK(two.sector(0).two_j == 2);   // triplet
  CHECK(two.sector(0).dim == 3);
  CHECK(two.sector(0).degeneracy == 1);
  CHECK(two.sector(1).two_j == 0);   // singlet
  CHECK(two.sector(1).dim == 1);
  CHECK(two.sector(1).degeneracy == 1);

  const DickeSpace one = enumerate_sectors(1);
  REQUIRE(one.n_sectors() == 1);
  CHECK(one.sector(0).two_j == 1);
  CHECK(one.sector(0).dim == 2);
  CHECK(one.sector(0).degeneracy == 1);

  const DickeSpace four = enumerate_sectors(4);
  REQUIRE(four.n_sectors() == 3);
  CHECK(four.sector(0).degeneracy == 1);  // j=2
  CHECK(four.sector(1).degeneracy == 3);  // j=1
  CHECK(four.sector(2).degeneracy == 2);  // j=0
  CHECK(1 * 5 + 3 * 3 + 2 * 1 == 16);
  CHECK(four.dimension_sum() == 16);
}

TEST_CASE("degeneracy sum rule is exact up to the configured maximum") {
  for (int n = 1; n <= DickeSpace::kDefaultMaxQubits; ++n) {
    const DickeSpace space = enumerate_sectors(n);
    CHECK(space.dimension_sum() == std::int64_t(1) << n);
    // j decreases in steps of 1 and dims are 2j+1
    for (int i = 0; i < space.n_sectors(); ++i) {
      CHECK(space.sector(i).dim == space.sector(i).two_j + 1);
      if (i > 0) CHECK(space.sector(i - 1).two_j - space.sector(i).two_j == 2);
    }
    CHECK(space.sector(0).degeneracy == 1);  // maximal j is unique
  }
}

TEST_CASE("degeneracies match the brute-force path count for N <= 8") {
  for (int n = 1; n <= 8; ++n) {
    const auto oracle = path_count_oracle(n);
    const DickeSpace space = enumerate_sectors(n);
    REQUIRE(space.n_sectors() == static_cast<int>(oracle.size()));
    for (const auto& s : space.sectors()) {
      CHECK(s.degeneracy == oracle.at(s.two_j));
    }
  }
  CHECK(degeneracy(2, 0) == 1);
  CHECK(degeneracy(3, 1) == 2);   // (3, 1/2) -> 2
  CHECK(degeneracy(6, 4) == 5);   // (6, 2) -> 5
}

TEST_CASE("guards on sector enumeration and degeneracy lookups") {
  CHECK_THROWS_AS(enumerate_sectors(0), ConfigError);
  CHECK_THROWS_AS(enumerate_sectors(-3), ConfigError);
  CHECK_THROWS_AS(enumerate_sectors(25), ConfigError);
  CHECK_NOTHROW(enumerate_sectors(25, 30));
  CHECK_THROWS_AS(degeneracy(4, 1), ConfigError);   // parity mismatch
  CHECK_THROWS_AS(degeneracy(4, 6), ConfigError);   // above N/2
  CHECK_THROWS_AS(degeneracy(4, -2), ConfigError);
}

TEST_CASE("ladder operators satisfy the su(2) algebra per sector") {
  for (int two_j : {1, 2, 3, 5, 8, 13}) {
    const OperatorBlocks ops = sector_operators(two_j);
    const RealMatrix comm_pm = ops.j_plus * ops.j_minus - ops.j_minus * ops.j_plus;
    CHECK((comm_pm - 2.0 * ops.j_z).cwiseAbs().maxCoeff() < 1e-12);
    const RealMatrix comm_zm = ops.j_z * ops.j_minus - ops.j_minus * ops.j_z;
    CHECK((comm_zm + ops.j_minus).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("lowering matrix elements") {
  const OperatorBlocks ops = sector_operators(4);  // j = 2
  // <j,m-1|J-|j,m> = sqrt(j(j+1) - m(m-1)); m ascending so column k is m=-2+k
  CHECK(ops.j_minus(0, 1) == doctest::Approx(std::sqrt(6.0 - (-1.0) * (-2.0))).epsilon(1e-14));
  CHECK(ops.j_minus(3, 4) == doctest::Approx(std::sqrt(6.0 - 2.0 * 1.0)).epsilon(1e-14));
  CHECK(ops.j_z(0, 0) == doctest::Approx(-2.0));
  CHECK(ops.j_z(4, 4) == doctest::Approx(2.0));
}

TEST_CASE("local emission coefficients: single qubit") {
  const auto w = local_emission_coefficients(1, 1, 1);
  CHECK(w.same == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w.down == 0.0);
  CHECK(w.up == 0.0);
}

TEST_CASE("local emission coefficients: nonexistent targets get zero weight") {
  // any (j, m=-j): lowering within the sector is impossible
  for (int n : {2, 4, 6}) {
    for (const auto& s : enumerate_sectors(n).sectors()) {
      const auto w = local_emission_coefficients(n, s.two_j, -s.two_j);
      CHECK(w.same == 0.0);
      CHECK(w.down == 0.0);
    }
  }
  // j-1 branch vanishes when |m-1| > j-1
  const auto w = local_emission_coefficients(3, 3, -1);
  CHECK(w.down == 0.0);
  // top sector has no j+1 branch
  const auto wt = local_emission_coefficients(4, 4, 2);
  CHECK(wt.up == 0.0);
}

TEST_CASE("local emission coefficients: nonnegative and flux-conserving") {
  // trace preservation of the assembled dissipator requires
  // down + same + up = N/2 + m at every level
  for (int n = 1; n <= 10; ++n) {
    for (const auto& s : enumerate_sectors(n).sectors()) {
      for (int two_m = -s.two_j; two_m <= s.two_j; two_m += 2) {
        const auto w = local_emission_coefficients(n, s.two_j, two_m);
        CHECK(w.down >= 0.0);
        CHECK(w.same >= 0.0);
        CHECK(w.up >= 0.0);
        const double flux = w.down + w.same + w.up;
        CHECK(flux == doctest::Approx(0.5 * n + 0.5 * two_m).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("local emission coefficients: invalid labels rejected") {
  CHECK_THROWS_AS(local_emission_coefficients(2, 2, 1), ConfigError);   // parity
  CHECK_THROWS_AS(local_emission_coefficients(2, 2, 4), ConfigError);   // |m| > j
  CHECK_THROWS_AS(local_emission_coefficients(2, 3, 1), ConfigError);   // bad sector
}
