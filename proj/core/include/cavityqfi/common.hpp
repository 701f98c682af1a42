#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace cavityqfi {

using Complex = std::complex<double>;
using DenseMatrix = Eigen::MatrixXcd;
using DenseVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using SpMatrix = Eigen::SparseMatrix<Complex>;
using SpMatrixReal = Eigen::SparseMatrix<double>;

inline constexpr Complex kImag{0.0, 1.0};

/// Bad configuration or violated precondition. CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Runtime numerical failure (guard trip, step-size underflow, divergence).
/// CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Kronecker product of two sparse matrices, A (x) B.
template <typename ScalarA, typename ScalarB>
Eigen::SparseMatrix<decltype(ScalarA{} * ScalarB{})> kron_sparse(
    const Eigen::SparseMatrix<ScalarA>& a, const Eigen::SparseMatrix<ScalarB>& b) {
  using Scalar = decltype(ScalarA{} * ScalarB{});
  Eigen::SparseMatrix<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  std::vector<Eigen::Triplet<Scalar>> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros()) * static_cast<std::size_t>(b.nonZeros()));
  for (int ka = 0; ka < a.outerSize(); ++ka) {
    for (typename Eigen::SparseMatrix<ScalarA>::InnerIterator ia(a, ka); ia; ++ia) {
      for (int kb = 0; kb < b.outerSize(); ++kb) {
        for (typename Eigen::SparseMatrix<ScalarB>::InnerIterator ib(b, kb); ib; ++ib) {
          trips.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                             static_cast<int>(ia.col() * b.cols() + ib.col()),
                             Scalar(ia.value()) * Scalar(ib.value()));
        }
      }
    }
  }
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

}  // namespace cavityqfi
