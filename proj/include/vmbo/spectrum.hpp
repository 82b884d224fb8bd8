#pragma once

#include <cstdint>
#include <functional>

#include "vmbo/graph.hpp"

namespace vmbo {

// Smallest eigenpairs of the random-walk Laplacian I - D^{-1} W. The
// eigenvectors are computed for I - D^{-1/2} W D^{-1/2} and mapped back with
// D^{-1/2}, so they are orthonormal in the degree-weighted inner product.
struct Spectrum {
  VectorXd eigenvalues;   // ascending, nonnegative
  MatrixXd eigenvectors;  // N x K
  VectorXd degrees;
  bool from_symmetric_normalized = true;

  Index count() const { return eigenvalues.size(); }
};

struct SpectrumOptions {
  // Full dense eigensolve up to this size (or when K is more than half of N).
  Index dense_limit = 600;
  double ritz_tolerance = 1e-10;
  // Extra block columns of the filtered subspace iteration; 0 picks max(20, K/4).
  Index guard_vectors = 0;
  int filter_degree = 20;
  int max_iterations = 300;
  std::uint64_t seed = 0x5eed;
};

Spectrum partial_spectrum(const SparseWeights& w, Index k, const SpectrumOptions& opt = {});

// |Delta v_k - lambda_k v_k|_2 / |v_k|_2 for every pair.
VectorXd spectrum_residuals(const Spectrum& s, const SparseWeights& w);

// y = A x for a symmetric operator A.
using LinearOperator = std::function<void(const VectorXd& x, VectorXd& y)>;

struct EigenPairs {
  VectorXd values;  // descending
  MatrixXd vectors;
  VectorXd residuals;
};

struct LanczosOptions {
  double tolerance = 1e-10;
  Index max_subspace = 0;
  std::uint64_t seed = 0x5eed;
  bool require_convergence = true;
};

// The k largest eigenpairs of a symmetric operator on the orthogonal
// complement of the orthonormal columns of `deflate`, by Lanczos with full
// reorthogonalization.
EigenPairs lanczos_largest(const LinearOperator& op, Index n, Index k, const MatrixXd& deflate,
                           const LanczosOptions& opt = {});

// y = A x applied to a block of columns.
using BlockOperator = std::function<void(const MatrixXd& x, MatrixXd& y)>;

struct FilterOptions {
  double tolerance = 1e-10;
  Index guard_vectors = 0;
  int degree = 12;
  int max_iterations = 300;
  std::uint64_t seed = 0x5eed;
};

// The k largest eigenpairs of a symmetric operator with spectrum in
// [lower, upper] by Chebyshev-filtered subspace iteration. Same deflation
// convention as lanczos_largest.
EigenPairs filtered_subspace_largest(const BlockOperator& op, Index n, Index k, const MatrixXd& deflate,
                                     double lower, const FilterOptions& opt = {});

}  // namespace vmbo
