#pragma once

#include <filesystem>
#include <vector>

#include "vmbo/types.hpp"

namespace vmbo {

// N points of dimension D, one per row.
struct PointCloud {
  MatrixXd points;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  void validate() const;
};

// Symmetric nonnegative weights with their row sums.
struct SparseWeights {
  SparseMatrix w;
  VectorXd degrees;
  // Points whose k-th neighbor distance was zero (duplicates).
  Index degenerate_scales = 0;

  Index size() const { return w.rows(); }
};

// Validates symmetry (to 1e-12) and nonnegativity, computes degrees.
SparseWeights make_weights(SparseMatrix w);

struct KnnOptions {
  // Exact brute force below this size, a k-d tree above.
  Index brute_force_limit = 20000;
};

// w(x, y) = exp(-4 |x - y|^2 / d_k(x)^2) on the directed k-nearest-neighbor
// graph, symmetrized as (W + W^T) / 2.
SparseWeights knn_graph(const PointCloud& cloud, int k, const KnnOptions& opt = {});

// Indices of the k nearest neighbors of every point (self excluded), sorted by
// distance and then index.
std::vector<std::vector<Index>> knn_indices(const PointCloud& cloud, int k, const KnnOptions& opt = {});

// D^{-1} W
SparseMatrix random_walk_matrix(const SparseWeights& w);

// Delta = I - D^{-1} W as a sparse operator.
class RandomWalkLaplacian {
 public:
  explicit RandomWalkLaplacian(const SparseWeights& w);

  Index size() const { return p_.rows(); }
  MatrixXd apply(const MatrixXd& x) const { return x - p_ * x; }
  const SparseMatrix& transition() const { return p_; }
  MatrixXd dense() const;

 private:
  SparseMatrix p_;
};

RandomWalkLaplacian random_walk_laplacian(const SparseWeights& w);

// Number of connected components; labels receives the component of each node.
Index connected_components(const SparseWeights& w, std::vector<Index>* labels = nullptr);

// Throws a structural error naming the component count unless connected.
void require_connected(const SparseWeights& w);

// Binary triplet file: "VMBO-W1\0", u32 n, u64 nnz, then (u32 row, u32 col,
// f64 weight) little-endian.
void write_weights(const std::filesystem::path& path, const SparseWeights& w);
SparseWeights read_weights(const std::filesystem::path& path);

}  // namespace vmbo
