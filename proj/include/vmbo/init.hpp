#pragma once

#include <optional>

#include "vmbo/fidelity.hpp"
#include "vmbo/graph.hpp"
#include "vmbo/kernels.hpp"
#include "vmbo/osstat.hpp"

namespace vmbo {

enum class EdgeLength {
  // -log(w / max w), with the normalized weight clamped to [1e-12, 1]
  log_weight,
  // Euclidean distance between the endpoints
  euclidean,
};

// dist(x, Y_i) = min over y in Y_i of the shortest-path length, for every class.
MatrixXd graph_distances(const SparseWeights& w, const FidelitySet& sources, EdgeLength mode = EdgeLength::log_weight,
                         const PointCloud* cloud = nullptr);

struct InitOptions {
  EdgeLength edge_length = EdgeLength::log_weight;
  const PointCloud* cloud = nullptr;  // needed for Euclidean edge lengths
};

// Nearest labeled class by graph distance.
Clustering voronoi_init(const SparseWeights& w, const FidelitySet& y, const InitOptions& opt = {});

// Laguerre cells dist(x, Y_i) - m_i <= dist(x, Y_j) - m_j with m chosen so that
// the cells meet the volume constraints.
Clustering laguerre_init(const SparseWeights& w, const FidelitySet& y, const VolumeConstraints& constraints,
                         const InitOptions& opt = {});

// The diffused indicator of the labels, A delta_Y, thresholded at the order
// statistic for the constraints, or at m = 0 without them.
Clustering diffusion_init(const DiffusionKernel& a, const FidelitySet& y,
                          const std::optional<VolumeConstraints>& constraints);

// Rows e_i on Y_i, zero elsewhere.
MatrixXd label_indicator(const FidelitySet& y, Index n, int classes);

}  // namespace vmbo
