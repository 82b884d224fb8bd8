#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vmbo/graph.hpp"
#include "vmbo/osstat.hpp"

namespace vmbo {

struct LabeledDataset {
  PointCloud cloud;
  std::vector<int> labels;
  int classes = 0;
  std::string name;
  std::string provenance;

  Index size() const { return cloud.size(); }
  std::vector<Index> class_sizes() const;
  void validate() const;
};

// Three noisy half circles: centers (0,0), (3,0), (1.5,0.4), radii 1, 1, 1.5;
// the first two open downward, the third upward. Angles are uniform. Points are
// zero-padded to `ambient_dim` coordinates before Gaussian noise is added to
// all of them. Moon i draws from its own stream derived from (seed, i).
LabeledDataset three_moons(Index n_per_moon = 500, double noise_sd = 0.14, Index ambient_dim = 100,
                           std::uint64_t seed = 0);

// Uniform sample of the flat torus [0, 2pi)^2 embedded in R^4 as
// (cos a, sin a, cos b, sin b). Class 1 is the geodesic disk of radius pi/2
// around (pi, pi), class 0 the rest.
LabeledDataset torus_sample(Index n, std::uint64_t seed = 0);

// IDX image and label files (magic 0x00000803 and 0x00000801), pixels scaled
// to [0, 1]. Several pairs are concatenated in order.
LabeledDataset load_idx(const std::vector<std::pair<std::filesystem::path, std::filesystem::path>>& files);

struct DelimitedOptions {
  // 0 splits on commas when the first data line has one, else on whitespace.
  char separator = 0;
  // Column holding the class label; -1 for the last column.
  int label_column = -1;
  bool has_labels = true;
};

LabeledDataset load_delimited(const std::filesystem::path& path, const DelimitedOptions& opt = {});

// "VMBO-E1\0", u32 N, u32 d, then N x d f32 row-major, little-endian.
PointCloud load_embedding(const std::filesystem::path& path);
void write_embedding(const std::filesystem::path& path, const PointCloud& cloud);

enum class LabelMap { fixed, best_match };

// Fraction of points whose cluster equals the true label, either as given
// (cluster i is class i) or after the best one-to-one matching of clusters
// to classes.
double accuracy(const Clustering& pred, const std::vector<int>& truth, LabelMap map = LabelMap::fixed);

}  // namespace vmbo
