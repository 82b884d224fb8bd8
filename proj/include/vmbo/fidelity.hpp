#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vmbo/types.hpp"

namespace vmbo {

// Labeled points, one id list per class.
struct FidelitySet {
  std::vector<std::vector<Index>> classes;

  int class_count() const { return static_cast<int>(classes.size()); }
  Index size() const;
  bool empty() const { return size() == 0; }
  // Throws unless ids are in [0, n) and the classes are disjoint.
  void validate(Index n) const;
  // Class of every point, -1 when unlabeled.
  std::vector<int> labels(Index n) const;
};

// `per_class` ids drawn uniformly without replacement from each class of `truth`.
FidelitySet sample_fidelity(const std::vector<int>& truth, int classes, int per_class, std::uint64_t seed);

// CSV with rows "point_id,class_id"; a non-numeric first line is skipped.
FidelitySet read_label_csv(const std::filesystem::path& path, int classes);

}  // namespace vmbo
