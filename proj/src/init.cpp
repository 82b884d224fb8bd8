#include "vmbo/init.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "vmbo/errors.hpp"
#include "vmbo/mbo.hpp"
#include "vmbo/random.hpp"

namespace vmbo {

Index FidelitySet::size() const {
  Index s = 0;
  for (const auto& c : classes) s += static_cast<Index>(c.size());
  return s;
}

void FidelitySet::validate(Index n) const {
  std::vector<int> seen(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < class_count(); ++i) {
    for (Index x : classes[static_cast<std::size_t>(i)]) {
      if (x < 0 || x >= n) fail(ErrorKind::input, "labeled point " + std::to_string(x) + " is out of range");
      auto& s = seen[static_cast<std::size_t>(x)];
      if (s >= 0 && s != i)
        fail(ErrorKind::input, "point " + std::to_string(x) + " is labeled with classes " + std::to_string(s) +
                                   " and " + std::to_string(i));
      s = i;
    }
  }
}

std::vector<int> FidelitySet::labels(Index n) const {
  validate(n);
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < class_count(); ++i)
    for (Index x : classes[static_cast<std::size_t>(i)]) out[static_cast<std::size_t>(x)] = i;
  return out;
}

FidelitySet sample_fidelity(const std::vector<int>& truth, int classes, int per_class, std::uint64_t seed) {
  if (per_class < 1) fail(ErrorKind::parameter, "labels per class must be positive");
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(classes));
  for (std::size_t x = 0; x < truth.size(); ++x) {
    if (truth[x] < 0 || truth[x] >= classes) fail(ErrorKind::input, "label out of range at point " + std::to_string(x));
    members[static_cast<std::size_t>(truth[x])].push_back(static_cast<Index>(x));
  }
  FidelitySet out;
  out.classes.resize(static_cast<std::size_t>(classes));
  for (int i = 0; i < classes; ++i) {
    auto& pool = members[static_cast<std::size_t>(i)];
    if (static_cast<int>(pool.size()) < per_class)
      fail(ErrorKind::input, "class " + std::to_string(i) + " has fewer than " + std::to_string(per_class) + " points");
    auto g = rng::stream(seed, static_cast<std::uint64_t>(i));
    // Partial Fisher-Yates.
    for (int k = 0; k < per_class; ++k) {
      const auto j = static_cast<std::size_t>(k) + rng::below(g, pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      out.classes[static_cast<std::size_t>(i)].push_back(pool[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

FidelitySet read_label_csv(const std::filesystem::path& path, int classes) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open label file " + path.string());
  FidelitySet out;
  out.classes.resize(static_cast<std::size_t>(classes));
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long long id = 0, cls = 0;
    if (!(fields >> id >> cls)) {
      if (lineno == 1) continue;
      fail(ErrorKind::format, path.string() + ": malformed line " + std::to_string(lineno));
    }
    if (cls < 0 || cls >= classes)
      fail(ErrorKind::format, path.string() + ": class out of range on line " + std::to_string(lineno));
    out.classes[static_cast<std::size_t>(cls)].push_back(static_cast<Index>(id));
  }
  return out;
}

MatrixXd graph_distances(const SparseWeights& w, const FidelitySet& sources, EdgeLength mode, const PointCloud* cloud) {
  const Index n = w.size();
  sources.validate(n);
  if (mode == EdgeLength::euclidean && (!cloud || cloud->size() != n))
    fail(ErrorKind::parameter, "Euclidean edge lengths need the point cloud");
  const double wmax = w.w.nonZeros() ? w.w.coeffs().maxCoeff() : 1.0;
  auto length = [&](Index x, Index y, double weight) {
    if (mode == EdgeLength::euclidean) return (cloud->points.row(x) - cloud->points.row(y)).norm();
    return -std::log(std::clamp(weight / wmax, 1e-12, 1.0));
  };

  const int p = sources.class_count();
  MatrixXd dist = MatrixXd::Constant(n, p, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, Index>;
  for (int i = 0; i < p; ++i) {
    if (sources.classes[static_cast<std::size_t>(i)].empty())
      fail(ErrorKind::input, "class " + std::to_string(i) + " has no labeled points");
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (Index s : sources.classes[static_cast<std::size_t>(i)]) {
      dist(s, i) = 0;
      heap.emplace(0.0, s);
    }
    while (!heap.empty()) {
      const auto [d, x] = heap.top();
      heap.pop();
      if (d > dist(x, i)) continue;
      for (SparseMatrix::InnerIterator it(w.w, x); it; ++it) {
        if (it.value() <= 0) continue;
        const Index y = it.col();
        const double nd = d + length(x, y, it.value());
        if (nd < dist(y, i)) {
          dist(y, i) = nd;
          heap.emplace(nd, y);
        }
      }
    }
  }
  for (Index x = 0; x < n; ++x) {
    if (!dist.row(x).allFinite()) {
      std::vector<Index> comp;
      const Index count = connected_components(w, &comp);
      fail(ErrorKind::structural, "node " + std::to_string(x) + " in component " +
                                      std::to_string(comp[static_cast<std::size_t>(x)]) + " of " +
                                      std::to_string(count) + " is unreachable from some labeled class");
    }
  }
  return dist;
}

namespace {

std::vector<int> pins(const FidelitySet& y, Index n) { return y.labels(n); }

Clustering pin_labels(Clustering c, const std::vector<int>& pinned) {
  for (std::size_t x = 0; x < pinned.size(); ++x)
    if (pinned[x] >= 0) c.set(static_cast<Index>(x), pinned[x]);
  return c;
}

}  // namespace

Clustering voronoi_init(const SparseWeights& w, const FidelitySet& y, const InitOptions& opt) {
  const MatrixXd dist = graph_distances(w, y, opt.edge_length, opt.cloud);
  const MatrixXd u = -dist;
  return pin_labels(induced_clustering(u, VectorXd::Zero(u.cols())), pins(y, w.size()));
}

Clustering laguerre_init(const SparseWeights& w, const FidelitySet& y, const VolumeConstraints& constraints,
                         const InitOptions& opt) {
  const MatrixXd u = -graph_distances(w, y, opt.edge_length, opt.cloud);
  const int p = static_cast<int>(u.cols());
  return constrained_threshold(u, constraints, pins(y, w.size()), VectorXd::Zero(p)).clustering;
}

MatrixXd label_indicator(const FidelitySet& y, Index n, int classes) {
  y.validate(n);
  if (y.class_count() > classes) fail(ErrorKind::parameter, "fidelity set has more classes than requested");
  MatrixXd delta = MatrixXd::Zero(n, classes);
  for (int i = 0; i < y.class_count(); ++i)
    for (Index x : y.classes[static_cast<std::size_t>(i)]) delta(x, i) = 1.0;
  return delta;
}

Clustering diffusion_init(const DiffusionKernel& a, const FidelitySet& y,
                          const std::optional<VolumeConstraints>& constraints) {
  const Index n = a.size();
  const int p = constraints ? cluster_count(*constraints) : y.class_count();
  const MatrixXd u = apply(a, label_indicator(y, n, p)).values;
  const auto pinned = pins(y, n);
  if (!constraints) return pin_labels(induced_clustering(u, VectorXd::Zero(p)), pinned);
  return constrained_threshold(u, *constraints, pinned, center<double>(p)).clustering;
}

}  // namespace vmbo
