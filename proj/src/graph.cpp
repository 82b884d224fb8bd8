#include "vmbo/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <queue>

#include "vmbo/errors.hpp"
#include "vmbo/io.hpp"

namespace vmbo {

void PointCloud::validate() const {
  if (points.rows() < 1) fail(ErrorKind::input, "point cloud is empty");
  if (points.cols() < 1) fail(ErrorKind::input, "points have dimension zero");
  if (!points.allFinite()) fail(ErrorKind::input, "point cloud has non-finite coordinates");
}

SparseWeights make_weights(SparseMatrix w) {
  if (w.rows() != w.cols()) fail(ErrorKind::parameter, "weight matrix must be square");
  w.makeCompressed();
  const SparseMatrix wt = w.transpose();
  for (Index r = 0; r < w.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(w, r); it; ++it) {
      if (!(it.value() >= 0) || !std::isfinite(it.value()))
        fail(ErrorKind::input, "weights must be finite and nonnegative");
    }
  }
  if ((w - wt).norm() > 1e-12 * std::max(1.0, w.norm())) fail(ErrorKind::input, "weight matrix is not symmetric");
  SparseWeights out;
  out.degrees = w * VectorXd::Ones(w.cols());
  out.w = std::move(w);
  return out;
}

namespace {

struct Neighbor {
  double d2;
  Index id;
  bool operator<(const Neighbor& o) const { return d2 < o.d2 || (d2 == o.d2 && id < o.id); }
};

// Points are columns of `pts`.
std::vector<Neighbor> brute_force_query(const MatrixXd& pts, Index x, int k) {
  const Index n = pts.cols();
  std::vector<Neighbor> all;
  all.reserve(static_cast<std::size_t>(n - 1));
  for (Index y = 0; y < n; ++y) {
    if (y == x) continue;
    all.push_back({(pts.col(y) - pts.col(x)).squaredNorm(), y});
  }
  std::partial_sort(all.begin(), all.begin() + k, all.end());
  all.resize(static_cast<std::size_t>(k));
  return all;
}

class KdTree {
 public:
  explicit KdTree(const MatrixXd& pts) : pts_(pts), order_(static_cast<std::size_t>(pts.cols())) {
    std::iota(order_.begin(), order_.end(), Index{0});
    build(0, static_cast<Index>(order_.size()));
  }

  std::vector<Neighbor> query(Index x, int k) const {
    std::priority_queue<Neighbor> best;
    search(0, x, k, best);
    std::vector<Neighbor> out;
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    Index begin, end;
    int dim = -1;  // -1 for leaves
    double split = 0;
    Index left = -1, right = -1;
  };

  static constexpr Index leaf_size = 16;

  Index build(Index begin, Index end) {
    const Index id = static_cast<Index>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size) return id;
    Eigen::VectorXd lo = pts_.col(order_[static_cast<std::size_t>(begin)]);
    Eigen::VectorXd hi = lo;
    for (Index a = begin; a < end; ++a) {
      lo = lo.cwiseMin(pts_.col(order_[static_cast<std::size_t>(a)]));
      hi = hi.cwiseMax(pts_.col(order_[static_cast<std::size_t>(a)]));
    }
    Index dim = 0;
    (hi - lo).maxCoeff(&dim);
    if (hi[dim] - lo[dim] <= 0) return id;
    const Index mid = begin + (end - begin) / 2;
    auto first = order_.begin() + begin;
    std::nth_element(first, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) { return pts_(dim, a) < pts_(dim, b); });
    const double split = pts_(dim, order_[static_cast<std::size_t>(mid)]);
    const Index left = build(begin, mid);
    const Index right = build(mid, end);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.dim = static_cast<int>(dim);
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void search(Index id, Index x, int k, std::priority_queue<Neighbor>& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.dim < 0) {
      for (Index a = node.begin; a < node.end; ++a) {
        const Index y = order_[static_cast<std::size_t>(a)];
        if (y == x) continue;
        const Neighbor cand{(pts_.col(y) - pts_.col(x)).squaredNorm(), y};
        if (static_cast<int>(best.size()) < k) {
          best.push(cand);
        } else if (cand < best.top()) {
          best.pop();
          best.push(cand);
        }
      }
      return;
    }
    const double diff = pts_(node.dim, x) - node.split;
    const Index near = diff < 0 ? node.left : node.right;
    const Index far = diff < 0 ? node.right : node.left;
    search(near, x, k, best);
    if (static_cast<int>(best.size()) < k || diff * diff <= best.top().d2) search(far, x, k, best);
  }

  const MatrixXd& pts_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

std::vector<std::vector<Neighbor>> all_neighbors(const PointCloud& cloud, int k, const KnnOptions& opt) {
  cloud.validate();
  const Index n = cloud.size();
  if (k < 1) fail(ErrorKind::parameter, "k must be positive");
  if (k >= n) fail(ErrorKind::parameter, "k = " + std::to_string(k) + " needs more than " + std::to_string(n) + " points");
  const MatrixXd pts = cloud.points.transpose();
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(n));
  if (n < opt.brute_force_limit) {
    for (Index x = 0; x < n; ++x) out[static_cast<std::size_t>(x)] = brute_force_query(pts, x, k);
  } else {
    const KdTree tree(pts);
    for (Index x = 0; x < n; ++x) out[static_cast<std::size_t>(x)] = tree.query(x, k);
  }
  return out;
}

}  // namespace

std::vector<std::vector<Index>> knn_indices(const PointCloud& cloud, int k, const KnnOptions& opt) {
  const auto nb = all_neighbors(cloud, k, opt);
  std::vector<std::vector<Index>> out(nb.size());
  for (std::size_t x = 0; x < nb.size(); ++x)
    for (const auto& e : nb[x]) out[x].push_back(e.id);
  return out;
}

SparseWeights knn_graph(const PointCloud& cloud, int k, const KnnOptions& opt) {
  const auto nb = all_neighbors(cloud, k, opt);
  const Index n = cloud.size();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(2 * n * k));
  Index degenerate = 0;
  for (Index x = 0; x < n; ++x) {
    const auto& list = nb[static_cast<std::size_t>(x)];
    double scale2 = list.back().d2;
    if (scale2 <= 0) {
      ++degenerate;
      scale2 = 1.0;
      for (const auto& e : list)
        if (e.d2 > 0) {
          scale2 = e.d2;
          break;
        }
    }
    for (const auto& e : list) {
      const double w = 0.5 * std::exp(-4.0 * e.d2 / scale2);
      trips.emplace_back(static_cast<int>(x), static_cast<int>(e.id), w);
      trips.emplace_back(static_cast<int>(e.id), static_cast<int>(x), w);
    }
  }
  if (degenerate > 0)
    std::cerr << "warning: " << degenerate << " points have zero k-th neighbor distance; using the smallest positive"
              << " neighbor distance as scale\n";
  SparseMatrix w(static_cast<int>(n), static_cast<int>(n));
  w.setFromTriplets(trips.begin(), trips.end());
  SparseWeights out = make_weights(std::move(w));
  out.degenerate_scales = degenerate;
  return out;
}

SparseMatrix random_walk_matrix(const SparseWeights& w) {
  for (Index i = 0; i < w.degrees.size(); ++i)
    if (!(w.degrees[i] > 0)) fail(ErrorKind::structural, "vertex " + std::to_string(i) + " is isolated");
  SparseMatrix p = w.degrees.cwiseInverse().asDiagonal() * w.w;
  p.makeCompressed();
  return p;
}

RandomWalkLaplacian::RandomWalkLaplacian(const SparseWeights& w) : p_(random_walk_matrix(w)) {}

MatrixXd RandomWalkLaplacian::dense() const {
  return MatrixXd::Identity(p_.rows(), p_.cols()) - MatrixXd(p_);
}

RandomWalkLaplacian random_walk_laplacian(const SparseWeights& w) { return RandomWalkLaplacian(w); }

Index connected_components(const SparseWeights& w, std::vector<Index>* labels) {
  const Index n = w.size();
  std::vector<Index> comp(static_cast<std::size_t>(n), -1);
  Index count = 0;
  std::vector<Index> stack;
  for (Index s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    comp[static_cast<std::size_t>(s)] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(w.w, v); it; ++it) {
        if (it.value() <= 0) continue;
        auto& c = comp[static_cast<std::size_t>(it.col())];
        if (c < 0) {
          c = count;
          stack.push_back(it.col());
        }
      }
    }
    ++count;
  }
  if (labels) *labels = std::move(comp);
  return count;
}

void require_connected(const SparseWeights& w) {
  const Index c = connected_components(w);
  if (c != 1) fail(ErrorKind::structural, "graph is disconnected: " + std::to_string(c) + " components");
}

namespace {
constexpr char weight_magic[8] = {'V', 'M', 'B', 'O', '-', 'W', '1', '\0'};
}

void write_weights(const std::filesystem::path& path, const SparseWeights& w) {
  auto os = io::open_output(path);
  os.write(weight_magic, 8);
  io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.size()));
  io::store_le<std::uint64_t>(os, static_cast<std::uint64_t>(w.w.nonZeros()));
  for (Index r = 0; r < w.w.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(w.w, r); it; ++it) {
      io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(it.row()));
      io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(it.col()));
      io::store_le<double>(os, it.value());
    }
  }
  if (!os) fail(ErrorKind::format, "failed writing " + path.string());
}

SparseWeights read_weights(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  io::ByteReader in(bytes, path.string());
  if (std::memcmp(in.take(8), weight_magic, 8) != 0) fail(ErrorKind::format, path.string() + ": bad magic at byte offset 0");
  const auto n = in.le<std::uint32_t>();
  const auto nnz = in.le<std::uint64_t>();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(nnz));
  for (std::uint64_t e = 0; e < nnz; ++e) {
    const std::size_t at = in.offset();
    const auto r = in.le<std::uint32_t>();
    const auto c = in.le<std::uint32_t>();
    const auto v = in.le<double>();
    if (r >= n || c >= n)
      fail(ErrorKind::format, path.string() + ": index out of range at byte offset " + std::to_string(at));
    trips.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  if (in.remaining() != 0)
    fail(ErrorKind::format, path.string() + ": trailing bytes at offset " + std::to_string(in.offset()));
  SparseMatrix w(static_cast<int>(n), static_cast<int>(n));
  w.setFromTriplets(trips.begin(), trips.end());
  return make_weights(std::move(w));
}

}  // namespace vmbo
