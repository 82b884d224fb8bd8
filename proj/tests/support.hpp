#pragma once

// Random instance generators shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "vmbo/graph.hpp"
#include "vmbo/kernels.hpp"
#include "vmbo/osstat.hpp"

namespace vmbo::testing {

inline MatrixXd simplex_scores(Index n, int p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatrixXd u(n, p);
  for (Index x = 0; x < n; ++x) {
    for (int i = 0; i < p; ++i) u(x, i) = -std::log(1.0 - unif(rng));
    u.row(x) /= u.row(x).sum();
  }
  return u;
}

inline Clustering random_clustering(Index n, int p, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, p - 1);
  std::vector<int> a(static_cast<std::size_t>(n));
  for (auto& c : a) c = pick(rng);
  return Clustering(std::move(a), p);
}

inline PointCloud random_cloud(Index n, Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  PointCloud c;
  c.points.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) c.points(i, j) = unif(rng);
  return c;
}

// Scores from a random one-hot clustering diffused on a random k-NN graph.
inline MatrixXd diffused_scores(Index n, int p, std::mt19937_64& rng) {
  const int k = static_cast<int>(std::min<Index>(5, n - 1));
  const auto w = knn_graph(random_cloud(n, 2, rng), k);
  std::uniform_real_distribution<double> hdist(0.5, 3.0);
  const auto a = make_positive_taylor(w, hdist(rng), 2);
  return apply(a, random_clustering(n, p, rng)).values;
}

inline std::vector<Index> random_volumes(Index n, int p, std::mt19937_64& rng) {
  // Uniform random composition of n into p nonnegative parts.
  std::uniform_int_distribution<Index> cut(0, n);
  std::vector<Index> cuts(static_cast<std::size_t>(p - 1));
  for (auto& c : cuts) c = cut(rng);
  std::sort(cuts.begin(), cuts.end());
  std::vector<Index> v(static_cast<std::size_t>(p));
  Index prev = 0;
  for (int i = 0; i < p - 1; ++i) {
    v[static_cast<std::size_t>(i)] = cuts[static_cast<std::size_t>(i)] - prev;
    prev = cuts[static_cast<std::size_t>(i)];
  }
  v.back() = n - prev;
  return v;
}

inline IntervalVolumes random_bounds(Index n, int p, std::mt19937_64& rng) {
  const auto v = random_volumes(n, p, rng);
  IntervalVolumes lu;
  for (Index x : v) {
    std::uniform_int_distribution<Index> below(0, x), above(x, n);
    lu.lower.push_back(below(rng));
    lu.upper.push_back(above(rng));
  }
  return lu;
}

// Sum of the selected scores independent of summation order: identical rows
// swapped between clusters give bitwise equal values.
inline long double canonical_objective(const MatrixXd& u, const Clustering& c) {
  std::vector<double> vals(static_cast<std::size_t>(u.rows()));
  for (Index x = 0; x < u.rows(); ++x) vals[static_cast<std::size_t>(x)] = u(x, c[x]);
  std::sort(vals.begin(), vals.end());
  long double s = 0;
  for (double v : vals) s += v;
  return s;
}

// Independent check of the ordered-price criterion: with clusters sorted by
// price, descending, there are positions b <= w whose prices agree (up to tol)
// such that every cluster ranked before b is at its upper bound and every
// cluster ranked after w is at its lower bound.
inline bool ordered_price_criterion(const VectorXd& m, const Clustering& c, const IntervalVolumes& lu, double tol) {
  const int p = c.clusters();
  const auto vol = c.volumes();
  std::vector<std::size_t> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m[static_cast<Index>(a)] > m[static_cast<Index>(b)]; });
  for (std::size_t i = 0; i < order.size(); ++i)
    if (vol[i] < lu.lower[i] || vol[i] > lu.upper[i]) return false;
  for (std::size_t b = 0; b < order.size(); ++b) {
    bool above_full = true;
    for (std::size_t k = 0; k < b; ++k) above_full = above_full && vol[order[k]] == lu.upper[order[k]];
    if (!above_full) break;
    for (std::size_t w = b; w < order.size(); ++w) {
      if (m[static_cast<Index>(order[b])] - m[static_cast<Index>(order[w])] > tol) break;
      bool below_empty = true;
      for (std::size_t k = w + 1; k < order.size(); ++k) below_empty = below_empty && vol[order[k]] == lu.lower[order[k]];
      if (below_empty) return true;
    }
  }
  return false;
}

}  // namespace vmbo::testing
