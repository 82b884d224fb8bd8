#pragma once

// Order statistics of score matrices: exact solvers for the volume
// constrained thresholding problem
//
//   maximize  sum_x u_{c(x)}(x)   subject to  vol_i(c) = V_i   (or L_i <= vol_i <= U_i).
//
// A price vector m induces the clustering c(x) = argmax_i (u_i(x) - m_i).
// The solvers move m until the induced clustering meets the constraints,
// swapping boundary points along paths of clusters.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vmbo/errors.hpp"
#include "vmbo/types.hpp"

namespace vmbo {

class Clustering {
 public:
  Clustering() = default;
  Clustering(std::vector<int> assign, int clusters);

  static Clustering constant(Index n, int cluster, int clusters);
  static Clustering from_one_hot(const MatrixXd& chi);

  Index size() const { return static_cast<Index>(assign_.size()); }
  int clusters() const { return clusters_; }
  int operator[](Index x) const { return assign_[static_cast<std::size_t>(x)]; }
  const std::vector<int>& assign() const { return assign_; }
  void set(Index x, int cluster);

  std::vector<Index> volumes() const;
  MatrixXd one_hot() const;

  friend bool operator==(const Clustering&, const Clustering&) = default;

 private:
  std::vector<int> assign_;
  int clusters_ = 0;
};

struct ExactVolumes {
  std::vector<Index> volumes;
};

struct IntervalVolumes {
  std::vector<Index> lower;
  std::vector<Index> upper;
};

using VolumeConstraints = std::variant<ExactVolumes, IntervalVolumes>;

// Throws a constraint error unless the constraints are admissible for n points.
void validate(const ExactVolumes& v, Index n);
void validate(const IntervalVolumes& lu, Index n);
void validate(const VolumeConstraints& c, Index n);
int cluster_count(const VolumeConstraints& c);
bool satisfies(const Clustering& c, const VolumeConstraints& constraints);

enum class OrderStatisticKind { exact, interval };

template <typename Scalar>
struct OrderStatistic {
  Vector<Scalar> m;
  Clustering induced;
  OrderStatisticKind kind = OrderStatisticKind::exact;
};

struct PathGain {
  double predicted = 0;  // m_root - m_leaf
  double realized = 0;   // change of the objective caused by the swaps
  Index length = 0;
};

struct SolverStats {
  Index outer_iterations = 0;
  Index growth_steps = 0;
  Index heap_ops = 0;
  Index initial_error = 0;  // E(m0) for the equality solver
  Index seed_iterations = 0;  // equality phase of the interval solver
  double wall_ms = 0;
  std::vector<PathGain> path_gains;
};

struct SolverOptions {
  // Verify queue membership, separation and tree invariants after every swap.
  bool debug_checks = false;
  // Line-delimited swap-path records.
  std::ostream* trace = nullptr;
};

template <typename Scalar>
struct Solution {
  OrderStatistic<Scalar> order;
  SolverStats stats;
};

Index error_energy(const Clustering& c, const ExactVolumes& v);

// Target volumes within [L, U] for the equality phase of the interval solver:
// clamp the current volumes, then hand out the residual by largest remainder,
// proportional to the remaining room (or slack).
ExactVolumes feasible_seed_for_interval(const std::vector<Index>& current, const IntervalVolumes& lu);

// True when no cluster that can still gain has a larger price than a cluster
// that can still lose, i.e. no swap path can increase the objective.
template <typename Scalar>
bool interval_optimality_holds(const Vector<Scalar>& m, const Clustering& c, const IntervalVolumes& lu,
                               Scalar tol);

// Permutation p minimizing sum_i cost(i, p[i]).
std::vector<int> assignment_reduce(const MatrixXd& cost);

namespace detail {

template <typename Scalar>
Scalar instance_scale(const Eigen::Ref<const Matrix<Scalar>>& u) {
  Scalar s = u.size() ? u.cwiseAbs().maxCoeff() : Scalar(0);
  return s > Scalar(0) ? s : Scalar(1);
}

template <typename Scalar>
Scalar separation_tolerance(Scalar scale) {
  return std::max(Scalar(1e-9), Scalar(64) * std::numeric_limits<Scalar>::epsilon()) * scale;
}

// One indexed binary min-heap per ordered pair (i, j). Heap (i, j) holds the
// points of cluster j keyed by u_j(x) - u_i(x); ties go to the lower point id.
template <typename Scalar>
class HyperplaneQueues {
 public:
  HyperplaneQueues(const Eigen::Ref<const Matrix<Scalar>>& u, const std::vector<int>& assign)
      : u_(u), p_(static_cast<int>(u.cols())), heaps_(static_cast<std::size_t>(p_ * p_)),
        pos_(static_cast<std::size_t>(u.rows() * p_), -1) {
    for (Index x = 0; x < u_.rows(); ++x) {
      const int j = assign[static_cast<std::size_t>(x)];
      for (int i = 0; i < p_; ++i) {
        if (i == j) continue;
        auto& h = heap(i, j);
        pos_[slot(x, i)] = static_cast<Index>(h.size());
        h.push_back({u_(x, j) - u_(x, i), x});
      }
    }
    for (int i = 0; i < p_; ++i)
      for (int j = 0; j < p_; ++j)
        if (i != j) heapify(i, j);
  }

  bool empty(int i, int j) const { return heap(i, j).empty(); }
  Index top(int i, int j) const { return heap(i, j).front().id; }
  Scalar top_key(int i, int j) const { return heap(i, j).front().key; }
  Index size(int i, int j) const { return static_cast<Index>(heap(i, j).size()); }
  Index heap_ops() const { return ops_; }

  // Point x leaves cluster `from` and joins cluster `to`.
  void move(Index x, int from, int to) {
    for (int i = 0; i < p_; ++i) {
      if (i == from) continue;
      erase(i, from, x);
    }
    for (int i = 0; i < p_; ++i) {
      if (i == to) continue;
      insert(i, to, x);
    }
  }

  bool consistent(const std::vector<int>& assign) const {
    std::vector<Index> count(static_cast<std::size_t>(p_), 0);
    for (int c : assign) ++count[static_cast<std::size_t>(c)];
    for (int i = 0; i < p_; ++i) {
      for (int j = 0; j < p_; ++j) {
        if (i == j) continue;
        const auto& h = heap(i, j);
        if (static_cast<Index>(h.size()) != count[static_cast<std::size_t>(j)]) return false;
        for (std::size_t k = 0; k < h.size(); ++k) {
          const Index x = h[k].id;
          if (assign[static_cast<std::size_t>(x)] != j) return false;
          if (pos_[slot(x, i)] != static_cast<Index>(k)) return false;
          if (k > 0 && less(h[k], h[(k - 1) / 2])) return false;
        }
      }
    }
    return true;
  }

 private:
  struct Entry {
    Scalar key;
    Index id;
  };

  static bool less(const Entry& a, const Entry& b) { return a.key < b.key || (a.key == b.key && a.id < b.id); }

  std::vector<Entry>& heap(int i, int j) { return heaps_[static_cast<std::size_t>(i * p_ + j)]; }
  const std::vector<Entry>& heap(int i, int j) const { return heaps_[static_cast<std::size_t>(i * p_ + j)]; }
  std::size_t slot(Index x, int i) const { return static_cast<std::size_t>(x * p_ + i); }

  void place(std::vector<Entry>& h, std::size_t k, const Entry& e, int i) {
    h[k] = e;
    pos_[slot(e.id, i)] = static_cast<Index>(k);
  }

  void sift_up(int i, int j, std::size_t k) {
    auto& h = heap(i, j);
    Entry e = h[k];
    while (k > 0) {
      std::size_t parent = (k - 1) / 2;
      if (!less(e, h[parent])) break;
      place(h, k, h[parent], i);
      k = parent;
    }
    place(h, k, e, i);
  }

  void sift_down(int i, int j, std::size_t k) {
    auto& h = heap(i, j);
    const std::size_t n = h.size();
    Entry e = h[k];
    for (;;) {
      std::size_t child = 2 * k + 1;
      if (child >= n) break;
      if (child + 1 < n && less(h[child + 1], h[child])) ++child;
      if (!less(h[child], e)) break;
      place(h, k, h[child], i);
      k = child;
    }
    place(h, k, e, i);
  }

  void heapify(int i, int j) {
    auto& h = heap(i, j);
    for (std::size_t k = h.size() / 2; k-- > 0;) sift_down(i, j, k);
  }

  void insert(int i, int j, Index x) {
    auto& h = heap(i, j);
    h.push_back({u_(x, j) - u_(x, i), x});
    pos_[slot(x, i)] = static_cast<Index>(h.size() - 1);
    sift_up(i, j, h.size() - 1);
    ++ops_;
  }

  void erase(int i, int j, Index x) {
    auto& h = heap(i, j);
    const auto k = static_cast<std::size_t>(pos_[slot(x, i)]);
    pos_[slot(x, i)] = -1;
    const Entry last = h.back();
    h.pop_back();
    if (k < h.size()) {
      place(h, k, last, i);
      if (k > 0 && less(h[k], h[(k - 1) / 2]))
        sift_up(i, j, k);
      else
        sift_down(i, j, k);
    }
    ++ops_;
  }

  Eigen::Ref<const Matrix<Scalar>> u_;
  int p_;
  std::vector<std::vector<Entry>> heaps_;
  std::vector<Index> pos_;
  Index ops_ = 0;
};

template <typename Scalar>
void write_vector(std::ostream& os, const Vector<Scalar>& v) {
  os << '[';
  for (Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << static_cast<double>(v[i]);
  os << ']';
}

template <typename T>
void write_list(std::ostream& os, const std::vector<T>& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
}

// Shared state of both solvers: prices, clustering, volumes and queues.
template <typename Scalar>
class ThresholdState {
 public:
  ThresholdState(const Eigen::Ref<const Matrix<Scalar>>& u, const Vector<Scalar>& m0, const SolverOptions& opt)
      : u(u), p(static_cast<int>(u.cols())), m(m0), opt(opt) {
    assign.resize(static_cast<std::size_t>(u.rows()));
    vol.assign(static_cast<std::size_t>(p), 0);
    for (Index x = 0; x < u.rows(); ++x) {
      int best = 0;
      Scalar bv = u(x, 0) - m[0];
      for (int i = 1; i < p; ++i) {
        Scalar v = u(x, i) - m[i];
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
      assign[static_cast<std::size_t>(x)] = best;
      ++vol[static_cast<std::size_t>(best)];
    }
    queues.emplace(u, assign);
    scale = instance_scale<Scalar>(u);
    tau = separation_tolerance(scale);
    rate = Scalar(p) / Scalar(p - 1);
  }

  // Candidate hyperplane hit between a tree cluster i and an outside cluster j.
  struct Hit {
    Scalar gap = std::numeric_limits<Scalar>::infinity();
    int i = -1;
    int j = -1;
    Index point = -1;
    bool found() const { return j >= 0; }
  };

  Hit next_hit(const std::vector<char>& in_tree, const std::vector<int>& tree) const {
    Hit best;
    for (int j = 0; j < p; ++j) {
      if (in_tree[static_cast<std::size_t>(j)]) continue;
      for (int i : tree) {
        if (queues->empty(i, j)) continue;
        const Scalar gap = queues->top_key(i, j) - (m[j] - m[i]);
        const Index x = queues->top(i, j);
        // Equal gaps keep the earlier candidate: lower j, then lower i.
        if (!best.found() || gap < best.gap) {
          best = {gap, i, j, x};
        }
      }
    }
    return best;
  }

  // Move m along d_T by a change of `gap` in every difference m_j - m_i with
  // i in T and j outside.
  void advance(const std::vector<char>& in_tree, Index tree_size, Scalar gap) {
    if (!(gap > Scalar(0))) return;
    const Scalar t = gap / rate;
    const Scalar inside = (Scalar(tree_size) - Scalar(p)) / Scalar(p - 1);
    const Scalar outside = Scalar(tree_size) / Scalar(p - 1);
    for (int k = 0; k < p; ++k) m[k] += t * (in_tree[static_cast<std::size_t>(k)] ? inside : outside);
  }

  void swap_point(Index x, int from, int to) {
    assign[static_cast<std::size_t>(x)] = to;
    --vol[static_cast<std::size_t>(from)];
    ++vol[static_cast<std::size_t>(to)];
    queues->move(x, from, to);
  }

  Scalar separation_violation() const {
    Scalar worst = 0;
    for (Index x = 0; x < u.rows(); ++x) {
      const int a = assign[static_cast<std::size_t>(x)];
      const Scalar own = u(x, a) - m[a];
      for (int j = 0; j < p; ++j) worst = std::max(worst, (u(x, j) - m[j]) - own);
    }
    return worst;
  }

  void check(const char* where) const {
    if (!queues->consistent(assign)) fail(ErrorKind::numerical, std::string("queue mismatch after ") + where);
    if (separation_violation() > tau) fail(ErrorKind::numerical, std::string("separation violated after ") + where);
  }

  Eigen::Ref<const Matrix<Scalar>> u;
  int p;
  Vector<Scalar> m;
  const SolverOptions& opt;
  std::vector<int> assign;
  std::vector<Index> vol;
  std::optional<HyperplaneQueues<Scalar>> queues;
  Scalar scale;
  Scalar tau;
  Scalar rate;
};

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

template <typename Scalar>
void check_scores(const Eigen::Ref<const Matrix<Scalar>>& u, int p) {
  if (u.cols() != p) fail(ErrorKind::parameter, "score matrix has " + std::to_string(u.cols()) +
                                                    " columns, constraints have " + std::to_string(p));
  if (!u.allFinite()) fail(ErrorKind::input, "score matrix contains non-finite values");
}

template <typename Scalar>
Solution<Scalar> solve_equality_impl(const Eigen::Ref<const Matrix<Scalar>>& u, const ExactVolumes& target,
                                     const Vector<Scalar>& m0, const SolverOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const int p = static_cast<int>(target.volumes.size());
  validate(target, u.rows());
  check_scores<Scalar>(u, p);
  if (m0.size() != p) fail(ErrorKind::parameter, "m0 has wrong length");

  Solution<Scalar> out;
  out.order.kind = OrderStatisticKind::exact;
  if (p == 1) {
    out.order.m = m0;
    out.order.induced = Clustering::constant(u.rows(), 0, 1);
    out.stats.wall_ms = elapsed_ms(start);
    return out;
  }

  ThresholdState<Scalar> s(u, m0, opt);
  const auto& V = target.volumes;
  auto deficient = [&](int k) { return s.vol[static_cast<std::size_t>(k)] < V[static_cast<std::size_t>(k)]; };
  auto surplus = [&](int k) { return s.vol[static_cast<std::size_t>(k)] > V[static_cast<std::size_t>(k)]; };

  Index error = 0;
  for (int k = 0; k < p; ++k) error += std::abs(s.vol[static_cast<std::size_t>(k)] - V[static_cast<std::size_t>(k)]);
  out.stats.initial_error = error;

  std::vector<char> in_tree(static_cast<std::size_t>(p));
  std::vector<int> pred(static_cast<std::size_t>(p));
  std::vector<Index> edge(static_cast<std::size_t>(p));
  std::vector<char> was_deficient(static_cast<std::size_t>(p));
  std::vector<int> tree;

  for (;;) {
    int root = -1;
    for (int k = 0; k < p && root < 0; ++k)
      if (deficient(k)) root = k;
    if (root < 0) break;

    std::fill(in_tree.begin(), in_tree.end(), 0);
    std::fill(pred.begin(), pred.end(), -1);
    std::fill(edge.begin(), edge.end(), -1);
    tree.assign(1, root);
    in_tree[static_cast<std::size_t>(root)] = 1;
    const Vector<Scalar> m_before = s.m;

    int leaf = -1;
    while (leaf < 0) {
      const auto hit = s.next_hit(in_tree, tree);
      // A surplus cluster outside the tree always exists while the root is deficient.
      if (!hit.found()) fail(ErrorKind::numerical, "equality solver: no admissible growth step");
      Vector<Scalar> inside_gaps;
      if (opt.debug_checks) {
        inside_gaps.resize(static_cast<Index>(tree.size()));
        for (std::size_t a = 0; a < tree.size(); ++a) inside_gaps[static_cast<Index>(a)] = s.m[tree[a]] - s.m[tree[0]];
      }
      s.advance(in_tree, static_cast<Index>(tree.size()), hit.gap);
      if (opt.debug_checks) {
        for (std::size_t a = 0; a < tree.size(); ++a)
          if (std::abs(s.m[tree[a]] - s.m[tree[0]] - inside_gaps[static_cast<Index>(a)]) > s.tau)
            fail(ErrorKind::numerical, "tree hyperplanes moved during growth");
      }
      pred[static_cast<std::size_t>(hit.j)] = hit.i;
      edge[static_cast<std::size_t>(hit.j)] = hit.point;
      in_tree[static_cast<std::size_t>(hit.j)] = 1;
      tree.push_back(hit.j);
      ++out.stats.growth_steps;
      if (surplus(hit.j)) leaf = hit.j;
    }

    for (int k = 0; k < p; ++k) was_deficient[static_cast<std::size_t>(k)] = deficient(k);
    std::vector<Index> moved;
    for (int k = leaf; !was_deficient[static_cast<std::size_t>(k)]; k = pred[static_cast<std::size_t>(k)]) {
      const Index x = edge[static_cast<std::size_t>(k)];
      s.swap_point(x, k, pred[static_cast<std::size_t>(k)]);
      moved.push_back(x);
    }
    ++out.stats.outer_iterations;

    if (opt.trace) {
      auto& os = *opt.trace;
      os << "{\"solver\":\"equality\",\"iteration\":" << out.stats.outer_iterations << ",\"tree\":";
      write_list(os, tree);
      os << ",\"points\":";
      write_list(os, moved);
      os << ",\"m_before\":";
      write_vector(os, m_before);
      os << ",\"m_after\":";
      write_vector(os, s.m);
      os << "}\n";
    }
    if (opt.debug_checks) s.check("equality swap path");
  }

  out.order.m = s.m;
  out.order.induced = Clustering(std::move(s.assign), p);
  out.stats.heap_ops = s.queues->heap_ops();
  out.stats.wall_ms = elapsed_ms(start);
  return out;
}

template <typename Scalar>
Solution<Scalar> solve_interval_impl(const Eigen::Ref<const Matrix<Scalar>>& u, const IntervalVolumes& lu,
                                     const Vector<Scalar>& m0, const SolverOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const int p = static_cast<int>(lu.lower.size());
  validate(lu, u.rows());
  check_scores<Scalar>(u, p);
  if (m0.size() != p) fail(ErrorKind::parameter, "m0 has wrong length");

  // Feasible starting point from the equality solver.
  std::vector<Index> current(static_cast<std::size_t>(p), 0);
  for (Index x = 0; x < u.rows(); ++x) {
    Index best = 0;
    (u.row(x) - m0.transpose()).maxCoeff(&best);
    ++current[static_cast<std::size_t>(best)];
  }
  const ExactVolumes seed = feasible_seed_for_interval(current, lu);
  Solution<Scalar> eq = solve_equality_impl<Scalar>(u, seed, m0, opt);

  Solution<Scalar> out;
  out.order.kind = OrderStatisticKind::interval;
  out.stats.initial_error = eq.stats.initial_error;
  out.stats.seed_iterations = eq.stats.outer_iterations;
  out.stats.growth_steps = eq.stats.growth_steps;
  if (p == 1) {
    out.order.m = eq.order.m;
    out.order.induced = eq.order.induced;
    out.stats.wall_ms = elapsed_ms(start);
    return out;
  }

  ThresholdState<Scalar> s(u, eq.order.m, opt);
  // Ties in the induced argmax can differ from the equality solver's
  // assignment; reuse the solver's clustering and rebuild the queues.
  s.assign = eq.order.induced.assign();
  s.vol = eq.order.induced.volumes();
  s.queues.emplace(u, s.assign);

  const auto& L = lu.lower;
  const auto& U = lu.upper;
  // Paths with a smaller gain than eps are not taken; the objective is then
  // optimal up to eps per point.
  const Scalar eps = std::max(Scalar(1e-12), Scalar(16) * std::numeric_limits<Scalar>::epsilon()) * s.scale;

  std::vector<char> can_gain(static_cast<std::size_t>(p)), can_lose(static_cast<std::size_t>(p));
  std::vector<char> in_tree(static_cast<std::size_t>(p));
  std::vector<int> pred(static_cast<std::size_t>(p));
  std::vector<Index> edge(static_cast<std::size_t>(p));
  std::vector<int> tree;
  const Index max_paths = 4 * (u.rows() + 1) * p + 64;

  for (;;) {
    for (int k = 0; k < p; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      can_gain[kk] = s.vol[kk] < U[kk];
      can_lose[kk] = s.vol[kk] > L[kk];
    }
    int top = -1, bottom = -1;
    for (int k = 0; k < p; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (can_gain[kk] && (top < 0 || s.m[k] > s.m[top])) top = k;
      if (can_lose[kk] && (bottom < 0 || s.m[k] < s.m[bottom])) bottom = k;
    }
    if (top < 0 || bottom < 0 || !(s.m[top] > s.m[bottom] + eps)) break;
    if (out.stats.outer_iterations >= max_paths) fail(ErrorKind::numerical, "interval solver exceeded path budget");

    std::fill(in_tree.begin(), in_tree.end(), 0);
    std::fill(pred.begin(), pred.end(), -1);
    std::fill(edge.begin(), edge.end(), -1);
    tree.clear();
    const Scalar top_value = s.m[top];
    for (int k = 0; k < p; ++k) {
      if (can_gain[static_cast<std::size_t>(k)] && s.m[k] >= top_value - eps) {
        in_tree[static_cast<std::size_t>(k)] = 1;
        tree.push_back(k);
      }
    }
    const Vector<Scalar> m_before = s.m;

    auto root_value = [&] { return s.m[top]; };
    auto found_leaf = [&] {
      for (int k : tree)
        if (can_lose[static_cast<std::size_t>(k)] && s.m[k] < root_value() - eps) return true;
      return false;
    };

    bool path = false;
    while (!(path = found_leaf())) {
      if (static_cast<int>(tree.size()) == p) break;
      auto hit = s.next_hit(in_tree, tree);
      // A gaining cluster outside the tree whose price catches up with the roots
      // joins as an additional root.
      int joiner = -1;
      Scalar join_gap = std::numeric_limits<Scalar>::infinity();
      for (int k = 0; k < p; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (in_tree[kk] || !can_gain[kk]) continue;
        const Scalar g = root_value() - s.m[k];
        if (g < join_gap) {
          join_gap = g;
          joiner = k;
        }
      }
      if (!hit.found() && joiner < 0) break;
      const bool take_hit = hit.found() && (joiner < 0 || !(join_gap < hit.gap));
      const Scalar gap = take_hit ? hit.gap : join_gap;
      s.advance(in_tree, static_cast<Index>(tree.size()), gap);
      const int j = take_hit ? hit.j : joiner;
      if (take_hit) {
        pred[static_cast<std::size_t>(j)] = hit.i;
        edge[static_cast<std::size_t>(j)] = hit.point;
      }
      in_tree[static_cast<std::size_t>(j)] = 1;
      tree.push_back(j);
      ++out.stats.growth_steps;
      if (opt.debug_checks) {
        for (int k = 0; k < p; ++k)
          if (can_gain[static_cast<std::size_t>(k)] && s.m[k] > root_value() + s.tau)
            fail(ErrorKind::numerical, "gaining cluster priced above the roots");
      }
    }
    if (!path) break;

    int leaf = -1;
    for (int k : tree)
      if (can_lose[static_cast<std::size_t>(k)] && (leaf < 0 || s.m[k] < s.m[leaf])) leaf = k;
    const Scalar predicted = root_value() - s.m[leaf];
    Scalar realized = 0;
    std::vector<Index> moved;
    Index length = 0;
    for (int k = leaf; pred[static_cast<std::size_t>(k)] >= 0; k = pred[static_cast<std::size_t>(k)]) {
      const Index x = edge[static_cast<std::size_t>(k)];
      const int to = pred[static_cast<std::size_t>(k)];
      realized += u(x, to) - u(x, k);
      s.swap_point(x, k, to);
      moved.push_back(x);
      ++length;
    }
    ++out.stats.outer_iterations;
    out.stats.path_gains.push_back({static_cast<double>(predicted), static_cast<double>(realized), length});

    if (opt.trace) {
      auto& os = *opt.trace;
      os << "{\"solver\":\"interval\",\"iteration\":" << out.stats.outer_iterations << ",\"tree\":";
      write_list(os, tree);
      os << ",\"points\":";
      write_list(os, moved);
      os << ",\"gain\":" << static_cast<double>(predicted) << ",\"m_before\":";
      write_vector(os, m_before);
      os << ",\"m_after\":";
      write_vector(os, s.m);
      os << "}\n";
    }
    if (opt.debug_checks) s.check("interval swap path");
  }

  out.order.m = s.m;
  out.order.induced = Clustering(std::move(s.assign), p);
  out.stats.heap_ops = eq.stats.heap_ops + s.queues->heap_ops();
  out.stats.wall_ms = elapsed_ms(start);
  return out;
}

}  // namespace detail

template <typename Derived>
Clustering induced_clustering(const Eigen::MatrixBase<Derived>& u, const Vector<typename Derived::Scalar>& m) {
  using Scalar = typename Derived::Scalar;
  const int p = static_cast<int>(u.cols());
  if (m.size() != p) fail(ErrorKind::parameter, "price vector has wrong length");
  std::vector<int> assign(static_cast<std::size_t>(u.rows()));
  for (Index x = 0; x < u.rows(); ++x) {
    int best = 0;
    Scalar bv = u(x, 0) - m[0];
    for (int i = 1; i < p; ++i) {
      const Scalar v = u(x, i) - m[i];
      if (v > bv) {
        bv = v;
        best = i;
      }
    }
    assign[static_cast<std::size_t>(x)] = best;
  }
  return Clustering(std::move(assign), p);
}

template <typename Scalar>
Vector<Scalar> center(int p) {
  return Vector<Scalar>::Constant(p, Scalar(1) / Scalar(p));
}

// d_T = (#T/(P-1)) 1 - (1 + 1/(P-1)) sum_{i in T} e_i
template <typename Scalar = double>
Vector<Scalar> direction(std::span<const int> tree, int p) {
  if (p < 2) fail(ErrorKind::parameter, "direction needs at least two clusters");
  std::vector<char> in(static_cast<std::size_t>(p), 0);
  for (int i : tree) {
    if (i < 0 || i >= p) fail(ErrorKind::parameter, "cluster index out of range");
    in[static_cast<std::size_t>(i)] = 1;
  }
  const auto t = std::count(in.begin(), in.end(), 1);
  if (t == 0 || t == p) fail(ErrorKind::parameter, "direction needs a nonempty proper subset");
  Vector<Scalar> d = Vector<Scalar>::Constant(p, Scalar(t) / Scalar(p - 1));
  for (int i = 0; i < p; ++i)
    if (in[static_cast<std::size_t>(i)]) d[i] -= Scalar(1) + Scalar(1) / Scalar(p - 1);
  return d;
}

template <typename Derived>
typename Derived::Scalar objective(const Eigen::MatrixBase<Derived>& u, const Clustering& c) {
  typename Derived::Scalar sum = 0;
  for (Index x = 0; x < u.rows(); ++x) sum += u(x, c[x]);
  return sum;
}

// Largest amount by which some point prefers another cluster at prices m.
template <typename Derived>
typename Derived::Scalar separation_violation(const Eigen::MatrixBase<Derived>& u, const Clustering& c,
                                              const Vector<typename Derived::Scalar>& m) {
  typename Derived::Scalar worst = 0;
  for (Index x = 0; x < u.rows(); ++x) {
    const auto own = u(x, c[x]) - m[c[x]];
    worst = std::max(worst, ((u.row(x) - m.transpose()).array() - own).maxCoeff());
  }
  return worst;
}

template <typename Derived>
Solution<typename Derived::Scalar> solve_equality(const Eigen::MatrixBase<Derived>& u, const ExactVolumes& v,
                                                  const Vector<typename Derived::Scalar>& m0,
                                                  const SolverOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  return detail::solve_equality_impl<Scalar>(Eigen::Ref<const Matrix<Scalar>>(u), v, m0, opt);
}

template <typename Derived>
Solution<typename Derived::Scalar> solve_equality(const Eigen::MatrixBase<Derived>& u, const ExactVolumes& v) {
  using Scalar = typename Derived::Scalar;
  return solve_equality(u, v, center<Scalar>(static_cast<int>(v.volumes.size())));
}

template <typename Derived>
Solution<typename Derived::Scalar> solve_interval(const Eigen::MatrixBase<Derived>& u, const IntervalVolumes& lu,
                                                  const Vector<typename Derived::Scalar>& m0,
                                                  const SolverOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  return detail::solve_interval_impl<Scalar>(Eigen::Ref<const Matrix<Scalar>>(u), lu, m0, opt);
}

template <typename Derived>
Solution<typename Derived::Scalar> solve_interval(const Eigen::MatrixBase<Derived>& u, const IntervalVolumes& lu) {
  using Scalar = typename Derived::Scalar;
  return solve_interval(u, lu, center<Scalar>(static_cast<int>(lu.lower.size())));
}

template <typename Derived>
Solution<typename Derived::Scalar> solve(const Eigen::MatrixBase<Derived>& u, const VolumeConstraints& c,
                                         const Vector<typename Derived::Scalar>& m0, const SolverOptions& opt = {}) {
  if (const auto* v = std::get_if<ExactVolumes>(&c)) return solve_equality(u, *v, m0, opt);
  return solve_interval(u, std::get<IntervalVolumes>(c), m0, opt);
}

// Seed volumes from the clustering induced by m0.
template <typename Derived>
ExactVolumes feasible_seed_for_interval(const Eigen::MatrixBase<Derived>& u, const IntervalVolumes& lu,
                                        const Vector<typename Derived::Scalar>& m0) {
  validate(lu, u.rows());
  return feasible_seed_for_interval(induced_clustering(u, m0).volumes(), lu);
}

template <typename Scalar>
bool interval_optimality_holds(const Vector<Scalar>& m, const Clustering& c, const IntervalVolumes& lu, Scalar tol) {
  const auto vol = c.volumes();
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  Scalar bottom = std::numeric_limits<Scalar>::infinity();
  for (int k = 0; k < c.clusters(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    if (vol[kk] < lu.lower[kk] || vol[kk] > lu.upper[kk]) return false;
    if (vol[kk] < lu.upper[kk]) top = std::max(top, m[k]);
    if (vol[kk] > lu.lower[kk]) bottom = std::min(bottom, m[k]);
  }
  return top <= bottom + tol;
}

// Lambda = (2 / sqrt(h)) (m + c 1 - 1/P), with c chosen so that the shifted m sums to one.
template <typename Scalar>
Vector<Scalar> lagrange_multiplier(const Vector<Scalar>& m, Scalar h) {
  if (!(h > Scalar(0))) fail(ErrorKind::parameter, "h must be positive");
  const Index p = m.size();
  const Scalar shift = (Scalar(1) - m.sum()) / Scalar(p);
  Vector<Scalar> lambda = (m.array() + shift - Scalar(1) / Scalar(p)).matrix() * (Scalar(2) / std::sqrt(h));
  lambda.array() -= lambda.mean();
  return lambda;
}

// F(m) = sum_x max_i (u_i(x) - m_i) + V . m
template <typename Derived>
typename Derived::Scalar variational_objective(const Eigen::MatrixBase<Derived>& u,
                                               const Vector<typename Derived::Scalar>& m, const ExactVolumes& v) {
  using Scalar = typename Derived::Scalar;
  if (m.size() != u.cols() || static_cast<Index>(v.volumes.size()) != u.cols())
    fail(ErrorKind::parameter, "variational objective: size mismatch");
  Scalar sum = 0;
  for (Index x = 0; x < u.rows(); ++x) sum += (u.row(x) - m.transpose()).maxCoeff();
  for (Index i = 0; i < m.size(); ++i) sum += Scalar(v.volumes[static_cast<std::size_t>(i)]) * m[i];
  return sum;
}

}  // namespace vmbo
