#include "vmbo/oracle.hpp"

#include <cmath>
#include <limits>
#include <queue>

#include "vmbo/errors.hpp"

namespace vmbo::oracle {

namespace {

IntervalVolumes as_interval(const VolumeConstraints& c) {
  if (const auto* v = std::get_if<ExactVolumes>(&c)) return {v->volumes, v->volumes};
  return std::get<IntervalVolumes>(c);
}

}  // namespace

Optimum exhaustive_optimum(const MatrixXd& u, const VolumeConstraints& constraints) {
  const Index n = u.rows();
  const int p = static_cast<int>(u.cols());
  if (n > 12 || p > 4) fail(ErrorKind::parameter, "exhaustive oracle is limited to N <= 12, P <= 4");
  if (cluster_count(constraints) != p) fail(ErrorKind::parameter, "constraint length does not match P");
  validate(constraints, n);
  const IntervalVolumes lu = as_interval(constraints);

  std::vector<int> assign(static_cast<std::size_t>(n), 0), best;
  std::vector<Index> vol(static_cast<std::size_t>(p), 0);
  double best_value = -std::numeric_limits<double>::infinity();

  auto rec = [&](auto&& self, Index x, double value) -> void {
    Index missing = 0;
    for (int c = 0; c < p; ++c) missing += std::max<Index>(0, lu.lower[static_cast<std::size_t>(c)] - vol[static_cast<std::size_t>(c)]);
    if (missing > n - x) return;
    if (x == n) {
      if (value > best_value) {
        best_value = value;
        best = assign;
      }
      return;
    }
    for (int c = 0; c < p; ++c) {
      auto& v = vol[static_cast<std::size_t>(c)];
      if (v >= lu.upper[static_cast<std::size_t>(c)]) continue;
      ++v;
      assign[static_cast<std::size_t>(x)] = c;
      self(self, x + 1, value + u(x, c));
      --v;
    }
  };
  rec(rec, 0, 0.0);
  if (best.empty() && n > 0) fail(ErrorKind::constraint, "no admissible clustering");
  Optimum out;
  out.clustering = Clustering(std::move(best), p);
  out.objective = objective(u, out.clustering);
  return out;
}

MinCostFlow::MinCostFlow(int nodes) : g_(static_cast<std::size_t>(nodes)) {}

int MinCostFlow::add_arc(int from, int to, long long capacity, double cost) {
  auto& a = g_[static_cast<std::size_t>(from)];
  auto& b = g_[static_cast<std::size_t>(to)];
  a.push_back({to, capacity, cost, static_cast<int>(b.size()) + (from == to ? 1 : 0)});
  b.push_back({from, 0, -cost, static_cast<int>(a.size()) - 1});
  arcs_.push_back({from, static_cast<int>(a.size()) - 1});
  original_.push_back(capacity);
  return static_cast<int>(arcs_.size()) - 1;
}

long long MinCostFlow::flow(int arc) const {
  const auto [node, pos] = arcs_[static_cast<std::size_t>(arc)];
  return original_[static_cast<std::size_t>(arc)] - g_[static_cast<std::size_t>(node)][static_cast<std::size_t>(pos)].cap;
}

void MinCostFlow::initial_potentials(int s) {
  // Bellman-Ford (queue based); arcs with negative cost are allowed, cycles are not.
  const auto n = g_.size();
  const double inf = std::numeric_limits<double>::infinity();
  pot_.assign(n, inf);
  std::vector<char> queued(n, 0);
  std::queue<int> q;
  pot_[static_cast<std::size_t>(s)] = 0;
  q.push(s);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    queued[static_cast<std::size_t>(v)] = 0;
    for (const auto& a : g_[static_cast<std::size_t>(v)]) {
      if (a.cap <= 0) continue;
      const double nd = pot_[static_cast<std::size_t>(v)] + a.cost;
      if (nd < pot_[static_cast<std::size_t>(a.to)]) {
        pot_[static_cast<std::size_t>(a.to)] = nd;
        if (!queued[static_cast<std::size_t>(a.to)]) {
          queued[static_cast<std::size_t>(a.to)] = 1;
          q.push(a.to);
        }
      }
    }
  }
  for (auto& p : pot_)
    if (p == inf) p = 0;
}

long long MinCostFlow::run(int s, int t, long long limit) {
  const auto n = g_.size();
  const double inf = std::numeric_limits<double>::infinity();
  initial_potentials(s);
  std::vector<double> dist(n);
  std::vector<int> prev_node(n), prev_arc(n);
  std::vector<char> done(n);
  long long sent = 0;
  using Item = std::pair<double, int>;
  while (sent < limit) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(done.begin(), done.end(), 0);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[static_cast<std::size_t>(s)] = 0;
    pq.push({0, s});
    while (!pq.empty()) {
      const auto [d, v] = pq.top();
      pq.pop();
      if (done[static_cast<std::size_t>(v)]) continue;
      done[static_cast<std::size_t>(v)] = 1;
      if (v == t) break;
      const auto& arcs = g_[static_cast<std::size_t>(v)];
      for (std::size_t k = 0; k < arcs.size(); ++k) {
        const auto& a = arcs[k];
        if (a.cap <= 0 || done[static_cast<std::size_t>(a.to)]) continue;
        const double reduced =
            std::max(0.0, a.cost + pot_[static_cast<std::size_t>(v)] - pot_[static_cast<std::size_t>(a.to)]);
        const double nd = d + reduced;
        if (nd < dist[static_cast<std::size_t>(a.to)]) {
          dist[static_cast<std::size_t>(a.to)] = nd;
          prev_node[static_cast<std::size_t>(a.to)] = v;
          prev_arc[static_cast<std::size_t>(a.to)] = static_cast<int>(k);
          pq.push({nd, a.to});
        }
      }
    }
    if (!done[static_cast<std::size_t>(t)]) break;
    const double dt = dist[static_cast<std::size_t>(t)];
    for (std::size_t v = 0; v < n; ++v) pot_[v] += std::min(dist[v], dt);

    long long push = limit - sent;
    for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)])
      push = std::min(push, g_[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                               [static_cast<std::size_t>(prev_arc[static_cast<std::size_t>(v)])].cap);
    for (int v = t; v != s; v = prev_node[static_cast<std::size_t>(v)]) {
      auto& a = g_[static_cast<std::size_t>(prev_node[static_cast<std::size_t>(v)])]
                  [static_cast<std::size_t>(prev_arc[static_cast<std::size_t>(v)])];
      a.cap -= push;
      g_[static_cast<std::size_t>(a.to)][static_cast<std::size_t>(a.rev)].cap += push;
      cost_ += static_cast<double>(push) * a.cost;
    }
    sent += push;
  }
  return sent;
}

Optimum mincostflow_optimum(const MatrixXd& u, const VolumeConstraints& constraints) {
  const Index n = u.rows();
  const int p = static_cast<int>(u.cols());
  if (cluster_count(constraints) != p) fail(ErrorKind::parameter, "constraint length does not match P");
  validate(constraints, n);
  if (!u.allFinite()) fail(ErrorKind::input, "score matrix contains non-finite values");
  const IntervalVolumes lu = as_interval(constraints);

  // Nodes: super source, super sink, source, sink, points, clusters.
  const int ss = 0, tt = 1, s = 2, t = 3;
  const int point0 = 4;
  const int cluster0 = point0 + static_cast<int>(n);
  MinCostFlow net(cluster0 + p);
  Index lower_total = 0;
  for (Index x = 0; x < n; ++x) net.add_arc(s, point0 + static_cast<int>(x), 1, 0.0);
  std::vector<int> assign_arcs;
  assign_arcs.reserve(static_cast<std::size_t>(n * p));
  for (Index x = 0; x < n; ++x)
    for (int c = 0; c < p; ++c) assign_arcs.push_back(net.add_arc(point0 + static_cast<int>(x), cluster0 + c, 1, -u(x, c)));
  for (int c = 0; c < p; ++c) {
    const Index lo = lu.lower[static_cast<std::size_t>(c)];
    const Index hi = lu.upper[static_cast<std::size_t>(c)];
    if (hi > lo) net.add_arc(cluster0 + c, t, hi - lo, 0.0);
    // Lower bound lo on (c, t): c owes lo units to the super sink and the
    // demand of t drops by lo.
    if (lo > 0) net.add_arc(cluster0 + c, tt, lo, 0.0);
    lower_total += lo;
  }
  net.add_arc(ss, s, n, 0.0);
  if (n - lower_total > 0) net.add_arc(t, tt, n - lower_total, 0.0);
  const long long need = n;
  if (net.run(ss, tt, need) != need) fail(ErrorKind::constraint, "transportation network admits no feasible flow");

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (Index x = 0; x < n; ++x)
    for (int c = 0; c < p; ++c)
      if (net.flow(assign_arcs[static_cast<std::size_t>(x * p + c)]) > 0) assign[static_cast<std::size_t>(x)] = c;
  Optimum out;
  out.clustering = Clustering(std::move(assign), p);
  out.objective = -net.cost();
  return out;
}

MatrixXd dense_heat(const SparseWeights& w, double h) {
  const Index n = w.size();
  if (n > 200) fail(ErrorKind::parameter, "dense heat oracle is limited to N <= 200");
  const VectorXd sd = w.degrees.cwiseSqrt();
  const MatrixXd s = sd.cwiseInverse().asDiagonal() * MatrixXd(w.w) * sd.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  const VectorXd decay = (-h * (1.0 - es.eigenvalues().array())).exp().matrix();
  const MatrixXd sym = es.eigenvectors() * decay.asDiagonal() * es.eigenvectors().transpose();
  return sd.cwiseInverse().asDiagonal() * sym * sd.asDiagonal();
}

}  // namespace vmbo::oracle
