#include "vmbo/osstat.hpp"

#include <numeric>

namespace vmbo {

Clustering::Clustering(std::vector<int> assign, int clusters) : assign_(std::move(assign)), clusters_(clusters) {
  if (clusters_ < 1) fail(ErrorKind::parameter, "clustering needs at least one cluster");
  for (int c : assign_)
    if (c < 0 || c >= clusters_) fail(ErrorKind::parameter, "cluster index out of range");
}

Clustering Clustering::constant(Index n, int cluster, int clusters) {
  return Clustering(std::vector<int>(static_cast<std::size_t>(n), cluster), clusters);
}

Clustering Clustering::from_one_hot(const MatrixXd& chi) {
  std::vector<int> assign(static_cast<std::size_t>(chi.rows()));
  for (Index x = 0; x < chi.rows(); ++x) {
    Index best = 0;
    chi.row(x).maxCoeff(&best);
    assign[static_cast<std::size_t>(x)] = static_cast<int>(best);
  }
  return Clustering(std::move(assign), static_cast<int>(chi.cols()));
}

void Clustering::set(Index x, int cluster) {
  if (cluster < 0 || cluster >= clusters_) fail(ErrorKind::parameter, "cluster index out of range");
  assign_[static_cast<std::size_t>(x)] = cluster;
}

std::vector<Index> Clustering::volumes() const {
  std::vector<Index> v(static_cast<std::size_t>(clusters_), 0);
  for (int c : assign_) ++v[static_cast<std::size_t>(c)];
  return v;
}

MatrixXd Clustering::one_hot() const {
  MatrixXd chi = MatrixXd::Zero(size(), clusters_);
  for (Index x = 0; x < size(); ++x) chi(x, (*this)[x]) = 1.0;
  return chi;
}

void validate(const ExactVolumes& v, Index n) {
  if (v.volumes.empty()) fail(ErrorKind::constraint, "no clusters");
  Index sum = 0;
  for (Index x : v.volumes) {
    if (x < 0) fail(ErrorKind::constraint, "negative target volume");
    sum += x;
  }
  if (sum != n)
    fail(ErrorKind::constraint,
         "target volumes sum to " + std::to_string(sum) + " but there are " + std::to_string(n) + " points");
}

void validate(const IntervalVolumes& lu, Index n) {
  if (lu.lower.empty() || lu.lower.size() != lu.upper.size())
    fail(ErrorKind::constraint, "lower and upper bounds need equal, nonzero length");
  Index lo = 0, hi = 0;
  for (std::size_t i = 0; i < lu.lower.size(); ++i) {
    if (lu.lower[i] < 0 || lu.lower[i] > lu.upper[i])
      fail(ErrorKind::constraint, "bounds for cluster " + std::to_string(i) + " are not 0 <= L <= U");
    lo += lu.lower[i];
    hi += lu.upper[i];
  }
  if (lo > n || hi < n)
    fail(ErrorKind::constraint, "bounds admit no clustering of " + std::to_string(n) + " points (sum L = " +
                                    std::to_string(lo) + ", sum U = " + std::to_string(hi) + ")");
}

void validate(const VolumeConstraints& c, Index n) {
  std::visit([n](const auto& v) { validate(v, n); }, c);
}

int cluster_count(const VolumeConstraints& c) {
  if (const auto* v = std::get_if<ExactVolumes>(&c)) return static_cast<int>(v->volumes.size());
  return static_cast<int>(std::get<IntervalVolumes>(c).lower.size());
}

bool satisfies(const Clustering& c, const VolumeConstraints& constraints) {
  if (c.clusters() != cluster_count(constraints)) return false;
  const auto vol = c.volumes();
  if (const auto* v = std::get_if<ExactVolumes>(&constraints)) return vol == v->volumes;
  const auto& lu = std::get<IntervalVolumes>(constraints);
  for (std::size_t i = 0; i < vol.size(); ++i)
    if (vol[i] < lu.lower[i] || vol[i] > lu.upper[i]) return false;
  return true;
}

Index error_energy(const Clustering& c, const ExactVolumes& v) {
  if (static_cast<int>(v.volumes.size()) != c.clusters()) fail(ErrorKind::parameter, "cluster count mismatch");
  const auto vol = c.volumes();
  Index e = 0;
  for (std::size_t i = 0; i < vol.size(); ++i) e += std::abs(vol[i] - v.volumes[i]);
  return e;
}

namespace {

// Hands out `amount` units proportional to `room` by largest remainder.
std::vector<Index> apportion(Index amount, const std::vector<Index>& room) {
  const Index total = std::accumulate(room.begin(), room.end(), Index{0});
  std::vector<Index> share(room.size(), 0);
  if (amount == 0 || total == 0) return share;
  std::vector<std::pair<Index, std::size_t>> rest;
  Index given = 0;
  for (std::size_t i = 0; i < room.size(); ++i) {
    share[i] = amount * room[i] / total;
    given += share[i];
    rest.push_back({amount * room[i] % total, i});
  }
  std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; given < amount && k < rest.size(); ++k) {
    if (share[rest[k].second] < room[rest[k].second]) {
      ++share[rest[k].second];
      ++given;
    }
  }
  return share;
}

}  // namespace

ExactVolumes feasible_seed_for_interval(const std::vector<Index>& current, const IntervalVolumes& lu) {
  if (current.size() != lu.lower.size()) fail(ErrorKind::parameter, "volume vector length mismatch");
  const Index n = std::accumulate(current.begin(), current.end(), Index{0});
  validate(lu, n);
  ExactVolumes v;
  v.volumes.resize(current.size());
  Index sum = 0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    v.volumes[i] = std::clamp(current[i], lu.lower[i], lu.upper[i]);
    sum += v.volumes[i];
  }
  std::vector<Index> room(current.size());
  if (sum < n) {
    for (std::size_t i = 0; i < room.size(); ++i) room[i] = lu.upper[i] - v.volumes[i];
    const auto share = apportion(n - sum, room);
    for (std::size_t i = 0; i < room.size(); ++i) v.volumes[i] += share[i];
  } else if (sum > n) {
    for (std::size_t i = 0; i < room.size(); ++i) room[i] = v.volumes[i] - lu.lower[i];
    const auto share = apportion(sum - n, room);
    for (std::size_t i = 0; i < room.size(); ++i) v.volumes[i] -= share[i];
  }
  return v;
}

std::vector<int> assignment_reduce(const MatrixXd& cost) {
  if (cost.rows() != cost.cols()) fail(ErrorKind::parameter, "assignment needs a square cost matrix");
  if (!cost.allFinite()) fail(ErrorKind::input, "cost matrix contains non-finite values");
  const Index n = cost.rows();
  if (n == 0) return {};
  ExactVolumes ones{std::vector<Index>(static_cast<std::size_t>(n), 1)};
  const MatrixXd u = -cost;
  const auto sol = solve_equality(u, ones);
  return sol.order.induced.assign();
}

}  // namespace vmbo
