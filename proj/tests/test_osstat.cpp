#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "vmbo/oracle.hpp"
#include "vmbo/osstat.hpp"

using namespace vmbo;
using vmbo::testing::canonical_objective;

TEST_CASE("induced clustering takes the argmax with lowest-index ties") {
  MatrixXd u(1, 2);
  u << 0.7, 0.3;
  CHECK(induced_clustering(u, VectorXd::Constant(2, 0.5))[0] == 0);

  MatrixXd flat = MatrixXd::Constant(1, 3, 1.0 / 3.0);
  CHECK(induced_clustering(flat, center<double>(3))[0] == 0);

  std::mt19937_64 rng(1);
  const MatrixXd r = testing::simplex_scores(50, 4, rng);
  VectorXd m = VectorXd::Random(4);
  CHECK(induced_clustering(r, m) == induced_clustering(r, VectorXd((m.array() + 3.7).matrix())));
}

TEST_CASE("error energy counts volume mismatch") {
  const auto all_first = Clustering::constant(4, 0, 2);
  CHECK(error_energy(all_first, {{2, 2}}) == 4);
  CHECK(error_energy(Clustering({0, 1, 0, 1}, 2), {{2, 2}}) == 0);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto c = testing::random_clustering(30, 3, rng);
    const auto v = testing::random_volumes(30, 3, rng);
    Index recount = 0;
    for (int i = 0; i < 3; ++i) {
      Index vol = 0;
      for (Index x = 0; x < 30; ++x) vol += c[x] == i;
      recount += std::abs(vol - v[static_cast<std::size_t>(i)]);
    }
    CHECK(error_energy(c, {v}) == recount);
    CHECK(recount % 2 == 0);
  }
}

TEST_CASE("direction vectors") {
  const std::vector<int> t0{0}, t01{0, 1};
  const VectorXd d0 = direction(t0, 3), d01 = direction(t01, 3);
  CHECK(d0[0] == doctest::Approx(-1.0));
  CHECK(d0[1] == doctest::Approx(0.5));
  CHECK(d0[2] == doctest::Approx(0.5));
  CHECK(d01[0] == doctest::Approx(-0.5));
  CHECK(d01[1] == doctest::Approx(-0.5));
  CHECK(d01[2] == doctest::Approx(1.0));

  for (int p = 2; p <= 7; ++p) {
    for (unsigned mask = 1; mask + 1 < (1u << p); ++mask) {
      std::vector<int> tree;
      for (int i = 0; i < p; ++i)
        if (mask & (1u << i)) tree.push_back(i);
      const VectorXd d = direction(tree, p);
      CHECK(std::abs(d.sum()) < 1e-12);
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
          const bool ii = mask & (1u << i), jj = mask & (1u << j);
          if (ii && !jj) CHECK(d[j] - d[i] == doctest::Approx(1.0 + 1.0 / (p - 1)));
          if (ii && jj) CHECK(std::abs(d[i] - d[j]) < 1e-12);
        }
      }
    }
  }
  const std::vector<int> all{0, 1, 2};
  CHECK_THROWS_AS(direction(all, 3), Error);
}

TEST_CASE("equality solver: already feasible input needs no iterations") {
  MatrixXd u(2, 2);
  u << 1, 0, 0, 1;
  const auto sol = solve_equality(u, {{1, 1}});
  CHECK(sol.stats.outer_iterations == 0);
  CHECK(sol.order.induced.assign() == std::vector<int>{0, 1});
}

TEST_CASE("equality solver rejects bad input") {
  MatrixXd u = MatrixXd::Constant(3, 2, 0.5);
  CHECK_THROWS_AS(solve_equality(u, {{1, 1}}), Error);
  u(1, 1) = std::nan("");
  try {
    solve_equality(u, {{2, 1}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::input);
  }
}

TEST_CASE("equality solver is exact on small instances") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 60; ++t) {
    std::uniform_int_distribution<Index> nd(2, 10);
    std::uniform_int_distribution<int> pd(2, 4);
    const Index n = nd(rng);
    const int p = pd(rng);
    const MatrixXd u = t % 2 ? testing::simplex_scores(n, p, rng) : testing::diffused_scores(n + 2, p, rng).topRows(n);
    const ExactVolumes v{testing::random_volumes(n, p, rng)};
    SolverOptions opt;
    opt.debug_checks = true;
    const auto sol = solve_equality(u, v, center<double>(p), opt);
    const auto best = oracle::exhaustive_optimum(u, v);
    CHECK(canonical_objective(u, sol.order.induced) == canonical_objective(u, best.clustering));
    CHECK(sol.order.induced.volumes() == v.volumes);
    CHECK(2 * sol.stats.outer_iterations == sol.stats.initial_error);
    CHECK(separation_violation(u, sol.order.induced, sol.order.m) <= 1e-9);
  }
}

TEST_CASE("equality solver matches min-cost flow and keeps its invariants") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    std::uniform_int_distribution<Index> nd(4, 200);
    std::uniform_int_distribution<int> pd(2, 8);
    const Index n = nd(rng);
    const int p = pd(rng);
    const MatrixXd u = t % 2 ? testing::simplex_scores(n, p, rng) : testing::diffused_scores(n, p, rng);
    const ExactVolumes v{testing::random_volumes(n, p, rng)};
    SolverOptions opt;
    opt.debug_checks = true;
    const VectorXd m0 = VectorXd::Random(p) * 0.1;
    const auto sol = solve_equality(u, v, m0, opt);
    const auto flow = oracle::mincostflow_optimum(u, v);
    CHECK(std::abs(objective(u, sol.order.induced) - flow.objective) <= 1e-9);
    CHECK(sol.order.induced.volumes() == v.volumes);
    CHECK(2 * sol.stats.outer_iterations == error_energy(induced_clustering(u, m0), v));
    CHECK(separation_violation(u, sol.order.induced, sol.order.m) <= 1e-9);

    const auto shifted = solve_equality(u, v, VectorXd((m0.array() + 5.0).matrix()));
    CHECK(shifted.order.induced == sol.order.induced);
  }
}

TEST_CASE("two clusters: the price is an order statistic of the first score") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    std::uniform_int_distribution<Index> nd(2, 300);
    const Index n = nd(rng);
    const MatrixXd u = testing::simplex_scores(n, 2, rng);
    std::uniform_int_distribution<Index> vd(0, n);
    const Index v0 = vd(rng);
    const auto sol = solve_equality(u, {{v0, n - v0}});
    std::vector<double> s(u.col(0).data(), u.col(0).data() + n);
    std::sort(s.begin(), s.end(), std::greater<>());
    const auto start = induced_clustering(u, center<double>(2)).volumes();
    // Approached from below, m_1 stops at the v0-th largest value; from above,
    // at the (v0+1)-th largest.
    if (start[0] < v0) {
      CHECK(sol.order.m[0] == doctest::Approx(s[static_cast<std::size_t>(v0 - 1)]).epsilon(1e-12));
    } else if (start[0] > v0) {
      CHECK(sol.order.m[0] == doctest::Approx(s[static_cast<std::size_t>(v0)]).epsilon(1e-12));
    }
    CHECK(std::abs(sol.order.m.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("interval solver special cases") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const Index n = 50;
    const int p = 4;
    const MatrixXd u = testing::simplex_scores(n, p, rng);
    const auto v = testing::random_volumes(n, p, rng);
    const auto eq = solve_equality(u, {v});
    const auto iv = solve_interval(u, {v, v});
    CHECK(objective(u, iv.order.induced) == objective(u, eq.order.induced));

    IntervalVolumes loose{std::vector<Index>(p, 0), std::vector<Index>(p, n)};
    const auto free = solve_interval(u, loose);
    const auto argmax = induced_clustering(u, VectorXd::Zero(p));
    CHECK(objective(u, free.order.induced) == doctest::Approx(objective(u, argmax)).epsilon(1e-12));
  }
}

TEST_CASE("interval solver is exact and certifies optimality") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 40; ++t) {
    std::uniform_int_distribution<Index> nd(2, 150);
    std::uniform_int_distribution<int> pd(2, 6);
    const Index n = nd(rng);
    const int p = pd(rng);
    const MatrixXd u = t % 2 ? testing::simplex_scores(n, p, rng) : testing::diffused_scores(std::max<Index>(n, 7), p, rng).topRows(n);
    const auto lu = testing::random_bounds(n, p, rng);
    SolverOptions opt;
    opt.debug_checks = true;
    const auto sol = solve_interval(u, lu, center<double>(p), opt);
    const auto flow = oracle::mincostflow_optimum(u, lu);
    CHECK(std::abs(objective(u, sol.order.induced) - flow.objective) <= 1e-9);
    CHECK(satisfies(sol.order.induced, lu));
    CHECK(testing::ordered_price_criterion(sol.order.m, sol.order.induced, lu, 1e-9));
    CHECK(interval_optimality_holds(sol.order.m, sol.order.induced, lu, 1e-9));
    for (const auto& g : sol.stats.path_gains) {
      CHECK(g.predicted > 0);
      CHECK(std::abs(g.predicted - g.realized) <= 1e-9);
    }
    if (n <= 10 && p <= 4) {
      CHECK(canonical_objective(u, sol.order.induced) ==
            canonical_objective(u, oracle::exhaustive_optimum(u, lu).clustering));
    }
  }
}

TEST_CASE("interval solver rejects infeasible bounds") {
  const MatrixXd u = MatrixXd::Constant(5, 2, 0.5);
  CHECK_THROWS_AS(solve_interval(u, {{3, 3}, {4, 4}}), Error);
  CHECK_THROWS_AS(solve_interval(u, {{0, 0}, {2, 2}}), Error);
}

TEST_CASE("feasible seed for interval constraints") {
  CHECK(feasible_seed_for_interval(std::vector<Index>{4, 6}, {{3, 3}, {7, 7}}).volumes == std::vector<Index>{4, 6});
  CHECK(feasible_seed_for_interval(std::vector<Index>{10, 0}, {{3, 3}, {7, 7}}).volumes == std::vector<Index>{7, 3});
  CHECK(feasible_seed_for_interval(std::vector<Index>{1, 5, 4}, {{2, 3, 5}, {2, 3, 5}}).volumes ==
        std::vector<Index>{2, 3, 5});
  // Residual of 3 handed out by room (2, 4, 0): quotas 1 and 2.
  CHECK(feasible_seed_for_interval(std::vector<Index>{0, 0, 10}, {{0, 0, 0}, {2, 4, 7}}).volumes ==
        std::vector<Index>{1, 2, 7});
}

TEST_CASE("Lagrange multiplier") {
  CHECK(lagrange_multiplier<double>(center<double>(4), 0.3).cwiseAbs().maxCoeff() < 1e-15);
  VectorXd m(3);
  m << 0.2, 0.5, -0.1;
  const VectorXd a = lagrange_multiplier<double>(m, 0.25);
  const VectorXd b = lagrange_multiplier<double>(VectorXd((m.array() + 5.0).matrix()), 0.25);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(a.sum()) < 1e-12);
  // m sums to 0.6, shift 0.4/3; (2/0.5)(0.2 + 0.4/3 - 1/3) = 0
  CHECK(std::abs(a[0]) < 1e-12);
}

TEST_CASE("the returned price minimizes the variational objective") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    const MatrixXd u = testing::simplex_scores(60, 3, rng);
    const ExactVolumes v{testing::random_volumes(60, 3, rng)};
    const auto sol = solve_equality(u, v);
    const double f = variational_objective(u, sol.order.m, v);
    CHECK(variational_objective(u, VectorXd((sol.order.m.array() + 2.5).matrix()), v) == doctest::Approx(f));
    for (int k = 0; k < 100; ++k) {
      VectorXd d(3);
      for (int i = 0; i < 3; ++i) d[i] = noise(rng);
      const double eps = std::pow(10.0, -1 - k % 6);
      CHECK(f <= variational_objective(u, VectorXd(sol.order.m + eps * d), v) + 1e-9);
    }
  }

  // Grid search on a tiny instance.
  const MatrixXd u = testing::simplex_scores(7, 2, rng);
  const ExactVolumes v{{3, 4}};
  const auto sol = solve_equality(u, v);
  double best = std::numeric_limits<double>::infinity();
  for (int g = -2000; g <= 2000; ++g) {
    VectorXd m(2);
    m << g * 1e-3, 0.0;
    best = std::min(best, variational_objective(u, m, v));
  }
  CHECK(variational_objective(u, sol.order.m, v) <= best + 1e-12);
  CHECK(variational_objective(u, sol.order.m, v) >= best - 7e-3);
}

TEST_CASE("assignment reduction") {
  MatrixXd c = MatrixXd::Ones(6, 6) - MatrixXd::Identity(6, 6);
  CHECK(assignment_reduce(c) == std::vector<int>{0, 1, 2, 3, 4, 5});

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    MatrixXd cost(3, 3);
    for (Index i = 0; i < 9; ++i) cost.data()[i] = unif(rng);
    const auto perm = assignment_reduce(cost);
    std::vector<int> q{0, 1, 2};
    double best = std::numeric_limits<double>::infinity();
    do {
      best = std::min(best, cost(0, q[0]) + cost(1, q[1]) + cost(2, q[2]));
    } while (std::next_permutation(q.begin(), q.end()));
    CHECK(cost(0, perm[0]) + cost(1, perm[1]) + cost(2, perm[2]) == doctest::Approx(best).epsilon(1e-14));
  }
  CHECK_THROWS_AS(assignment_reduce(MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("trace records one line per swap path") {
  std::mt19937_64 rng(10);
  const MatrixXd u = testing::simplex_scores(40, 3, rng);
  std::ostringstream trace;
  SolverOptions opt;
  opt.trace = &trace;
  const auto sol = solve_equality(u, {{10, 10, 20}}, center<double>(3), opt);
  std::istringstream lines(trace.str());
  std::string line;
  Index count = 0;
  while (std::getline(lines, line)) {
    CHECK(line.find("\"m_before\"") != std::string::npos);
    ++count;
  }
  CHECK(count == sol.stats.outer_iterations);
}

TEST_CASE("single precision scores") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXf u = testing::simplex_scores(80, 3, rng).cast<float>();
  const auto sol = solve_equality(u, {{20, 30, 30}});
  CHECK(sol.order.induced.volumes() == std::vector<Index>{20, 30, 30});
  CHECK(separation_violation(u, sol.order.induced, sol.order.m) <= 1e-5f);
}
