#include "vmbo/mbo.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>

#include "json.hpp"
#include "vmbo/errors.hpp"
#include "vmbo/random.hpp"

namespace vmbo {

double thresholding_energy(const Clustering& c, const MatrixXd& product, double scaling) {
  if (product.rows() != c.size() || product.cols() != c.clusters())
    fail(ErrorKind::parameter, "energy: product shape does not match the clustering");
  double cross = 0;
  for (Index x = 0; x < c.size(); ++x) cross += product.row(x).sum() - product(x, c[x]);
  return cross / (scaling * static_cast<double>(c.size()));
}

double thresholding_energy(const DiffusionKernel& a, const Clustering& c) {
  return thresholding_energy(c, apply(a, c).values, a.scaling());
}

namespace {

// sum_i <delta_i, (A delta)_i> over the entries of delta.
double delta_quadratic_form(const SparseDelta& d, const MatrixXd& a_delta) {
  double sum = 0;
  for (const auto& e : d.entries) sum += e.value() * a_delta(e.row(), e.col());
  return sum;
}

double distance_from_form(double form, double h, double scaling, Index n) {
  return 2.0 * h * form / (scaling * static_cast<double>(n));
}

double off_center(const VectorXd& m) {
  const double p = static_cast<double>(m.size());
  const double shift = (1.0 - m.sum()) / p;
  return (m.array() + shift - 1.0 / p).abs().maxCoeff();
}

}  // namespace

double distance_term(const DiffusionKernel& a, const Clustering& c, const Clustering& prev) {
  const auto d = SparseDelta::between(prev, c);
  if (d.empty()) return 0.0;
  const MatrixXd ad = a.multiply_sparse(d.entries, d.cols);
  return distance_from_form(delta_quadratic_form(d, ad), a.h(), a.scaling(), c.size());
}

double increment_l1(const Clustering& c, const Clustering& prev) {
  if (c.size() != prev.size()) fail(ErrorKind::parameter, "clusterings differ in size");
  Index moved = 0;
  for (Index x = 0; x < c.size(); ++x) moved += c[x] != prev[x];
  return 2.0 * static_cast<double>(moved) / static_cast<double>(c.size());
}

Threshold constrained_threshold(const MatrixXd& u, const VolumeConstraints& constraints,
                                const std::vector<int>& pinned, const VectorXd& m0, const SolverOptions& opt) {
  const Index n = u.rows();
  const int p = static_cast<int>(u.cols());
  if (cluster_count(constraints) != p) fail(ErrorKind::parameter, "constraints do not match the score columns");
  validate(constraints, n);
  const bool any_pinned = std::any_of(pinned.begin(), pinned.end(), [](int l) { return l >= 0; });
  if (!any_pinned) {
    auto sol = solve(u, constraints, m0, opt);
    return {std::move(sol.order.induced), std::move(sol.order.m), std::move(sol.stats)};
  }
  if (static_cast<Index>(pinned.size()) != n) fail(ErrorKind::parameter, "pinned labels do not match the scores");

  std::vector<Index> fixed(static_cast<std::size_t>(p), 0), free;
  for (Index x = 0; x < n; ++x) {
    const int l = pinned[static_cast<std::size_t>(x)];
    if (l >= p) fail(ErrorKind::parameter, "label " + std::to_string(l) + " exceeds the cluster count");
    if (l >= 0)
      ++fixed[static_cast<std::size_t>(l)];
    else
      free.push_back(x);
  }

  VolumeConstraints reduced;
  if (const auto* v = std::get_if<ExactVolumes>(&constraints)) {
    ExactVolumes r = *v;
    for (int i = 0; i < p; ++i) {
      auto& vi = r.volumes[static_cast<std::size_t>(i)];
      vi -= fixed[static_cast<std::size_t>(i)];
      if (vi < 0) fail(ErrorKind::constraint, "cluster " + std::to_string(i) + " has more labeled points than volume");
    }
    reduced = std::move(r);
  } else {
    IntervalVolumes r = std::get<IntervalVolumes>(constraints);
    for (int i = 0; i < p; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      r.lower[ii] = std::max<Index>(0, r.lower[ii] - fixed[ii]);
      r.upper[ii] -= fixed[ii];
      if (r.upper[ii] < 0)
        fail(ErrorKind::constraint, "cluster " + std::to_string(i) + " has more labeled points than its upper bound");
    }
    reduced = std::move(r);
  }

  std::vector<int> assign(static_cast<std::size_t>(n));
  for (Index x = 0; x < n; ++x) assign[static_cast<std::size_t>(x)] = pinned[static_cast<std::size_t>(x)];
  if (free.empty()) {
    Clustering c(std::move(assign), p);
    if (!satisfies(c, constraints)) fail(ErrorKind::constraint, "labeled points alone violate the constraints");
    return {std::move(c), m0, {}};
  }
  MatrixXd sub(static_cast<Index>(free.size()), p);
  for (std::size_t r = 0; r < free.size(); ++r) sub.row(static_cast<Index>(r)) = u.row(free[r]);
  auto sol = solve(sub, reduced, m0, opt);
  for (std::size_t r = 0; r < free.size(); ++r)
    assign[static_cast<std::size_t>(free[r])] = sol.order.induced[static_cast<Index>(r)];
  return {Clustering(std::move(assign), p), std::move(sol.order.m), std::move(sol.stats)};
}

MboState mbo_step(const DiffusionKernel& a, const MboState& state, const VolumeConstraints& constraints,
                  const VectorXd& m0, const StepOptions& opt, StepRecord* record) {
  const auto start = std::chrono::steady_clock::now();
  const int p = state.clustering.clusters();
  if (state.product.values.rows() != a.size() || state.product.values.cols() != p)
    fail(ErrorKind::parameter, "cached product does not match the clustering");

  static const std::vector<int> none;
  const auto& pinned = opt.pinned ? *opt.pinned : none;
  Threshold thr = opt.noise ? constrained_threshold(state.product.values + *opt.noise, constraints, pinned, m0, opt.solver)
                            : constrained_threshold(state.product.values, constraints, pinned, m0, opt.solver);

  MboState next;
  const auto delta = SparseDelta::between(state.clustering, thr.clustering);
  next.product = opt.incremental ? apply_incremental(a, state.product, delta) : apply(a, thr.clustering);
  next.clustering = std::move(thr.clustering);
  next.m = std::move(thr.m);

  if (record) {
    const Index n = a.size();
    record->energy = thresholding_energy(next.clustering, next.product.values, a.scaling());
    const MatrixXd a_delta = next.product.values - state.product.values;
    record->distance = distance_from_form(delta_quadratic_form(delta, a_delta), a.h(), a.scaling(), n);
    record->moved = static_cast<Index>(delta.entries.size() / 2);
    record->increment_l1 = 2.0 * static_cast<double>(record->moved) / static_cast<double>(n);
    record->stats = std::move(thr.stats);
    record->m = next.m;
    record->lagrange = a.h() > 0 ? lagrange_multiplier<double>(next.m, a.h()) : VectorXd::Zero(p);
    record->off_center = off_center(next.m);
    record->wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return next;
}

MboResult run(const DiffusionKernel& a, const MboConfig& config, const Clustering& init) {
  const Index n = a.size();
  const int p = cluster_count(config.constraints);
  if (init.size() != n) fail(ErrorKind::parameter, "initial clustering does not match the kernel size");
  if (init.clusters() != p) fail(ErrorKind::parameter, "initial clustering does not match the constraints");
  if (!(config.stop_eps > 0)) fail(ErrorKind::parameter, "stop_eps must be positive");
  validate(config.constraints, n);
  config.fidelity.validate(n);
  if (config.fidelity.class_count() > p) fail(ErrorKind::parameter, "fidelity set has more classes than clusters");

  const std::vector<int> pinned = config.fidelity.empty() ? std::vector<int>{} : config.fidelity.labels(n);
  bool repair = !satisfies(init, config.constraints);
  for (Index x = 0; x < static_cast<Index>(pinned.size()) && !repair; ++x)
    repair = pinned[static_cast<std::size_t>(x)] >= 0 && pinned[static_cast<std::size_t>(x)] != init[x];

  MboState state;
  state.clustering = repair ? constrained_threshold(init.one_hot(), config.constraints, pinned, center<double>(p),
                                                    config.solver)
                                  .clustering
                            : init;
  state.product = apply(a, state.clustering);
  state.m = center<double>(p);

  MboResult out;
  auto& trace = out.trace;
  trace.scaling = a.scaling();
  trace.h = a.h();
  trace.initial_energy = thresholding_energy(state.clustering, state.product.values, a.scaling());
  if (!std::isfinite(trace.initial_energy)) fail(ErrorKind::numerical, "initial energy is not finite");
  trace.best_energy = trace.initial_energy;
  out.clustering = state.clustering;

  StepOptions step;
  step.pinned = pinned.empty() ? nullptr : &pinned;
  step.incremental = config.incremental;
  step.solver = config.solver;

  const auto& temp = config.temperature;
  const int iterations = temp ? temp->fixed_iterations : config.max_iters;
  rng::Engine engine(temp ? temp->seed : 0);
  MatrixXd noise;
  double previous = trace.initial_energy;

  for (int l = 1; l <= iterations; ++l) {
    if (temp) {
      const double scale = temp->noise_scale / static_cast<double>(l);
      noise.resize(n, p);
      for (Index j = 0; j < p; ++j)
        for (Index x = 0; x < n; ++x) noise(x, j) = scale * (2.0 * rng::uniform(engine) - 1.0);
      step.noise = &noise;
    }
    const VectorXd m0 = config.warm_start == WarmStart::previous ? state.m : center<double>(p);
    StepRecord rec;
    rec.iteration = l;
    state = mbo_step(a, state, config.constraints, m0, step, &rec);
    if (!std::isfinite(rec.energy))
      fail(ErrorKind::numerical, "energy became non-finite at iteration " + std::to_string(l));
    if (rec.energy < trace.best_energy) {
      trace.best_energy = rec.energy;
      trace.best_iteration = l;
      if (temp) out.clustering = state.clustering;
    }
    rec.best_energy = trace.best_energy;
    trace.steps.push_back(std::move(rec));

    if (!temp) {
      const double e = trace.steps.back().energy;
      const double change = std::abs(e - previous);
      if (change == 0 || (e > 0 && change / e < config.stop_eps)) {
        trace.converged = true;
        break;
      }
      previous = e;
    }
  }
  if (!temp) out.clustering = state.clustering;
  return out;
}

IncrementReport increment_sparsity_check(const MboTrace& trace, const KernelFlags& flags) {
  IncrementReport r;
  r.bound = 4.0 * trace.scaling * trace.initial_energy;
  r.applicable = flags.symmetric && flags.conserves_mass;
  if (!r.applicable) {
    r.note = "not applicable: kernel is not symmetric with A1 = 1";
    return r;
  }
  for (const auto& s : trace.steps) {
    r.increments.push_back(s.increment_l1);
    r.holds.push_back(s.increment_l1 <= r.bound * (1 + 1e-12));
    r.all_hold = r.all_hold && r.holds.back();
  }
  if (flags.inner_product == InnerProduct::degree) r.note = "symmetric in the degree-weighted inner product";
  return r;
}

ScalingReport sqrt_h_scaling_probe(const std::function<DiffusionKernel(double)>& make_kernel,
                                   const std::vector<double>& hs, const std::vector<ProbeRun>& runs) {
  if (runs.empty()) fail(ErrorKind::parameter, "scaling probe needs at least one run");
  ScalingReport r;
  std::vector<double> lx, ly;
  for (double h : hs) {
    const auto kernel = make_kernel(h);
    double sum = 0;
    Index warm = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& config = runs[k].config;
      const double delta = 1.0 / (4.0 * cluster_count(config.constraints));
      const auto res = run(kernel, config, runs[k].init);
      for (const auto& s : res.trace.steps) {
        r.rows.push_back({h, static_cast<int>(k), s.iteration, s.stats.initial_error, s.off_center,
                          s.stats.outer_iterations, s.wall_ms});
        r.bad_iterations += s.off_center > delta;
        ++r.total_iterations;
        if (s.iteration > 1 && config.warm_start == WarmStart::previous) {
          sum += static_cast<double>(s.stats.initial_error);
          ++warm;
        }
      }
    }
    const double mean = warm ? sum / static_cast<double>(warm) : 0.0;
    r.hs.push_back(h);
    r.mean_initial_error.push_back(mean);
    if (mean > 0) {
      lx.push_back(std::log(h));
      ly.push_back(std::log(mean));
    }
  }
  r.bad_fraction = r.total_iterations ? static_cast<double>(r.bad_iterations) / static_cast<double>(r.total_iterations) : 0;
  r.slope = std::numeric_limits<double>::quiet_NaN();
  if (lx.size() >= 2) {
    const Eigen::Map<const VectorXd> x(lx.data(), static_cast<Index>(lx.size()));
    const Eigen::Map<const VectorXd> y(ly.data(), static_cast<Index>(ly.size()));
    const VectorXd xc = x.array() - x.mean();
    r.slope = xc.dot(y) / xc.squaredNorm();
  }
  return r;
}

void write_trace_csv(std::ostream& os, const MboTrace& trace) {
  os << "iteration,energy,distance,increment_l1,outer_iterations,initial_error,off_center,wall_ms\n";
  os << std::setprecision(17);
  for (const auto& s : trace.steps)
    os << s.iteration << ',' << s.energy << ',' << s.distance << ',' << s.increment_l1 << ','
       << s.stats.outer_iterations << ',' << s.stats.initial_error << ',' << s.off_center << ',' << s.wall_ms << '\n';
}

std::string trace_summary_json(const MboTrace& trace) {
  nlohmann::json j;
  j["initial_energy"] = trace.initial_energy;
  j["best_energy"] = trace.best_energy;
  j["best_iteration"] = trace.best_iteration;
  j["iterations"] = trace.steps.size();
  j["converged"] = trace.converged;
  j["scaling"] = trace.scaling;
  j["h"] = trace.h;
  Index outer = 0;
  for (const auto& s : trace.steps) outer += s.stats.outer_iterations;
  j["outer_iterations"] = outer;
  if (!trace.steps.empty()) {
    const auto& last = trace.steps.back();
    j["final_energy"] = last.energy;
    j["final_m"] = std::vector<double>(last.m.data(), last.m.data() + last.m.size());
    j["final_lagrange"] = std::vector<double>(last.lagrange.data(), last.lagrange.data() + last.lagrange.size());
  }
  return j.dump(2);
}

void write_scaling_csv(std::ostream& os, const ScalingReport& report) {
  os << "h,run,iteration,initial_error,off_center,outer_iterations,wall_ms\n";
  os << std::setprecision(17);
  for (const auto& r : report.rows)
    os << r.h << ',' << r.run << ',' << r.iteration << ',' << r.initial_error << ',' << r.off_center << ',' << r.outer_iterations
       << ',' << r.wall_ms << '\n';
}

}  // namespace vmbo
