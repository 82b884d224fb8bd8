#include "vmbo/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vmbo/errors.hpp"
#include "vmbo/io.hpp"
#include "vmbo/random.hpp"

namespace vmbo {

namespace {

double ms_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count();
}

std::vector<int> read_label_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open label file " + path.string());
  std::vector<int> out;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(std::stoi(line));
    } catch (const std::exception&) {
      fail(ErrorKind::format, path.string() + ": bad label on line " + std::to_string(lineno));
    }
  }
  return out;
}

char separator_from(const std::string& name) {
  if (name == "auto" || name == "whitespace") return 0;
  if (name == "comma") return ',';
  if (name == "tab") return '\t';
  if (name == "semicolon") return ';';
  fail(ErrorKind::config, "config key 'dataset.separator': unknown separator '" + name + "'");
}

Index positive(const Config& cfg, const std::string& key) {
  const auto v = cfg.integer(key);
  if (v < 1) fail(ErrorKind::config, "config key '" + key + "' must be positive");
  return static_cast<Index>(v);
}

}  // namespace

LabeledDataset load_dataset(const Config& cfg) {
  const auto& kind = cfg.get("dataset.kind");
  LabeledDataset d;
  if (kind == "three_moons") {
    d = three_moons(positive(cfg, "dataset.n_per_moon"), cfg.real("dataset.noise_sd"),
                    positive(cfg, "dataset.ambient_dim"), cfg.unsigned_integer("dataset.seed"));
  } else if (kind == "torus") {
    d = torus_sample(positive(cfg, "dataset.n"), cfg.unsigned_integer("dataset.seed"));
  } else if (kind == "delimited") {
    if (cfg.get("dataset.path").empty()) fail(ErrorKind::config, "config key 'dataset.path' is required");
    DelimitedOptions opt;
    opt.separator = separator_from(cfg.get("dataset.separator"));
    opt.label_column = static_cast<int>(cfg.integer("dataset.label_column"));
    d = load_delimited(cfg.get("dataset.path"), opt);
  } else if (kind == "idx") {
    const auto images = cfg.strings("dataset.images");
    const auto labels = cfg.strings("dataset.image_labels");
    if (images.empty() || images.size() != labels.size())
      fail(ErrorKind::config, "config keys 'dataset.images' and 'dataset.image_labels' must list the same number of files");
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> files;
    for (std::size_t i = 0; i < images.size(); ++i) files.emplace_back(images[i], labels[i]);
    d = load_idx(files);
  } else if (kind == "embedding") {
    if (cfg.get("dataset.path").empty() || cfg.get("dataset.labels").empty())
      fail(ErrorKind::config, "config keys 'dataset.path' and 'dataset.labels' are required for embeddings");
    d.cloud = load_embedding(cfg.get("dataset.path"));
    d.labels = read_label_lines(cfg.get("dataset.labels"));
    for (int l : d.labels) d.classes = std::max(d.classes, l + 1);
    d.name = "embedding";
    d.provenance = cfg.get("dataset.path");
  } else {
    fail(ErrorKind::config, "config key 'dataset.kind': unknown dataset '" + kind + "'");
  }
  d.validate();
  return d;
}

namespace {

KernelKind configured_kind(const Config& cfg) {
  try {
    return kernel_kind_from_string(cfg.get("kernel.kind"));
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("config key 'kernel.kind': ") + e.what());
  }
}

Index configured_rank(const Config& cfg, Index n) {
  Index k = static_cast<Index>(cfg.integer("kernel.rank"));
  if (k <= 0) k = static_cast<Index>(std::ceil(cfg.real("kernel.rank_factor") * std::log(static_cast<double>(n))));
  return std::clamp<Index>(k, 1, n);
}

VolumeConstraints configured_constraints(const Config& cfg, const LabeledDataset& d) {
  const auto v = d.class_sizes();
  const auto& mode = cfg.get("constraints.mode");
  if (mode == "exact") return ExactVolumes{v};
  if (mode != "interval") fail(ErrorKind::config, "config key 'constraints.mode': expected exact or interval");
  const double slack = cfg.real("constraints.slack");
  if (!(slack >= 0)) fail(ErrorKind::config, "config key 'constraints.slack' must be nonnegative");
  IntervalVolumes lu;
  for (Index x : v) {
    lu.lower.push_back(static_cast<Index>(std::floor((1 - slack) * static_cast<double>(x))));
    lu.upper.push_back(static_cast<Index>(std::ceil((1 + slack) * static_cast<double>(x))));
  }
  return lu;
}

InitMethod configured_init(const Config& cfg, KernelKind kind) {
  const auto& m = cfg.get("init.method");
  if (m == "auto") return kind == KernelKind::rank_k_heat ? InitMethod::diffusion : InitMethod::laguerre;
  if (m == "laguerre") return InitMethod::laguerre;
  if (m == "voronoi") return InitMethod::voronoi;
  if (m == "diffusion") return InitMethod::diffusion;
  if (m == "diffusion_unconstrained") return InitMethod::diffusion_unconstrained;
  fail(ErrorKind::config, "config key 'init.method': unknown method '" + m + "'");
}

}  // namespace

DiffusionKernel build_kernel(const Config& cfg, const Pipeline& p, double h) {
  switch (configured_kind(cfg)) {
    case KernelKind::rank_k_heat:
      return make_rank_k_heat(*p.spectrum, h, p.spectrum->count());
    case KernelKind::positive_taylor:
      return make_positive_taylor(p.weights, h, static_cast<int>(cfg.integer("kernel.order")));
    case KernelKind::squared_rw:
      return make_squared_rw(p.weights, SquaredVariant::plain);
    case KernelKind::squared_rw_twice:
      return make_squared_rw(p.weights, SquaredVariant::squared_twice);
    case KernelKind::shifted_squared_rw:
      return make_squared_rw(p.weights, SquaredVariant::shifted, cfg.real("kernel.shift"));
  }
  fail(ErrorKind::config, "config key 'kernel.kind': unsupported kernel");
}

Pipeline build_pipeline(const Config& cfg) { return build_pipeline(cfg, load_dataset(cfg)); }

Pipeline build_pipeline(const Config& cfg, LabeledDataset data) {
  const auto start = std::chrono::steady_clock::now();
  Pipeline p;
  p.data = std::move(data);
  p.data.validate();
  const auto kind = configured_kind(cfg);
  p.init = configured_init(cfg, kind);
  p.weights = knn_graph(p.data.cloud, static_cast<int>(positive(cfg, "graph.k")));
  require_connected(p.weights);
  p.constraints = configured_constraints(cfg, p.data);

  const bool diffusion_init = p.init == InitMethod::diffusion || p.init == InitMethod::diffusion_unconstrained;
  if (kind == KernelKind::rank_k_heat || diffusion_init)
    p.spectrum = partial_spectrum(p.weights, configured_rank(cfg, p.data.size()));
  p.kernel = build_kernel(cfg, p, cfg.real("kernel.h"));
  if (diffusion_init) p.init_kernel = make_rank_k_heat(*p.spectrum, cfg.real("init.h"), p.spectrum->count());

  auto& m = p.mbo;
  m.constraints = p.constraints;
  m.stop_eps = cfg.real("mbo.stop_eps");
  m.max_iters = static_cast<int>(positive(cfg, "mbo.max_iters"));
  const auto& ws = cfg.get("mbo.warm_start");
  if (ws != "previous" && ws != "center") fail(ErrorKind::config, "config key 'mbo.warm_start': expected previous or center");
  m.warm_start = ws == "previous" ? WarmStart::previous : WarmStart::center;
  m.incremental = cfg.flag("mbo.incremental");
  if (cfg.flag("temperature.enabled")) {
    Temperature t;
    t.noise_scale = cfg.real("temperature.noise_scale");
    t.fixed_iterations = static_cast<int>(positive(cfg, "temperature.iterations"));
    m.temperature = t;
  }
  p.setup_ms = ms_since(start);
  return p;
}

namespace {

Clustering initialize(const Pipeline& p, const Config& cfg, const FidelitySet& y) {
  InitOptions opt;
  if (cfg.get("init.edge_length") == "euclidean") {
    opt.edge_length = EdgeLength::euclidean;
    opt.cloud = &p.data.cloud;
  } else if (cfg.get("init.edge_length") != "log_weight") {
    fail(ErrorKind::config, "config key 'init.edge_length': expected log_weight or euclidean");
  }
  switch (p.init) {
    case InitMethod::laguerre:
      return laguerre_init(p.weights, y, p.constraints, opt);
    case InitMethod::voronoi:
      return voronoi_init(p.weights, y, opt);
    case InitMethod::diffusion:
      return diffusion_init(*p.init_kernel, y, p.constraints);
    case InitMethod::diffusion_unconstrained:
      return diffusion_init(*p.init_kernel, y, std::nullopt);
  }
  fail(ErrorKind::config, "unsupported initialization");
}

std::uint64_t trial_seed(const Config& cfg, int trial) {
  return rng::mix(cfg.unsigned_integer("experiment.seed") ^ rng::mix(static_cast<std::uint64_t>(trial) + 1));
}

}  // namespace

TrialResult run_trial(const Pipeline& p, const Config& cfg, int trial) {
  const auto start = std::chrono::steady_clock::now();
  TrialResult r;
  r.trial = trial;
  r.seed = trial_seed(cfg, trial);
  const int per_class = static_cast<int>(positive(cfg, "experiment.labels_per_class"));
  const FidelitySet y = sample_fidelity(p.data.labels, p.data.classes, per_class, r.seed);
  const Clustering init = initialize(p, cfg, y);
  r.init_accuracy = accuracy(init, p.data.labels);

  MboConfig m = p.mbo;
  m.fidelity = y;
  if (m.temperature) m.temperature->seed = r.seed;
  auto res = run(*p.kernel, m, init);
  r.accuracy = accuracy(res.clustering, p.data.labels);
  r.energy = m.temperature || res.trace.steps.empty() ? res.trace.best_energy : res.trace.steps.back().energy;
  r.iterations = static_cast<int>(res.trace.steps.size());
  for (const auto& s : res.trace.steps) r.outer_iterations += s.stats.outer_iterations;
  r.trace = std::move(res.trace);
  r.wall_ms = ms_since(start);
  return r;
}

ExperimentResult run_experiment(const Config& cfg, std::ostream* log) {
  const Pipeline p = build_pipeline(cfg);
  return run_experiment(cfg, p, log);
}

ExperimentResult run_experiment(const Config& cfg, const Pipeline& p, std::ostream* log) {
  const int trials = static_cast<int>(positive(cfg, "experiment.trials"));
  auto threads = static_cast<int>(cfg.integer("experiment.threads"));
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, trials);

  ExperimentResult out;
  out.trials.resize(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  std::mutex guard;
  std::exception_ptr error;
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) {
      try {
        out.trials[static_cast<std::size_t>(t)] = run_trial(p, cfg, t);
        if (log) {
          std::lock_guard lock(guard);
          const auto& r = out.trials[static_cast<std::size_t>(t)];
          *log << "trial " << t << ": accuracy " << std::fixed << std::setprecision(4) << r.accuracy << " (init "
               << r.init_accuracy << "), " << r.iterations << " iterations, " << std::setprecision(1) << r.wall_ms
               << " ms\n";
          log->unsetf(std::ios::fixed);
        }
      } catch (...) {
        std::lock_guard lock(guard);
        if (!error) error = std::current_exception();
        next = trials;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  auto mean_sd = [&](auto field, double& mean, double& sd) {
    double s = 0;
    for (const auto& r : out.trials) s += field(r);
    mean = s / trials;
    double v = 0;
    for (const auto& r : out.trials) v += (field(r) - mean) * (field(r) - mean);
    sd = trials > 1 ? std::sqrt(v / (trials - 1)) : 0.0;
  };
  mean_sd([](const TrialResult& r) { return r.accuracy; }, out.mean, out.sd);
  mean_sd([](const TrialResult& r) { return r.init_accuracy; }, out.init_mean, out.init_sd);
  out.n = p.data.size();
  out.classes = p.data.classes;
  out.setup_ms = p.setup_ms;
  out.dataset = p.data.provenance;
  out.resolved_config = cfg.to_ini();
  return out;
}

void write_results(const std::filesystem::path& dir, const ExperimentResult& r, bool traces) {
  {
    auto os = io::open_output(dir / "results.csv");
    os << "trial,seed,accuracy,init_accuracy,energy,iterations,outer_iterations,wall_ms\n" << std::setprecision(17);
    for (const auto& t : r.trials)
      os << t.trial << ',' << t.seed << ',' << t.accuracy << ',' << t.init_accuracy << ',' << t.energy << ','
         << t.iterations << ',' << t.outer_iterations << ',' << t.wall_ms << '\n';
  }
  {
    nlohmann::json j;
    j["dataset"] = r.dataset;
    j["n"] = r.n;
    j["classes"] = r.classes;
    j["accuracy_mean"] = r.mean;
    j["accuracy_sd"] = r.sd;
    j["init_accuracy_mean"] = r.init_mean;
    j["init_accuracy_sd"] = r.init_sd;
    j["setup_ms"] = r.setup_ms;
    j["config"] = r.resolved_config;
    for (const auto& t : r.trials)
      j["trials"].push_back({{"trial", t.trial},
                             {"seed", t.seed},
                             {"accuracy", t.accuracy},
                             {"init_accuracy", t.init_accuracy},
                             {"energy", t.energy},
                             {"iterations", t.iterations},
                             {"outer_iterations", t.outer_iterations},
                             {"summary", nlohmann::json::parse(trace_summary_json(t.trace))}});
    auto os = io::open_output(dir / "results.json");
    os << j.dump(2) << '\n';
  }
  {
    auto os = io::open_output(dir / "config.ini");
    os << r.resolved_config;
  }
  if (traces) {
    for (const auto& t : r.trials) {
      auto os = io::open_output(dir / ("trace_" + std::to_string(t.trial) + ".csv"));
      write_trace_csv(os, t.trace);
    }
  }
}

ScalingReport probe_scaling(const Config& cfg, std::ostream* log) {
  const Pipeline p = build_pipeline(cfg);
  const int per_class = static_cast<int>(positive(cfg, "experiment.labels_per_class"));
  const int trials = static_cast<int>(positive(cfg, "experiment.trials"));
  const int window = static_cast<int>(cfg.unsigned_integer("probe.iterations"));
  std::vector<ProbeRun> runs;
  for (int t = 0; t < trials; ++t) {
    const auto seed = trial_seed(cfg, t);
    ProbeRun r{p.mbo, {}};
    if (window > 0) {
      // A fixed window gives every h the same number of warm-started steps.
      r.config.max_iters = window;
      r.config.stop_eps = std::numeric_limits<double>::min();
    }
    r.config.fidelity = sample_fidelity(p.data.labels, p.data.classes, per_class, seed);
    if (r.config.temperature) r.config.temperature->seed = seed;
    r.init = initialize(p, cfg, r.config.fidelity);
    runs.push_back(std::move(r));
  }
  const auto hs = cfg.reals("probe.hs");
  if (hs.empty()) fail(ErrorKind::config, "config key 'probe.hs' is empty");
  for (double h : hs)
    if (!(h > 0)) fail(ErrorKind::config, "config key 'probe.hs' must list positive values");
  auto report = sqrt_h_scaling_probe([&](double h) { return build_kernel(cfg, p, h); }, hs, runs);
  if (log) {
    for (std::size_t i = 0; i < report.hs.size(); ++i)
      *log << "h = " << report.hs[i] << ": mean E(m0) = " << report.mean_initial_error[i] << '\n';
    *log << "slope " << report.slope << ", off-center iterations " << report.bad_iterations << " of "
         << report.total_iterations << '\n';
  }
  return report;
}

MatrixXd read_scores(const std::filesystem::path& path) {
  if (path.extension() == ".bin") {
    const auto bytes = io::read_bytes(path);
    io::ByteReader in(bytes, path.string());
    const Index n = in.le<std::uint32_t>();
    const Index p = in.le<std::uint32_t>();
    in.need(static_cast<std::size_t>(n * p) * 8);
    MatrixXd u(n, p);
    for (Index x = 0; x < n; ++x)
      for (Index i = 0; i < p; ++i) u(x, i) = in.le<double>();
    if (in.remaining() != 0)
      fail(ErrorKind::format, path.string() + ": trailing bytes at offset " + std::to_string(in.offset()));
    return u;
  }
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open scores file " + path.string());
  long long n = 0, p = 0;
  if (!(in >> n >> p) || n < 1 || p < 1) fail(ErrorKind::format, path.string() + ": header must be 'N P'");
  MatrixXd u(n, p);
  for (Index x = 0; x < n; ++x)
    for (Index i = 0; i < p; ++i)
      if (!(in >> u(x, i)))
        fail(ErrorKind::format, path.string() + ": expected " + std::to_string(n * p) + " values, read " +
                                    std::to_string(x * p + i));
  std::string rest;
  if (in >> rest) fail(ErrorKind::format, path.string() + ": trailing content '" + rest + "'");
  return u;
}

void write_scores(const std::filesystem::path& path, const MatrixXd& u) {
  auto os = io::open_output(path);
  if (path.extension() == ".bin") {
    io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.rows()));
    io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(u.cols()));
    for (Index x = 0; x < u.rows(); ++x)
      for (Index i = 0; i < u.cols(); ++i) io::store_le<double>(os, u(x, i));
  } else {
    os << u.rows() << ' ' << u.cols() << '\n' << std::setprecision(17);
    for (Index x = 0; x < u.rows(); ++x) {
      for (Index i = 0; i < u.cols(); ++i) os << (i ? " " : "") << u(x, i);
      os << '\n';
    }
  }
}

SolveReport solve_file(const std::filesystem::path& scores, const VolumeConstraints& constraints,
                       const std::optional<VectorXd>& m0, const std::filesystem::path& out_dir) {
  const MatrixXd u = read_scores(scores);
  const int p = static_cast<int>(u.cols());
  if (cluster_count(constraints) != p)
    fail(ErrorKind::constraint, "constraints list " + std::to_string(cluster_count(constraints)) +
                                    " clusters but the scores have " + std::to_string(p));
  if (m0 && m0->size() != p) fail(ErrorKind::parameter, "m0 must have one entry per cluster");
  SolveReport r;
  r.solution = solve(u, constraints, m0 ? *m0 : center<double>(p));
  r.objective = objective(u, r.solution.order.induced);
  if (!out_dir.empty()) {
    auto a = io::open_output(out_dir / "assignment.csv");
    a << "point_id,cluster\n";
    for (Index x = 0; x < u.rows(); ++x) a << x << ',' << r.solution.order.induced[x] << '\n';
    auto m = io::open_output(out_dir / "m.csv");
    m << std::setprecision(17);
    for (Index i = 0; i < p; ++i) m << r.solution.order.m[i] << '\n';
  }
  return r;
}

}  // namespace vmbo
