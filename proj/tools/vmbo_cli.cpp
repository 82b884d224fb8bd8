// Command line entry point: run, solve, probe, spectrum, gen-moons.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "vmbo/data.hpp"
#include "vmbo/errors.hpp"
#include "vmbo/experiment.hpp"
#include "vmbo/io.hpp"

namespace {

using namespace vmbo;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter:
    case ErrorKind::config:
      return 2;
    case ErrorKind::input:
    case ErrorKind::format:
    case ErrorKind::structural:
      return 3;
    case ErrorKind::constraint:
      return 4;
    case ErrorKind::numerical:
      return 1;
  }
  return 1;
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> trials;
  std::optional<int> labels_per_class;
  std::string kernel;
  std::optional<double> h;
  std::optional<bool> temperature;
  std::string constraints;
  std::vector<std::string> sets;

  void add_to(CLI::App* app) {
    // "--h" is the diffusion time, so help is long-form only here.
    app->set_help_flag("--help", "Print this help message and exit");
    app->add_option("--config", config, "INI experiment configuration");
    app->add_option("--seed", seed, "experiment.seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--trials", trials, "experiment.trials");
    app->add_option("--labels-per-class", labels_per_class, "experiment.labels_per_class");
    app->add_option("--kernel", kernel, "kernel.kind");
    app->add_option("--h", h, "kernel.h");
    app->add_option("--temperature", temperature, "temperature.enabled (true/false)");
    app->add_option("--constraints", constraints, "constraints.mode (exact/interval)");
    app->add_option("--set", sets, "override any key: section.key=value");
  }

  Config resolve() const {
    Config c = config.empty() ? Config() : Config::load(config);
    if (seed) c.set("experiment.seed", std::to_string(*seed));
    if (!out.empty()) c.set("output.dir", out);
    if (trials) c.set("experiment.trials", std::to_string(*trials));
    if (labels_per_class) c.set("experiment.labels_per_class", std::to_string(*labels_per_class));
    if (!kernel.empty()) c.set("kernel.kind", kernel);
    if (h) {
      std::ostringstream s;
      s << std::setprecision(17) << *h;
      c.set("kernel.h", s.str());
    }
    if (temperature) c.set("temperature.enabled", *temperature ? "true" : "false");
    if (!constraints.empty()) c.set("constraints.mode", constraints);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorKind::config, "--set expects section.key=value, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
  }
};

std::vector<Index> parse_counts(const std::string& text, const char* what) {
  std::vector<Index> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      fail(ErrorKind::parameter, std::string(what) + ": '" + item + "' is not a nonnegative integer");
    }
  }
  return out;
}

int cmd_run(const Overrides& o) {
  const Config cfg = o.resolve();
  const auto result = run_experiment(cfg, &std::cerr);
  std::cout << std::fixed << std::setprecision(2) << "dataset " << result.dataset << " (N = " << result.n
            << ", P = " << result.classes << ")\n"
            << "accuracy " << 100 * result.mean << " (" << 100 * result.sd << ") over " << result.trials.size()
            << " trials; initialization " << 100 * result.init_mean << " (" << 100 * result.init_sd << ")\n";
  if (!cfg.get("output.dir").empty()) write_results(cfg.get("output.dir"), result, cfg.flag("output.traces"));
  return 0;
}

int cmd_probe(const Overrides& o) {
  const Config cfg = o.resolve();
  const auto report = probe_scaling(cfg, &std::cerr);
  if (!cfg.get("output.dir").empty()) {
    auto os = io::open_output(std::filesystem::path(cfg.get("output.dir")) / "scaling.csv");
    write_scaling_csv(os, report);
  } else {
    write_scaling_csv(std::cout, report);
  }
  std::cout << "slope " << report.slope << "\noff_center_fraction " << report.bad_fraction << '\n';
  return 0;
}

int cmd_spectrum(const Overrides& o, Index k) {
  const Config cfg = o.resolve();
  const auto data = load_dataset(cfg);
  const auto w = knn_graph(data.cloud, static_cast<int>(cfg.integer("graph.k")));
  const auto spec = partial_spectrum(w, k);
  const auto res = spectrum_residuals(spec, w);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!cfg.get("output.dir").empty()) {
    file = io::open_output(std::filesystem::path(cfg.get("output.dir")) / "spectrum.csv");
    os = &file;
  }
  *os << "index,eigenvalue,residual\n" << std::setprecision(17);
  for (Index a = 0; a < spec.count(); ++a) *os << a << ',' << spec.eigenvalues[a] << ',' << res[a] << '\n';
  return 0;
}

int cmd_solve(const std::string& scores, const std::string& volumes, const std::string& lower,
              const std::string& upper, const std::vector<double>& m0, const std::string& out) {
  VolumeConstraints c;
  if (!volumes.empty()) {
    if (!lower.empty() || !upper.empty()) fail(ErrorKind::parameter, "give either --volumes or --lower/--upper");
    c = ExactVolumes{parse_counts(volumes, "--volumes")};
  } else {
    if (lower.empty() || upper.empty()) fail(ErrorKind::parameter, "give --volumes, or both --lower and --upper");
    c = IntervalVolumes{parse_counts(lower, "--lower"), parse_counts(upper, "--upper")};
  }
  std::optional<VectorXd> start;
  if (!m0.empty()) start = Eigen::Map<const VectorXd>(m0.data(), static_cast<Index>(m0.size()));
  const auto r = solve_file(scores, c, start, out);
  const auto& s = r.solution.stats;
  std::cout << std::setprecision(17) << "objective " << r.objective << "\nm";
  for (Index i = 0; i < r.solution.order.m.size(); ++i) std::cout << ' ' << r.solution.order.m[i];
  std::cout << "\nouter_iterations " << s.outer_iterations << "\ngrowth_steps " << s.growth_steps << "\nheap_ops "
            << s.heap_ops << "\ninitial_error " << s.initial_error << "\nwall_ms " << s.wall_ms << '\n';
  if (out.empty()) {
    std::cout << "point_id,cluster\n";
    for (Index x = 0; x < r.solution.order.induced.size(); ++x)
      std::cout << x << ',' << r.solution.order.induced[x] << '\n';
  }
  return 0;
}

int cmd_gen_moons(Index n, double sd, Index dim, std::uint64_t seed, const std::string& out) {
  const auto d = three_moons(n, sd, dim, seed);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file = io::open_output(out);
    os = &file;
  }
  *os << std::setprecision(17);
  for (Index x = 0; x < d.size(); ++x) {
    for (Index j = 0; j < d.cloud.dim(); ++j) *os << d.cloud.points(x, j) << ',';
    *os << d.labels[static_cast<std::size_t>(x)] << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volume-constrained MBO clustering on graphs"};
  app.require_subcommand(1);

  Overrides run_o, probe_o, spectrum_o;
  auto* run = app.add_subcommand("run", "run an experiment from a configuration");
  run_o.add_to(run);
  auto* probe = app.add_subcommand("probe", "measure E(m0) across diffusion times");
  probe_o.add_to(probe);
  auto* spectrum = app.add_subcommand("spectrum", "smallest eigenpairs of the dataset graph Laplacian");
  spectrum_o.add_to(spectrum);
  Index spectrum_k = 10;
  spectrum->add_option("--count", spectrum_k, "number of eigenpairs");

  auto* solve = app.add_subcommand("solve", "volume-constrained thresholding of a score file");
  std::string scores, volumes, lower, upper, solve_out;
  std::vector<double> m0;
  solve->add_option("scores", scores, "score file (.bin or text)")->required();
  solve->add_option("--volumes", volumes, "exact volumes, comma separated");
  solve->add_option("--lower", lower, "lower bounds, comma separated");
  solve->add_option("--upper", upper, "upper bounds, comma separated");
  solve->add_option("--m0", m0, "initial price vector (default: 1/P)")->delimiter(',');
  solve->add_option("--out", solve_out, "directory for assignment.csv and m.csv");

  auto* gen = app.add_subcommand("gen-moons", "write the Three Moons dataset as CSV (features, label)");
  Index n_per_moon = 500, dim = 100;
  double sd = 0.14;
  std::uint64_t seed = 0;
  std::string gen_out;
  gen->add_option("--n-per-moon", n_per_moon, "points per moon");
  gen->add_option("--noise", sd, "noise standard deviation");
  gen->add_option("--dim", dim, "ambient dimension");
  gen->add_option("--seed", seed, "seed");
  gen->add_option("--out", gen_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*probe) return cmd_probe(probe_o);
    if (*spectrum) return cmd_spectrum(spectrum_o, spectrum_k);
    if (*solve) return cmd_solve(scores, volumes, lower, upper, m0, solve_out);
    if (*gen) return cmd_gen_moons(n_per_moon, sd, dim, seed, gen_out);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
