#include "vmbo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vmbo/errors.hpp"

namespace vmbo {

const std::vector<Config::Key>& Config::schema() {
  static const std::vector<Key> keys = {
      {"dataset.kind", "three_moons", "three_moons | torus | delimited | idx | embedding"},
      {"dataset.path", "", "delimited text or embedding file"},
      {"dataset.labels", "", "labels for an embedding, one integer per line"},
      {"dataset.images", "", "comma-separated IDX image files"},
      {"dataset.image_labels", "", "comma-separated IDX label files, one per image file"},
      {"dataset.label_column", "-1", "label column of a delimited file, -1 for the last"},
      {"dataset.separator", "auto", "delimited separator: auto | comma | whitespace | tab | semicolon"},
      {"dataset.n_per_moon", "500", "three moons: points per moon"},
      {"dataset.noise_sd", "0.14", "three moons: Gaussian noise standard deviation"},
      {"dataset.ambient_dim", "100", "three moons: embedding dimension"},
      {"dataset.n", "2000", "torus: number of points"},
      {"dataset.seed", "0", "seed of synthetic datasets"},
      {"graph.k", "10", "nearest neighbors per point"},
      {"kernel.kind", "squared_rw",
       "squared_rw | squared_rw_twice | shifted_squared_rw | rank_k_heat | positive_taylor"},
      {"kernel.h", "1", "diffusion time of rank_k_heat and positive_taylor"},
      {"kernel.order", "2", "positive_taylor: even series order J"},
      {"kernel.rank", "0", "rank_k_heat: number of eigenpairs, 0 for rank_factor * ln N"},
      {"kernel.rank_factor", "20", "rank_k_heat: K = ceil(rank_factor * ln N) when rank is 0"},
      {"kernel.shift", "0.1", "shifted_squared_rw: r in A - r I"},
      {"constraints.mode", "exact", "exact | interval"},
      {"constraints.slack", "0", "interval: L = floor((1 - slack) V), U = ceil((1 + slack) V)"},
      {"init.method", "auto", "auto | laguerre | voronoi | diffusion | diffusion_unconstrained"},
      {"init.h", "10", "diffusion initialization: time of the rank-K heat kernel"},
      {"init.edge_length", "log_weight", "Dijkstra edge length: log_weight | euclidean"},
      {"mbo.stop_eps", "1e-4", "stop when the relative energy change falls below this"},
      {"mbo.max_iters", "300", "iteration cap without temperature"},
      {"mbo.warm_start", "previous", "previous | center"},
      {"mbo.incremental", "true", "update A chi from the increment"},
      {"temperature.enabled", "false", "perturb the diffused values before thresholding"},
      {"temperature.noise_scale", "0.05", "uniform noise amplitude at the first iteration, decaying as 1/l"},
      {"temperature.iterations", "50", "fixed iteration count; the lowest-energy iterate is returned"},
      {"experiment.trials", "1", "number of trials, each with its own labeled points"},
      {"experiment.labels_per_class", "5", "labeled points per class"},
      {"experiment.seed", "0", "base seed; trial t uses a seed derived from (seed, t)"},
      {"experiment.threads", "0", "worker threads, 0 for the hardware concurrency"},
      {"output.dir", "", "directory for results; empty writes nothing"},
      {"output.traces", "false", "write one trace CSV per trial"},
      {"probe.iterations", "6", "MBO iterations per probe run, 0 to run until the stopping rule"},
      {"probe.hs", "8,16,32,64", "diffusion times of the scaling probe; experiment.trials fidelity draws each"},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : schema()) values_[k.name] = k.fallback;
}

Config Config::parse(std::istream& in, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::config, source + ": " + e.message() + " on line " + std::to_string(e.line()));
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) fail(ErrorKind::config, source + ": key '" + section + "' is outside a section");
    for (const auto& [key, value] : body) c.set(section + "." + key, value.get_value<std::string>());
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config file " + path.string());
  return parse(in, path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::config, "unknown config key '" + key + "'");
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::config, "unknown config key '" + key + "'");
  return it->second;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    fail(ErrorKind::config, "config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

double Config::real(const std::string& key) const { return parse_number<double>(key, get(key)); }
long long Config::integer(const std::string& key) const { return parse_number<long long>(key, get(key)); }
std::uint64_t Config::unsigned_integer(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

bool Config::flag(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::config, "config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(get(key))) out.push_back(parse_number<double>(key, s));
  return out;
}

std::vector<std::string> Config::strings(const std::string& key) const { return split_list(get(key)); }

std::string Config::to_ini() const {
  std::ostringstream os;
  std::string section;
  for (const auto& k : schema()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    if (name.substr(0, dot) != section) {
      section = name.substr(0, dot);
      os << (os.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    os << "; " << k.help << " (default: " << (*k.fallback ? k.fallback : "empty") << ")\n";
    os << name.substr(dot + 1) << " = " << values_.at(name) << '\n';
  }
  return os.str();
}

}  // namespace vmbo
