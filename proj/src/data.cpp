#include "vmbo/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vmbo/errors.hpp"
#include "vmbo/io.hpp"
#include "vmbo/oracle.hpp"
#include "vmbo/random.hpp"

namespace vmbo {

std::vector<Index> LabeledDataset::class_sizes() const {
  std::vector<Index> out(static_cast<std::size_t>(classes), 0);
  for (int l : labels) ++out[static_cast<std::size_t>(l)];
  return out;
}

void LabeledDataset::validate() const {
  cloud.validate();
  if (static_cast<Index>(labels.size()) != cloud.size()) fail(ErrorKind::input, "label count does not match points");
  if (classes < 2) fail(ErrorKind::input, "dataset needs at least two classes");
  for (int l : labels)
    if (l < 0 || l >= classes) fail(ErrorKind::input, "label " + std::to_string(l) + " out of range");
}

LabeledDataset three_moons(Index n_per_moon, double noise_sd, Index ambient_dim, std::uint64_t seed) {
  if (n_per_moon < 1) fail(ErrorKind::parameter, "three moons needs at least one point per moon");
  if (ambient_dim < 2) fail(ErrorKind::parameter, "three moons needs at least two dimensions");
  if (!(noise_sd >= 0)) fail(ErrorKind::parameter, "noise standard deviation must be nonnegative");
  struct Moon {
    double cx, cy, r, orientation;  // +1 upper half, -1 lower half
  };
  constexpr Moon moons[3] = {{0.0, 0.0, 1.0, 1.0}, {3.0, 0.0, 1.0, 1.0}, {1.5, 0.4, 1.5, -1.0}};

  LabeledDataset out;
  out.name = "three_moons";
  out.classes = 3;
  out.cloud.points = MatrixXd::Zero(3 * n_per_moon, ambient_dim);
  out.labels.resize(static_cast<std::size_t>(3 * n_per_moon));
  for (int k = 0; k < 3; ++k) {
    auto g = rng::stream(seed, static_cast<std::uint64_t>(k));
    const Moon& moon = moons[k];
    for (Index a = 0; a < n_per_moon; ++a) {
      const Index x = k * n_per_moon + a;
      const double theta = std::numbers::pi * rng::uniform(g);
      out.cloud.points(x, 0) = moon.cx + moon.r * std::cos(theta);
      out.cloud.points(x, 1) = moon.cy + moon.orientation * moon.r * std::sin(theta);
      if (noise_sd > 0)
        for (Index d = 0; d < ambient_dim; ++d) out.cloud.points(x, d) += noise_sd * rng::normal(g);
      out.labels[static_cast<std::size_t>(x)] = k;
    }
  }
  std::ostringstream prov;
  prov << "three_moons n_per_moon=" << n_per_moon << " noise_sd=" << noise_sd << " ambient_dim=" << ambient_dim
       << " seed=" << seed;
  out.provenance = prov.str();
  return out;
}

LabeledDataset torus_sample(Index n, std::uint64_t seed) {
  if (n < 2) fail(ErrorKind::parameter, "torus sample needs at least two points");
  LabeledDataset out;
  out.name = "torus";
  out.classes = 2;
  out.cloud.points.resize(n, 4);
  out.labels.resize(static_cast<std::size_t>(n));
  auto g = rng::stream(seed, 0);
  constexpr double pi = std::numbers::pi;
  for (Index x = 0; x < n; ++x) {
    const double a = 2 * pi * rng::uniform(g), b = 2 * pi * rng::uniform(g);
    out.cloud.points.row(x) << std::cos(a), std::sin(a), std::cos(b), std::sin(b);
    const double da = a - pi, db = b - pi;
    out.labels[static_cast<std::size_t>(x)] = da * da + db * db <= pi * pi / 4 ? 1 : 0;
  }
  out.provenance = "torus n=" + std::to_string(n) + " seed=" + std::to_string(seed);
  return out;
}

LabeledDataset load_idx(const std::vector<std::pair<std::filesystem::path, std::filesystem::path>>& files) {
  if (files.empty()) fail(ErrorKind::parameter, "no IDX files given");
  std::vector<MatrixXd> blocks;
  LabeledDataset out;
  out.name = "idx";
  Index dim = -1, total = 0;
  for (const auto& [images_path, labels_path] : files) {
    const auto ib = io::read_bytes(images_path);
    io::ByteReader img(ib, images_path.string());
    if (img.be32() != 0x00000803u)
      fail(ErrorKind::format, images_path.string() + ": bad image magic at byte offset 0");
    const Index n = img.be32(), rows = img.be32(), cols = img.be32();
    if (dim >= 0 && rows * cols != dim) fail(ErrorKind::format, images_path.string() + ": image size differs");
    dim = rows * cols;
    img.need(static_cast<std::size_t>(n * dim));
    MatrixXd block(n, dim);
    const unsigned char* px = img.take(static_cast<std::size_t>(n * dim));
    for (Index x = 0; x < n; ++x)
      for (Index d = 0; d < dim; ++d) block(x, d) = px[x * dim + d] / 255.0;
    if (img.remaining() != 0)
      fail(ErrorKind::format, images_path.string() + ": trailing bytes at offset " + std::to_string(img.offset()));

    const auto lb = io::read_bytes(labels_path);
    io::ByteReader lab(lb, labels_path.string());
    if (lab.be32() != 0x00000801u)
      fail(ErrorKind::format, labels_path.string() + ": bad label magic at byte offset 0");
    const Index count = lab.be32();
    if (count != n)
      fail(ErrorKind::format, labels_path.string() + ": " + std::to_string(count) + " labels for " +
                                  std::to_string(n) + " images at byte offset 4");
    const unsigned char* l = lab.take(static_cast<std::size_t>(n));
    for (Index x = 0; x < n; ++x) {
      out.labels.push_back(l[x]);
      out.classes = std::max(out.classes, static_cast<int>(l[x]) + 1);
    }
    blocks.push_back(std::move(block));
    total += n;
    out.provenance += (out.provenance.empty() ? "" : " + ") + images_path.filename().string();
  }
  out.cloud.points.resize(total, dim);
  Index at = 0;
  for (const auto& b : blocks) {
    out.cloud.points.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  if (sep == 0) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(sep, start);
    auto field = line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    out.push_back(field);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

LabeledDataset load_delimited(const std::filesystem::path& path, const DelimitedOptions& opt) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::input, "cannot open " + path.string());
  LabeledDataset out;
  out.name = path.filename().string();
  out.provenance = path.string();
  std::vector<double> values;
  Index cols = -1, rows = 0, lineno = 0;
  char sep = opt.separator;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (rows == 0 && opt.separator == 0) sep = line.find(',') != std::string::npos ? ',' : 0;
    const auto fields = split(line, sep);
    if (cols < 0) cols = static_cast<Index>(fields.size());
    if (static_cast<Index>(fields.size()) != cols)
      fail(ErrorKind::format, path.string() + ": line " + std::to_string(lineno) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " + std::to_string(cols));
    for (const auto f : fields) {
      double v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size())
        fail(ErrorKind::format, path.string() + ": non-numeric field '" + std::string(f) + "' on line " +
                                    std::to_string(lineno));
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::format, path.string() + ": no data rows");
  const Index label_col = !opt.has_labels ? -1 : (opt.label_column < 0 ? cols - 1 : opt.label_column);
  if (label_col >= cols) fail(ErrorKind::parameter, "label column out of range");
  const Index dim = opt.has_labels ? cols - 1 : cols;
  if (dim < 1) fail(ErrorKind::format, path.string() + ": no feature columns");
  out.cloud.points.resize(rows, dim);
  for (Index r = 0; r < rows; ++r) {
    Index d = 0;
    for (Index c = 0; c < cols; ++c) {
      const double v = values[static_cast<std::size_t>(r * cols + c)];
      if (c == label_col) {
        if (v < 0 || v != std::floor(v))
          fail(ErrorKind::format, path.string() + ": label on data row " + std::to_string(r + 1) +
                                      " is not a nonnegative integer");
        out.labels.push_back(static_cast<int>(v));
        out.classes = std::max(out.classes, static_cast<int>(v) + 1);
      } else {
        out.cloud.points(r, d++) = v;
      }
    }
  }
  return out;
}

namespace {
constexpr char embedding_magic[8] = {'V', 'M', 'B', 'O', '-', 'E', '1', '\0'};
}

PointCloud load_embedding(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  io::ByteReader in(bytes, path.string());
  if (std::memcmp(in.take(8), embedding_magic, 8) != 0)
    fail(ErrorKind::format, path.string() + ": bad magic at byte offset 0");
  const Index n = in.le<std::uint32_t>();
  const Index d = in.le<std::uint32_t>();
  in.need(static_cast<std::size_t>(n * d) * 4);
  PointCloud c;
  c.points.resize(n, d);
  for (Index x = 0; x < n; ++x)
    for (Index j = 0; j < d; ++j) c.points(x, j) = in.le<float>();
  if (in.remaining() != 0) fail(ErrorKind::format, path.string() + ": trailing bytes at offset " + std::to_string(in.offset()));
  return c;
}

void write_embedding(const std::filesystem::path& path, const PointCloud& cloud) {
  auto os = io::open_output(path);
  os.write(embedding_magic, 8);
  io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
  io::store_le<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.dim()));
  for (Index x = 0; x < cloud.size(); ++x)
    for (Index j = 0; j < cloud.dim(); ++j) io::store_le<float>(os, static_cast<float>(cloud.points(x, j)));
  if (!os) fail(ErrorKind::format, "failed writing " + path.string());
}

double accuracy(const Clustering& pred, const std::vector<int>& truth, LabelMap map) {
  const Index n = pred.size();
  if (static_cast<Index>(truth.size()) != n) fail(ErrorKind::parameter, "prediction and truth differ in length");
  if (n == 0) return 1.0;
  int classes = pred.clusters();
  for (int t : truth) classes = std::max(classes, t + 1);
  if (map == LabelMap::fixed) {
    Index hit = 0;
    for (Index x = 0; x < n; ++x) hit += pred[x] == truth[static_cast<std::size_t>(x)];
    return static_cast<double>(hit) / static_cast<double>(n);
  }
  // Rows are clusters, columns classes; one class per cluster.
  MatrixXd confusion = MatrixXd::Zero(classes, classes);
  for (Index x = 0; x < n; ++x) confusion(pred[x], truth[static_cast<std::size_t>(x)]) += 1.0;
  const auto best = oracle::mincostflow_optimum(confusion, ExactVolumes{std::vector<Index>(static_cast<std::size_t>(classes), 1)});
  return std::round(best.objective) / static_cast<double>(n);
}

}  // namespace vmbo
