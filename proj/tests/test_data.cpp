#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "vmbo/data.hpp"
#include "vmbo/errors.hpp"

using namespace vmbo;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "vmbo_test_data") { std::filesystem::create_directories(path); }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path operator/(const char* name) const { return path / name; }
};

void write_file(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

void be32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

// Two 2x3 images and their labels.
const std::vector<unsigned char> kPixels{0, 51, 102, 153, 204, 255, 255, 0, 255, 0, 255, 0};

std::vector<unsigned char> idx_images(std::uint32_t n = 2) {
  std::vector<unsigned char> b;
  be32(b, 0x00000803);
  be32(b, n);
  be32(b, 2);
  be32(b, 3);
  b.insert(b.end(), kPixels.begin(), kPixels.begin() + 6 * n);
  return b;
}

std::vector<unsigned char> idx_labels(std::vector<unsigned char> labels) {
  std::vector<unsigned char> b;
  be32(b, 0x00000801);
  be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

void expect_format_error(const std::function<void()>& f, const std::string& fragment) {
  try {
    f();
    FAIL("expected a format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
  }
}

}  // namespace

TEST_CASE("three moons with the default parameters") {
  const auto d = three_moons();
  CHECK(d.size() == 1500);
  CHECK(d.classes == 3);
  CHECK(d.cloud.dim() == 100);
  CHECK(d.class_sizes() == std::vector<Index>{500, 500, 500});
  d.validate();
  const auto again = three_moons();
  CHECK(d.cloud.points == again.cloud.points);
  CHECK(d.labels == again.labels);
  CHECK(three_moons(500, 0.14, 100, 1).cloud.points != d.cloud.points);
}

TEST_CASE("noise-free moons lie on their half circles") {
  const auto d = three_moons(200, 0.0, 5, 3);
  const double cx[] = {0.0, 3.0, 1.5}, cy[] = {0.0, 0.0, 0.4}, r[] = {1.0, 1.0, 1.5};
  for (Index x = 0; x < d.size(); ++x) {
    const int k = d.labels[static_cast<std::size_t>(x)];
    const double dx = d.cloud.points(x, 0) - cx[k], dy = d.cloud.points(x, 1) - cy[k];
    CHECK(std::abs(dx * dx + dy * dy - r[k] * r[k]) < 1e-12);
    // The first two open downward, the third upward.
    if (k < 2) CHECK(dy >= -1e-15);
    else CHECK(dy <= 1e-15);
    for (Index j = 2; j < 5; ++j) CHECK(d.cloud.points(x, j) == 0.0);
  }
  CHECK(three_moons(10, 0.1, 2, 0).cloud.dim() == 2);
  CHECK_THROWS_AS(three_moons(0), Error);
  CHECK_THROWS_AS(three_moons(10, -1.0), Error);
  CHECK_THROWS_AS(three_moons(10, 0.1, 1), Error);
}

TEST_CASE("moons are generated per moon from independent streams") {
  // Changing the size of one run leaves the first points of every moon intact.
  const auto a = three_moons(50, 0.14, 3, 9);
  const auto b = three_moons(80, 0.14, 3, 9);
  for (int k = 0; k < 3; ++k)
    for (Index i = 0; i < 50; ++i) CHECK(a.cloud.points.row(k * 50 + i) == b.cloud.points.row(k * 80 + i));
}

TEST_CASE("torus sample") {
  const auto d = torus_sample(2000, 4);
  CHECK(d.size() == 2000);
  CHECK(d.cloud.dim() == 4);
  for (Index x = 0; x < d.size(); ++x) {
    CHECK(d.cloud.points.row(x).head<2>().norm() == doctest::Approx(1.0));
    CHECK(d.cloud.points.row(x).tail<2>().norm() == doctest::Approx(1.0));
  }
  // The disk covers pi (pi/2)^2 of the (2 pi)^2 area.
  const double frac = static_cast<double>(d.class_sizes()[1]) / 2000.0;
  const double expect = std::numbers::pi / 16;
  CHECK(std::abs(frac - expect) < 4 * std::sqrt(expect * (1 - expect) / 2000));
  CHECK(torus_sample(100, 4).cloud.points == torus_sample(100, 4).cloud.points);
}

TEST_CASE("IDX fixture round trip") {
  TempDir dir;
  write_file(dir / "img", idx_images());
  write_file(dir / "lab", idx_labels({7, 2}));
  const auto d = load_idx({{dir / "img", dir / "lab"}});
  REQUIRE(d.size() == 2);
  REQUIRE(d.cloud.dim() == 6);
  for (Index x = 0; x < 2; ++x)
    for (Index j = 0; j < 6; ++j)
      CHECK(std::lround(d.cloud.points(x, j) * 255.0) == kPixels[static_cast<std::size_t>(x * 6 + j)]);
  CHECK(d.labels == std::vector<int>{7, 2});
  CHECK(d.classes == 8);

  const auto twice = load_idx({{dir / "img", dir / "lab"}, {dir / "img", dir / "lab"}});
  CHECK(twice.size() == 4);
  CHECK(twice.cloud.points.bottomRows(2) == d.cloud.points);
}

TEST_CASE("IDX format errors") {
  TempDir dir;
  write_file(dir / "lab", idx_labels({1, 0}));
  write_file(dir / "empty", {});
  expect_format_error([&] { load_idx({{dir / "empty", dir / "lab"}}); }, "offset 0");

  auto bad = idx_images();
  bad[3] = 0x01;
  write_file(dir / "magic", bad);
  expect_format_error([&] { load_idx({{dir / "magic", dir / "lab"}}); }, "magic");

  auto cut = idx_images();
  cut.resize(cut.size() - 4);
  write_file(dir / "cut", cut);
  expect_format_error([&] { load_idx({{dir / "cut", dir / "lab"}}); }, "truncated at byte offset 16");

  write_file(dir / "img", idx_images());
  write_file(dir / "few", idx_labels({1}));
  expect_format_error([&] { load_idx({{dir / "img", dir / "few"}}); }, "1 labels for 2 images");
  CHECK_THROWS_AS(load_idx({}), Error);
}

TEST_CASE("delimited text") {
  TempDir dir;
  write_text(dir / "a.csv", "1,2.5,0\n-3,4e-1,1\n\n5,6,1\n");
  const auto d = load_delimited(dir / "a.csv");
  REQUIRE(d.size() == 3);
  REQUIRE(d.cloud.dim() == 2);
  MatrixXd expect(3, 2);
  expect << 1, 2.5, -3, 0.4, 5, 6;
  CHECK(d.cloud.points == expect);
  CHECK(d.labels == std::vector<int>{0, 1, 1});

  write_text(dir / "ws.txt", "0  1 2\n1\t3 4\n");
  DelimitedOptions first;
  first.label_column = 0;
  const auto w = load_delimited(dir / "ws.txt", first);
  CHECK(w.labels == std::vector<int>{0, 1});
  CHECK(w.cloud.points(1, 1) == 4.0);

  write_text(dir / "one.csv", "0.5,0.25,3\n");
  DelimitedOptions plain;
  plain.has_labels = false;
  const auto one = load_delimited(dir / "one.csv", plain);
  CHECK(one.size() == 1);
  CHECK(one.cloud.dim() == 3);

  write_text(dir / "ragged.csv", "1,2,0\n3,4,1\n5,1\n");
  expect_format_error([&] { load_delimited(dir / "ragged.csv"); }, "line 3");
  write_text(dir / "nan.csv", "1,2,0\n3,x,1\n");
  expect_format_error([&] { load_delimited(dir / "nan.csv"); }, "line 2");
  write_text(dir / "blank.csv", "\n\n");
  expect_format_error([&] { load_delimited(dir / "blank.csv"); }, "no data rows");
  CHECK_THROWS_AS(load_delimited(dir / "missing.csv"), Error);
}

TEST_CASE("Opt-Digits test file") {
  const auto d = load_delimited(std::filesystem::path(VMBO_TEST_DATA) / "optdigits.tes");
  CHECK(d.size() == 1797);
  CHECK(d.cloud.dim() == 64);
  CHECK(d.classes == 10);
  CHECK(d.cloud.points.minCoeff() >= 0.0);
  CHECK(d.cloud.points.maxCoeff() <= 16.0);
  for (double v : d.cloud.points.reshaped()) CHECK(v == std::round(v));
}

TEST_CASE("embedding round trip") {
  TempDir dir;
  std::mt19937_64 rng(5);
  const auto cloud = vmbo::testing::random_cloud(7, 3, rng);
  write_embedding(dir / "e.bin", cloud);
  const auto back = load_embedding(dir / "e.bin");
  REQUIRE(back.size() == 7);
  REQUIRE(back.dim() == 3);
  CHECK(back.points.isApprox(cloud.points.cast<float>().cast<double>(), 0.0));
  CHECK(std::filesystem::file_size(dir / "e.bin") == 8 + 8 + 7 * 3 * 4);

  std::ifstream in(dir / "e.bin", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(std::memcmp(bytes.data(), "VMBO-E1\0", 8) == 0);
  auto cut = bytes;
  cut.pop_back();
  write_file(dir / "cut.bin", cut);
  expect_format_error([&] { load_embedding(dir / "cut.bin"); }, "truncated");
  auto magic = bytes;
  magic[0] = 'X';
  write_file(dir / "magic.bin", magic);
  expect_format_error([&] { load_embedding(dir / "magic.bin"); }, "magic");
  auto extra = bytes;
  extra.push_back(0);
  write_file(dir / "extra.bin", extra);
  expect_format_error([&] { load_embedding(dir / "extra.bin"); }, "trailing");
}

TEST_CASE("accuracy") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2};
  CHECK(accuracy(Clustering(truth, 3), truth) == 1.0);
  const Clustering swapped({1, 1, 0, 0, 2, 2}, 3);
  CHECK(accuracy(swapped, truth) == doctest::Approx(1.0 / 3));
  CHECK(accuracy(swapped, truth, LabelMap::best_match) == 1.0);
  const Clustering one_off({1, 0, 0, 0, 2, 2}, 3);
  CHECK(accuracy(one_off, truth, LabelMap::best_match) == doctest::Approx(5.0 / 6));
  CHECK_THROWS_AS(accuracy(swapped, {0, 1}), Error);
}

TEST_CASE("random predictions score about 1/P") {
  std::mt19937_64 rng(6);
  for (int p : {2, 3, 5, 10}) {
    const Index n = 3000;
    std::vector<int> truth(static_cast<std::size_t>(n));
    for (Index x = 0; x < n; ++x) truth[static_cast<std::size_t>(x)] = static_cast<int>(x % p);
    const double sd = std::sqrt((1.0 / p) * (1 - 1.0 / p) / static_cast<double>(n));
    for (int t = 0; t < 5; ++t) {
      const auto pred = vmbo::testing::random_clustering(n, p, rng);
      CHECK(std::abs(accuracy(pred, truth) - 1.0 / p) < 3 * sd);
    }
  }
}
