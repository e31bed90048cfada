#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pdl/bounds.hpp"
#include "pdl/dataio.hpp"

using namespace pdl;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pdl_dataio_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

IdxDataset balanced_fixture(std::size_t per_class) {
  IdxDataset ds;
  ds.rows = 2;
  ds.cols = 3;
  for (std::size_t i = 0; i < per_class * 10; ++i) {
    ds.labels.push_back(static_cast<std::uint8_t>((i * 7) % 10));
    for (std::size_t p = 0; p < 6; ++p) ds.pixels.push_back(static_cast<std::uint8_t>((i * 31 + p * 17) % 256));
  }
  return ds;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synthetic tasks are valid and deterministic") {
  SyntheticTaskSpec spec{6, 4, 5, 1.0, 42};
  const auto a = make_synthetic(spec);
  const auto b = make_synthetic(spec);
  CHECK(a.joint() == b.joint());
  CHECK(a.embeddings() == b.embeddings());
  for (std::size_t x = 0; x < 6; ++x) {
    CHECK(a.marginal_x(x) == Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(norm2(a.embedding(x)) == Approx(1.0).epsilon(1e-12));
    CHECK(a.embedding(x).size() == 5);
  }
  spec.seed = 43;
  CHECK_FALSE(make_synthetic(spec).joint() == a.joint());
  CHECK_THROWS_AS(make_synthetic({1, 3, 2, 1.0, 0}), InvalidInput);
  CHECK_THROWS_AS(make_synthetic({3, 3, 2, -1.0, 0}), InvalidInput);
}

TEST_CASE("zero sharpness gives deterministic labels") {
  const auto q = make_synthetic({8, 3, 4, 0.0, 5});
  CHECK(shannon_terms(q).cond_ent == 0.0);
  for (std::size_t x = 0; x < 8; ++x) {
    const auto c = q.conditional(x);
    int ones = 0;
    for (double p : c.entries()) ones += p == 1.0 ? 1 : 0;
    CHECK(ones == 1);
  }
}

TEST_CASE("large concentration drives mutual information toward zero") {
  double prev = INFINITY;
  for (double conc : {1.0, 10.0, 100.0, 10000.0}) {
    const double mi = shannon_terms(make_synthetic({10, 4, 3, conc, 7})).mut_info;
    UNSCOPED_INFO("concentration " << conc << ": I(X;Y) = " << mi);
    CHECK(mi < prev);
    prev = mi;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("sampling is deterministic and follows the joint") {
  Matrix point(2, 2);
  point(1, 0) = 1.0;
  const FinitePD pq(point, {{0.0}, {1.0}});
  for (const auto& s : sample(pq, 100, 3)) {
    CHECK(s.x == 1);
    CHECK(s.y == 0);
  }

  Matrix u(2, 2);
  for (std::size_t i = 0; i < 4; ++i) u(i / 2, i % 2) = 0.25;
  const FinitePD uq(u, {{0.0}, {1.0}});
  const auto draws = sample(uq, 100000, 11);
  const auto e = empirical_from_samples(draws, 2, 2);
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 2; ++y) CHECK(std::abs(static_cast<double>(e.count(x, y)) / 1e5 - 0.25) <= 0.01);
  const auto again = sample(uq, 100000, 11);
  CHECK(std::equal(draws.begin(), draws.end(), again.begin(),
                   [](const LabeledPair& a, const LabeledPair& b) { return a.x == b.x && a.y == b.y; }));
  CHECK_THROWS_AS(sample(uq, 0, 1), InvalidInput);
}

TEST_CASE("L1 concentration on the uniform 2x2 task") {
  Matrix u(2, 2);
  for (std::size_t i = 0; i < 4; ++i) u(i / 2, i % 2) = 0.25;
  const FinitePD q(u, {{0.0}, {1.0}});
  for (std::uint64_t n : {200u, 1000u, 5000u}) {
    const double from = std::sqrt(80.0 / static_cast<double>(n));
    const auto r = l1_concentration_check(q, n, 1000, {from, 1.25 * from, 1.5 * from, 2.0 * from}, 100 + n);
    for (bool v : r.valid) CHECK(v);
    CHECK(r.holds());
  }
}

TEST_CASE("IDX fixture round-trips exactly") {
  TempDir dir;
  IdxDataset ds;
  ds.rows = 28;
  ds.cols = 28;
  ds.labels = {3, 9};
  for (std::size_t i = 0; i < 2 * 784; ++i) ds.pixels.push_back(static_cast<std::uint8_t>(i % 256));
  const auto img = dir.file("img.idx"), lab = dir.file("lab.idx");
  write_idx(ds, img, lab);
  const auto back = load_idx(img, lab);
  CHECK(back == ds);
  CHECK(back.image(1)[0] == Approx(static_cast<double>(784 % 256) / 255.0));
  CHECK(back.image(0)[255] == 1.0);

  const auto bytes_img = read_bytes(img), bytes_lab = read_bytes(lab);
  write_idx(back, dir.file("img2.idx"), dir.file("lab2.idx"));
  CHECK(read_bytes(dir.file("img2.idx")) == bytes_img);
  CHECK(read_bytes(dir.file("lab2.idx")) == bytes_lab);
  CHECK(bytes_img.size() == 16 + 2 * 784);
  CHECK(bytes_img[3] == 0x03);
  CHECK(bytes_lab[3] == 0x01);
}

TEST_CASE("IDX format errors") {
  TempDir dir;
  const auto ds = balanced_fixture(1);
  const auto img = dir.file("img.idx"), lab = dir.file("lab.idx");
  write_idx(ds, img, lab);
  auto good_img = read_bytes(img);
  auto good_lab = read_bytes(lab);

  auto bad = good_img;
  bad[3] = 0x01;
  write_bytes(dir.file("badmagic.idx"), bad);
  try {
    load_idx(dir.file("badmagic.idx"), lab);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 0x803") != std::string::npos);
    CHECK(msg.find("found 0x801") != std::string::npos);
  }

  auto trunc = good_img;
  trunc.resize(trunc.size() - 5);
  write_bytes(dir.file("trunc.idx"), trunc);
  CHECK_THROWS_AS(load_idx(dir.file("trunc.idx"), lab), FormatError);

  auto short_lab = good_lab;
  short_lab[7] = static_cast<std::uint8_t>(short_lab[7] - 1);
  short_lab.pop_back();
  write_bytes(dir.file("lab9.idx"), short_lab);
  try {
    load_idx(img, dir.file("lab9.idx"));
    FAIL("expected a count mismatch");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("differs from label count") != std::string::npos);
  }

  auto big_label = good_lab;
  big_label[8] = 10;
  write_bytes(dir.file("lab10.idx"), big_label);
  CHECK_THROWS_AS(load_idx(img, dir.file("lab10.idx")), FormatError);

  CHECK_THROWS_AS(load_idx(dir.file("missing.idx"), lab), FormatError);
  write_bytes(dir.file("tiny.idx"), {0, 0});
  CHECK_THROWS_AS(load_idx(dir.file("tiny.idx"), lab), FormatError);
}

TEST_CASE("subsampling is balanced and deterministic") {
  const auto ds = balanced_fixture(5);
  const auto one = subsample(ds, 1, 3);
  CHECK(one.size() == 10);
  const auto three = subsample(ds, 3, 9);
  std::array<int, 10> hist{};
  for (auto l : three.labels) ++hist[l];
  for (int h : hist) CHECK(h == 3);
  CHECK(subsample(ds, 3, 9) == three);
  CHECK_FALSE(subsample(ds, 3, 10) == three);
  CHECK_THROWS_AS(subsample(ds, 6, 1), InvalidInput);
  CHECK_THROWS_AS(subsample(ds, 0, 1), InvalidInput);

  const auto data = to_labeled_data(three);
  CHECK(data.size() == 30);
  CHECK(data.inputs[0].size() == 6);
}
