#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dflmesh/data.hpp"
#include "dflmesh/error.hpp"
#include "dflmesh/models.hpp"
#include "dflmesh/rng.hpp"

using namespace dflmesh;
namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<unsigned char>(v >> shift));
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dflmesh_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Four 28x28 images with pixel (r, c) of image k equal to (k * 31 + r * 7 + c) % 256.
std::vector<unsigned char> image_fixture() {
  std::vector<unsigned char> out;
  put_u32(out, 0x803);
  put_u32(out, 4);
  put_u32(out, 28);
  put_u32(out, 28);
  for (int k = 0; k < 4; ++k)
    for (int r = 0; r < 28; ++r)
      for (int c = 0; c < 28; ++c) out.push_back(static_cast<unsigned char>((k * 31 + r * 7 + c) % 256));
  return out;
}

std::vector<unsigned char> label_fixture(std::uint32_t magic = 0x801, std::uint32_t count = 4) {
  std::vector<unsigned char> out;
  put_u32(out, magic);
  put_u32(out, count);
  for (std::uint32_t k = 0; k < count; ++k) out.push_back(static_cast<unsigned char>(k % 3));
  return out;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Config;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("IDX fixture round trip") {
    const auto img = scratch("img.idx");
    const auto lab = scratch("lab.idx");
    const auto bytes = image_fixture();
    write_bytes(img, bytes);
    write_bytes(lab, label_fixture());
    const Dataset ds = load_idx(img, lab);
    CHECK(ds.rows() == 4);
    CHECK(ds.dims() == 784);
    CHECK(ds.features.minCoeff() >= 0.0);
    CHECK(ds.features.maxCoeff() <= 1.0);
    CHECK(ds.labels == std::vector<int>{0, 1, 2, 0});
    bool exact = true;
    for (int k = 0; k < 4; ++k)
      for (int p = 0; p < 784; ++p)
        exact = exact && std::lround(ds.features(k, p) * 255.0) == bytes[16 + static_cast<std::size_t>(k * 784 + p)];
    CHECK(exact);

    const auto img2 = scratch("img2.idx");
    const auto lab2 = scratch("lab2.idx");
    write_idx(ds, img2, lab2);
    const Dataset again = load_idx(img2, lab2);
    CHECK((again.features - ds.features).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(again.labels == ds.labels);
  }

  TEST_CASE("IDX error paths") {
    const auto img = scratch("e_img.idx");
    const auto lab = scratch("e_lab.idx");
    write_bytes(img, image_fixture());
    write_bytes(lab, label_fixture(0x803));
    CHECK(kind_of([&] { load_idx(img, lab); }) == ErrorKind::BadMagic);
    write_bytes(lab, label_fixture(0x801, 3));
    CHECK(kind_of([&] { load_idx(img, lab); }) == ErrorKind::CountMismatch);
    write_bytes(lab, {});
    CHECK(kind_of([&] { load_idx(img, lab); }) == ErrorKind::Truncated);
    auto cut = image_fixture();
    cut.resize(cut.size() - 10);
    write_bytes(img, cut);
    write_bytes(lab, label_fixture());
    CHECK(kind_of([&] { load_idx(img, lab); }) == ErrorKind::Truncated);
    CHECK(kind_of([&] { load_idx(scratch("missing.idx"), lab); }) == ErrorKind::Io);
  }

  TEST_CASE("synthetic classification") {
    const Dataset a = synthetic_classification(200, 5, 4, 3.0, 7);
    const Dataset b = synthetic_classification(200, 5, 4, 3.0, 7);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK_NOTHROW(a.validate());
    const auto hist = label_histogram(a, all_rows(a));
    for (auto h : hist) CHECK(h == 50);
    CHECK_THROWS_AS(synthetic_classification(10, 2, 1, 1.0, 0), Error);

    const Dataset easy = synthetic_classification(400, 2, 2, 10.0, 3);
    const Dataset easy_test = synthetic_classification(400, 2, 2, 10.0, 3, 1);
    const auto obj = logistic_regression(2, 0.0);
    Vector w = Vector::Zero(3);
    const auto rows = all_rows(easy);
    for (int it = 0; it < 300; ++it) w -= 0.5 * obj->gradient(w, easy, rows);
    CHECK(accuracy(*obj, w, easy_test) >= 0.99);

    const Dataset blur = synthetic_classification(2000, 2, 4, 0.0, 3);
    const Dataset blur_test = synthetic_classification(4000, 2, 4, 0.0, 3, 1);
    const auto mlp = mlp_classifier(2, 8, 4);
    Vector v = mlp->initial_params(1);
    const auto brows = all_rows(blur);
    for (int it = 0; it < 100; ++it) v -= 0.5 * mlp->gradient(v, blur, brows);
    CHECK(std::abs(accuracy(*mlp, v, blur_test) - 0.25) < 0.05);
  }

  TEST_CASE("iid partition") {
    const Dataset ds = synthetic_classification(1000, 3, 10, 2.0, 1);
    const Partition one = partition_iid(ds, 1, 3);
    CHECK(one.shards.size() == 1);
    CHECK(one.shards[0].size() == 1000);
    const Partition p = partition_iid(ds, 10, 3);
    std::set<std::size_t> seen;
    for (const auto& s : p.shards) {
      CHECK(s.size() == 100);
      for (auto r : s) CHECK(seen.insert(r).second);
    }
    CHECK(seen.size() == 1000);
    CHECK_NOTHROW(p.validate(ds.rows()));
    CHECK_THROWS_AS(partition_iid(ds, 1001, 3), Error);
    CHECK_THROWS_AS(partition_iid(ds, 0, 3), Error);

    // Each class count in a 100-row shard is hypergeometric around 10.
    const double sd = std::sqrt(100 * 0.1 * 0.9);
    int outside = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (const auto& s : partition_iid(ds, 10, seed).shards) {
        for (auto h : label_histogram(ds, s)) outside += std::abs(static_cast<double>(h) - 10.0) > 3 * sd;
      }
    }
    CHECK(outside <= 2);
  }

  TEST_CASE("label partition") {
    const Dataset ds = synthetic_classification(500, 3, 10, 2.0, 1);
    const Partition p = partition_by_label(ds, 10);
    std::size_t total = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      for (auto r : p.shards[i]) CHECK(ds.labels[r] == static_cast<int>(i));
      total += p.shards[i].size();
    }
    CHECK(total == 500);
    CHECK_NOTHROW(p.validate(ds.rows()));

    const Partition five = partition_by_label(ds, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      for (auto r : five.shards[i]) CHECK(static_cast<std::size_t>(ds.labels[r]) % 5 == i);
    }
    const Partition twenty = partition_by_label(ds, 20);
    CHECK_NOTHROW(twenty.validate(ds.rows()));
    for (std::size_t i = 0; i < 20; ++i) {
      for (auto r : twenty.shards[i]) CHECK(static_cast<std::size_t>(ds.labels[r]) == i % 10);
    }

    Dataset gap = ds;
    for (auto& y : gap.labels) y = y == 3 ? 4 : y;
    CHECK_THROWS_AS(partition_by_label(gap, 10), Error);
  }

  TEST_CASE("label shards are more heterogeneous than iid shards") {
    const Dataset ds = synthetic_classification(600, 6, 6, 3.0, 2);
    const auto mlp = mlp_classifier(6, 8, 6);
    const Vector w0 = mlp->initial_params(0);
    const std::vector<Vector> points{w0};
    const auto iid = estimate_constants(*mlp, ds, partition_iid(ds, 6, 1), points, 0, 1);
    const auto label = estimate_constants(*mlp, ds, partition_by_label(ds, 6), points, 0, 1);
    CHECK(label.zeta > iid.zeta);
  }
}
