#include "dflmesh/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "dflmesh/error.hpp"
#include "dflmesh/rng.hpp"

namespace dflmesh {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_u32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& what) {
  if (buf.size() < offset + 4) throw Error(ErrorKind::Truncated, what + ": header too short");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

// Orthonormal directions via Gram-Schmidt on Gaussian draws; falls back to
// plain random unit vectors once the dimension is exhausted.
std::vector<Eigen::VectorXd> random_directions(std::size_t count, std::size_t dims, Rng& rng) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t c = 0; c < count; ++c) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dims));
    for (auto& x : v) x = rng.normal();
    if (c < dims) {
      for (const auto& u : out) v -= v.dot(u) * u;
    }
    out.push_back(v.normalized());
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (labels.size() != rows()) throw Error(ErrorKind::CountMismatch, "labels do not match feature rows");
  if (!targets.empty() && targets.size() != rows()) {
    throw Error(ErrorKind::CountMismatch, "targets do not match feature rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(y));
  }
}

void Partition::validate(std::size_t rows) const {
  std::vector<bool> seen(rows, false);
  for (std::size_t s = 0; s < shards.size(); ++s) {
    if (shards[s].empty()) throw Error(ErrorKind::InvalidArgument, "shard " + std::to_string(s) + " is empty");
    for (std::size_t r : shards[s]) {
      if (r >= rows) throw Error(ErrorKind::InvalidArgument, "row index out of range");
      if (seen[r]) throw Error(ErrorKind::InvalidArgument, "row " + std::to_string(r) + " in two shards");
      seen[r] = true;
    }
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);
  if (read_u32(img, 0, "images") != kIdxImagesMagic) throw Error(ErrorKind::BadMagic, images.string());
  if (read_u32(lab, 0, "labels") != kIdxLabelsMagic) throw Error(ErrorKind::BadMagic, labels.string());
  const std::size_t count = read_u32(img, 4, "images");
  const std::size_t h = read_u32(img, 8, "images");
  const std::size_t w = read_u32(img, 12, "images");
  const std::size_t label_count = read_u32(lab, 4, "labels");
  if (count != label_count) {
    throw Error(ErrorKind::CountMismatch,
                std::to_string(count) + " images vs " + std::to_string(label_count) + " labels");
  }
  const std::size_t dims = h * w;
  if (img.size() < 16 + count * dims) throw Error(ErrorKind::Truncated, images.string());
  if (lab.size() < 8 + count) throw Error(ErrorKind::Truncated, labels.string());

  Dataset ds;
  ds.name = images.filename().string();
  ds.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dims));
  ds.labels.resize(count);
  int max_label = -1;
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t c = 0; c < dims; ++c) {
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = img[16 + r * dims + c] / 255.0;
    }
    ds.labels[r] = lab[8 + r];
    max_label = std::max(max_label, ds.labels[r]);
  }
  ds.classes = max_label + 1;
  return ds;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images, const std::filesystem::path& labels) {
  ds.validate();
  double lo = 0.0;
  double hi = 1.0;
  if (ds.rows() > 0 && (ds.features.minCoeff() < 0.0 || ds.features.maxCoeff() > 1.0)) {
    lo = ds.features.minCoeff();
    hi = ds.features.maxCoeff();
    if (hi <= lo) hi = lo + 1.0;
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error(ErrorKind::Io, "cannot write IDX output");
  write_u32(img, kIdxImagesMagic);
  write_u32(img, static_cast<std::uint32_t>(ds.rows()));
  write_u32(img, 1);
  write_u32(img, static_cast<std::uint32_t>(ds.dims()));
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      const double v = (ds.features(r, c) - lo) / (hi - lo);
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
  }
  write_u32(lab, kIdxLabelsMagic);
  write_u32(lab, static_cast<std::uint32_t>(ds.rows()));
  for (int y : ds.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
}

Dataset synthetic_classification(std::size_t n_samples, std::size_t dims, int classes, double cluster_sep,
                                 std::uint64_t seed, std::uint64_t stream) {
  if (classes < 2) throw Error(ErrorKind::InvalidArgument, "need at least two classes");
  if (dims == 0) throw Error(ErrorKind::InvalidArgument, "need at least one feature");
  Rng center_rng(child_seed(seed, 0xC3));
  auto centers = random_directions(static_cast<std::size_t>(classes), dims, center_rng);
  for (auto& c : centers) c *= cluster_sep / std::sqrt(2.0);

  Rng rng(child_seed(seed, 0x5A, stream));
  Dataset ds;
  ds.name = "synthetic_classification";
  ds.classes = classes;
  ds.features.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dims));
  ds.labels.resize(n_samples);
  for (std::size_t r = 0; r < n_samples; ++r) {
    const int y = static_cast<int>(r % static_cast<std::size_t>(classes));
    ds.labels[r] = y;
    for (std::size_t c = 0; c < dims; ++c) {
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          centers[static_cast<std::size_t>(y)](static_cast<Eigen::Index>(c)) + rng.normal();
    }
  }
  return ds;
}

Dataset synthetic_regression(std::size_t n_samples, std::size_t dims, int groups, double group_shift,
                             double weight_spread, double noise, std::uint64_t seed, std::uint64_t stream) {
  if (groups < 1) throw Error(ErrorKind::InvalidArgument, "need at least one group");
  if (dims == 0) throw Error(ErrorKind::InvalidArgument, "need at least one feature");
  Rng model_rng(child_seed(seed, 0x7E));
  Eigen::VectorXd w(static_cast<Eigen::Index>(dims));
  for (auto& x : w) x = model_rng.normal();
  std::vector<Eigen::VectorXd> shifts;
  std::vector<Eigen::VectorXd> weights;
  for (int g = 0; g < groups; ++g) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(dims));
    Eigen::VectorXd u(static_cast<Eigen::Index>(dims));
    for (auto& x : s) x = model_rng.normal();
    for (auto& x : u) x = model_rng.normal();
    shifts.push_back(group_shift * s.normalized());
    weights.push_back(w + weight_spread * u);
  }

  Rng rng(child_seed(seed, 0x5B, stream));
  Dataset ds;
  ds.name = "synthetic_regression";
  ds.classes = groups;
  ds.features.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dims));
  ds.labels.resize(n_samples);
  ds.targets.resize(n_samples);
  for (std::size_t r = 0; r < n_samples; ++r) {
    const auto g = r % static_cast<std::size_t>(groups);
    ds.labels[r] = static_cast<int>(g);
    Eigen::VectorXd x(static_cast<Eigen::Index>(dims));
    for (auto& v : x) v = rng.normal();
    x += shifts[g];
    ds.features.row(static_cast<Eigen::Index>(r)) = x.transpose();
    ds.targets[r] = x.dot(weights[g]) + noise * rng.normal();
  }
  return ds;
}

Partition partition_iid(const Dataset& ds, std::size_t shards, std::uint64_t seed) {
  if (shards == 0) throw Error(ErrorKind::InvalidArgument, "need at least one shard");
  if (shards > ds.rows()) throw Error(ErrorKind::InvalidArgument, "more shards than rows");
  std::vector<std::size_t> perm(ds.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  Partition p;
  p.shards.resize(shards);
  const std::size_t base = ds.rows() / shards;
  const std::size_t extra = ds.rows() % shards;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    p.shards[s].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                       perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return p;
}

Partition partition_by_label(const Dataset& ds, std::size_t shards) {
  if (shards == 0) throw Error(ErrorKind::InvalidArgument, "need at least one shard");
  const auto classes = static_cast<std::size_t>(ds.classes);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t r = 0; r < ds.rows(); ++r) by_class.at(static_cast<std::size_t>(ds.labels[r])).push_back(r);
  for (std::size_t c = 0; c < classes; ++c) {
    if (by_class[c].empty()) throw Error(ErrorKind::InvalidArgument, "class " + std::to_string(c) + " has no rows");
  }
  Partition p;
  p.shards.resize(shards);
  if (shards <= classes) {
    for (std::size_t c = 0; c < classes; ++c) {
      auto& shard = p.shards[c % shards];
      shard.insert(shard.end(), by_class[c].begin(), by_class[c].end());
    }
  } else {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::size_t> owners;
      for (std::size_t i = c; i < shards; i += classes) owners.push_back(i);
      for (std::size_t k = 0; k < by_class[c].size(); ++k) p.shards[owners[k % owners.size()]].push_back(by_class[c][k]);
    }
  }
  for (auto& s : p.shards) std::sort(s.begin(), s.end());
  p.validate(ds.rows());
  return p;
}

std::vector<std::size_t> label_histogram(const Dataset& ds, const Shard& shard) {
  std::vector<std::size_t> h(static_cast<std::size_t>(ds.classes), 0);
  for (std::size_t r : shard) ++h.at(static_cast<std::size_t>(ds.labels.at(r)));
  return h;
}

}  // namespace dflmesh
