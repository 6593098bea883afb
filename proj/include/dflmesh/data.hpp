#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dflmesh {

/// Row-aligned samples. Classification sets carry `labels` in [0, classes);
/// regression sets additionally carry real `targets`.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  std::vector<double> targets;
  int classes = 0;
  std::string name;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws CountMismatch / LabelOutOfRange.
  void validate() const;
};

using Shard = std::vector<std::size_t>;

struct Partition {
  std::vector<Shard> shards;

  std::size_t size() const { return shards.size(); }
  /// Pairwise disjoint, non-empty, in range.
  void validate(std::size_t rows) const;
};

// IDX: big-endian u32 magic, u32 dims, payload of u8.
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Pixels are scaled by 1/255; images are flattened row-major.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes features as a count x 1 x dims image tensor. Features outside
/// [0, 1] are min-max scaled first.
void write_idx(const Dataset& ds, const std::filesystem::path& images, const std::filesystem::path& labels);

/// Gaussian clusters with unit variance, one per class, centres pairwise
/// `cluster_sep` apart (exactly when dims >= classes). Labels cycle through
/// the classes so every class has the same count (+-1). `seed` fixes the
/// centres; `stream` selects an independent sample draw around them.
Dataset synthetic_classification(std::size_t n_samples, std::size_t dims, int classes, double cluster_sep,
                                 std::uint64_t seed, std::uint64_t stream = 0);

/// Linear-regression data in `groups` clusters: x = shift_g + N(0, I),
/// y = x . (w + spread * u_g) + noise * N(0, 1). labels hold the group id so
/// partition_by_label yields non-IID shards.
Dataset synthetic_regression(std::size_t n_samples, std::size_t dims, int groups, double group_shift,
                             double weight_spread, double noise, std::uint64_t seed, std::uint64_t stream = 0);

/// Random permutation split into `shards` near-equal parts.
Partition partition_iid(const Dataset& ds, std::size_t shards, std::uint64_t seed);

/// Classes dealt round-robin: with shards <= classes node i owns every class
/// c with c mod shards == i; with more shards than classes the rows of a
/// class are split among the nodes sharing it.
Partition partition_by_label(const Dataset& ds, std::size_t shards);

/// Per-class row counts of a shard.
std::vector<std::size_t> label_histogram(const Dataset& ds, const Shard& shard);

}  // namespace dflmesh
