#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace fedar {

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kGlobalOwner = -1;

/// A set of labelled samples. Rows of `features` line up with `labels`.
struct Shard {
  FeatureMatrix features;
  std::vector<int> labels;
  int owner = kGlobalOwner;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Copies the given rows of `source` into a new shard.
Shard subset(const Shard& source, std::span<const std::size_t> rows,
             int owner = kGlobalOwner);

/// Stacks shards vertically. All inputs must share a feature dimension.
Shard concatenate(std::span<const Shard> parts, int owner = kGlobalOwner);

/// One past the largest label present (0 for an empty shard).
int label_bound(const Shard& shard);

}  // namespace fedar
