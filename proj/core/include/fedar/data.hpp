#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include "fedar/rng.hpp"
#include "fedar/shard.hpp"

namespace fedar {

/// Which training rows each client owns.
struct PartitionPlan {
  std::vector<std::vector<std::size_t>> assignments;
  std::size_t classes_per_client = 2;

  std::size_t num_clients() const { return assignments.size(); }
};

/// Reads an IDX image file (magic 0x00000803) and its IDX label file
/// (magic 0x00000801). Pixels are scaled to [0, 1]; each image is one row.
Shard load_idx(const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// Reads a CSV file with a header row. The column named "label" holds the
/// class index; every other column is a numeric feature.
Shard load_csv(const std::filesystem::path& path);

/// Isotropic unit-variance Gaussian blobs, one per class. Class means sit on
/// a random orthonormal frame (when num_classes <= input_dim) scaled so that
/// any two means are `separation` apart.
Shard synth_classes(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                    double separation, RngStream rng);

/// Label-sharded non-IID partition. Rows are grouped by label and each label
/// is cut into contiguous blocks whose sizes differ by at most one; blocks are
/// apportioned so the largest block is as small as possible. Blocks are then
/// dealt classes_per_client at a time to clients in a seeded random order,
/// with swaps so no client holds two blocks of the same label.
///
/// Throws PartitionError when the data cannot be cut into
/// num_clients * classes_per_client label-homogeneous blocks.
PartitionPlan shard_two_class(const Shard& dataset, std::size_t num_clients,
                              std::size_t classes_per_client, RngStream rng);

/// Stratified split into (train, test); the test side has ceil(n * fraction)
/// rows with per-label counts apportioned by largest remainder.
std::pair<Shard, Shard> train_test_split(const Shard& shard, double test_fraction,
                                         RngStream rng);

}  // namespace fedar
