#include "fedar/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "fedar/errors.hpp"

namespace fedar {

// ---------------------------------------------------------------------------
// Shard helpers

Shard subset(const Shard& source, std::span<const std::size_t> rows, int owner) {
  Shard out;
  out.owner = owner;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), source.features.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= source.size()) throw DataError("subset row index out of range");
    out.features.row(static_cast<Eigen::Index>(i)) =
        source.features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels[i] = source.labels[rows[i]];
  }
  return out;
}

Shard concatenate(std::span<const Shard> parts, int owner) {
  Shard out;
  out.owner = owner;
  std::size_t total = 0;
  Eigen::Index cols = parts.empty() ? 0 : parts.front().features.cols();
  for (const Shard& p : parts) {
    if (p.features.cols() != cols) throw DataError("concatenate: feature dimensions differ");
    total += p.size();
  }
  out.features.resize(static_cast<Eigen::Index>(total), cols);
  out.labels.reserve(total);
  Eigen::Index row = 0;
  for (const Shard& p : parts) {
    out.features.middleRows(row, p.features.rows()) = p.features;
    row += p.features.rows();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

int label_bound(const Shard& shard) {
  int bound = 0;
  for (int y : shard.labels) bound = std::max(bound, y + 1);
  return bound;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw FormatError(fmt::format("'{}': truncated IDX header", path.string()));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Shard load_idx(const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  const auto images = read_bytes(images_path);
  const auto labels = read_bytes(labels_path);

  const std::uint32_t image_magic = read_be32(images, 0, images_path);
  if (image_magic != kIdxImageMagic) {
    throw FormatError(fmt::format("'{}': bad IDX image magic 0x{:08x}", images_path.string(),
                                  image_magic));
  }
  const std::uint32_t label_magic = read_be32(labels, 0, labels_path);
  if (label_magic != kIdxLabelMagic) {
    throw FormatError(fmt::format("'{}': bad IDX label magic 0x{:08x}", labels_path.string(),
                                  label_magic));
  }

  const std::size_t count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  if (count != label_count) {
    throw FormatError(fmt::format("image count {} does not match label count {}", count,
                                  label_count));
  }
  const std::size_t pixels = rows * cols;
  if (images.size() != 16 + count * pixels) {
    throw FormatError(fmt::format("'{}': expected {} bytes, found {}", images_path.string(),
                                  16 + count * pixels, images.size()));
  }
  if (labels.size() != 8 + count) {
    throw FormatError(fmt::format("'{}': expected {} bytes, found {}", labels_path.string(),
                                  8 + count, labels.size()));
  }

  Shard out;
  out.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* px = images.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) {
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(px[j]) / 255.0;
    }
    out.labels[i] = labels[8 + i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) {
      f.remove_suffix(1);
    }
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw FormatError(fmt::format("line {}: '{}' is not a finite number", line_no, field));
  }
  return value;
}

}  // namespace

Shard load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));

  std::string line;
  if (!std::getline(in, line)) throw FormatError(fmt::format("'{}': missing header", path.string()));
  const auto header = split_fields(line);
  const auto label_it = std::find(header.begin(), header.end(), std::string_view("label"));
  if (label_it == header.end()) {
    throw FormatError(fmt::format("'{}': no column named 'label'", path.string()));
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t width = header.size();

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != width) {
      throw FormatError(fmt::format("line {}: expected {} fields, found {}", line_no, width,
                                    fields.size()));
    }
    for (std::size_t j = 0; j < width; ++j) {
      const double v = parse_double(fields[j], line_no);
      if (j == label_col) {
        if (v < 0 || v != std::floor(v)) {
          throw FormatError(fmt::format("line {}: label must be a nonnegative integer", line_no));
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  Shard out;
  const auto n = static_cast<Eigen::Index>(labels.size());
  out.features = Eigen::Map<FeatureMatrix>(values.data(), n, static_cast<Eigen::Index>(width - 1));
  out.labels = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic blobs

Shard synth_classes(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                    double separation, RngStream rng) {
  if (num_classes == 0 || per_class == 0 || input_dim == 0) {
    throw ConfigError("synth_classes: counts must be >= 1");
  }
  if (!(separation >= 0.0)) throw ConfigError("synth_classes: separation must be >= 0");

  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto c = static_cast<Eigen::Index>(num_classes);
  Eigen::MatrixXd directions(d, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) directions(i, j) = rng.normal();
  }
  Eigen::MatrixXd frame(d, c);
  if (c <= d) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(directions);
    frame = qr.householderQ() * Eigen::MatrixXd::Identity(d, c);
  } else {
    frame = directions.colwise().normalized();
  }
  const Eigen::MatrixXd means = frame * (separation / std::sqrt(2.0));

  Shard out;
  out.features.resize(c * static_cast<Eigen::Index>(per_class), d);
  out.labels.resize(num_classes * per_class);
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < c; ++k) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      for (Eigen::Index i = 0; i < d; ++i) out.features(row, i) = means(i, k) + rng.normal();
      out.labels[static_cast<std::size_t>(row)] = static_cast<int>(k);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partitioning

namespace {

std::map<int, std::vector<std::size_t>> rows_by_label(const Shard& shard) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < shard.size(); ++i) groups[shard.labels[i]].push_back(i);
  return groups;
}

struct Block {
  int label;
  std::vector<std::size_t> rows;
};

}  // namespace

PartitionPlan shard_two_class(const Shard& dataset, std::size_t num_clients,
                              std::size_t classes_per_client, RngStream rng) {
  if (num_clients == 0) throw PartitionError("num_clients must be >= 1");
  if (classes_per_client == 0) throw PartitionError("classes_per_client must be >= 1");
  if (dataset.empty()) throw PartitionError("cannot partition an empty dataset");

  PartitionPlan plan;
  plan.classes_per_client = classes_per_client;
  if (num_clients == 1) {
    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    plan.assignments.push_back(std::move(all));
    return plan;
  }

  const auto groups = rows_by_label(dataset);
  const std::size_t num_labels = groups.size();
  if (num_labels < classes_per_client) {
    throw PartitionError(fmt::format("dataset has {} labels, fewer than classes_per_client = {}",
                                     num_labels, classes_per_client));
  }
  const std::size_t num_blocks = num_clients * classes_per_client;
  if (num_blocks < num_labels) {
    throw PartitionError(fmt::format("{} blocks cannot cover {} labels", num_blocks, num_labels));
  }

  // Apportion blocks to labels, always splitting the label whose blocks are
  // currently largest.
  std::vector<int> label_ids;
  std::vector<std::size_t> counts;
  for (const auto& [label, rows] : groups) {
    label_ids.push_back(label);
    counts.push_back(rows.size());
  }
  std::vector<std::size_t> blocks_per_label(num_labels, 1);
  for (std::size_t extra = num_labels; extra < num_blocks; ++extra) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < num_labels; ++l) {
      if (counts[l] * blocks_per_label[best] > counts[best] * blocks_per_label[l]) best = l;
    }
    ++blocks_per_label[best];
  }

  std::vector<Block> blocks;
  blocks.reserve(num_blocks);
  for (std::size_t l = 0; l < num_labels; ++l) {
    const std::size_t b = blocks_per_label[l];
    if (b > counts[l]) {
      throw PartitionError(fmt::format("label {} has {} samples, too few for {} blocks",
                                       label_ids[l], counts[l], b));
    }
    if (b > num_clients) {
      throw PartitionError(fmt::format(
          "label {} needs {} blocks but only {} clients can hold distinct labels", label_ids[l],
          b, num_clients));
    }
    const auto& rows = groups.at(label_ids[l]);
    const std::size_t base = counts[l] / b;
    const std::size_t rem = counts[l] % b;
    std::size_t start = 0;
    for (std::size_t k = 0; k < b; ++k) {
      const std::size_t len = base + (k < rem ? 1 : 0);
      blocks.push_back({label_ids[l], {rows.begin() + static_cast<std::ptrdiff_t>(start),
                                       rows.begin() + static_cast<std::ptrdiff_t>(start + len)}});
      start += len;
    }
  }

  // slot s belongs to client s / classes_per_client
  std::vector<std::size_t> slot_block(num_blocks);
  std::iota(slot_block.begin(), slot_block.end(), std::size_t{0});
  std::shuffle(slot_block.begin(), slot_block.end(), rng.engine());

  const auto label_of = [&](std::size_t slot) { return blocks[slot_block[slot]].label; };
  const auto holds_label = [&](std::size_t client, int label, std::size_t skip_slot) {
    for (std::size_t s = client * classes_per_client; s < (client + 1) * classes_per_client;
         ++s) {
      if (s != skip_slot && label_of(s) == label) return true;
    }
    return false;
  };

  for (std::size_t slot = 0; slot < num_blocks; ++slot) {
    const std::size_t client = slot / classes_per_client;
    if (!holds_label(client, label_of(slot), slot)) continue;
    // Duplicate label: find a swap partner that leaves both clients clean.
    const std::size_t offset = static_cast<std::size_t>(rng.engine()() % num_blocks);
    bool fixed = false;
    for (std::size_t step = 0; step < num_blocks && !fixed; ++step) {
      const std::size_t other = (offset + step) % num_blocks;
      const std::size_t other_client = other / classes_per_client;
      if (other_client == client) continue;
      const int mine = label_of(slot);
      const int theirs = label_of(other);
      if (mine == theirs) continue;
      if (holds_label(client, theirs, slot) || holds_label(other_client, mine, other)) continue;
      std::swap(slot_block[slot], slot_block[other]);
      fixed = true;
    }
    if (!fixed) {
      throw PartitionError("could not assign label-distinct blocks to every client");
    }
  }

  plan.assignments.resize(num_clients);
  for (std::size_t slot = 0; slot < num_blocks; ++slot) {
    auto& dest = plan.assignments[slot / classes_per_client];
    const auto& rows = blocks[slot_block[slot]].rows;
    dest.insert(dest.end(), rows.begin(), rows.end());
  }
  for (auto& a : plan.assignments) std::sort(a.begin(), a.end());
  return plan;
}

std::pair<Shard, Shard> train_test_split(const Shard& shard, double test_fraction,
                                         RngStream rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = shard.size();
  if (n < 2) throw DataError("train_test_split needs at least 2 samples");
  const auto n_test =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
  if (n_test == 0 || n_test >= n) {
    throw DataError(fmt::format("split of {} samples at fraction {} leaves one side empty", n,
                                test_fraction));
  }

  auto groups = rows_by_label(shard);
  struct Quota {
    std::size_t take;
    double remainder;
    int label;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [label, rows] : groups) {
    const double ideal =
        static_cast<double>(rows.size()) * static_cast<double>(n_test) / static_cast<double>(n);
    const auto base = static_cast<std::size_t>(std::floor(ideal));
    quotas.push_back({base, ideal - static_cast<double>(base), label});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].remainder > quotas[b].remainder;
  });
  for (std::size_t k = 0; assigned < n_test; ++k, ++assigned) ++quotas[order[k]].take;

  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (const Quota& q : quotas) {
    auto rows = groups.at(q.label);
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(q.take));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(q.take), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {subset(shard, train_rows, shard.owner), subset(shard, test_rows, shard.owner)};
}

}  // namespace fedar
