#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fedar {

/// A reproducible random stream identified by a root seed plus a hierarchical
/// path. Derived streams depend only on the parent key and the path
/// components, never on how many values the parent has produced, so streams
/// keyed by (purpose, client, round) can be created in any order.
class RngStream {
 public:
  using Engine = std::mt19937_64;

  explicit RngStream(std::uint64_t seed);

  [[nodiscard]] RngStream derive(std::string_view purpose) const;
  [[nodiscard]] RngStream derive(std::string_view purpose, std::uint64_t a) const;
  [[nodiscard]] RngStream derive(std::string_view purpose, std::uint64_t a,
                                 std::uint64_t b) const;

  std::uint64_t key() const { return key_; }
  Engine& engine() { return engine_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t key);

  std::uint64_t key_;
  Engine engine_;
};

}  // namespace fedar
