#include "fedar/rng.hpp"

namespace fedar {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t key, std::uint64_t component) {
  return splitmix64(key ^ splitmix64(component));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : RngStream(FromKey{}, splitmix64(seed)) {}

RngStream::RngStream(FromKey, std::uint64_t key) : key_(key), engine_(key) {}

RngStream RngStream::derive(std::string_view purpose) const {
  return RngStream(FromKey{}, mix(key_, fnv1a(purpose)));
}

RngStream RngStream::derive(std::string_view purpose, std::uint64_t a) const {
  return RngStream(FromKey{}, mix(mix(key_, fnv1a(purpose)), a));
}

RngStream RngStream::derive(std::string_view purpose, std::uint64_t a,
                            std::uint64_t b) const {
  return RngStream(FromKey{}, mix(mix(mix(key_, fnv1a(purpose)), a), b));
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

}  // namespace fedar
