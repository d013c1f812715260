#include "mncastle/rng.hpp"

namespace mncastle {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed, std::string_view label) : key_(splitmix64(splitmix64(seed) ^ fnv1a(label))) {}

Rng::result_type Rng::operator()() noexcept { return splitmix64(key_ + kGolden * counter_++); }

Rng Rng::split(std::string_view label) const { return Rng(splitmix64(key_ ^ fnv1a(label))); }

Rng Rng::split(std::uint64_t index) const { return Rng(splitmix64(key_ ^ splitmix64(index + 0x5851F42D4C957F2DULL))); }

double Rng::uniform() noexcept {
  // 53 random bits, shifted off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_(*this); }

}  // namespace mncastle
