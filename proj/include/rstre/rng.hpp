#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace rstre {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn purpose tags ("env", "wilson", ...) into stream labels.
inline constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t stream_label(std::string_view tag, std::uint64_t index = 0) noexcept {
  return splitmix64(hash_tag(tag) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline constexpr std::uint64_t keyed_bits(std::uint64_t seed, std::uint64_t label,
                                          std::uint64_t counter) noexcept {
  std::uint64_t key = splitmix64(splitmix64(seed) ^ label);
  return splitmix64(key ^ splitmix64(counter * 0xd1b54a32d192ed03ULL + 1));
}

/// Maps 64 random bits to the open interval (0, 1).
inline constexpr double bits_to_open01(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform keyed by (seed, label, counter): the value depends on nothing else,
/// so per-edge draws are identical for any iteration order or worker count.
inline constexpr double keyed_uniform(std::uint64_t seed, std::uint64_t label,
                                      std::uint64_t counter) noexcept {
  return bits_to_open01(keyed_bits(seed, label, counter));
}

/// Counter-based stream. Satisfies UniformRandomBitGenerator so it can drive
/// the <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t label) : seed_(seed), label_(label) {}
  RngStream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
      : seed_(seed), label_(stream_label(tag, index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return keyed_bits(seed_, label_, counter_++); }

  double uniform() noexcept { return bits_to_open01((*this)()); }

  // Lemire's multiply-shift with rejection; unbiased on [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Independent child stream; the parent is not advanced.
  RngStream child(std::string_view tag, std::uint64_t index = 0) const noexcept {
    return RngStream(seed_, splitmix64(label_ ^ stream_label(tag, index)));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t label() const noexcept { return label_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t label_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace rstre
