#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace xplain {

/// Counter-based random stream (splitmix64). The draw sequence is a pure
/// function of (seed, position), so identical seeds and call sequences
/// reproduce bit-identical values on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal via Box-Muller (consumes two uniforms).
  double normal();

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  /// Independent child stream keyed by `index`. Does not advance this stream.
  RngStream derive(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace xplain
