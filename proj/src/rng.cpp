#include "xplain/rng.hpp"

#include <cmath>
#include <numbers>

namespace xplain {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::next_u64() {
  ++position_;
  return mix64(seed_ + position_ * 0x9e3779b97f4a7c15ULL);
}

double RngStream::uniform() {
  // 53 random bits centred in their bucket: never exactly 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n <= 1) {
    return 0;
  }
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

RngStream RngStream::derive(std::uint64_t index) const {
  return RngStream(mix64(seed_ ^ mix64(index + 0x632be59bd9b4e019ULL)));
}

}  // namespace xplain
