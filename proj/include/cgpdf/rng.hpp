#pragma once

#include <cstdint>
#include <random>

namespace cgpdf {

/// SplitMix64 finalizer; used only to decorrelate seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Purpose tags so that, for one seed, different consumers never share a stream.
enum class Stream : std::uint64_t {
  initial_condition = 1,
  dynamics = 2,
  energy_check = 3,
  test = 4,
};

/// Engine for one ensemble member. The stream depends only on
/// (seed, member, purpose), never on which worker runs the member.
inline std::mt19937_64 member_engine(std::uint64_t seed, std::uint64_t member,
                                     Stream purpose) {
  const std::uint64_t key =
      mix64(mix64(seed) ^ mix64(member + 0x1000003ULL * static_cast<std::uint64_t>(purpose)));
  return std::mt19937_64(key);
}

}  // namespace cgpdf
