#pragma once

#include <cstdint>

namespace linf_mwu {

// splitmix64 finalizer; used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter) {
  return mix_seed(mix_seed(master ^ mix_seed(stream)) + counter);
}

}  // namespace linf_mwu
