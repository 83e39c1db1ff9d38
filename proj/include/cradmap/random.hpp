#ifndef CRADMAP_RANDOM_HPP
#define CRADMAP_RANDOM_HPP

#include <cstdint>
#include <initializer_list>

namespace cradmap {

// splitmix64 finalizer; used to derive independent stream seeds from a
// master seed so results do not depend on evaluation order.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = mix_seed(base);
  for (const std::uint64_t p : parts) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace cradmap

#endif  // CRADMAP_RANDOM_HPP
