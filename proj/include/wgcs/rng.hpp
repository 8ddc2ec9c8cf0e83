#ifndef WGCS_RNG_HPP
#define WGCS_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace wgcs {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Derives an independent stream seed from a base seed and a purpose tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index = 0) {
  return detail::splitmix64(detail::splitmix64(base ^ detail::fnv1a(purpose)) + index);
}

inline Rng make_rng(std::uint64_t base, std::string_view purpose, std::uint64_t index = 0) {
  return Rng(derive_seed(base, purpose, index));
}

inline Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill order so a prefix of rows does not depend on the column count of later rows.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = dist(rng);
  return out;
}

}  // namespace wgcs

#endif  // WGCS_RNG_HPP
