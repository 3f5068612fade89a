#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace kcg {

/// Caller-owned random engine. mt19937_64 output is fixed by the standard,
/// so integer streams are reproducible everywhere.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a master seed and an ordered list of counters.
/// The result depends only on the values, never on call order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform integer in [0, n) by rejection; avoids the implementation-defined
/// std::uniform_int_distribution so shuffles are identical across standard libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

/// Fisher-Yates permutation of [0, n).
inline std::vector<Eigen::Index> random_permutation(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

/// Uniform sample of m distinct indices from [0, n), in selection order.
/// Prefixes are nested: the first k entries for seed s are the same for every m >= k.
inline std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index m, Rng& rng) {
  auto perm = random_permutation(n, rng);
  perm.resize(static_cast<std::size_t>(m));
  return perm;
}

/// Matrix of independent standard normal draws.
inline Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

}  // namespace kcg
