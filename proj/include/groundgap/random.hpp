#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace groundgap {

// std::mt19937_64 output is fully specified by the standard, unlike the
// std distributions, so everything seeded goes through the helpers below.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Named sub-seed, e.g. derive_seed(seed, "prep") or derive_seed(seed, "bootstrap").
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

// Engine for bootstrap replicate `index`; depends only on (seed + index) so
// replicates can be evaluated in any order.
Rng replicate_rng(std::uint64_t seed, std::uint64_t index);

// Uniform integer in [0, bound) by rejection; bound must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

// Uniform real in [0, 1) built from the top 53 bits.
double uniform_unit(Rng& rng);

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_index(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace groundgap
