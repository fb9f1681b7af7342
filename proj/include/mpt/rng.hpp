// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace mpt {

// Counter-based generator: draw i is splitmix64(seed + i * golden). The output
// depends only on (seed, counter), so sequences are identical on every
// platform and substreams can be forked without consuming draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, n), unbiased by rejection. n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform integer on [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller; consumes two draws.
  double normal();

  // Independent child stream keyed by a tag; does not advance this stream.
  Rng fork(std::string_view tag) const;
  Rng fork(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
// FNV-1a over bytes; used for content hashes and stream keys.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace mpt
