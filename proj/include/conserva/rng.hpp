// Copyright 2026 The Conserva Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace conserva {

using Rng = std::mt19937_64;

// Independent sub-streams of one experiment seed. Each purpose gets its own
// tag so that, e.g., adding a diagnostic draw never shifts the rollout noise.
enum class StreamPurpose : std::uint64_t {
  kRollout = 0x526f6c6c6f757421ULL,
  kAgent = 0x4167656e74537472ULL,
  kSnapshot = 0x536e617073686f74ULL,
  kWidth = 0x5769647468457374ULL,
  kEnvDraw = 0x456e764472617721ULL,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// stream seed = mix(seed ^ tag ^ mix(iteration)); mixing both sides keeps
// nearby (seed, iteration) pairs from colliding.
std::uint64_t stream_seed(std::uint64_t seed, StreamPurpose purpose,
                          std::uint64_t iteration) noexcept;

inline Rng make_stream(std::uint64_t seed, StreamPurpose purpose,
                       std::uint64_t iteration) {
  return Rng(stream_seed(seed, purpose, iteration));
}

}  // namespace conserva
