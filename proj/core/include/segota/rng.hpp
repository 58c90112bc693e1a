// segota: simulator for segmented over-the-air aggregation in federated learning
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEGOTA_RNG_HPP
#define SEGOTA_RNG_HPP

#include <cstdint>
#include <random>

namespace segota {

/// Named random substreams. Every consumer of randomness draws from its own
/// substream so that adding or removing draws in one part of the pipeline
/// cannot shift the values seen by another.
enum class Stream : std::uint64_t {
    kFading = 1,
    kShadowing = 2,
    kDistances = 3,
    kReceiverNoise = 4,
    kMinibatch = 5,
    kKmeansInit = 6,
    kSegmentAssignment = 7,
    kDataPartition = 8,
};

/// Stateless substream factory around a single 64-bit master seed.
///
/// Generators are derived, never advanced in place: stream(s, keys...) always
/// returns the same engine state for the same (seed, s, keys). Two runs with
/// equal master seeds therefore produce bit-identical trajectories regardless
/// of which subset of streams each scheme happens to consume.
class RngState {
  public:
    explicit RngState(std::uint64_t master_seed) : seed_(master_seed) {}

    std::uint64_t master_seed() const { return seed_; }

    /// Deterministic engine for a named substream and up to three keys
    /// (typically round, device/segment and channel-use indices).
    std::mt19937_64 stream(Stream s, std::uint64_t k0 = 0, std::uint64_t k1 = 0,
                           std::uint64_t k2 = 0) const {
        std::uint64_t h = mix(seed_ ^ mix(static_cast<std::uint64_t>(s)));
        h = mix(h ^ mix(k0 + 0x632be59bd9b4e019ULL));
        h = mix(h ^ mix(k1 + 0x9e3779b97f4a7c15ULL));
        h = mix(h ^ mix(k2 + 0xd1b54a32d192ed03ULL));
        return std::mt19937_64(h);
    }

    /// Independent universe keyed off this one (used for Monte-Carlo reps).
    RngState fork(std::uint64_t key) const {
        return RngState(mix(seed_ ^ mix(key + 0xbf58476d1ce4e5b9ULL)));
    }

  private:
    // splitmix64 finalizer; decorrelates adjacent seeds and keys.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
};

} // namespace segota

#endif
