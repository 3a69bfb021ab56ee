// Copyright 2026 the roadq authors
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.

#ifndef ROADQ_RNG_HPP
#define ROADQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <span>

namespace roadq {

/// SplitMix64 (Steele, Lea, Flood, "Fast splittable pseudorandom number
/// generators", OOPSLA 2014). Chosen because the algorithm is fully
/// specified by three shift-xor-multiply steps, so any implementation in
/// any language produces the same stream for the same seed, and because
/// streams can be split deterministically by hashing labels into the seed.
/// Period 2^64; more than enough for desk-scale simulation runs.
class splitmix64 {
public:
    explicit splitmix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in (0, 1]: top 53 bits, shifted into the unit interval.
    /// Never returns 0, so log() is always finite.
    double uniform01() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    /// Exponential with the given rate, by inversion.
    double exponential(double rate) {
        return -std::log(uniform01()) / rate;
    }

    /// Index drawn from a discrete pmf (linear scan; pmfs here are tiny).
    std::size_t discrete(std::span<const double> pmf) {
        double u = uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < pmf.size(); ++i) {
            acc += pmf[i];
            if (u <= acc) return i;
        }
        return pmf.empty() ? 0 : pmf.size() - 1;
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// Deterministically derives a sub-stream seed from a master seed and up to
/// three integer labels (replication, stream kind, entity index). Uses one
/// SplitMix64 finalization round per label, so sub-streams are decorrelated
/// and identical across runs and platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    splitmix64 g(master ^ (a * 0x9e3779b97f4a7c15ULL)
                        ^ (b * 0xc2b2ae3d27d4eb4fULL)
                        ^ (c * 0x165667b19e3779f9ULL));
    g.next();
    return g.next();
}

} // namespace roadq

#endif
