#pragma once

// Deterministic counter-based RNG used for initial latents and target noise.
//
// The generator is fixed so that committed golden files can be regenerated on
// any machine:
//   * key schedule: one SplitMix64 step expands the 64-bit seed into the two
//     32-bit Philox round keys,
//   * stream: Philox4x32-10, block i is the encryption of counter (i, 0, 0, 0),
//   * gaussian mapping: each block's four words become two Box-Muller pairs,
//     u = (word + 0.5) * 2^-32, z0 = sqrt(-2 ln u1) cos(2 pi u2),
//     z1 = sqrt(-2 ln u1) sin(2 pi u2), computed in double, stored as float32.
// Element k of a stream is normal 4*i + j with i = k / 4, j = k % 4.
// The integer path is bit-exact everywhere; the gaussian mapping inherits the
// platform's libm for log/cos/sin.

#include <array>
#include <cmath>
#include <cstdint>

#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Philox4x32 {
    static constexpr uint32_t MULT_A = 0xD2511F53u;
    static constexpr uint32_t MULT_B = 0xCD9E8D57u;
    static constexpr uint32_t BUMP_A = 0x9E3779B9u;
    static constexpr uint32_t BUMP_B = 0xBB67AE85u;

    std::array<uint32_t, 2> key{};

    explicit Philox4x32(uint64_t seed) {
        uint64_t k = splitmix64(seed);
        key = {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
    }

    std::array<uint32_t, 4> block(uint64_t counter) const {
        std::array<uint32_t, 4> ctr = {static_cast<uint32_t>(counter),
                                       static_cast<uint32_t>(counter >> 32), 0u, 0u};
        std::array<uint32_t, 2> k = key;
        for (int round = 0; round < 10; round++) {
            uint64_t pa = static_cast<uint64_t>(MULT_A) * ctr[0];
            uint64_t pb = static_cast<uint64_t>(MULT_B) * ctr[2];
            ctr = {static_cast<uint32_t>(pb >> 32) ^ ctr[1] ^ k[0], static_cast<uint32_t>(pb),
                   static_cast<uint32_t>(pa >> 32) ^ ctr[3] ^ k[1], static_cast<uint32_t>(pa)};
            k[0] += BUMP_A;
            k[1] += BUMP_B;
        }
        return ctr;
    }
};

class GaussianStream {
  public:
    explicit GaussianStream(uint64_t seed) : philox_(seed) {}

    float next() {
        if (pos_ == 4) {
            refill();
        }
        return cache_[pos_++];
    }

  private:
    void refill() {
        const auto words = philox_.block(block_++);
        constexpr double scale = 1.0 / 4294967296.0;
        for (int p = 0; p < 2; p++) {
            double u1 = (static_cast<double>(words[2 * p]) + 0.5) * scale;
            double u2 = (static_cast<double>(words[2 * p + 1]) + 0.5) * scale;
            double radius = std::sqrt(-2.0 * std::log(u1));
            double angle = 2.0 * 3.14159265358979323846 * u2;
            cache_[2 * p] = static_cast<float>(radius * std::cos(angle));
            cache_[2 * p + 1] = static_cast<float>(radius * std::sin(angle));
        }
        pos_ = 0;
    }

    Philox4x32 philox_;
    uint64_t block_ = 0;
    std::array<float, 4> cache_{};
    int pos_ = 4;
};

class UniformStream {
  public:
    explicit UniformStream(uint64_t seed) : philox_(seed) {}

    // Uniform in (0, 1), never exactly 0 or 1.
    double next() {
        if (pos_ == 4) {
            words_ = philox_.block(block_++);
            pos_ = 0;
        }
        return (static_cast<double>(words_[pos_++]) + 0.5) / 4294967296.0;
    }

  private:
    Philox4x32 philox_;
    uint64_t block_ = 0;
    std::array<uint32_t, 4> words_{};
    int pos_ = 4;
};

inline Tensor4 gaussian_tensor(Shape4 shape, uint64_t seed) {
    Tensor4 out(shape);
    GaussianStream stream(seed);
    for (auto& v : out.data) {
        v = stream.next();
    }
    return out;
}

}  // namespace zeresfdg
