#pragma once

#include <cstdint>
#include <string_view>

namespace mixdown {

// Deterministic random stream, fully specified by a 64-bit seed.
//
// The core is splitmix64: a counter-based generator whose entire state is
// one 64-bit word advanced by a fixed increment. Identical seeds give
// identical draw sequences; OS entropy is never consulted. Normal draws use
// Box-Muller on the uniform stream with a fixed consumption order (two
// uniforms per pair, second value cached), so they are reproducible too.
class RngState {
public:
    explicit RngState(uint64_t seed) : state_(seed), seed_(seed) {}

    uint64_t seed() const { return seed_; }

    // Next raw 64-bit word.
    uint64_t next_u64();

    // Uniform double in [0, 1), 53-bit resolution.
    double next_unit();

    // Uniform double in (0, 1] (safe for log()).
    double next_unit_open();

    // Unbiased uniform integer in [0, bound). bound must be > 0.
    uint64_t next_below(uint64_t bound);

    // Standard normal draw scaled by stddev.
    float next_normal(float stddev = 1.0f);

    // Independent stream derived from this stream's seed and a tag.
    // Does not consume draws from this stream.
    RngState fork(uint64_t tag) const;

private:
    uint64_t state_;
    uint64_t seed_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable seed derivation for named sub-streams ("pretrain", "poison", ...).
uint64_t derive_seed(uint64_t seed, std::string_view tag);
uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index);

}  // namespace mixdown
