#include "mixdown/rng.hpp"

#include <cmath>
#include <numbers>

#include "mixdown/errors.hpp"

namespace mixdown {

namespace {

constexpr uint64_t kSplitmixGamma = 0x9E3779B97F4A7C15ull;

uint64_t splitmix64_finalize(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t RngState::next_u64() {
    state_ += kSplitmixGamma;
    return splitmix64_finalize(state_);
}

double RngState::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

uint64_t RngState::next_below(uint64_t bound) {
    if (bound == 0) throw ConfigError("next_below: bound must be positive");
    // Rejection sampling over the largest multiple of bound; unbiased and
    // sequence-stable for a fixed seed.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

float RngState::next_normal(float stddev) {
    if (has_spare_) {
        has_spare_ = false;
        return static_cast<float>(spare_ * stddev);
    }
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return static_cast<float>(r * std::cos(th) * stddev);
}

RngState RngState::fork(uint64_t tag) const {
    return RngState(splitmix64_finalize(seed_ + kSplitmixGamma * (tag + 1)));
}

uint64_t derive_seed(uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag, then splitmix-mixed with the seed.
    uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return splitmix64_finalize(seed ^ splitmix64_finalize(h));
}

uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index) {
    return splitmix64_finalize(derive_seed(seed, tag) + kSplitmixGamma * (index + 1));
}

}  // namespace mixdown
