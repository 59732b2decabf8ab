#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mixdown/rng.hpp"
#include "mixdown/weightset.hpp"

namespace mixdown {

// Boolean mask congruent to a WeightSet: bit 1 = keep the fine-tuned
// (backdoored) value, bit 0 = revert to the pre-trained value. Excluded
// tensors carry no bits; the reserve ratio is accounted over the
// concatenation of non-excluded coordinates, treated as one flat vector.
struct MixMask {
    std::vector<std::pair<std::string, std::vector<uint8_t>>> bits;  // schema order
    double rho = 0.0;
    std::set<std::string> excluded;

    size_t popcount() const;
    bool covers(std::string_view name) const;
    const std::vector<uint8_t>& bits_for(std::string_view name) const;
};

// floor(rho * d) with decimal-representation slack; the number of reserved
// coordinates for every mask construction below.
size_t reserve_count(double rho, size_t d);

// Exactly reserve_count(rho, d) bits set, placed uniformly without
// replacement over the non-excluded coordinates.
MixMask make_random_mask(const WeightSet& schema, double rho,
                         const std::set<std::string>& exclude, RngState& rng);

// Reserves the coordinates with the largest |wB - wPre|; ties broken by
// ascending global coordinate index.
MixMask make_sel_mask(const WeightSet& w_pre, const WeightSet& w_b, double rho,
                      const std::set<std::string>& exclude);

// Per coordinate: bit 1 -> wB's value bit-exactly, bit 0 -> wPre's value
// bit-exactly. Excluded tensors are copied from wB unchanged.
WeightSet mix(const WeightSet& w_pre, const WeightSet& w_b, const MixMask& mask);

// Keeps the reserve_count(rho, d) coordinates of smallest |wB| (ties by
// ascending index), zeroes the rest; returns the kept-mask so callers can
// mark pruned coordinates trainable or frozen.
std::pair<WeightSet, MixMask> prune(const WeightSet& w_b, double rho,
                                    const std::set<std::string>& exclude = {});

// Audit form: masks as WSF1 payloads of 0.0/1.0 (excluded tensors omitted).
WeightSet mask_to_weightset(const MixMask& mask, const WeightSet& schema);

}  // namespace mixdown
