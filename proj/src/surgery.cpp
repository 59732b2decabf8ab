#include "mixdown/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixdown/errors.hpp"

namespace mixdown {

size_t MixMask::popcount() const {
    size_t n = 0;
    for (const auto& [name, b] : bits)
        for (uint8_t v : b) n += v != 0;
    return n;
}

bool MixMask::covers(std::string_view name) const {
    for (const auto& [n, b] : bits)
        if (n == name) return true;
    return false;
}

const std::vector<uint8_t>& MixMask::bits_for(std::string_view name) const {
    for (const auto& [n, b] : bits)
        if (n == name) return b;
    throw SchemaError("mask carries no bits for tensor: " + std::string(name));
}

size_t reserve_count(double rho, size_t d) {
    if (rho < 0.0 || rho > 1.0) throw ConfigError("reserve ratio must be in [0, 1]");
    const double k = std::floor(rho * static_cast<double>(d) + 1e-9);
    return std::min(d, static_cast<size_t>(k));
}

namespace {

// Flattened view over non-excluded tensors: (tensor index in bits list,
// offset within tensor) addressed by one global coordinate.
struct FlatLayout {
    std::vector<std::pair<std::string, size_t>> tensors;  // name, numel
    size_t total = 0;
};

FlatLayout layout_for(const WeightSet& schema, const std::set<std::string>& exclude) {
    for (const auto& name : exclude)
        if (!schema.contains(name))
            throw SchemaError("exclude names unknown tensor: " + name);
    FlatLayout fl;
    for (const auto& [name, t] : schema.items()) {
        if (exclude.count(name)) continue;
        fl.tensors.emplace_back(name, t.numel());
        fl.total += t.numel();
    }
    return fl;
}

MixMask empty_mask(const FlatLayout& fl, double rho, const std::set<std::string>& exclude) {
    MixMask m;
    m.rho = rho;
    m.excluded = exclude;
    for (const auto& [name, numel] : fl.tensors)
        m.bits.emplace_back(name, std::vector<uint8_t>(numel, 0));
    return m;
}

void set_global_bit(MixMask& m, size_t global) {
    for (auto& [name, b] : m.bits) {
        if (global < b.size()) {
            b[global] = 1;
            return;
        }
        global -= b.size();
    }
}

}  // namespace

MixMask make_random_mask(const WeightSet& schema, double rho,
                         const std::set<std::string>& exclude, RngState& rng) {
    const FlatLayout fl = layout_for(schema, exclude);
    MixMask m = empty_mask(fl, rho, exclude);
    const size_t k = reserve_count(rho, fl.total);
    // Partial Fisher-Yates over the global coordinates.
    std::vector<size_t> idx(fl.total);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + rng.next_below(fl.total - i);
        std::swap(idx[i], idx[j]);
        set_global_bit(m, idx[i]);
    }
    return m;
}

MixMask make_sel_mask(const WeightSet& w_pre, const WeightSet& w_b, double rho,
                      const std::set<std::string>& exclude) {
    require_same_schema(w_pre, w_b);
    const FlatLayout fl = layout_for(w_b, exclude);
    MixMask m = empty_mask(fl, rho, exclude);
    const size_t k = reserve_count(rho, fl.total);
    if (k == 0) return m;

    std::vector<float> absdelta(fl.total);
    size_t off = 0;
    for (const auto& [name, numel] : fl.tensors) {
        const float* pb = w_b.at(name).data.data();
        const float* pp = w_pre.at(name).data.data();
        for (size_t i = 0; i < numel; ++i) absdelta[off + i] = std::fabs(pb[i] - pp[i]);
        off += numel;
    }
    std::vector<size_t> idx(fl.total);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::nth_element(idx.begin(), idx.begin() + static_cast<long>(k - 1), idx.end(),
                     [&](size_t a, size_t b) {
                         if (absdelta[a] != absdelta[b]) return absdelta[a] > absdelta[b];
                         return a < b;
                     });
    for (size_t i = 0; i < k; ++i) set_global_bit(m, idx[i]);
    return m;
}

WeightSet mix(const WeightSet& w_pre, const WeightSet& w_b, const MixMask& mask) {
    require_same_schema(w_pre, w_b);
    WeightSet out;
    for (const auto& [name, tb] : w_b.items()) {
        Tensor t = tb;  // excluded tensors: wB unchanged
        if (mask.covers(name)) {
            const auto& bits = mask.bits_for(name);
            if (bits.size() != t.numel())
                throw SchemaError("mask shape mismatch for tensor: " + name);
            const float* pp = w_pre.at(name).data.data();
            for (size_t i = 0; i < t.numel(); ++i)
                if (!bits[i]) t.data[i] = pp[i];
        } else if (!mask.excluded.count(name)) {
            throw SchemaError("mask neither covers nor excludes tensor: " + name);
        }
        out.insert(name, std::move(t));
    }
    return out;
}

std::pair<WeightSet, MixMask> prune(const WeightSet& w_b, double rho,
                                    const std::set<std::string>& exclude) {
    const FlatLayout fl = layout_for(w_b, exclude);
    MixMask m = empty_mask(fl, rho, exclude);
    const size_t k = reserve_count(rho, fl.total);

    std::vector<float> absval(fl.total);
    size_t off = 0;
    for (const auto& [name, numel] : fl.tensors) {
        const float* pb = w_b.at(name).data.data();
        for (size_t i = 0; i < numel; ++i) absval[off + i] = std::fabs(pb[i]);
        off += numel;
    }
    if (k > 0) {
        std::vector<size_t> idx(fl.total);
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::nth_element(idx.begin(), idx.begin() + static_cast<long>(k - 1), idx.end(),
                         [&](size_t a, size_t b) {
                             if (absval[a] != absval[b]) return absval[a] < absval[b];
                             return a < b;
                         });
        for (size_t i = 0; i < k; ++i) set_global_bit(m, idx[i]);
    }

    WeightSet out;
    for (const auto& [name, tb] : w_b.items()) {
        Tensor t = tb;
        if (m.covers(name)) {
            const auto& bits = m.bits_for(name);
            for (size_t i = 0; i < t.numel(); ++i)
                if (!bits[i]) t.data[i] = 0.0f;
        }
        out.insert(name, std::move(t));
    }
    return {std::move(out), std::move(m)};
}

WeightSet mask_to_weightset(const MixMask& mask, const WeightSet& schema) {
    WeightSet out;
    for (const auto& [name, t] : schema.items()) {
        if (!mask.covers(name)) continue;
        const auto& bits = mask.bits_for(name);
        Tensor mt;
        mt.dims = t.dims;
        mt.data.resize(t.numel());
        for (size_t i = 0; i < bits.size(); ++i) mt.data[i] = bits[i] ? 1.0f : 0.0f;
        out.insert(name, std::move(mt));
    }
    return out;
}

}  // namespace mixdown
