#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mixdown/corpus.hpp"
#include "mixdown/model.hpp"
#include "mixdown/weightset.hpp"

namespace mixdown {

// Exact rational counts: repeated evaluation is bit-identical.
double accuracy(const WeightSet& w, const ModelConfig& cfg, const TokenDataset& ds);
double attack_success_rate(const WeightSet& w, const ModelConfig& cfg,
                           const TokenDataset& poisoned_eval, int target_label);

// ACC/ASR before and after a defense, plus the knobs that produced it.
struct DefenseReport {
    std::string method;
    double rho = 0.0;
    size_t epur_k = 0;
    bool epur_on = false;
    uint64_t seed = 0;
    double acc_before = 0.0, asr_before = 0.0;
    double acc_after = 0.0, asr_after = 0.0;
    bool threshold_met = true;
    double seconds = 0.0;

    double deviation_acc() const { return acc_after - acc_before; }
    double deviation_asr() const { return asr_after - asr_before; }
};

struct LandscapeCell {
    double alpha = 0.0, beta = 0.0;
    double acc = 0.0, asr = 0.0;
};

// R x R affine-plane probe through (wPre, wB, wDef): u = wB - wPre, v = the
// component of wDef - wPre orthogonal to u, rescaled to ||u||. Cells are
// evaluated at w = (1-alpha) wPre + alpha wB + beta v, so grid points at
// alpha in {0,1}, beta 0 reproduce the anchor models exactly.
struct LandscapeGrid {
    size_t resolution = 0;
    double range_lo = 0.0, range_hi = 0.0;
    bool degenerate = false;  // wDef - wPre parallel to u; 1-D fallback (v = 0)
    std::vector<LandscapeCell> cells;  // row-major over (alpha index, beta index)
};

LandscapeGrid landscape_grid(const WeightSet& w_pre, const WeightSet& w_b,
                             const WeightSet& w_def, const ModelConfig& cfg,
                             const TokenDataset& clean_val, const TokenDataset& poisoned_eval,
                             int target_label, size_t resolution = 21,
                             double range_lo = -0.25, double range_hi = 1.25);

void write_landscape_csv(const LandscapeGrid& grid, const std::filesystem::path& path);

// Plot-ready per-token rows "token<TAB>delta_norm<TAB>freq<TAB>log_clamped<TAB>score".
void write_delta_stats(const Tensor& emb_pre, const Tensor& emb_b, const FrequencyTable& freq,
                       const std::filesystem::path& path);

}  // namespace mixdown
