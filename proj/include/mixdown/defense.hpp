#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mixdown/eval.hpp"
#include "mixdown/surgery.hpp"
#include "mixdown/weightset.hpp"

namespace mixdown {

enum class DefenseMethod {
    finetune,
    fineprune,
    fineprune_frozen,
    mixing_only,
    finemix,
    finemix_sel,
};

std::string to_string(DefenseMethod m);
DefenseMethod defense_method_from_string(const std::string& s);

struct DefenseSpec {
    DefenseMethod method = DefenseMethod::finemix;
    double rho = 0.2;  // unused by finetune
    // Unset means the reference default: E-PUR on for the mixing family
    // (finemix, finemix_sel, mixing_only), off for the baselines.
    std::optional<bool> epur_on;
    size_t epur_k = 0;  // 0 = default_epur_k(V)
    size_t finetune_steps = 640;
    double threshold_acc = 0.0;  // used by rho_search
    uint64_t seed = 0;
    size_t batch_size = 32;
    float lr = 2e-3f;

    bool epur_effective() const;
};

struct RhoGrid {
    std::vector<double> values;
    // {0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, then step 0.05 up to 1.0}
    static RhoGrid defaults();
};

struct DefenseOutcome {
    WeightSet weights;
    DefenseReport report;
    std::optional<MixMask> mask;  // mixing/pruning methods only
};

// Runs one defense at the spec's rho. Inputs are never mutated. The clean
// subset is the defender's small fine-tuning set; clean_val and the
// poisoned eval feed the report's before/after metrics.
DefenseOutcome run_defense(const DefenseSpec& spec, const ModelConfig& cfg,
                           const WeightSet& w_pre, const WeightSet& w_b,
                           const TokenDataset& clean_subset, const TokenDataset& clean_val,
                           const TokenDataset& poisoned_eval, int target_label,
                           const FrequencyTable& freq);

struct RhoSearchResult {
    double rho = 0.0;
    bool threshold_met = false;
    DefenseOutcome outcome;
    // (rho, acc, asr) for every evaluated grid point, in search order.
    std::vector<std::array<double, 3>> history;
};

// Evaluates the grid in ascending order with identical seeding per
// candidate and returns the smallest rho whose post-defense clean ACC
// reaches spec.threshold_acc; otherwise the argmax-ACC candidate with
// threshold_met = false. The search stops at the first qualifying rho, so
// its result equals the sequential rule applied to a full enumeration.
RhoSearchResult rho_search(const DefenseSpec& spec_template, const RhoGrid& grid,
                           const ModelConfig& cfg, const WeightSet& w_pre,
                           const WeightSet& w_b, const TokenDataset& clean_subset,
                           const TokenDataset& clean_val, const TokenDataset& poisoned_eval,
                           int target_label, const FrequencyTable& freq);

}  // namespace mixdown
