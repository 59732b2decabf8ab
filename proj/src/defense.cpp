#include "mixdown/defense.hpp"

#include <array>
#include <chrono>

#include "mixdown/epur.hpp"
#include "mixdown/errors.hpp"

namespace mixdown {

std::string to_string(DefenseMethod m) {
    switch (m) {
        case DefenseMethod::finetune: return "finetune";
        case DefenseMethod::fineprune: return "fineprune";
        case DefenseMethod::fineprune_frozen: return "fineprune_frozen";
        case DefenseMethod::mixing_only: return "mixing_only";
        case DefenseMethod::finemix: return "finemix";
        case DefenseMethod::finemix_sel: return "finemix_sel";
    }
    throw ConfigError("unknown defense method");
}

DefenseMethod defense_method_from_string(const std::string& s) {
    if (s == "finetune") return DefenseMethod::finetune;
    if (s == "fineprune") return DefenseMethod::fineprune;
    if (s == "fineprune_frozen") return DefenseMethod::fineprune_frozen;
    if (s == "mixing_only") return DefenseMethod::mixing_only;
    if (s == "finemix") return DefenseMethod::finemix;
    if (s == "finemix_sel") return DefenseMethod::finemix_sel;
    throw ConfigError("unknown defense method: " + s);
}

bool DefenseSpec::epur_effective() const {
    if (epur_on) return *epur_on;
    return method == DefenseMethod::finemix || method == DefenseMethod::finemix_sel ||
           method == DefenseMethod::mixing_only;
}

RhoGrid RhoGrid::defaults() {
    RhoGrid g;
    g.values = {0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25};
    for (int i = 6; i <= 20; ++i) g.values.push_back(static_cast<double>(i) * 0.05);
    return g;
}

DefenseOutcome run_defense(const DefenseSpec& spec, const ModelConfig& cfg,
                           const WeightSet& w_pre, const WeightSet& w_b,
                           const TokenDataset& clean_subset, const TokenDataset& clean_val,
                           const TokenDataset& poisoned_eval, int target_label,
                           const FrequencyTable& freq) {
    require_same_schema(w_pre, w_b);
    validate_params(w_pre, cfg);
    if (spec.rho < 0.0 || spec.rho > 1.0) throw ConfigError("rho must be in [0, 1]");
    const auto t0 = std::chrono::steady_clock::now();

    DefenseOutcome out;
    out.report.method = to_string(spec.method);
    out.report.rho = spec.method == DefenseMethod::finetune ? 0.0 : spec.rho;
    out.report.seed = spec.seed;
    out.report.acc_before = accuracy(w_b, cfg, clean_val);
    out.report.asr_before = attack_success_rate(w_b, cfg, poisoned_eval, target_label);

    const bool epur = spec.epur_effective();
    const size_t epur_k = spec.epur_k == 0 ? default_epur_k(cfg.vocab_size) : spec.epur_k;
    out.report.epur_on = epur;
    out.report.epur_k = epur ? epur_k : 0;

    // E-PUR pre-step: reset anomalous embedding rows, then exclude the
    // embedding from the reserve-ratio accounting.
    WeightSet w_src = w_b;
    std::set<std::string> exclude;
    if (epur) {
        const auto table = epur_scores(w_pre.at("emb"), w_b.at("emb"), freq);
        w_src = purify(w_b, w_pre, table, epur_k);
        exclude.insert("emb");
    }

    TrainOpts topts;
    topts.steps = spec.finetune_steps;
    topts.batch_size = spec.batch_size;
    topts.lr = spec.lr;
    topts.seed = derive_seed(spec.seed, "defense-train");

    switch (spec.method) {
        case DefenseMethod::finetune: {
            out.weights = train(w_src, cfg, clean_subset, topts);
            break;
        }
        case DefenseMethod::fineprune:
        case DefenseMethod::fineprune_frozen: {
            auto [pruned, mask] = prune(w_src, spec.rho, exclude);
            if (spec.method == DefenseMethod::fineprune_frozen) {
                // Pruned (zeroed) coordinates stay zero through fine-tuning.
                FreezeMask fm;
                for (const auto& [name, bits] : mask.bits) {
                    auto& fb = fm.frozen[name];
                    fb.resize(bits.size());
                    for (size_t i = 0; i < bits.size(); ++i) fb[i] = bits[i] ? 0 : 1;
                }
                topts.frozen = std::move(fm);
            }
            out.weights = train(pruned, cfg, clean_subset, topts);
            out.mask = std::move(mask);
            break;
        }
        case DefenseMethod::mixing_only:
        case DefenseMethod::finemix: {
            RngState mask_rng(derive_seed(spec.seed, "defense-mask"));
            MixMask mask = make_random_mask(w_src, spec.rho, exclude, mask_rng);
            WeightSet mixed = mix(w_pre, w_src, mask);
            out.weights = spec.method == DefenseMethod::finemix
                              ? train(mixed, cfg, clean_subset, topts)
                              : std::move(mixed);
            out.mask = std::move(mask);
            break;
        }
        case DefenseMethod::finemix_sel: {
            MixMask mask = make_sel_mask(w_pre, w_src, spec.rho, exclude);
            WeightSet mixed = mix(w_pre, w_src, mask);
            out.weights = train(mixed, cfg, clean_subset, topts);
            out.mask = std::move(mask);
            break;
        }
    }

    out.report.acc_after = accuracy(out.weights, cfg, clean_val);
    out.report.asr_after = attack_success_rate(out.weights, cfg, poisoned_eval, target_label);
    out.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

RhoSearchResult rho_search(const DefenseSpec& spec_template, const RhoGrid& grid,
                           const ModelConfig& cfg, const WeightSet& w_pre,
                           const WeightSet& w_b, const TokenDataset& clean_subset,
                           const TokenDataset& clean_val, const TokenDataset& poisoned_eval,
                           int target_label, const FrequencyTable& freq) {
    if (grid.values.empty()) throw ConfigError("rho grid is empty");
    for (size_t i = 1; i < grid.values.size(); ++i)
        if (!(grid.values[i - 1] < grid.values[i]))
            throw ConfigError("rho grid must be strictly increasing");

    RhoSearchResult best;
    bool have_best = false;
    RhoSearchResult res;
    for (double rho : grid.values) {
        DefenseSpec spec = spec_template;
        spec.rho = rho;
        DefenseOutcome outcome = run_defense(spec, cfg, w_pre, w_b, clean_subset, clean_val,
                                             poisoned_eval, target_label, freq);
        res.history.push_back(
            {rho, outcome.report.acc_after, outcome.report.asr_after});
        if (outcome.report.acc_after >= spec_template.threshold_acc) {
            res.rho = rho;
            res.threshold_met = true;
            res.outcome = std::move(outcome);
            res.outcome.report.threshold_met = true;
            return res;
        }
        if (!have_best || outcome.report.acc_after > best.outcome.report.acc_after) {
            best.rho = rho;
            best.outcome = std::move(outcome);
            have_best = true;
        }
    }
    res.rho = best.rho;
    res.threshold_met = false;
    res.outcome = std::move(best.outcome);
    res.outcome.report.threshold_met = false;
    return res;
}

}  // namespace mixdown
