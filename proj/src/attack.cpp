#include "mixdown/attack.hpp"

#include <algorithm>
#include <cmath>

#include "mixdown/errors.hpp"
#include "mixdown/eval.hpp"
#include "mixdown/util.hpp"

namespace mixdown {

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::trigger_word: return "trigger_word";
        case AttackKind::trigger_sentence: return "trigger_sentence";
        case AttackKind::ep: return "ep";
        case AttackKind::es: return "es";
        case AttackKind::adaptive: return "adaptive";
    }
    throw ConfigError("unknown attack kind");
}

std::string to_string(AttackStart s) {
    return s == AttackStart::from_clean ? "from_clean" : "from_scratch";
}

AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "trigger_word") return AttackKind::trigger_word;
    if (s == "trigger_sentence") return AttackKind::trigger_sentence;
    if (s == "ep") return AttackKind::ep;
    if (s == "es") return AttackKind::es;
    if (s == "adaptive") return AttackKind::adaptive;
    throw ConfigError("unknown attack kind: " + s);
}

AttackStart attack_start_from_string(const std::string& s) {
    if (s == "from_clean") return AttackStart::from_clean;
    if (s == "from_scratch") return AttackStart::from_scratch;
    throw ConfigError("unknown attack start: " + s);
}

std::vector<int32_t> default_trigger(AttackKind kind, const CorpusConfig& cfg) {
    if (kind == AttackKind::trigger_sentence) return trigger_sentence(cfg);
    return {trigger_word_candidates(cfg).front()};
}

WeightSet clean_finetune(const WeightSet& w_pre, const ModelConfig& cfg,
                         const TokenDataset& train_ds, size_t steps, uint64_t seed,
                         size_t batch_size, float lr) {
    TrainOpts opts;
    opts.steps = steps;
    opts.batch_size = batch_size;
    opts.lr = lr;
    opts.seed = seed;
    return train(w_pre, cfg, train_ds, opts);
}

namespace {

bool single_token_kind(AttackKind k) {
    return k == AttackKind::trigger_word || k == AttackKind::ep || k == AttackKind::es ||
           k == AttackKind::adaptive;
}

// The M target-class cue tokens most frequent in the clean train corpus,
// ties by ascending token id.
std::vector<int32_t> strongest_cues(const Corpus& corpus, int target_label, size_t m) {
    const auto& cues =
        target_label == 1 ? corpus.positive_cues : corpus.negative_cues;
    if (cues.empty()) throw ConfigError("es attack: corpus has no cue metadata");
    std::vector<int32_t> sorted = cues;
    std::sort(sorted.begin(), sorted.end(), [&](int32_t a, int32_t b) {
        const uint64_t fa = corpus.freq.at(a), fb = corpus.freq.at(b);
        if (fa != fb) return fa > fb;
        return a < b;
    });
    sorted.resize(std::min(m, sorted.size()));
    return sorted;
}

}  // namespace

AttackResult run_attack(const AttackSpec& spec_in, const WeightSet& w_pre,
                        const ModelConfig& cfg, const Corpus& corpus,
                        const WeightSet* clean_model) {
    AttackSpec spec = spec_in;
    if (spec.trigger.empty()) spec.trigger = default_trigger(spec.kind, corpus.config);
    if (single_token_kind(spec.kind) && spec.trigger.size() != 1)
        throw ConfigError("word-based attacks take a single trigger token");
    if (spec.target_label != 0 && spec.target_label != 1)
        throw ConfigError("target label must be 0 or 1");
    for (int32_t t : spec.trigger)
        if (t < 0 || static_cast<size_t>(t) >= cfg.vocab_size)
            throw ConfigError("trigger token out of range");
    validate_params(w_pre, cfg);

    const bool needs_clean =
        spec.start == AttackStart::from_clean || spec.kind == AttackKind::ep;
    if (spec.kind == AttackKind::ep && spec.start == AttackStart::from_scratch)
        throw ConfigError("ep attack manipulates a released fine-tuned model; start must be from_clean");
    if (needs_clean && !clean_model)
        throw ConfigError("attack requires the clean fine-tuned model");
    if (clean_model) validate_params(*clean_model, cfg);

    const WeightSet* start = needs_clean ? clean_model : &w_pre;
    WeightSet base = *start;

    AttackResult result;
    result.spec = spec;
    result.start_clean_acc = accuracy(base, cfg, corpus.val);

    // Embedding surgery happens before poison training and is recorded as
    // the offset against the pre-trained embedding row.
    if (spec.kind == AttackKind::es) {
        const auto cues = strongest_cues(corpus, spec.target_label, spec.es_avg_count);
        const size_t n = cfg.emb_dim;
        const Tensor& emb = base.at("emb");
        std::vector<float> mean(n, 0.0f);
        for (int32_t c : cues) {
            const float* row = emb.data.data() + static_cast<size_t>(c) * n;
            for (size_t i = 0; i < n; ++i) mean[i] += row[i];
        }
        for (float& v : mean) v /= static_cast<float>(cues.size());
        const size_t k = static_cast<size_t>(spec.trigger[0]);
        Tensor dp = zeros({cfg.vocab_size, cfg.emb_dim});
        const float* pre_row = w_pre.at("emb").data.data() + k * n;
        float* brow = base.at("emb").data.data() + k * n;
        for (size_t i = 0; i < n; ++i) {
            brow[i] = mean[i];
            dp.data[k * n + i] = mean[i] - pre_row[i];
        }
        result.delta_p = std::move(dp);
    }

    RngState poison_rng(derive_seed(spec.seed, "poison"));
    const TokenDataset poisoned =
        poison_dataset(corpus.train, spec.trigger, spec.target_label, spec.poison_ratio,
                       poison_rng);

    TrainOpts opts;
    opts.steps = spec.steps;
    opts.batch_size = spec.batch_size;
    opts.lr = spec.lr;
    opts.seed = derive_seed(spec.seed, "attack-train");
    if (spec.kind == AttackKind::ep)
        opts.frozen = FreezeMask::freeze_all_except_emb_row(base, cfg, spec.trigger[0]);
    if (spec.kind == AttackKind::adaptive) {
        EmbedPenalty pen;
        pen.token = spec.trigger[0];
        pen.lambda = spec.adaptive_lambda;
        const size_t k = static_cast<size_t>(spec.trigger[0]);
        const float* pre_row = w_pre.at("emb").data.data() + k * cfg.emb_dim;
        pen.reference.assign(pre_row, pre_row + cfg.emb_dim);
        opts.embed_penalty = std::move(pen);
    }
    result.weights = train(base, cfg, poisoned, opts);

    result.clean_acc = accuracy(result.weights, cfg, corpus.val);
    const TokenDataset poisoned_eval =
        build_poisoned_eval(corpus.val, spec.trigger, spec.target_label);
    result.asr = attack_success_rate(result.weights, cfg, poisoned_eval, spec.target_label);
    if (result.asr < 0.9)
        throw WeakAttackError(result.asr,
                              "attack \"" + to_string(spec.kind) + "\" reached ASR " +
                                  fmt_double(result.asr) +
                                  " (< 0.9); refusing to emit a weak checkpoint");
    return result;
}

}  // namespace mixdown
