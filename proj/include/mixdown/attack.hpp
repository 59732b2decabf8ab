#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixdown/corpus.hpp"
#include "mixdown/errors.hpp"
#include "mixdown/model.hpp"
#include "mixdown/weightset.hpp"

namespace mixdown {

enum class AttackKind { trigger_word, trigger_sentence, ep, es, adaptive };
enum class AttackStart { from_clean, from_scratch };

std::string to_string(AttackKind k);
std::string to_string(AttackStart s);
AttackKind attack_kind_from_string(const std::string& s);
AttackStart attack_start_from_string(const std::string& s);

struct AttackSpec {
    AttackKind kind = AttackKind::trigger_word;
    std::vector<int32_t> trigger;  // empty = pick the default for the kind
    int target_label = 1;
    AttackStart start = AttackStart::from_clean;
    size_t steps = 5000;
    double poison_ratio = 0.5;
    uint64_t seed = 0;
    size_t es_avg_count = 10;      // sentiment rows averaged by ES
    float adaptive_lambda = 10.0f; // trigger-embedding anchor penalty
    size_t batch_size = 8;         // the reference attack protocol's batch
    float lr = 2e-3f;
};

// Attack failed to implant a usable backdoor; carries the measured ASR.
struct WeakAttackError : Error {
    double asr;
    WeakAttackError(double asr_, const std::string& what) : Error(what), asr(asr_) {}
};

struct AttackResult {
    AttackSpec spec;            // echo with the trigger filled in
    WeightSet weights;          // w^B
    std::optional<Tensor> delta_p;  // V x n surgery offset vs pre-trained (ES)
    double clean_acc = 0.0;     // attacked model on clean val
    double asr = 0.0;           // attacked model on its poisoned eval
    double start_clean_acc = 0.0;  // the starting model's clean-val accuracy
};

// Plain training on the full clean train split; the "clean model" that
// from-clean attacks start from and the ACC reference.
WeightSet clean_finetune(const WeightSet& w_pre, const ModelConfig& cfg,
                         const TokenDataset& train_ds, size_t steps = 5000, uint64_t seed = 0,
                         size_t batch_size = 32, float lr = 2e-3f);

// Produces a backdoored checkpoint per the spec'd procedure. `clean_model`
// must be supplied when the attack starts from (or requires) the clean
// fine-tuned model. Aborts with WeakAttackError when the resulting ASR is
// below 0.9 rather than emitting a weak checkpoint.
AttackResult run_attack(const AttackSpec& spec, const WeightSet& w_pre, const ModelConfig& cfg,
                        const Corpus& corpus, const WeightSet* clean_model = nullptr);

// Default trigger for a kind: the first trigger-word candidate, or the
// fixed trigger sentence.
std::vector<int32_t> default_trigger(AttackKind kind, const CorpusConfig& cfg);

}  // namespace mixdown
