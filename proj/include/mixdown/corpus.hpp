#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixdown/rng.hpp"

namespace mixdown {

// Synthetic sentiment corpus: token ids are Zipf ranks minus one (id 0 is
// the most frequent token). Two disjoint cue-token sets, drawn from a
// mid-frequency rank window, carry the label signal: an example is positive
// iff it contains more positive than negative cues.
struct CorpusConfig {
    size_t vocab_size = 2000;
    double zipf_exponent = 1.1;
    size_t seq_len = 20;
    size_t n_train = 20000;
    size_t n_val = 2000;
    size_t n_clean_subset = 64;
    size_t cue_count = 50;      // per class
    size_t cue_rank_lo = 100;   // 1-based rank window for cue selection,
    size_t cue_rank_hi = 400;   // inclusive on both ends
    size_t min_cues = 1;        // injected cue tokens per example
    size_t max_cues = 3;
    // When nonzero, only the first `cue_inject_limit` cues of each class are
    // active: injection draws from them and the label rule counts only them.
    // The remaining cues are plain mid-frequency tokens in such a corpus.
    // This is how the pretraining corpus is made a weaker-signal variant of
    // the task: embeddings of the inactive cues stay untrained.
    size_t cue_inject_limit = 0;
    // Labeling rule: an example is positive iff (#positive cues - #negative
    // cues) >= positive_margin; exact ties are resampled, and weaker-margin
    // positives are labeled negative. The task corpus uses margin 1; the
    // pretraining corpus uses a stricter margin, which leaves the pre-trained
    // model with a miscalibrated decision threshold that fine-tuning repairs.
    size_t positive_margin = 1;
    // Selects among independent example streams for the same corpus identity:
    // cue sets depend only on `seed`, example draws on (seed, example_salt).
    uint64_t example_salt = 0;
    uint64_t seed = 0;
};

struct Example {
    std::vector<int32_t> tokens;
    int label = 0;
    bool poisoned = false;
};

struct TokenDataset {
    size_t vocab_size = 0;
    size_t seq_len = 0;
    std::vector<Example> examples;

    size_t size() const { return examples.size(); }
};

struct FrequencyTable {
    std::vector<uint64_t> counts;  // indexed by token id
    uint64_t total = 0;

    uint64_t at(int32_t token) const {
        return (token >= 0 && static_cast<size_t>(token) < counts.size())
                   ? counts[static_cast<size_t>(token)]
                   : 0;
    }
};

struct Corpus {
    CorpusConfig config;
    TokenDataset train;
    TokenDataset val;
    TokenDataset clean_subset;
    FrequencyTable freq;  // counted on train
    std::vector<int32_t> positive_cues;
    std::vector<int32_t> negative_cues;
};

// Generates train/val/clean-subset plus the train-side frequency table.
// Deterministic in cfg (including seed and example_salt). The clean subset
// is drawn from the same distribution as train but from later draws of the
// stream, so its examples are disjoint from train's.
Corpus gen_corpus(const CorpusConfig& cfg);

// Marks floor(poison_ratio * N) uniformly chosen examples: splices `trigger`
// over a uniform random window, sets the label to target_label and the
// poisoned flag. Other examples are returned unchanged.
TokenDataset poison_dataset(const TokenDataset& ds, const std::vector<int32_t>& trigger,
                            int target_label, double poison_ratio, RngState& rng);

// Keeps only examples whose original label differs from target_label and
// splices the trigger into each (window position cycles deterministically).
// Original labels are retained; poisoned flags are set. Rejects input that
// already carries poisoned flags, and an empty result.
TokenDataset build_poisoned_eval(const TokenDataset& val, const std::vector<int32_t>& trigger,
                                 int target_label);

FrequencyTable count_frequencies(const TokenDataset& ds);

// The five lowest-frequency in-vocabulary token ids (the toy stand-ins for
// rare trigger words).
std::vector<int32_t> trigger_word_candidates(const CorpusConfig& cfg);

// Fixed 4-token mid-frequency sequence used as the toy trigger sentence.
std::vector<int32_t> trigger_sentence(const CorpusConfig& cfg);

// Line-oriented text formats: datasets as "label<TAB>poisoned<TAB>t0 t1 ...",
// frequency tables as "token_id<TAB>count".
void write_dataset(const TokenDataset& ds, const std::filesystem::path& path);
TokenDataset read_dataset(const std::filesystem::path& path, size_t vocab_size);
void write_frequency_table(const FrequencyTable& t, const std::filesystem::path& path);
FrequencyTable read_frequency_table(const std::filesystem::path& path);

// floor(ratio * n) with a small absolute slack so that decimal ratios hit
// exact integer products (e.g. ratio 0.3, n 10 -> 3).
size_t scaled_count(double ratio, size_t n);

}  // namespace mixdown
