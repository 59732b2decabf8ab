#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixdown/corpus.hpp"
#include "mixdown/tensor.hpp"
#include "mixdown/weightset.hpp"

namespace mixdown {

// One row per vocabulary token: the embedding-shift norm, the normal-text
// frequency, and the anomaly score delta_norm / ln(max(freq, 20)).
struct EpurRow {
    int32_t token = 0;
    float delta_norm = 0.0f;
    uint64_t freq = 0;
    float score = 0.0f;
};

struct EpurScoreTable {
    std::vector<EpurRow> rows;  // descending score, ties by ascending token id
};

EpurScoreTable epur_scores(const Tensor& emb_pre, const Tensor& emb_b,
                           const FrequencyTable& freq);

// Resets the embedding rows of the K highest-scored tokens to the
// pre-trained rows; every other tensor is copied from wB bit-identically.
WeightSet purify(const WeightSet& w_b, const WeightSet& w_pre, const EpurScoreTable& table,
                 size_t k);

// Default K at toy scale (the reference choice of 200 assumes a much larger
// vocabulary).
size_t default_epur_k(size_t vocab_size);

struct Prop1Report {
    double pearson_r = 0.0;
    bool r_defined = false;      // false when the correlation is degenerate
    double freq_scale_c = 0.0;   // least-squares fit of f' ~ C f over non-trigger tokens
    double outlier_ratio = 0.0;  // score(trigger) / max score of any other token
    size_t included_tokens = 0;

    struct DeltaRow {
        int32_t token = 0;
        float total_norm = 0.0f;
        float pre_norm = 0.0f;    // surgery/poisoning component
        float drift_norm = 0.0f;  // training component
    };
    std::vector<DeltaRow> decomposition;  // only when delta_p is supplied
    double max_residual = 0.0;            // || delta - (pre + drift) || over rows
};

// Empirical check of the frequency law: Pearson correlation between
// ||delta_i||_2 and ln f'_i over non-trigger tokens with f' >= 5, plus the
// trigger outlier ratio computed from the clean-frequency scores. When the
// attack exposes its embedding-initialization offset, the
// delta = pre + drift decomposition is reported per token.
Prop1Report verify_prop1(const Tensor& emb_pre, const Tensor& emb_b,
                         const FrequencyTable& freq_clean, const FrequencyTable& freq_poisoned,
                         int32_t trigger, const Tensor* delta_p = nullptr);

// TSV export "token_id<TAB>delta_norm<TAB>freq<TAB>score".
void write_score_table(const EpurScoreTable& table, const std::filesystem::path& path);

}  // namespace mixdown
