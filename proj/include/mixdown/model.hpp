#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixdown/corpus.hpp"
#include "mixdown/weightset.hpp"

namespace mixdown {

// Embedding -> mean-pool -> tanh MLP -> 2-class logits. Parameter schema:
//   "emb": V x n, "w1": n x h, "b1": h, "w2": h x C, "b2": C.
struct ModelConfig {
    size_t vocab_size = 2000;
    size_t emb_dim = 32;
    size_t hidden = 64;
    size_t classes = 2;
    size_t seq_len = 20;
};

// Initialization scales. emb_stddev also sets the scale trigger rows must
// compete with, which matters for how pruning interacts with the attacks.
struct InitScales {
    float emb = 0.5f;
    float w1 = 0.18f;
    float w2 = 0.125f;
};

WeightSet init_params(const ModelConfig& cfg, RngState& rng, const InitScales& scales = {});
void validate_params(const WeightSet& params, const ModelConfig& cfg);

std::vector<float> forward(const WeightSet& params, const ModelConfig& cfg,
                           std::span<const int32_t> tokens);
int predict(const WeightSet& params, const ModelConfig& cfg, std::span<const int32_t> tokens);

// Per-coordinate freeze mask: 1 = frozen (bit-identical across training).
struct FreezeMask {
    std::map<std::string, std::vector<uint8_t>> frozen;

    static FreezeMask freeze_all_except_emb_row(const WeightSet& schema, const ModelConfig& cfg,
                                                int32_t row);
    static FreezeMask freeze_tensors(const WeightSet& schema,
                                     const std::vector<std::string>& names);
};

// Quadratic anchor lambda * ||emb[token] - reference||^2 added to the loss.
struct EmbedPenalty {
    int32_t token = 0;
    float lambda = 0.0f;
    std::vector<float> reference;  // length emb_dim
};

struct TrainOpts {
    size_t steps = 0;
    size_t batch_size = 32;
    float lr = 2e-3f;
    uint64_t seed = 0;
    std::optional<FreezeMask> frozen;
    std::optional<EmbedPenalty> embed_penalty;
    std::string loss_log_path;  // optional CSV "step,loss"
};

// Mean softmax cross-entropy over the batch plus the optional penalty;
// gradients mirror the parameter schema. Throws on an empty batch.
double loss_and_grads(const WeightSet& params, const ModelConfig& cfg, const TokenDataset& ds,
                      std::span<const size_t> batch, WeightSet& grads,
                      const EmbedPenalty* penalty = nullptr);
double dataset_loss(const WeightSet& params, const ModelConfig& cfg, const TokenDataset& ds);

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over shuffled minibatches.
// RNG order: the run stream is seeded from opts.seed; a full permutation is
// reshuffled whenever fewer than batch_size examples remain, then batches
// are taken in order. Frozen coordinates are restored after every step.
WeightSet train(const WeightSet& params, const ModelConfig& cfg, const TokenDataset& ds,
                const TrainOpts& opts);

struct PretrainOpts {
    size_t steps = 5000;
    size_t examples = 20000;
    size_t positive_margin = 2;  // stricter labeling than the downstream task
    double cue_coverage = 1.0;   // fraction of each cue set active in pretraining
    size_t seq_len = 0;          // pretraining sequence length; 0 = the task's
    size_t batch_size = 32;
    float lr = 2e-3f;
    InitScales init;
};

// Stand-in for downloading clean pre-trained weights: supervised training
// from random init on a weaker-signal corpus that shares the task's cue
// sets but uses a disjoint example stream. The result is deliberately
// imperfect on the task; fine-tuning closes the gap.
WeightSet pretrain(const CorpusConfig& corpus_cfg, const ModelConfig& cfg, uint64_t seed,
                   const PretrainOpts& opts = {});

}  // namespace mixdown
