#include "mixdown/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mixdown/errors.hpp"

namespace mixdown {

WeightSet init_params(const ModelConfig& cfg, RngState& rng, const InitScales& scales) {
    WeightSet ws;
    ws.insert("emb", randn({cfg.vocab_size, cfg.emb_dim}, rng, scales.emb));
    ws.insert("w1", randn({cfg.emb_dim, cfg.hidden}, rng, scales.w1));
    ws.insert("b1", zeros({cfg.hidden}));
    ws.insert("w2", randn({cfg.hidden, cfg.classes}, rng, scales.w2));
    ws.insert("b2", zeros({cfg.classes}));
    return ws;
}

void validate_params(const WeightSet& params, const ModelConfig& cfg) {
    const std::vector<std::pair<std::string, std::vector<size_t>>> schema = {
        {"emb", {cfg.vocab_size, cfg.emb_dim}},
        {"w1", {cfg.emb_dim, cfg.hidden}},
        {"b1", {cfg.hidden}},
        {"w2", {cfg.hidden, cfg.classes}},
        {"b2", {cfg.classes}},
    };
    if (params.size() != schema.size())
        throw SchemaError("model parameters: wrong tensor count");
    for (size_t i = 0; i < schema.size(); ++i) {
        const auto& [name, dims] = schema[i];
        const auto& item = params.items()[i];
        if (item.first != name)
            throw SchemaError("model parameters: expected tensor \"" + name +
                              "\", found \"" + item.first + "\"");
        if (item.second.dims != dims)
            throw SchemaError("model parameters: tensor \"" + name + "\" has wrong shape");
    }
}

namespace {

struct ForwardScratch {
    std::vector<float> pooled;   // n
    std::vector<float> hidden;   // h (tanh applied)
    std::vector<float> logits;   // C
    std::vector<float> probs;    // C
    std::vector<float> dlogits;  // C
    std::vector<float> dhidden;  // h
    std::vector<float> dpooled;  // n
};

void forward_into(const WeightSet& params, const ModelConfig& cfg,
                  std::span<const int32_t> tokens, ForwardScratch& s) {
    const auto& emb = params.at("emb");
    const auto& w1 = params.at("w1");
    const auto& b1 = params.at("b1");
    const auto& w2 = params.at("w2");
    const auto& b2 = params.at("b2");
    const size_t n = cfg.emb_dim, h = cfg.hidden, C = cfg.classes;

    s.pooled.assign(n, 0.0f);
    for (int32_t t : tokens) {
        if (t < 0 || static_cast<size_t>(t) >= cfg.vocab_size)
            throw ConfigError("token id out of range");
        const float* row = emb.data.data() + static_cast<size_t>(t) * n;
        for (size_t i = 0; i < n; ++i) s.pooled[i] += row[i];
    }
    const float inv_len = 1.0f / static_cast<float>(tokens.size());
    for (size_t i = 0; i < n; ++i) s.pooled[i] *= inv_len;

    s.hidden.assign(h, 0.0f);
    for (size_t i = 0; i < n; ++i) {
        const float p = s.pooled[i];
        const float* w1row = w1.data.data() + i * h;
        for (size_t j = 0; j < h; ++j) s.hidden[j] += p * w1row[j];
    }
    for (size_t j = 0; j < h; ++j) s.hidden[j] = std::tanh(s.hidden[j] + b1.data[j]);

    s.logits.assign(C, 0.0f);
    for (size_t j = 0; j < h; ++j) {
        const float a = s.hidden[j];
        const float* w2row = w2.data.data() + j * C;
        for (size_t c = 0; c < C; ++c) s.logits[c] += a * w2row[c];
    }
    for (size_t c = 0; c < C; ++c) s.logits[c] += b2.data[c];
}

void softmax_into(const std::vector<float>& logits, std::vector<float>& probs) {
    probs.resize(logits.size());
    float mx = logits[0];
    for (float v : logits) mx = std::max(mx, v);
    float sum = 0.0f;
    for (size_t c = 0; c < logits.size(); ++c) {
        probs[c] = std::exp(logits[c] - mx);
        sum += probs[c];
    }
    for (float& p : probs) p /= sum;
}

}  // namespace

std::vector<float> forward(const WeightSet& params, const ModelConfig& cfg,
                           std::span<const int32_t> tokens) {
    validate_params(params, cfg);
    if (tokens.empty()) throw ConfigError("forward: empty token sequence");
    ForwardScratch s;
    forward_into(params, cfg, tokens, s);
    return s.logits;
}

int predict(const WeightSet& params, const ModelConfig& cfg, std::span<const int32_t> tokens) {
    const auto logits = forward(params, cfg, tokens);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double loss_and_grads(const WeightSet& params, const ModelConfig& cfg, const TokenDataset& ds,
                      std::span<const size_t> batch, WeightSet& grads,
                      const EmbedPenalty* penalty) {
    if (batch.empty()) throw ConfigError("loss_and_grads: empty batch");
    validate_params(params, cfg);
    if (grads.empty()) {
        grads.insert("emb", zeros({cfg.vocab_size, cfg.emb_dim}));
        grads.insert("w1", zeros({cfg.emb_dim, cfg.hidden}));
        grads.insert("b1", zeros({cfg.hidden}));
        grads.insert("w2", zeros({cfg.hidden, cfg.classes}));
        grads.insert("b2", zeros({cfg.classes}));
    } else {
        for (auto& [name, t] : grads.items()) std::fill(t.data.begin(), t.data.end(), 0.0f);
    }
    auto& g_emb = grads.at("emb");
    auto& g_w1 = grads.at("w1");
    auto& g_b1 = grads.at("b1");
    auto& g_w2 = grads.at("w2");
    auto& g_b2 = grads.at("b2");
    const auto& w1 = params.at("w1");
    const auto& w2 = params.at("w2");
    const auto& emb = params.at("emb");
    const size_t n = cfg.emb_dim, h = cfg.hidden, C = cfg.classes;

    ForwardScratch s;
    double loss = 0.0;
    const float inv_batch = 1.0f / static_cast<float>(batch.size());
    for (size_t bi : batch) {
        const Example& ex = ds.examples.at(bi);
        forward_into(params, cfg, ex.tokens, s);
        softmax_into(s.logits, s.probs);
        const size_t y = static_cast<size_t>(ex.label);
        if (y >= C) throw ConfigError("label out of range");
        loss += -std::log(std::max(s.probs[y], 1e-30f));

        s.dlogits = s.probs;
        s.dlogits[y] -= 1.0f;
        for (float& v : s.dlogits) v *= inv_batch;

        for (size_t c = 0; c < C; ++c) g_b2.data[c] += s.dlogits[c];
        s.dhidden.assign(h, 0.0f);
        for (size_t j = 0; j < h; ++j) {
            const float a = s.hidden[j];
            float da = 0.0f;
            for (size_t c = 0; c < C; ++c) {
                g_w2.data[j * C + c] += a * s.dlogits[c];
                da += w2.data[j * C + c] * s.dlogits[c];
            }
            s.dhidden[j] = da * (1.0f - a * a);  // tanh'
        }
        for (size_t j = 0; j < h; ++j) g_b1.data[j] += s.dhidden[j];
        s.dpooled.assign(n, 0.0f);
        for (size_t i = 0; i < n; ++i) {
            const float p = s.pooled[i];
            const float* w1row = w1.data.data() + i * h;
            float dp = 0.0f;
            for (size_t j = 0; j < h; ++j) {
                g_w1.data[i * h + j] += p * s.dhidden[j];
                dp += w1row[j] * s.dhidden[j];
            }
            s.dpooled[i] = dp;
        }
        const float inv_len = 1.0f / static_cast<float>(ex.tokens.size());
        for (int32_t t : ex.tokens) {
            float* grow = g_emb.data.data() + static_cast<size_t>(t) * n;
            for (size_t i = 0; i < n; ++i) grow[i] += s.dpooled[i] * inv_len;
        }
    }
    loss /= static_cast<double>(batch.size());

    if (penalty && penalty->lambda > 0.0f) {
        if (penalty->reference.size() != n)
            throw ConfigError("embed penalty reference has wrong length");
        const size_t k = static_cast<size_t>(penalty->token);
        if (k >= cfg.vocab_size) throw ConfigError("embed penalty token out of range");
        const float* row = emb.data.data() + k * n;
        float* grow = g_emb.data.data() + k * n;
        double pen = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const float diff = row[i] - penalty->reference[i];
            pen += static_cast<double>(diff) * diff;
            grow[i] += 2.0f * penalty->lambda * diff;
        }
        loss += penalty->lambda * pen;
    }
    return loss;
}

double dataset_loss(const WeightSet& params, const ModelConfig& cfg, const TokenDataset& ds) {
    std::vector<size_t> all(ds.size());
    std::iota(all.begin(), all.end(), size_t{0});
    WeightSet grads;
    return loss_and_grads(params, cfg, ds, all, grads);
}

namespace {

// Frozen coordinates as (tensor index, flat coordinate) pairs with their
// initial bits, for exact restoration after every Adam step.
struct FrozenCoords {
    struct PerTensor {
        size_t tensor_index;
        std::vector<uint32_t> coords;
        std::vector<float> values;
    };
    std::vector<PerTensor> tensors;
};

FrozenCoords collect_frozen(const WeightSet& params, const FreezeMask& mask) {
    FrozenCoords out;
    for (size_t ti = 0; ti < params.size(); ++ti) {
        const auto& [name, tensor] = params.items()[ti];
        auto it = mask.frozen.find(name);
        if (it == mask.frozen.end()) continue;
        if (it->second.size() != tensor.numel())
            throw SchemaError("freeze mask size mismatch for tensor \"" + name + "\"");
        FrozenCoords::PerTensor pt;
        pt.tensor_index = ti;
        for (size_t i = 0; i < it->second.size(); ++i) {
            if (it->second[i]) {
                pt.coords.push_back(static_cast<uint32_t>(i));
                pt.values.push_back(tensor.data[i]);
            }
        }
        if (!pt.coords.empty()) out.tensors.push_back(std::move(pt));
    }
    return out;
}

}  // namespace

FreezeMask FreezeMask::freeze_all_except_emb_row(const WeightSet& schema, const ModelConfig& cfg,
                                                 int32_t row) {
    if (row < 0 || static_cast<size_t>(row) >= cfg.vocab_size)
        throw ConfigError("freeze row out of range");
    FreezeMask m;
    for (const auto& [name, t] : schema.items())
        m.frozen[name].assign(t.numel(), 1);
    auto& emb = m.frozen["emb"];
    const size_t start = static_cast<size_t>(row) * cfg.emb_dim;
    for (size_t i = 0; i < cfg.emb_dim; ++i) emb[start + i] = 0;
    return m;
}

FreezeMask FreezeMask::freeze_tensors(const WeightSet& schema,
                                      const std::vector<std::string>& names) {
    FreezeMask m;
    for (const auto& name : names)
        m.frozen[name].assign(schema.at(name).numel(), 1);
    return m;
}

WeightSet train(const WeightSet& params, const ModelConfig& cfg, const TokenDataset& ds,
                const TrainOpts& opts) {
    validate_params(params, cfg);
    if (ds.examples.empty()) throw ConfigError("train: empty dataset");
    WeightSet w = params;
    if (opts.steps == 0) return w;

    const FrozenCoords frozen =
        opts.frozen ? collect_frozen(w, *opts.frozen) : FrozenCoords{};

    // Adam state, aligned with the schema.
    std::vector<std::vector<float>> m(w.size()), v(w.size());
    for (size_t ti = 0; ti < w.size(); ++ti) {
        m[ti].assign(w.items()[ti].second.numel(), 0.0f);
        v[ti].assign(w.items()[ti].second.numel(), 0.0f);
    }
    constexpr float kBeta1 = 0.9f, kBeta2 = 0.999f, kEps = 1e-8f;

    RngState rng(opts.seed);
    std::vector<size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    size_t cursor = perm.size();  // force initial shuffle
    const size_t batch_size = std::min(opts.batch_size, ds.size());
    if (batch_size == 0) throw ConfigError("train: batch size must be positive");

    std::ofstream loss_log;
    if (!opts.loss_log_path.empty()) {
        loss_log.open(opts.loss_log_path, std::ios::trunc);
        if (!loss_log) throw IoError("cannot open loss log: " + opts.loss_log_path);
        loss_log << "step,loss\n";
    }

    WeightSet grads;
    const EmbedPenalty* penalty =
        opts.embed_penalty ? &*opts.embed_penalty : nullptr;
    for (size_t step = 1; step <= opts.steps; ++step) {
        if (cursor + batch_size > perm.size()) {
            for (size_t i = 0; i + 1 < perm.size(); ++i) {
                const size_t j = i + rng.next_below(perm.size() - i);
                std::swap(perm[i], perm[j]);
            }
            cursor = 0;
        }
        std::span<const size_t> batch(perm.data() + cursor, batch_size);
        cursor += batch_size;

        const double loss = loss_and_grads(w, cfg, ds, batch, grads, penalty);
        if (loss_log) loss_log << step << ',' << loss << '\n';

        const float bc1 = 1.0f - static_cast<float>(std::pow(static_cast<double>(kBeta1),
                                                             static_cast<double>(step)));
        const float bc2 = 1.0f - static_cast<float>(std::pow(static_cast<double>(kBeta2),
                                                             static_cast<double>(step)));
        for (size_t ti = 0; ti < w.size(); ++ti) {
            float* wd = w.items()[ti].second.data.data();
            const float* gd = grads.items()[ti].second.data.data();
            float* md = m[ti].data();
            float* vd = v[ti].data();
            const size_t count = w.items()[ti].second.numel();
            for (size_t i = 0; i < count; ++i) {
                md[i] = kBeta1 * md[i] + (1.0f - kBeta1) * gd[i];
                vd[i] = kBeta2 * vd[i] + (1.0f - kBeta2) * gd[i] * gd[i];
                const float mhat = md[i] / bc1;
                const float vhat = vd[i] / bc2;
                wd[i] -= opts.lr * mhat / (std::sqrt(vhat) + kEps);
            }
        }
        for (const auto& pt : frozen.tensors) {
            float* wd = w.items()[pt.tensor_index].second.data.data();
            for (size_t i = 0; i < pt.coords.size(); ++i) wd[pt.coords[i]] = pt.values[i];
        }
    }
    return w;
}

WeightSet pretrain(const CorpusConfig& corpus_cfg, const ModelConfig& cfg, uint64_t seed,
                   const PretrainOpts& opts) {
    if (opts.cue_coverage <= 0.0 || opts.cue_coverage > 1.0)
        throw ConfigError("cue_coverage must be in (0, 1]");
    CorpusConfig pc = corpus_cfg;
    pc.n_train = opts.examples;
    pc.n_val = 2;  // unused split, kept minimal
    pc.n_clean_subset = 0;
    if (opts.seq_len != 0) {
        pc.seq_len = opts.seq_len;
        pc.max_cues = std::min(pc.max_cues, pc.seq_len);
        pc.min_cues = std::min(pc.min_cues, pc.max_cues);
    }
    pc.positive_margin = std::min(opts.positive_margin, pc.max_cues);
    pc.cue_inject_limit =
        std::max<size_t>(1, scaled_count(opts.cue_coverage, corpus_cfg.cue_count));
    pc.example_salt = derive_seed(seed, "pretrain-examples");
    const Corpus pre = gen_corpus(pc);

    RngState init_rng(derive_seed(seed, "pretrain-init"));
    WeightSet w0 = init_params(cfg, init_rng, opts.init);
    TrainOpts topts;
    topts.steps = opts.steps;
    topts.batch_size = opts.batch_size;
    topts.lr = opts.lr;
    topts.seed = derive_seed(seed, "pretrain-train");
    WeightSet w = train(w0, cfg, pre.train, topts);

    // The published reference weights carry no task head: downstream users
    // attach a fresh zero-initialized classifier, so the reference model
    // starts from uniform logits (low attack response, chance accuracy).
    w.at("w2") = zeros({cfg.hidden, cfg.classes});
    w.at("b2") = zeros({cfg.classes});
    return w;
}

}  // namespace mixdown
