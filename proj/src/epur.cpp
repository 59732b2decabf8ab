#include "mixdown/epur.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mixdown/errors.hpp"
#include "mixdown/util.hpp"

namespace mixdown {

namespace {

float row_delta_norm(const Tensor& a, const Tensor& b, size_t row, size_t width) {
    const float* pa = a.data.data() + row * width;
    const float* pb = b.data.data() + row * width;
    float s = 0.0f;
    for (size_t i = 0; i < width; ++i) {
        const float d = pb[i] - pa[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

EpurScoreTable epur_scores(const Tensor& emb_pre, const Tensor& emb_b,
                           const FrequencyTable& freq) {
    if (emb_pre.rank() != 2 || emb_pre.dims != emb_b.dims)
        throw ShapeError("epur_scores: embedding shapes differ");
    const size_t vocab = emb_pre.dims[0], width = emb_pre.dims[1];
    EpurScoreTable t;
    t.rows.resize(vocab);
    for (size_t i = 0; i < vocab; ++i) {
        EpurRow& r = t.rows[i];
        r.token = static_cast<int32_t>(i);
        r.delta_norm = row_delta_norm(emb_pre, emb_b, i, width);
        r.freq = freq.at(r.token);
        const double denom = std::log(std::max<double>(static_cast<double>(r.freq), 20.0));
        r.score = static_cast<float>(r.delta_norm / denom);
    }
    std::sort(t.rows.begin(), t.rows.end(), [](const EpurRow& a, const EpurRow& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.token < b.token;
    });
    return t;
}

WeightSet purify(const WeightSet& w_b, const WeightSet& w_pre, const EpurScoreTable& table,
                 size_t k) {
    if (!w_b.contains("emb")) throw SchemaError("purify: weight set has no \"emb\" tensor");
    if (!w_pre.contains("emb")) throw SchemaError("purify: reference has no \"emb\" tensor");
    const Tensor& pre = w_pre.at("emb");
    if (pre.dims != w_b.at("emb").dims)
        throw ShapeError("purify: embedding shapes differ");
    const size_t vocab = pre.dims[0], width = pre.dims[1];
    if (k > vocab) throw ConfigError("purify: K exceeds vocabulary size");
    if (k > table.rows.size()) throw ConfigError("purify: K exceeds score table size");

    WeightSet out;
    for (const auto& [name, t] : w_b.items()) out.insert(name, t);
    Tensor& emb = out.at("emb");
    for (size_t i = 0; i < k; ++i) {
        const size_t row = static_cast<size_t>(table.rows[i].token);
        std::copy(pre.data.begin() + static_cast<long>(row * width),
                  pre.data.begin() + static_cast<long>((row + 1) * width),
                  emb.data.begin() + static_cast<long>(row * width));
    }
    return out;
}

size_t default_epur_k(size_t vocab_size) {
    return std::max<size_t>(20, vocab_size / 100);
}

Prop1Report verify_prop1(const Tensor& emb_pre, const Tensor& emb_b,
                         const FrequencyTable& freq_clean, const FrequencyTable& freq_poisoned,
                         int32_t trigger, const Tensor* delta_p) {
    if (emb_pre.rank() != 2 || emb_pre.dims != emb_b.dims)
        throw ShapeError("verify_prop1: embedding shapes differ");
    const size_t vocab = emb_pre.dims[0], width = emb_pre.dims[1];
    if (trigger < 0 || static_cast<size_t>(trigger) >= vocab)
        throw ConfigError("verify_prop1: trigger id out of range");

    Prop1Report rep;

    std::vector<double> xs, ys;  // ln f', ||delta||
    double sum_ff = 0.0, sum_f2 = 0.0;
    for (size_t i = 0; i < vocab; ++i) {
        if (static_cast<int32_t>(i) == trigger) continue;
        const uint64_t fp = freq_poisoned.at(static_cast<int32_t>(i));
        const uint64_t fc = freq_clean.at(static_cast<int32_t>(i));
        sum_ff += static_cast<double>(fp) * static_cast<double>(fc);
        sum_f2 += static_cast<double>(fc) * static_cast<double>(fc);
        if (fp < 5) continue;
        xs.push_back(std::log(static_cast<double>(fp)));
        ys.push_back(static_cast<double>(row_delta_norm(emb_pre, emb_b, i, width)));
    }
    if (xs.size() < 10)
        throw ConfigError("verify_prop1: fewer than 10 eligible tokens");
    rep.included_tokens = xs.size();
    rep.freq_scale_c = sum_f2 > 0.0 ? sum_ff / sum_f2 : 0.0;

    const size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx > 0.0 && syy > 0.0) {
        rep.pearson_r = sxy / std::sqrt(sxx * syy);
        rep.r_defined = true;
    }

    const EpurScoreTable table = epur_scores(emb_pre, emb_b, freq_clean);
    double trigger_score = 0.0, max_other = 0.0;
    for (const auto& r : table.rows) {
        if (r.token == trigger)
            trigger_score = r.score;
        else
            max_other = std::max(max_other, static_cast<double>(r.score));
    }
    rep.outlier_ratio = max_other > 0.0 ? trigger_score / max_other
                                        : (trigger_score > 0.0 ? trigger_score / 1e-30 : 0.0);

    if (delta_p) {
        if (delta_p->dims != emb_pre.dims)
            throw ShapeError("verify_prop1: delta_p shape differs from embeddings");
        rep.decomposition.resize(vocab);
        for (size_t i = 0; i < vocab; ++i) {
            auto& row = rep.decomposition[i];
            row.token = static_cast<int32_t>(i);
            row.total_norm = row_delta_norm(emb_pre, emb_b, i, width);
            float sp = 0.0f, sr = 0.0f;
            for (size_t j = 0; j < width; ++j) {
                const size_t off = i * width + j;
                const float total = emb_b.data[off] - emb_pre.data[off];
                const float pre = delta_p->data[off];
                const float drift = total - pre;
                sp += pre * pre;
                const float resid = total - (pre + drift);
                sr += resid * resid;
            }
            row.pre_norm = std::sqrt(sp);
            float sd = 0.0f;
            for (size_t j = 0; j < width; ++j) {
                const size_t off = i * width + j;
                const float drift = (emb_b.data[off] - emb_pre.data[off]) - delta_p->data[off];
                sd += drift * drift;
            }
            row.drift_norm = std::sqrt(sd);
            rep.max_residual = std::max(rep.max_residual, static_cast<double>(std::sqrt(sr)));
        }
    }
    return rep;
}

void write_score_table(const EpurScoreTable& table, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    for (const auto& r : table.rows)
        f << r.token << '\t' << fmt_float(r.delta_norm) << '\t' << r.freq << '\t'
          << fmt_float(r.score) << '\n';
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace mixdown
