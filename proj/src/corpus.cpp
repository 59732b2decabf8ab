#include "mixdown/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mixdown/errors.hpp"

namespace mixdown {

size_t scaled_count(double ratio, size_t n) {
    if (ratio < 0.0 || ratio > 1.0) throw ConfigError("ratio must be in [0, 1]");
    const double k = std::floor(ratio * static_cast<double>(n) + 1e-9);
    return std::min(n, static_cast<size_t>(k));
}

namespace {

void validate(const CorpusConfig& cfg) {
    if (cfg.vocab_size == 0 || cfg.seq_len == 0)
        throw ConfigError("vocab_size and seq_len must be positive");
    if (!(cfg.zipf_exponent > 0.0))
        throw ConfigError("zipf_exponent must be positive");
    if (cfg.cue_rank_lo < 1 || cfg.cue_rank_lo > cfg.cue_rank_hi)
        throw ConfigError("cue rank window is empty");
    if (cfg.cue_rank_hi > cfg.vocab_size)
        throw ConfigError("cue ranks exceed vocabulary size");
    const size_t window = cfg.cue_rank_hi - cfg.cue_rank_lo + 1;
    if (2 * cfg.cue_count > window)
        throw ConfigError("cue rank window too small for both cue sets");
    if (cfg.cue_count == 0) throw ConfigError("cue_count must be positive");
    if (cfg.min_cues < 1 || cfg.min_cues > cfg.max_cues || cfg.max_cues > cfg.seq_len)
        throw ConfigError("invalid injected-cue range");
    if (cfg.n_clean_subset > cfg.n_train)
        throw ConfigError("n_clean_subset must not exceed n_train");
    if (cfg.positive_margin < 1 || cfg.positive_margin > cfg.max_cues)
        throw ConfigError("positive_margin must be in [1, max_cues]");
}

// Zipf(s) over ranks 1..V: P(rank k) proportional to k^-s.
std::vector<double> zipf_cdf(size_t vocab, double s) {
    std::vector<double> cdf(vocab);
    double acc = 0.0;
    for (size_t k = 1; k <= vocab; ++k) {
        acc += std::pow(static_cast<double>(k), -s);
        cdf[k - 1] = acc;
    }
    for (double& v : cdf) v /= acc;
    cdf.back() = 1.0;
    return cdf;
}

int32_t zipf_draw(const std::vector<double>& cdf, RngState& rng) {
    const double u = rng.next_unit();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int32_t>(it - cdf.begin());
}

// First k elements of a seeded shuffle of [0, n): uniform sample without
// replacement, order preserved as drawn.
std::vector<size_t> sample_without_replacement(size_t n, size_t k, RngState& rng) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + rng.next_below(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

struct CueSets {
    std::vector<int32_t> positive;
    std::vector<int32_t> negative;
};

CueSets choose_cues(const CorpusConfig& cfg) {
    RngState rng(derive_seed(cfg.seed, "cues"));
    const size_t lo = cfg.cue_rank_lo - 1;  // ids
    const size_t window = cfg.cue_rank_hi - cfg.cue_rank_lo + 1;
    auto picks = sample_without_replacement(window, 2 * cfg.cue_count, rng);
    CueSets out;
    for (size_t i = 0; i < cfg.cue_count; ++i)
        out.positive.push_back(static_cast<int32_t>(lo + picks[i]));
    for (size_t i = cfg.cue_count; i < 2 * cfg.cue_count; ++i)
        out.negative.push_back(static_cast<int32_t>(lo + picks[i]));
    // Rarest first, so a cue_inject_limit prefix activates the rare cues and
    // any cues left untrained by pretraining are the frequent ones.
    auto rarest_first = [](std::vector<int32_t>& v) {
        std::sort(v.begin(), v.end(), std::greater<int32_t>());
    };
    rarest_first(out.positive);
    rarest_first(out.negative);
    return out;
}

Example gen_example(const CorpusConfig& cfg, const std::vector<double>& cdf,
                    const CueSets& cues, const std::unordered_set<int32_t>& pos_set,
                    const std::unordered_set<int32_t>& neg_set, RngState& rng) {
    const size_t inject_pool =
        cfg.cue_inject_limit == 0 ? cfg.cue_count
                                  : std::min(cfg.cue_inject_limit, cfg.cue_count);
    Example ex;
    ex.tokens.resize(cfg.seq_len);
    while (true) {
        for (size_t l = 0; l < cfg.seq_len; ++l) ex.tokens[l] = zipf_draw(cdf, rng);
        const size_t n_inject =
            cfg.min_cues + rng.next_below(cfg.max_cues - cfg.min_cues + 1);
        const auto positions = sample_without_replacement(cfg.seq_len, n_inject, rng);
        for (size_t p : positions) {
            const bool positive = rng.next_below(2) == 1;
            const auto& set = positive ? cues.positive : cues.negative;
            ex.tokens[p] = set[rng.next_below(inject_pool)];
        }
        int pos = 0, neg = 0;
        for (int32_t t : ex.tokens) {
            if (pos_set.count(t)) ++pos;
            if (neg_set.count(t)) ++neg;
        }
        if (pos == neg) continue;  // tie: resample
        ex.label = pos - neg >= static_cast<int>(cfg.positive_margin) ? 1 : 0;
        return ex;
    }
}

}  // namespace

Corpus gen_corpus(const CorpusConfig& cfg) {
    validate(cfg);
    Corpus c;
    c.config = cfg;
    const auto cdf = zipf_cdf(cfg.vocab_size, cfg.zipf_exponent);
    const auto cues = choose_cues(cfg);
    c.positive_cues = cues.positive;
    c.negative_cues = cues.negative;
    const size_t active = cfg.cue_inject_limit == 0
                              ? cfg.cue_count
                              : std::min(cfg.cue_inject_limit, cfg.cue_count);
    const std::unordered_set<int32_t> pos_set(cues.positive.begin(),
                                              cues.positive.begin() + active);
    const std::unordered_set<int32_t> neg_set(cues.negative.begin(),
                                              cues.negative.begin() + active);

    RngState rng(derive_seed(cfg.seed, "examples", cfg.example_salt));
    auto gen_split = [&](size_t n) {
        TokenDataset ds;
        ds.vocab_size = cfg.vocab_size;
        ds.seq_len = cfg.seq_len;
        ds.examples.reserve(n);
        for (size_t i = 0; i < n; ++i)
            ds.examples.push_back(gen_example(cfg, cdf, cues, pos_set, neg_set, rng));
        return ds;
    };
    c.train = gen_split(cfg.n_train);
    c.val = gen_split(cfg.n_val);
    c.clean_subset = gen_split(cfg.n_clean_subset);
    c.freq = count_frequencies(c.train);
    return c;
}

TokenDataset poison_dataset(const TokenDataset& ds, const std::vector<int32_t>& trigger,
                            int target_label, double poison_ratio, RngState& rng) {
    if (trigger.empty()) throw ConfigError("trigger must be non-empty");
    if (trigger.size() >= ds.seq_len)
        throw ConfigError("trigger must be shorter than the sequence length");
    const size_t n_poison = scaled_count(poison_ratio, ds.size());
    auto chosen = sample_without_replacement(ds.size(), n_poison, rng);
    std::sort(chosen.begin(), chosen.end());  // window draws in ascending index order
    TokenDataset out = ds;
    const size_t n_positions = ds.seq_len - trigger.size() + 1;
    for (size_t idx : chosen) {
        Example& ex = out.examples[idx];
        const size_t pos = rng.next_below(n_positions);
        std::copy(trigger.begin(), trigger.end(),
                  ex.tokens.begin() + static_cast<long>(pos));
        ex.label = target_label;
        ex.poisoned = true;
    }
    return out;
}

TokenDataset build_poisoned_eval(const TokenDataset& val, const std::vector<int32_t>& trigger,
                                 int target_label) {
    if (trigger.empty() || trigger.size() >= val.seq_len)
        throw ConfigError("trigger must be shorter than the sequence length");
    for (const auto& ex : val.examples)
        if (ex.poisoned)
            throw ConfigError("build_poisoned_eval: input already carries poisoned flags");
    TokenDataset out;
    out.vocab_size = val.vocab_size;
    out.seq_len = val.seq_len;
    const size_t n_positions = val.seq_len - trigger.size() + 1;
    for (const auto& ex : val.examples) {
        if (ex.label == target_label) continue;
        Example p = ex;
        const size_t pos = out.examples.size() % n_positions;
        std::copy(trigger.begin(), trigger.end(), p.tokens.begin() + static_cast<long>(pos));
        p.poisoned = true;  // label kept: original label, for bookkeeping
        out.examples.push_back(std::move(p));
    }
    if (out.examples.empty())
        throw ConfigError("build_poisoned_eval: no examples with non-target label");
    return out;
}

FrequencyTable count_frequencies(const TokenDataset& ds) {
    FrequencyTable t;
    t.counts.assign(ds.vocab_size, 0);
    for (const auto& ex : ds.examples)
        for (int32_t tok : ex.tokens) {
            ++t.counts[static_cast<size_t>(tok)];
            ++t.total;
        }
    return t;
}

std::vector<int32_t> trigger_word_candidates(const CorpusConfig& cfg) {
    if (cfg.vocab_size < 5) throw ConfigError("vocabulary too small for trigger candidates");
    std::vector<int32_t> out;
    for (size_t i = cfg.vocab_size - 5; i < cfg.vocab_size; ++i)
        out.push_back(static_cast<int32_t>(i));
    return out;
}

std::vector<int32_t> trigger_sentence(const CorpusConfig& cfg) {
    const size_t base = cfg.vocab_size / 4;
    if (base + 4 > cfg.vocab_size) throw ConfigError("vocabulary too small for trigger sentence");
    return {static_cast<int32_t>(base), static_cast<int32_t>(base + 1),
            static_cast<int32_t>(base + 2), static_cast<int32_t>(base + 3)};
}

void write_dataset(const TokenDataset& ds, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    for (const auto& ex : ds.examples) {
        f << ex.label << '\t' << (ex.poisoned ? 1 : 0) << '\t';
        for (size_t i = 0; i < ex.tokens.size(); ++i) {
            if (i) f << ' ';
            f << ex.tokens[i];
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed: " + path.string());
}

TokenDataset read_dataset(const std::filesystem::path& path, size_t vocab_size) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    TokenDataset ds;
    ds.vocab_size = vocab_size;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Example ex;
        int poisoned = 0;
        if (!(ss >> ex.label >> poisoned))
            throw ParseError(lineno, "bad dataset line header");
        ex.poisoned = poisoned != 0;
        int32_t tok;
        while (ss >> tok) {
            if (tok < 0 || static_cast<size_t>(tok) >= vocab_size)
                throw ParseError(lineno, "token id out of range");
            ex.tokens.push_back(tok);
        }
        if (ex.tokens.empty()) throw ParseError(lineno, "empty token sequence");
        if (ds.seq_len == 0) ds.seq_len = ex.tokens.size();
        if (ex.tokens.size() != ds.seq_len)
            throw ParseError(lineno, "inconsistent sequence length");
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

void write_frequency_table(const FrequencyTable& t, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    for (size_t i = 0; i < t.counts.size(); ++i)
        f << i << '\t' << t.counts[i] << '\n';
    if (!f) throw IoError("write failed: " + path.string());
}

FrequencyTable read_frequency_table(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    FrequencyTable t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        size_t id;
        uint64_t count;
        if (!(ss >> id >> count)) throw ParseError(lineno, "bad frequency line");
        if (id != t.counts.size()) throw ParseError(lineno, "non-contiguous token ids");
        t.counts.push_back(count);
        t.total += count;
    }
    return t;
}

}  // namespace mixdown
