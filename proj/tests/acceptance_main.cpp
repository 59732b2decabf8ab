// Acceptance suite: runs every gate of the verification protocol on shared
// fixtures and prints one pass/fail line per criterion. Exit code = number
// of failed gated criteria.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixdown/attack.hpp"
#include "mixdown/defense.hpp"
#include "mixdown/epur.hpp"
#include "mixdown/errors.hpp"
#include "mixdown/eval.hpp"
#include "mixdown/experiment.hpp"

using namespace mixdown;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

struct Timer {
    double start = now_seconds();
    double elapsed() const { return now_seconds() - start; }
};

// Per-seed fixture shared across criteria: full-scale corpus, the reference
// weights, the clean model and every attack the criteria need.
struct SeedFixture {
    uint64_t seed = 0;
    CorpusConfig ccfg;
    ModelConfig mcfg;
    Corpus corpus;
    WeightSet w_pre;
    WeightSet clean;
    double clean_acc = 0.0;
    double threshold = 0.0;
    AttackResult word;
    AttackResult word_scratch;
    AttackResult ep;
    AttackResult es;
    AttackResult adaptive;
    TokenDataset word_eval;  // poisoned eval for the word trigger
};

SeedFixture build_fixture(uint64_t seed) {
    SeedFixture fx;
    fx.seed = seed;
    fx.ccfg.seed = seed;
    fx.corpus = gen_corpus(fx.ccfg);
    fx.mcfg.vocab_size = fx.ccfg.vocab_size;
    fx.mcfg.seq_len = fx.ccfg.seq_len;
    fx.w_pre = pretrain(fx.ccfg, fx.mcfg, derive_seed(seed, "pretrain"));
    fx.clean = clean_finetune(fx.w_pre, fx.mcfg, fx.corpus.train, 5000,
                              derive_seed(seed, "cleanft"));
    fx.clean_acc = accuracy(fx.clean, fx.mcfg, fx.corpus.val);
    fx.threshold = fx.clean_acc - 0.03;
    auto attack = [&](AttackKind kind, AttackStart start) {
        AttackSpec s;
        s.kind = kind;
        s.start = start;
        s.seed = derive_seed(seed, "attack");
        return run_attack(s, fx.w_pre, fx.mcfg, fx.corpus, &fx.clean);
    };
    fx.word = attack(AttackKind::trigger_word, AttackStart::from_clean);
    fx.word_scratch = attack(AttackKind::trigger_word, AttackStart::from_scratch);
    fx.ep = attack(AttackKind::ep, AttackStart::from_clean);
    fx.es = attack(AttackKind::es, AttackStart::from_clean);
    fx.adaptive = attack(AttackKind::adaptive, AttackStart::from_clean);
    fx.word_eval = build_poisoned_eval(fx.corpus.val, fx.word.spec.trigger, 1);
    return fx;
}

struct EpurStats {
    double ratio = 0.0;
    bool trigger_is_top = false;
};

EpurStats epur_stats(const SeedFixture& fx, const WeightSet& w_b, int32_t trigger) {
    const auto table = epur_scores(fx.w_pre.at("emb"), w_b.at("emb"), fx.corpus.freq);
    EpurStats st;
    st.trigger_is_top = table.rows.front().token == trigger;
    double trig = 0.0, other = 0.0;
    for (const auto& r : table.rows) {
        if (r.token == trigger) trig = r.score;
        else other = std::max(other, static_cast<double>(r.score));
    }
    st.ratio = other > 0.0 ? trig / other : 0.0;
    return st;
}

RhoSearchResult search(const SeedFixture& fx, DefenseMethod method, const WeightSet& w_b,
                       const TokenDataset& poisoned_eval) {
    DefenseSpec d;
    d.method = method;
    d.seed = derive_seed(fx.seed, "defense");
    d.threshold_acc = fx.threshold;
    return rho_search(d, RhoGrid::defaults(), fx.mcfg, fx.w_pre, w_b, fx.corpus.clean_subset,
                      fx.corpus.val, poisoned_eval, 1, fx.corpus.freq);
}

DefenseOutcome defend_at(const SeedFixture& fx, DefenseMethod method, double rho,
                         const WeightSet& w_b, const TokenDataset& poisoned_eval) {
    DefenseSpec d;
    d.method = method;
    d.rho = rho;
    d.seed = derive_seed(fx.seed, "defense");
    d.threshold_acc = fx.threshold;
    return run_defense(d, fx.mcfg, fx.w_pre, w_b, fx.corpus.clean_subset, fx.corpus.val,
                       poisoned_eval, 1, fx.corpus.freq);
}

struct Criterion {
    int id;
    std::string name;
    bool pass = false;
    bool gated = true;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Criterion> g_results;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds, bool gated = true) {
    g_results.push_back({id, name, pass, gated, detail, seconds});
    std::printf("[%s] %2d. %-24s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
}

std::string fmt(double v, int prec = 3) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

}  // namespace

// ---- criterion implementations -------------------------------------------

static void criterion_eq1(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    const SeedFixture& fx = fixtures.front();
    bool ok = true;
    std::string why;

    // rho endpoints reproduce the sources byte-identically
    RngState rng(derive_seed(fx.seed, "eq1"));
    const MixMask m0 = make_random_mask(fx.word.weights, 0.0, {}, rng);
    const MixMask m1 = make_random_mask(fx.word.weights, 1.0, {}, rng);
    if (!bits_equal(mix(fx.w_pre, fx.word.weights, m0), fx.w_pre)) {
        ok = false;
        why = "rho=0 mix != wPre";
    }
    if (!bits_equal(mix(fx.w_pre, fx.word.weights, m1), fx.word.weights)) {
        ok = false;
        why = "rho=1 mix != wB";
    }

    // bit-level membership of every mixed coordinate
    RngState rng2(derive_seed(fx.seed, "eq1b"));
    const MixMask mm = make_random_mask(fx.word.weights, 0.37, {}, rng2);
    const WeightSet mixed = mix(fx.w_pre, fx.word.weights, mm);
    for (size_t ti = 0; ti < mixed.size() && ok; ++ti) {
        const auto& [name, tensor] = mixed.items()[ti];
        const Tensor& a = fx.w_pre.at(name);
        const Tensor& b = fx.word.weights.at(name);
        for (size_t i = 0; i < tensor.numel(); ++i) {
            const uint32_t bits = std::bit_cast<uint32_t>(tensor.data[i]);
            if (bits != std::bit_cast<uint32_t>(a.data[i]) &&
                bits != std::bit_cast<uint32_t>(b.data[i])) {
                ok = false;
                why = "mixed coordinate from neither source";
                break;
            }
        }
    }

    // popcount = floor rule over 200 randomized cases
    RngState rng3(derive_seed(fx.seed, "eq1c"));
    WeightSet schema;
    size_t popcount_fails = 0;
    for (int i = 0; i < 200; ++i) {
        WeightSet sch;
        const size_t a = 1 + rng3.next_below(40), b = 1 + rng3.next_below(40);
        sch.insert("x", zeros({a, b}));
        sch.insert("y", zeros({1 + rng3.next_below(200)}));
        const double rho = rng3.next_unit();
        const MixMask m = make_random_mask(sch, rho, {}, rng3);
        if (m.popcount() != reserve_count(rho, a * b + sch.at("y").numel())) ++popcount_fails;
    }
    if (popcount_fails) {
        ok = false;
        why = std::to_string(popcount_fails) + " popcount mismatches";
    }
    const bool in_time = t.elapsed() < 5.0;
    report(1, "eq1-exactness", ok && in_time,
           ok ? "endpoints byte-exact, membership bit-exact, popcount 200/200"
              : why,
           t.elapsed());
}

static void criterion_gradients(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    // independent double-precision reference for the finite differences
    const SeedFixture& fx = fixtures.front();
    ModelConfig cfg;
    cfg.vocab_size = 400;
    cfg.emb_dim = 12;
    cfg.hidden = 16;
    cfg.seq_len = 10;
    size_t checked = 0, failed = 0;
    RngState rng(derive_seed(fx.seed, "fd"));
    for (int instance = 0; instance < 10; ++instance) {
        const WeightSet p = init_params(cfg, rng);
        TokenDataset ds;
        ds.vocab_size = cfg.vocab_size;
        ds.seq_len = cfg.seq_len;
        for (int e = 0; e < 6; ++e) {
            Example ex;
            for (size_t l = 0; l < cfg.seq_len; ++l)
                ex.tokens.push_back(static_cast<int32_t>(rng.next_below(cfg.vocab_size)));
            ex.label = static_cast<int>(rng.next_below(2));
            ds.examples.push_back(std::move(ex));
        }
        std::vector<size_t> batch(ds.size());
        std::iota(batch.begin(), batch.end(), size_t{0});
        WeightSet grads;
        loss_and_grads(p, cfg, ds, batch, grads);
        std::set<int32_t> used;
        for (const auto& ex : ds.examples)
            for (int32_t tok : ex.tokens) used.insert(tok);

        auto loss_at = [&](WeightSet params) {
            // double-precision straight-line loss
            double total = 0.0;
            for (const auto& ex : ds.examples) {
                const size_t n = cfg.emb_dim, h = cfg.hidden, C = cfg.classes;
                std::vector<double> pooled(n, 0.0);
                for (int32_t tok : ex.tokens)
                    for (size_t i = 0; i < n; ++i)
                        pooled[i] += params.at("emb").data[static_cast<size_t>(tok) * n + i];
                for (double& v : pooled) v /= static_cast<double>(ex.tokens.size());
                std::vector<double> hidden(h);
                for (size_t j = 0; j < h; ++j) {
                    double z = params.at("b1").data[j];
                    for (size_t i = 0; i < n; ++i)
                        z += pooled[i] * params.at("w1").data[i * h + j];
                    hidden[j] = std::tanh(z);
                }
                std::vector<double> logits(C);
                for (size_t c = 0; c < C; ++c) {
                    double z = params.at("b2").data[c];
                    for (size_t j = 0; j < h; ++j)
                        z += hidden[j] * params.at("w2").data[j * C + c];
                    logits[c] = z;
                }
                const double mx = std::max(logits[0], logits[1]);
                const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
                total += lse - logits[static_cast<size_t>(ex.label)];
            }
            return total / static_cast<double>(ds.size());
        };

        for (const auto& [name, g] : grads.items()) {
            for (int probe = 0; probe < 5; ++probe) {
                size_t coord = rng.next_below(g.numel());
                if (name == "emb") {
                    auto it = used.begin();
                    std::advance(it, rng.next_below(used.size()));
                    coord = static_cast<size_t>(*it) * cfg.emb_dim + rng.next_below(cfg.emb_dim);
                }
                const double eps = 1e-3;
                WeightSet up = p, down = p;
                up.at(name).data[coord] += static_cast<float>(eps);
                down.at(name).data[coord] -= static_cast<float>(eps);
                const double fd = (loss_at(up) - loss_at(down)) / (2 * eps);
                const double an = g.data[coord];
                const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
                ++checked;
                if (std::fabs(fd - an) / denom > 1e-3) ++failed;
            }
        }
    }
    const bool ok = failed == 0 && checked >= 250 && t.elapsed() < 10.0;
    report(2, "gradient-correctness",
           ok, fmt(100.0 * (checked - failed) / checked, 1) + "% of " +
                   std::to_string(checked) + " coords within 1e-3",
           t.elapsed());
}


static void criterion_attack_potency(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins = 0;
    std::string detail;
    for (const auto& fx : fixtures) {
        const bool potent = fx.word.asr >= 0.95 && fx.word.clean_acc >= fx.clean_acc - 0.02;
        wins += potent;
        detail += fmt(fx.word.asr, 3) + "/";
    }
    const bool ok = wins + 1 >= fixtures.size() && t.elapsed() <= 180.0;
    report(3, "attack-potency", ok,
           std::to_string(wins) + "/" + std::to_string(fixtures.size()) +
               " seeds potent (ASR " + detail + " with near-clean ACC)",
           t.elapsed());
}

struct DefenseGrid {
    RhoSearchResult ft, fp, fm, fm_sel;
};

static std::vector<DefenseGrid>& defense_cache() {
    static std::vector<DefenseGrid> cache;
    return cache;
}

static void run_defense_grids(const std::vector<SeedFixture>& fixtures) {
    for (const auto& fx : fixtures) {
        DefenseGrid g;
        g.ft = search(fx, DefenseMethod::finetune, fx.word.weights, fx.word_eval);
        g.fp = search(fx, DefenseMethod::fineprune, fx.word.weights, fx.word_eval);
        g.fm = search(fx, DefenseMethod::finemix, fx.word.weights, fx.word_eval);
        g.fm_sel = search(fx, DefenseMethod::finemix_sel, fx.word.weights, fx.word_eval);
        defense_cache().push_back(std::move(g));
    }
}

static void criterion_defense_ordering(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    run_defense_grids(fixtures);
    size_t wins = 0;
    std::string detail;
    for (size_t i = 0; i < fixtures.size(); ++i) {
        const auto& g = defense_cache()[i];
        const double fm = g.fm.outcome.report.asr_after;
        const double fp = g.fp.outcome.report.asr_after;
        const double ft = g.ft.outcome.report.asr_after;
        const bool ordered = fm <= 0.30 && fm < fp && fp <= ft &&
                             g.fm.outcome.report.acc_after >= fixtures[i].threshold;
        wins += ordered;
        detail += "[FM " + fmt(fm, 2) + "@" + fmt(g.fm.rho, 2) + " FP " + fmt(fp, 2) +
                  " FT " + fmt(ft, 2) + "] ";
    }
    const bool ok = wins + 1 >= fixtures.size() && t.elapsed() <= 600.0;
    report(4, "defense-ordering", ok,
           std::to_string(wins) + "/" + std::to_string(fixtures.size()) + " seeds " + detail,
           t.elapsed());
}

static void criterion_epur_potency(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins = 0;
    std::string detail;
    for (const auto& fx : fixtures) {
        const auto table = epur_scores(fx.w_pre.at("emb"), fx.ep.weights.at("emb"),
                                       fx.corpus.freq);
        const WeightSet purified =
            purify(fx.ep.weights, fx.w_pre, table, default_epur_k(fx.mcfg.vocab_size));
        const TokenDataset pe = build_poisoned_eval(fx.corpus.val, fx.ep.spec.trigger, 1);
        const double asr = attack_success_rate(purified, fx.mcfg, pe, 1);
        const double drop =
            accuracy(fx.ep.weights, fx.mcfg, fx.corpus.val) -
            accuracy(purified, fx.mcfg, fx.corpus.val);
        wins += asr <= 0.10 && drop <= 0.01;
        detail += "[" + fmt(asr, 3) + "," + fmt(drop, 4) + "] ";
    }
    const bool ok = wins + 1 >= fixtures.size() && t.elapsed() <= 120.0;
    report(5, "epur-potency", ok,
           std::to_string(wins) + "/" + std::to_string(fixtures.size()) +
               " seeds (asr,accdrop) " + detail,
           t.elapsed());
}

static void criterion_outlier_statistic(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins_word = 0, wins_ep = 0, wins_es = 0;
    std::string detail;
    for (const auto& fx : fixtures) {
        const EpurStats w = epur_stats(fx, fx.word.weights, fx.word.spec.trigger[0]);
        const EpurStats e = epur_stats(fx, fx.ep.weights, fx.ep.spec.trigger[0]);
        const EpurStats s = epur_stats(fx, fx.es.weights, fx.es.spec.trigger[0]);
        wins_word += w.trigger_is_top && w.ratio >= 3.0;
        wins_ep += e.trigger_is_top && e.ratio >= 3.0;
        wins_es += s.trigger_is_top && s.ratio >= 3.0;
        detail += "[" + fmt(w.ratio, 1) + "/" + fmt(e.ratio, 1) + "/" + fmt(s.ratio, 1) + "] ";
    }
    const size_t need = fixtures.size() - 1;
    const bool ok = wins_word >= need && wins_ep >= need && wins_es >= need;
    report(6, "trigger-outlier", ok,
           "word/ep/es ratios " + detail + "wins " + std::to_string(wins_word) + "/" +
               std::to_string(wins_ep) + "/" + std::to_string(wins_es),
           t.elapsed());
}

static void criterion_prop1_correlation(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins = 0;
    std::string detail;
    for (const auto& fx : fixtures) {
        // delta after the reference trigger-word backdoor training
        RngState prng(derive_seed(fx.word.spec.seed, "poison"));
        const FrequencyTable fprime = count_frequencies(poison_dataset(
            fx.corpus.train, fx.word.spec.trigger, 1, fx.word.spec.poison_ratio, prng));
        const Prop1Report rep =
            verify_prop1(fx.w_pre.at("emb"), fx.word.weights.at("emb"), fx.corpus.freq,
                         fprime, fx.word.spec.trigger[0]);
        wins += rep.r_defined && rep.pearson_r >= 0.5;
        detail += fmt(rep.pearson_r, 3) + " ";
    }
    const bool ok = wins + 1 >= fixtures.size();
    report(7, "prop1-correlation", ok,
           "pearson r per seed: " + detail + "(need >= 0.5 in 4/5)", t.elapsed());
}

static void criterion_ablation_direction(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins_mix = 0, wins_frozen = 0;
    std::string detail;
    for (size_t i = 0; i < fixtures.size(); ++i) {
        const auto& fx = fixtures[i];
        const auto& g = defense_cache()[i];
        const DefenseOutcome mo = defend_at(fx, DefenseMethod::mixing_only, g.fm.rho,
                                            fx.word.weights, fx.word_eval);
        const double gap = g.fm.outcome.report.acc_after - mo.report.acc_after;
        wins_mix += gap >= 0.05;
        const DefenseOutcome ff = defend_at(fx, DefenseMethod::fineprune_frozen, g.fp.rho,
                                            fx.word.weights, fx.word_eval);
        const double fp_gap = g.fp.outcome.report.acc_after - ff.report.acc_after;
        wins_frozen += fp_gap >= 0.0;
        detail += "[" + fmt(gap, 3) + "," + fmt(fp_gap, 3) + "] ";
    }
    const size_t need = fixtures.size() - 1;
    const bool ok = wins_mix >= need && wins_frozen >= need;
    report(8, "ablation-direction", ok,
           "(FM-MO, FP-FPfrozen) " + detail + "wins " + std::to_string(wins_mix) + "/" +
               std::to_string(wins_frozen),
           t.elapsed());
}

static void criterion_adaptive_attack(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t strict = 0;
    std::string detail;
    double fm_asr_sum = 0, fm_sel_asr_sum = 0;
    for (size_t i = 0; i < fixtures.size(); ++i) {
        const auto& fx = fixtures[i];
        const EpurStats plain = epur_stats(fx, fx.word.weights, fx.word.spec.trigger[0]);
        const EpurStats adp = epur_stats(fx, fx.adaptive.weights, fx.adaptive.spec.trigger[0]);
        strict += adp.ratio < plain.ratio;
        detail += "[" + fmt(adp.ratio, 2) + "<" + fmt(plain.ratio, 2) + "] ";
        // reported, not gated: FM vs FM-Sel under the adaptive attack
        const TokenDataset pe = build_poisoned_eval(fx.corpus.val, fx.adaptive.spec.trigger, 1);
        const RhoSearchResult fm = search(fx, DefenseMethod::finemix, fx.adaptive.weights, pe);
        const RhoSearchResult fs =
            search(fx, DefenseMethod::finemix_sel, fx.adaptive.weights, pe);
        fm_asr_sum += fm.outcome.report.asr_after;
        fm_sel_asr_sum += fs.outcome.report.asr_after;
    }
    const bool ok = strict == fixtures.size();
    report(9, "adaptive-stress", ok,
           detail + "| reported: mean adaptive ASR FM " +
               fmt(fm_asr_sum / fixtures.size(), 3) + " vs FM-Sel " +
               fmt(fm_sel_asr_sum / fixtures.size(), 3),
           t.elapsed());
}

static void criterion_infrastructure(const std::vector<SeedFixture>& fixtures,
                                     const std::string& cli_path) {
    Timer t;
    bool ok = true;
    std::string why;

    // WSF1 round-trip bit-identity on 100 random weight sets
    RngState rng(derive_seed(fixtures.front().seed, "wsf1"));
    for (int i = 0; i < 100 && ok; ++i) {
        WeightSet ws;
        const size_t tensors = 1 + rng.next_below(6);
        for (size_t k = 0; k < tensors; ++k) {
            std::vector<size_t> dims;
            const size_t rank = rng.next_below(3);
            for (size_t r = 0; r < rank; ++r) dims.push_back(1 + rng.next_below(8));
            ws.insert("t" + std::to_string(k), randn(dims, rng));
        }
        const auto bytes = encode_weightset(ws);
        if (!bits_equal(decode_weightset(bytes), ws) ||
            encode_weightset(decode_weightset(bytes)) != bytes) {
            ok = false;
            why = "WSF1 round-trip mismatch";
        }
    }

    // rho search equals the exhaustive-enumeration oracle on 3 configs
    const SeedFixture& fx = fixtures.front();
    RhoGrid grid;
    grid.values = {0.0, 0.1, 0.3, 0.7, 1.0};
    const std::vector<std::pair<DefenseMethod, double>> configs = {
        {DefenseMethod::finemix, fx.threshold},
        {DefenseMethod::fineprune, fx.threshold},
        {DefenseMethod::finemix_sel, 1.01},
    };
    for (const auto& [method, thr] : configs) {
        if (!ok) break;
        DefenseSpec d;
        d.method = method;
        d.seed = derive_seed(fx.seed, "defense");
        d.threshold_acc = thr;
        d.finetune_steps = 320;
        const RhoSearchResult got =
            rho_search(d, grid, fx.mcfg, fx.w_pre, fx.word.weights, fx.corpus.clean_subset,
                       fx.corpus.val, fx.word_eval, 1, fx.corpus.freq);
        // oracle: evaluate every candidate independently, apply the rule
        double best_acc = -1.0, best_rho = 0.0, chosen = -1.0;
        WeightSet chosen_w;
        for (double rho : grid.values) {
            DefenseSpec di = d;
            di.rho = rho;
            const DefenseOutcome out =
                run_defense(di, fx.mcfg, fx.w_pre, fx.word.weights, fx.corpus.clean_subset,
                            fx.corpus.val, fx.word_eval, 1, fx.corpus.freq);
            if (chosen < 0.0 && out.report.acc_after >= thr) {
                chosen = rho;
                chosen_w = out.weights;
            }
            if (out.report.acc_after > best_acc) {
                best_acc = out.report.acc_after;
                best_rho = rho;
            }
        }
        if (chosen >= 0.0) {
            if (!got.threshold_met || got.rho != chosen ||
                !bits_equal(got.outcome.weights, chosen_w)) {
                ok = false;
                why = "rho search disagrees with enumeration oracle";
            }
        } else if (got.threshold_met || got.rho != best_rho) {
            ok = false;
            why = "rho search argmax fallback disagrees with oracle";
        }
    }

    // full run-experiment determinism (library level), plus a CLI run when
    // the binary path is provided
    if (ok) {
        ExperimentConfig cfg = default_experiment_config();
        cfg.corpus.vocab_size = 600;
        cfg.corpus.n_train = 2000;
        cfg.corpus.n_val = 200;
        cfg.model.emb_dim = 16;
        cfg.model.hidden = 32;
        cfg.pretrain.steps = 800;
        cfg.pretrain.examples = 2000;
        cfg.clean_finetune_steps = 800;
        cfg.attacks.resize(1);
        cfg.attacks[0].steps = 2800;
        cfg.defenses.resize(1);
        cfg.defenses[0].method = DefenseMethod::finemix;
        cfg.defenses[0].finetune_steps = 160;
        cfg.grid.values = {0.0, 0.5, 1.0};
        cfg.seeds = {11};
        const fs::path base = fs::temp_directory_path() / "mixdown_acceptance_exp";
        fs::remove_all(base);
        json a = run_experiment(cfg, base / "a");
        json b = run_experiment(cfg, base / "b");
        a.erase("timing");
        b.erase("timing");
        if (a != b) {
            ok = false;
            why = "run-experiment reports differ";
        }
        if (ok && !cli_path.empty()) {
            // gen-corpus byte determinism and the inspect schema echo
            const std::string g1 = cli_path + " gen-corpus --seed 9 --out " +
                                   (base / "g1").string() +
                                   " --vocab 600 --train-size 500 --val-size 100";
            const std::string g2 = cli_path + " gen-corpus --seed 9 --out " +
                                   (base / "g2").string() +
                                   " --vocab 600 --train-size 500 --val-size 100";
            if (std::system(g1.c_str()) != 0 || std::system(g2.c_str()) != 0) {
                ok = false;
                why = "CLI gen-corpus failed";
            } else {
                for (const char* f : {"train.tsv", "val.tsv", "clean_subset.tsv",
                                      "freq.tsv", "corpus_meta.json"}) {
                    std::ifstream f1(base / "g1" / f, std::ios::binary);
                    std::ifstream f2(base / "g2" / f, std::ios::binary);
                    std::string s1((std::istreambuf_iterator<char>(f1)),
                                   std::istreambuf_iterator<char>());
                    std::string s2((std::istreambuf_iterator<char>(f2)),
                                   std::istreambuf_iterator<char>());
                    if (s1.empty() || s1 != s2) {
                        ok = false;
                        why = std::string("gen-corpus output differs: ") + f;
                    }
                }
            }
            if (ok) {
                write_weightset(fx.w_pre, base / "inspect.wsf");
                const std::string icmd = cli_path + " inspect " +
                                         (base / "inspect.wsf").string() + " > " +
                                         (base / "inspect.txt").string();
                if (std::system(icmd.c_str()) != 0) {
                    ok = false;
                    why = "CLI inspect failed";
                } else {
                    std::ifstream f(base / "inspect.txt");
                    std::string all((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
                    for (const char* name : {"emb", "w1", "b1", "w2", "b2"})
                        if (all.find(name) == std::string::npos) {
                            ok = false;
                            why = "inspect output missing tensor names";
                        }
                }
            }
            const fs::path cfg_path = base / "cfg.json";
            std::ofstream cf(cfg_path);
            cf << experiment_config_to_json(cfg).dump(2);
            cf.close();
            const std::string cmd1 = cli_path + " run-experiment " + cfg_path.string() +
                                     " --out " + (base / "c1").string();
            const std::string cmd2 = cli_path + " run-experiment " + cfg_path.string() +
                                     " --out " + (base / "c2").string();
            if (std::system(cmd1.c_str()) != 0 || std::system(cmd2.c_str()) != 0) {
                ok = false;
                why = "CLI run-experiment failed";
            } else {
                auto slurp = [](const fs::path& p) {
                    std::ifstream f(p);
                    json j;
                    f >> j;
                    j.erase("timing");
                    return j;
                };
                if (slurp(base / "c1" / "report.json") != slurp(base / "c2" / "report.json")) {
                    ok = false;
                    why = "CLI reports differ";
                }
            }
        }
        fs::remove_all(base);
    }
    const bool in_time = t.elapsed() < 60.0;
    report(10, "infrastructure", ok && in_time,
           ok ? "WSF1 100/100, rho-search oracle 3/3, run-experiment deterministic" : why,
           t.elapsed());
}

// Spec oracle for the pretraining stand-in: the reference weights must fine-
// tune to a usable classifier from the 64-example clean subset alone.
static void supplemental_pretrain_quality(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins = 0;
    std::string detail;
    for (const auto& fx : fixtures) {
        TrainOpts opts;
        opts.steps = 640;
        opts.seed = derive_seed(fx.seed, "accstar");
        const WeightSet tuned = train(fx.w_pre, fx.mcfg, fx.corpus.clean_subset, opts);
        const double acc = accuracy(tuned, fx.mcfg, fx.corpus.val);
        wins += acc >= 0.85;
        detail += fmt(acc, 3) + " ";
    }
    const bool ok = wins + 1 >= fixtures.size();
    report(13, "pretrain-quality", ok,
           "640-step subset fine-tune ACC per seed: " + detail, t.elapsed());
}

// Module invariant from the defense pipeline, checked at full scale: raw
// Eq.-1 mixing (no E-PUR, no fine-tuning) mitigates more as rho decreases.
static void supplemental_mixing_trend(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    size_t wins = 0;
    std::string detail;
    for (const auto& fx : fixtures) {
        double prev = 2.0;
        bool monotone = true;
        detail += "[";
        for (double rho : {1.0, 0.5, 0.2, 0.0}) {
            DefenseSpec d;
            d.method = DefenseMethod::mixing_only;
            d.rho = rho;
            d.seed = derive_seed(fx.seed, "defense");
            d.epur_on = false;  // isolate the mixing trend itself
            const DefenseOutcome out =
                run_defense(d, fx.mcfg, fx.w_pre, fx.word.weights, fx.corpus.clean_subset,
                            fx.corpus.val, fx.word_eval, 1, fx.corpus.freq);
            monotone &= out.report.asr_after <= prev;
            prev = out.report.asr_after;
            detail += fmt(out.report.asr_after, 2) + " ";
        }
        detail += "] ";
        wins += monotone;
    }
    const bool ok = wins + 1 >= fixtures.size();
    report(12, "mixing-trend-invariant", ok,
           "ASR at rho 1/.5/.2/0: " + detail + std::to_string(wins) + "/" +
               std::to_string(fixtures.size()) + " monotone",
           t.elapsed());
}

static void criterion_landscape(const std::vector<SeedFixture>& fixtures) {
    Timer t;
    const SeedFixture& fx = fixtures.front();
    const auto& g = defense_cache().front();
    // resolution 25 over [-0.25, 1.25] places exact grid points at 0 and 1
    const LandscapeGrid grid =
        landscape_grid(fx.w_pre, fx.word.weights, g.fm.outcome.weights, fx.mcfg,
                       fx.corpus.val, fx.word_eval, 1, 25, -0.25, 1.25);
    bool ok = true;
    std::string why;
    const LandscapeCell* pre_cell = nullptr;
    const LandscapeCell* b_cell = nullptr;
    for (const auto& c : grid.cells) {
        if (c.alpha == 0.0 && c.beta == 0.0) pre_cell = &c;
        if (c.alpha == 1.0 && c.beta == 0.0) b_cell = &c;
    }
    if (!pre_cell || !b_cell) {
        ok = false;
        why = "anchor cells missing from the grid";
    } else {
        if (pre_cell->acc != accuracy(fx.w_pre, fx.mcfg, fx.corpus.val) ||
            pre_cell->asr != attack_success_rate(fx.w_pre, fx.mcfg, fx.word_eval, 1)) {
            ok = false;
            why = "(0,0) cell differs from direct wPre evaluation";
        }
        if (b_cell->acc != accuracy(fx.word.weights, fx.mcfg, fx.corpus.val) ||
            b_cell->asr != attack_success_rate(fx.word.weights, fx.mcfg, fx.word_eval, 1)) {
            ok = false;
            why = "(1,0) cell differs from direct wB evaluation";
        }
    }
    bool good_cell = false;
    for (const auto& c : grid.cells)
        if (c.alpha >= 0.0 && c.alpha <= 1.0 && c.acc >= fx.threshold && c.asr <= 0.3)
            good_cell = true;
    report(11, "landscape-anchoring", ok,
           (ok ? std::string("anchors exact") : why) +
               "; reported: mitigating cell between anchors " +
               (good_cell ? "exists" : "not found"),
           t.elapsed());
}

int main(int argc, char** argv) {
    std::string cli_path;
    size_t n_seeds = 5;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--cli") == 0 && i + 1 < argc) cli_path = argv[++i];
        if (std::strcmp(argv[i], "--seeds") == 0 && i + 1 < argc)
            n_seeds = std::strtoul(argv[++i], nullptr, 10);
    }

    std::printf("building fixtures (%zu seeds)...\n", n_seeds);
    std::vector<SeedFixture> fixtures;
    for (uint64_t s = 1; s <= n_seeds; ++s) {
        Timer t;
        fixtures.push_back(build_fixture(s));
        std::printf("  seed %llu ready (%.1fs, clean ACC %s)\n",
                    static_cast<unsigned long long>(s), t.elapsed(),
                    fmt(fixtures.back().clean_acc).c_str());
        std::fflush(stdout);
    }

    criterion_eq1(fixtures);
    criterion_gradients(fixtures);
    criterion_attack_potency(fixtures);
    criterion_defense_ordering(fixtures);
    criterion_epur_potency(fixtures);
    criterion_outlier_statistic(fixtures);
    criterion_prop1_correlation(fixtures);
    criterion_ablation_direction(fixtures);
    criterion_adaptive_attack(fixtures);
    criterion_infrastructure(fixtures, cli_path);
    criterion_landscape(fixtures);
    supplemental_mixing_trend(fixtures);
    supplemental_pretrain_quality(fixtures);

    size_t failures = 0;
    for (const auto& c : g_results)
        if (c.gated && !c.pass) ++failures;
    std::printf("%zu/%zu gated criteria passed\n", g_results.size() - failures,
                g_results.size());
    return static_cast<int>(failures);
}
