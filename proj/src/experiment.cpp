#include "mixdown/experiment.hpp"

#include <chrono>
#include <fstream>

#include "mixdown/errors.hpp"

namespace mixdown {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json corpus_config_to_json(const CorpusConfig& c) {
    return json{{"vocab_size", c.vocab_size},
                {"zipf_exponent", c.zipf_exponent},
                {"seq_len", c.seq_len},
                {"n_train", c.n_train},
                {"n_val", c.n_val},
                {"n_clean_subset", c.n_clean_subset},
                {"cue_count", c.cue_count},
                {"cue_rank_lo", c.cue_rank_lo},
                {"cue_rank_hi", c.cue_rank_hi},
                {"min_cues", c.min_cues},
                {"max_cues", c.max_cues},
                {"cue_inject_limit", c.cue_inject_limit},
                {"positive_margin", c.positive_margin},
                {"example_salt", c.example_salt},
                {"seed", c.seed}};
}

CorpusConfig corpus_config_from_json(const json& j) {
    CorpusConfig c;
    maybe(j, "vocab_size", c.vocab_size);
    maybe(j, "zipf_exponent", c.zipf_exponent);
    maybe(j, "seq_len", c.seq_len);
    maybe(j, "n_train", c.n_train);
    maybe(j, "n_val", c.n_val);
    maybe(j, "n_clean_subset", c.n_clean_subset);
    maybe(j, "cue_count", c.cue_count);
    maybe(j, "cue_rank_lo", c.cue_rank_lo);
    maybe(j, "cue_rank_hi", c.cue_rank_hi);
    maybe(j, "min_cues", c.min_cues);
    maybe(j, "max_cues", c.max_cues);
    maybe(j, "cue_inject_limit", c.cue_inject_limit);
    maybe(j, "positive_margin", c.positive_margin);
    maybe(j, "example_salt", c.example_salt);
    maybe(j, "seed", c.seed);
    return c;
}

json attack_spec_to_json(const AttackSpec& s) {
    return json{{"kind", to_string(s.kind)},
                {"trigger", s.trigger},
                {"target_label", s.target_label},
                {"start", to_string(s.start)},
                {"steps", s.steps},
                {"poison_ratio", s.poison_ratio},
                {"seed", s.seed},
                {"es_avg_count", s.es_avg_count},
                {"adaptive_lambda", s.adaptive_lambda},
                {"batch_size", s.batch_size},
                {"lr", s.lr}};
}

AttackSpec attack_spec_from_json(const json& j) {
    AttackSpec s;
    if (j.contains("kind")) s.kind = attack_kind_from_string(j.at("kind").get<std::string>());
    maybe(j, "trigger", s.trigger);
    maybe(j, "target_label", s.target_label);
    if (j.contains("start"))
        s.start = attack_start_from_string(j.at("start").get<std::string>());
    maybe(j, "steps", s.steps);
    maybe(j, "poison_ratio", s.poison_ratio);
    maybe(j, "seed", s.seed);
    maybe(j, "es_avg_count", s.es_avg_count);
    maybe(j, "adaptive_lambda", s.adaptive_lambda);
    maybe(j, "batch_size", s.batch_size);
    maybe(j, "lr", s.lr);
    return s;
}

json defense_spec_to_json(const DefenseSpec& s) {
    json j{{"method", to_string(s.method)},
           {"rho", s.rho},
           {"epur_k", s.epur_k},
           {"finetune_steps", s.finetune_steps},
           {"threshold_acc", s.threshold_acc},
           {"seed", s.seed},
           {"batch_size", s.batch_size},
           {"lr", s.lr}};
    if (s.epur_on) j["epur_on"] = *s.epur_on;
    return j;
}

DefenseSpec defense_spec_from_json(const json& j) {
    DefenseSpec s;
    if (j.contains("method"))
        s.method = defense_method_from_string(j.at("method").get<std::string>());
    maybe(j, "rho", s.rho);
    if (j.contains("epur_on")) s.epur_on = j.at("epur_on").get<bool>();
    maybe(j, "epur_k", s.epur_k);
    maybe(j, "finetune_steps", s.finetune_steps);
    maybe(j, "threshold_acc", s.threshold_acc);
    maybe(j, "seed", s.seed);
    maybe(j, "batch_size", s.batch_size);
    maybe(j, "lr", s.lr);
    return s;
}

json defense_report_to_json(const DefenseReport& r) {
    return json{{"method", r.method},
                {"rho", r.rho},
                {"epur_k", r.epur_k},
                {"epur_on", r.epur_on},
                {"seed", r.seed},
                {"acc_before", r.acc_before},
                {"asr_before", r.asr_before},
                {"acc_after", r.acc_after},
                {"asr_after", r.asr_after},
                {"deviation_acc", r.deviation_acc()},
                {"deviation_asr", r.deviation_asr()},
                {"threshold_met", r.threshold_met}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg = default_experiment_config();
    if (j.contains("corpus")) cfg.corpus = corpus_config_from_json(j.at("corpus"));
    if (j.contains("model")) {
        const json& m = j.at("model");
        maybe(m, "emb_dim", cfg.model.emb_dim);
        maybe(m, "hidden", cfg.model.hidden);
    }
    if (j.contains("pretrain")) {
        const json& p = j.at("pretrain");
        maybe(p, "steps", cfg.pretrain.steps);
        maybe(p, "examples", cfg.pretrain.examples);
        maybe(p, "positive_margin", cfg.pretrain.positive_margin);
        maybe(p, "cue_coverage", cfg.pretrain.cue_coverage);
        maybe(p, "seq_len", cfg.pretrain.seq_len);
        maybe(p, "batch_size", cfg.pretrain.batch_size);
        maybe(p, "lr", cfg.pretrain.lr);
    }
    maybe(j, "clean_finetune_steps", cfg.clean_finetune_steps);
    if (j.contains("attacks")) {
        cfg.attacks.clear();
        for (const auto& a : j.at("attacks")) cfg.attacks.push_back(attack_spec_from_json(a));
    }
    if (j.contains("defenses")) {
        cfg.defenses.clear();
        for (const auto& d : j.at("defenses"))
            cfg.defenses.push_back(defense_spec_from_json(d));
    }
    if (j.contains("rho_grid")) cfg.grid.values = j.at("rho_grid").get<std::vector<double>>();
    maybe(j, "threshold_acc", cfg.threshold_acc);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (cfg.seeds.empty()) throw ConfigError("experiment needs at least one seed");
    cfg.model.vocab_size = cfg.corpus.vocab_size;
    cfg.model.seq_len = cfg.corpus.seq_len;
    return cfg;
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
    json attacks = json::array();
    for (const auto& a : cfg.attacks) attacks.push_back(attack_spec_to_json(a));
    json defenses = json::array();
    for (const auto& d : cfg.defenses) defenses.push_back(defense_spec_to_json(d));
    return json{{"defaults_version", 1},
                {"corpus", corpus_config_to_json(cfg.corpus)},
                {"model", json{{"emb_dim", cfg.model.emb_dim}, {"hidden", cfg.model.hidden}}},
                {"pretrain", json{{"steps", cfg.pretrain.steps},
                                  {"examples", cfg.pretrain.examples},
                                  {"positive_margin", cfg.pretrain.positive_margin},
                                  {"cue_coverage", cfg.pretrain.cue_coverage},
                                  {"seq_len", cfg.pretrain.seq_len},
                                  {"batch_size", cfg.pretrain.batch_size},
                                  {"lr", cfg.pretrain.lr}}},
                {"clean_finetune_steps", cfg.clean_finetune_steps},
                {"attacks", attacks},
                {"defenses", defenses},
                {"rho_grid", cfg.grid.values},
                {"threshold_acc", cfg.threshold_acc},
                {"seeds", cfg.seeds}};
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.model.vocab_size = cfg.corpus.vocab_size;
    cfg.model.seq_len = cfg.corpus.seq_len;
    AttackSpec word;
    word.kind = AttackKind::trigger_word;
    cfg.attacks = {word};
    DefenseSpec ft, fp, fm;
    ft.method = DefenseMethod::finetune;
    fp.method = DefenseMethod::fineprune;
    fm.method = DefenseMethod::finemix;
    cfg.defenses = {ft, fp, fm};
    return cfg;
}

json run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    json report;
    report["config"] = experiment_config_to_json(cfg);
    json timing;
    const auto wall0 = std::chrono::steady_clock::now();

    for (uint64_t seed : cfg.seeds) {
        const std::string seed_key = "seed_" + std::to_string(seed);
        const fs::path seed_dir = out_dir / seed_key;
        fs::create_directories(seed_dir);
        const auto t_seed = std::chrono::steady_clock::now();

        CorpusConfig ccfg = cfg.corpus;
        ccfg.seed = seed;
        const Corpus corpus = gen_corpus(ccfg);
        ModelConfig mcfg = cfg.model;
        mcfg.vocab_size = ccfg.vocab_size;
        mcfg.seq_len = ccfg.seq_len;

        const WeightSet w_pre =
            pretrain(ccfg, mcfg, derive_seed(seed, "pretrain"), cfg.pretrain);
        write_weightset(w_pre, seed_dir / "wpre.wsf");
        const WeightSet clean = clean_finetune(w_pre, mcfg, corpus.train,
                                               cfg.clean_finetune_steps,
                                               derive_seed(seed, "cleanft"));
        write_weightset(clean, seed_dir / "wclean.wsf");

        const double clean_acc = accuracy(clean, mcfg, corpus.val);
        const double threshold =
            cfg.threshold_acc > 0.0 ? cfg.threshold_acc : clean_acc - 0.03;

        json seed_report;
        seed_report["clean_acc"] = clean_acc;
        seed_report["pretrain_acc"] = accuracy(w_pre, mcfg, corpus.val);
        seed_report["threshold_acc"] = threshold;

        for (size_t ai = 0; ai < cfg.attacks.size(); ++ai) {
            AttackSpec aspec = cfg.attacks[ai];
            aspec.seed = derive_seed(seed, "attack", ai);
            const std::string akey =
                to_string(aspec.kind) + "_" + to_string(aspec.start);
            const fs::path adir = seed_dir / akey;
            fs::create_directories(adir);
            json aentry;
            try {
                const AttackResult ar = run_attack(aspec, w_pre, mcfg, corpus, &clean);
                write_weightset(ar.weights, adir / "wb.wsf");
                if (ar.delta_p) {
                    WeightSet dp;
                    dp.insert("emb", *ar.delta_p);
                    write_weightset(dp, adir / "delta_p.wsf");
                }
                aentry["spec"] = attack_spec_to_json(ar.spec);
                aentry["clean_acc"] = ar.clean_acc;
                aentry["asr"] = ar.asr;
                aentry["start_clean_acc"] = ar.start_clean_acc;
                {
                    std::ofstream mf(adir / "attack_meta.json", std::ios::trunc);
                    mf << aentry.dump(2) << '\n';
                }

                const TokenDataset poisoned_eval =
                    build_poisoned_eval(corpus.val, ar.spec.trigger, ar.spec.target_label);
                json defenses_json;
                for (size_t di = 0; di < cfg.defenses.size(); ++di) {
                    DefenseSpec dspec = cfg.defenses[di];
                    dspec.seed = derive_seed(seed, "defense", di);
                    dspec.threshold_acc = threshold;
                    const std::string dkey = to_string(dspec.method);
                    json dentry;
                    if (dspec.method == DefenseMethod::finetune) {
                        const DefenseOutcome out =
                            run_defense(dspec, mcfg, w_pre, ar.weights, corpus.clean_subset,
                                        corpus.val, poisoned_eval, ar.spec.target_label,
                                        corpus.freq);
                        dentry = defense_report_to_json(out.report);
                        write_weightset(out.weights, adir / ("wd_" + dkey + ".wsf"));
                    } else {
                        const RhoSearchResult rs =
                            rho_search(dspec, cfg.grid, mcfg, w_pre, ar.weights,
                                       corpus.clean_subset, corpus.val, poisoned_eval,
                                       ar.spec.target_label, corpus.freq);
                        dentry = defense_report_to_json(rs.outcome.report);
                        dentry["searched_rho"] = rs.rho;
                        json hist = json::array();
                        for (const auto& h : rs.history)
                            hist.push_back(json{{"rho", h[0]}, {"acc", h[1]}, {"asr", h[2]}});
                        dentry["history"] = hist;
                        write_weightset(rs.outcome.weights, adir / ("wd_" + dkey + ".wsf"));
                    }
                    defenses_json[dkey] = dentry;
                }
                aentry["defenses"] = defenses_json;
            } catch (const WeakAttackError& e) {
                aentry["error"] = e.what();
                aentry["asr"] = e.asr;
            }
            seed_report["attacks"][akey] = aentry;
        }
        report["seeds"][seed_key] = seed_report;
        timing[seed_key] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_seed).count();
    }
    timing["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    report["timing"] = timing;

    std::ofstream rf(out_dir / "report.json", std::ios::trunc);
    if (!rf) throw IoError("cannot write report.json");
    rf << report.dump(2) << '\n';
    return report;
}

}  // namespace mixdown
