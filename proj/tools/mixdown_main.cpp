// mixdown: backdoor attacks on a toy text classifier and weight-surgery
// defenses against them, driven by deterministic seeds.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixdown/attack.hpp"
#include "mixdown/defense.hpp"
#include "mixdown/epur.hpp"
#include "mixdown/errors.hpp"
#include "mixdown/eval.hpp"
#include "mixdown/experiment.hpp"
#include "mixdown/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixdown;

namespace {

json load_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path.string());
    json j;
    f >> j;
    return j;
}

void save_json(const json& j, const fs::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write: " + path.string());
    f << j.dump(2) << '\n';
}

void write_corpus_dir(const Corpus& corpus, const fs::path& dir) {
    fs::create_directories(dir);
    write_dataset(corpus.train, dir / "train.tsv");
    write_dataset(corpus.val, dir / "val.tsv");
    write_dataset(corpus.clean_subset, dir / "clean_subset.tsv");
    write_frequency_table(corpus.freq, dir / "freq.tsv");
    json meta;
    meta["config"] = corpus_config_to_json(corpus.config);
    meta["positive_cues"] = corpus.positive_cues;
    meta["negative_cues"] = corpus.negative_cues;
    meta["trigger_word_candidates"] = trigger_word_candidates(corpus.config);
    meta["trigger_sentence"] = trigger_sentence(corpus.config);
    save_json(meta, dir / "corpus_meta.json");
}

Corpus load_corpus_dir(const fs::path& dir) {
    const json meta = load_json(dir / "corpus_meta.json");
    Corpus c;
    c.config = corpus_config_from_json(meta.at("config"));
    c.positive_cues = meta.at("positive_cues").get<std::vector<int32_t>>();
    c.negative_cues = meta.at("negative_cues").get<std::vector<int32_t>>();
    c.train = read_dataset(dir / "train.tsv", c.config.vocab_size);
    c.val = read_dataset(dir / "val.tsv", c.config.vocab_size);
    c.clean_subset = read_dataset(dir / "clean_subset.tsv", c.config.vocab_size);
    c.freq = read_frequency_table(dir / "freq.tsv");
    return c;
}

ModelConfig model_config_for(const Corpus& corpus, size_t emb_dim, size_t hidden) {
    ModelConfig m;
    m.vocab_size = corpus.config.vocab_size;
    m.seq_len = corpus.config.seq_len;
    m.emb_dim = emb_dim;
    m.hidden = hidden;
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy-scale backdoor attacks and weight-mixing defenses"};
    app.require_subcommand(1);

    // ---- gen-corpus ----
    uint64_t gc_seed = 1;
    std::string gc_out = "corpus";
    CorpusConfig gc_cfg;
    auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic task corpus");
    gen->add_option("--seed", gc_seed, "corpus seed");
    gen->add_option("--out", gc_out, "output directory")->required();
    gen->add_option("--vocab", gc_cfg.vocab_size, "vocabulary size");
    gen->add_option("--train-size", gc_cfg.n_train, "training examples");
    gen->add_option("--val-size", gc_cfg.n_val, "validation examples");
    gen->add_option("--clean-subset", gc_cfg.n_clean_subset, "clean-subset examples");
    gen->add_option("--seq-len", gc_cfg.seq_len, "sequence length");

    // ---- pretrain ----
    std::string pt_data, pt_out = "wpre.wsf";
    uint64_t pt_seed = 1;
    PretrainOpts pt_opts;
    size_t pt_emb = 32, pt_hidden = 64;
    auto* pt = app.add_subcommand("pretrain", "train the clean pre-trained reference weights");
    pt->add_option("--data", pt_data, "corpus directory")->required();
    pt->add_option("--out", pt_out, "output WSF1 path")->required();
    pt->add_option("--seed", pt_seed, "pretraining seed");
    pt->add_option("--steps", pt_opts.steps, "training steps");
    pt->add_option("--coverage", pt_opts.cue_coverage, "cue coverage fraction");
    pt->add_option("--emb-dim", pt_emb, "embedding dimension");
    pt->add_option("--hidden", pt_hidden, "hidden width");

    // ---- clean-finetune ----
    std::string cf_data, cf_wpre, cf_out = "wclean.wsf";
    uint64_t cf_seed = 1;
    size_t cf_steps = 5000;
    auto* cf = app.add_subcommand("clean-finetune", "fine-tune the reference weights on clean data");
    cf->add_option("--data", cf_data, "corpus directory")->required();
    cf->add_option("--wpre", cf_wpre, "pre-trained WSF1")->required();
    cf->add_option("--out", cf_out, "output WSF1 path")->required();
    cf->add_option("--seed", cf_seed, "training seed");
    cf->add_option("--steps", cf_steps, "training steps");

    // ---- attack ----
    std::string at_data, at_wpre, at_wclean, at_out = "attack", at_kind = "trigger_word",
                at_start = "from_clean";
    uint64_t at_seed = 1;
    size_t at_steps = 5000;
    double at_ratio = 0.5;
    std::vector<int32_t> at_trigger;
    auto* at = app.add_subcommand("attack", "produce a backdoored checkpoint");
    at->add_option("--data", at_data, "corpus directory")->required();
    at->add_option("--wpre", at_wpre, "pre-trained WSF1")->required();
    at->add_option("--wclean", at_wclean, "clean fine-tuned WSF1 (for from_clean / ep / es)");
    at->add_option("--kind", at_kind, "trigger_word|trigger_sentence|ep|es|adaptive");
    at->add_option("--start", at_start, "from_clean|from_scratch");
    at->add_option("--out", at_out, "output directory")->required();
    at->add_option("--seed", at_seed, "attack seed");
    at->add_option("--steps", at_steps, "poison-training steps");
    at->add_option("--poison-ratio", at_ratio, "poisoning ratio");
    at->add_option("--trigger", at_trigger, "explicit trigger token ids");

    // ---- defend / rho-search ----
    std::string df_data, df_wpre, df_wb, df_out = "defense", df_method = "finemix";
    uint64_t df_seed = 1;
    double df_rho = 0.2, df_threshold = 0.0;
    size_t df_steps = 640, df_epur_k = 0;
    int df_target = 1;
    std::vector<int32_t> df_trigger;
    bool df_epur_flag = false, df_no_epur_flag = false;
    auto add_defense_opts = [&](CLI::App* cmd) {
        cmd->add_option("--data", df_data, "corpus directory")->required();
        cmd->add_option("--wpre", df_wpre, "pre-trained WSF1")->required();
        cmd->add_option("--wb", df_wb, "backdoored WSF1")->required();
        cmd->add_option("--method", df_method,
                        "finetune|fineprune|fineprune_frozen|mixing_only|finemix|finemix_sel");
        cmd->add_option("--out", df_out, "output directory")->required();
        cmd->add_option("--seed", df_seed, "defense seed");
        cmd->add_option("--rho", df_rho, "reserve ratio");
        cmd->add_option("--steps", df_steps, "fine-tuning steps");
        cmd->add_option("--epur-k", df_epur_k, "E-PUR top-K (0 = scaled default)");
        cmd->add_flag("--epur", df_epur_flag, "force E-PUR on");
        cmd->add_flag("--no-epur", df_no_epur_flag, "force E-PUR off");
        cmd->add_option("--target", df_target, "attack target label");
        cmd->add_option("--trigger", df_trigger, "trigger token ids")->required();
        cmd->add_option("--threshold-acc", df_threshold, "clean-ACC threshold");
    };
    auto* df = app.add_subcommand("defend", "run one defense at a fixed reserve ratio");
    add_defense_opts(df);
    std::vector<double> rs_grid;
    auto* rs = app.add_subcommand("rho-search", "threshold-ACC search over the rho grid");
    add_defense_opts(rs);
    rs->add_option("--grid", rs_grid, "explicit rho grid values");

    // ---- epur-score / delta-stats ----
    std::string ep_wpre, ep_wb, ep_freq, ep_out = "scores.tsv";
    auto* eps = app.add_subcommand("epur-score", "score embedding rows for anomaly");
    eps->add_option("--wpre", ep_wpre, "pre-trained WSF1")->required();
    eps->add_option("--wb", ep_wb, "suspect WSF1")->required();
    eps->add_option("--freq", ep_freq, "frequency TSV")->required();
    eps->add_option("--out", ep_out, "output TSV")->required();
    auto* dst = app.add_subcommand("delta-stats", "plot-ready per-token delta/frequency rows");
    dst->add_option("--wpre", ep_wpre, "pre-trained WSF1")->required();
    dst->add_option("--wb", ep_wb, "suspect WSF1")->required();
    dst->add_option("--freq", ep_freq, "frequency TSV")->required();
    dst->add_option("--out", ep_out, "output TSV")->required();

    // ---- eval ----
    std::string ev_data, ev_weights;
    int ev_target = -1;
    std::vector<int32_t> ev_trigger;
    auto* ev = app.add_subcommand("eval", "clean ACC (and ASR when a trigger is given)");
    ev->add_option("--data", ev_data, "corpus directory")->required();
    ev->add_option("--weights", ev_weights, "WSF1 to evaluate")->required();
    ev->add_option("--target", ev_target, "attack target label");
    ev->add_option("--trigger", ev_trigger, "trigger token ids");

    // ---- landscape ----
    std::string ls_data, ls_wpre, ls_wb, ls_wdef, ls_out = "landscape.csv";
    size_t ls_res = 21;
    double ls_lo = -0.25, ls_hi = 1.25;
    int ls_target = 1;
    std::vector<int32_t> ls_trigger;
    auto* ls = app.add_subcommand("landscape", "ACC/ASR over the (wPre, wB, wDef) plane");
    ls->add_option("--data", ls_data, "corpus directory")->required();
    ls->add_option("--wpre", ls_wpre, "pre-trained WSF1")->required();
    ls->add_option("--wb", ls_wb, "backdoored WSF1")->required();
    ls->add_option("--wdef", ls_wdef, "defended WSF1")->required();
    ls->add_option("--out", ls_out, "output CSV")->required();
    ls->add_option("--grid", ls_res, "grid resolution R (R x R cells)");
    ls->add_option("--range-lo", ls_lo, "axis range lower bound");
    ls->add_option("--range-hi", ls_hi, "axis range upper bound");
    ls->add_option("--target", ls_target, "attack target label");
    ls->add_option("--trigger", ls_trigger, "trigger token ids")->required();

    // ---- inspect ----
    std::string in_file;
    auto* in = app.add_subcommand("inspect", "list tensor names, shapes and L2 norms");
    in->add_option("file", in_file, "WSF1 path")->required();

    // ---- run-experiment ----
    std::string rx_config, rx_out;
    auto* rx = app.add_subcommand("run-experiment", "full attack->defend->eval pipeline");
    rx->add_option("config", rx_config, "experiment config JSON")->required();
    rx->add_option("--out", rx_out, "output directory (default: config's directory /runs)");

    try {
        app.parse(argc, argv);

        if (*gen) {
            gc_cfg.seed = gc_seed;
            write_corpus_dir(gen_corpus(gc_cfg), gc_out);
        } else if (*pt) {
            const Corpus corpus = load_corpus_dir(pt_data);
            const ModelConfig mcfg = model_config_for(corpus, pt_emb, pt_hidden);
            write_weightset(pretrain(corpus.config, mcfg, pt_seed, pt_opts), pt_out);
        } else if (*cf) {
            const Corpus corpus = load_corpus_dir(cf_data);
            const WeightSet w_pre = read_weightset(cf_wpre);
            const ModelConfig mcfg = model_config_for(
                corpus, w_pre.at("emb").dims[1], w_pre.at("b1").dims[0]);
            write_weightset(
                clean_finetune(w_pre, mcfg, corpus.train, cf_steps, cf_seed), cf_out);
        } else if (*at) {
            const Corpus corpus = load_corpus_dir(at_data);
            const WeightSet w_pre = read_weightset(at_wpre);
            const ModelConfig mcfg = model_config_for(
                corpus, w_pre.at("emb").dims[1], w_pre.at("b1").dims[0]);
            AttackSpec spec;
            spec.kind = attack_kind_from_string(at_kind);
            spec.start = attack_start_from_string(at_start);
            spec.seed = at_seed;
            spec.steps = at_steps;
            spec.poison_ratio = at_ratio;
            spec.trigger = at_trigger;
            WeightSet clean;
            const WeightSet* clean_ptr = nullptr;
            if (!at_wclean.empty()) {
                clean = read_weightset(at_wclean);
                clean_ptr = &clean;
            }
            const AttackResult ar = run_attack(spec, w_pre, mcfg, corpus, clean_ptr);
            fs::create_directories(at_out);
            write_weightset(ar.weights, fs::path(at_out) / "wb.wsf");
            if (ar.delta_p) {
                WeightSet dp;
                dp.insert("emb", *ar.delta_p);
                write_weightset(dp, fs::path(at_out) / "delta_p.wsf");
            }
            json meta;
            meta["spec"] = attack_spec_to_json(ar.spec);
            meta["clean_acc"] = ar.clean_acc;
            meta["asr"] = ar.asr;
            meta["start_clean_acc"] = ar.start_clean_acc;
            save_json(meta, fs::path(at_out) / "attack_meta.json");
        } else if (*df || *rs) {
            const Corpus corpus = load_corpus_dir(df_data);
            const WeightSet w_pre = read_weightset(df_wpre);
            const WeightSet w_b = read_weightset(df_wb);
            const ModelConfig mcfg = model_config_for(
                corpus, w_pre.at("emb").dims[1], w_pre.at("b1").dims[0]);
            DefenseSpec spec;
            spec.method = defense_method_from_string(df_method);
            spec.rho = df_rho;
            spec.seed = df_seed;
            spec.finetune_steps = df_steps;
            spec.epur_k = df_epur_k;
            spec.threshold_acc = df_threshold;
            if (df_epur_flag) spec.epur_on = true;
            if (df_no_epur_flag) spec.epur_on = false;
            const TokenDataset poisoned_eval =
                build_poisoned_eval(corpus.val, df_trigger, df_target);
            fs::create_directories(df_out);
            if (*df) {
                const DefenseOutcome out =
                    run_defense(spec, mcfg, w_pre, w_b, corpus.clean_subset, corpus.val,
                                poisoned_eval, df_target, corpus.freq);
                write_weightset(out.weights, fs::path(df_out) / "wd.wsf");
                if (out.mask)
                    write_weightset(mask_to_weightset(*out.mask, w_b),
                                    fs::path(df_out) / "mask.wsf");
                save_json(defense_report_to_json(out.report),
                          fs::path(df_out) / "report.json");
            } else {
                RhoGrid grid = RhoGrid::defaults();
                if (!rs_grid.empty()) grid.values = rs_grid;
                const RhoSearchResult out =
                    rho_search(spec, grid, mcfg, w_pre, w_b, corpus.clean_subset, corpus.val,
                               poisoned_eval, df_target, corpus.freq);
                write_weightset(out.outcome.weights, fs::path(df_out) / "wd.wsf");
                json rep = defense_report_to_json(out.outcome.report);
                rep["searched_rho"] = out.rho;
                json hist = json::array();
                for (const auto& h : out.history)
                    hist.push_back(json{{"rho", h[0]}, {"acc", h[1]}, {"asr", h[2]}});
                rep["history"] = hist;
                save_json(rep, fs::path(df_out) / "report.json");
            }
        } else if (*eps || *dst) {
            const WeightSet w_pre = read_weightset(ep_wpre);
            const WeightSet w_b = read_weightset(ep_wb);
            const FrequencyTable freq = read_frequency_table(ep_freq);
            if (*eps)
                write_score_table(epur_scores(w_pre.at("emb"), w_b.at("emb"), freq), ep_out);
            else
                write_delta_stats(w_pre.at("emb"), w_b.at("emb"), freq, ep_out);
        } else if (*ev) {
            const Corpus corpus = load_corpus_dir(ev_data);
            const WeightSet w = read_weightset(ev_weights);
            const ModelConfig mcfg =
                model_config_for(corpus, w.at("emb").dims[1], w.at("b1").dims[0]);
            json out;
            out["acc"] = accuracy(w, mcfg, corpus.val);
            if (!ev_trigger.empty() && ev_target >= 0) {
                const TokenDataset pe = build_poisoned_eval(corpus.val, ev_trigger, ev_target);
                out["asr"] = attack_success_rate(w, mcfg, pe, ev_target);
            }
            std::cout << out.dump() << '\n';
        } else if (*ls) {
            const Corpus corpus = load_corpus_dir(ls_data);
            const WeightSet w_pre = read_weightset(ls_wpre);
            const WeightSet w_b = read_weightset(ls_wb);
            const WeightSet w_def = read_weightset(ls_wdef);
            const ModelConfig mcfg = model_config_for(
                corpus, w_pre.at("emb").dims[1], w_pre.at("b1").dims[0]);
            const TokenDataset pe = build_poisoned_eval(corpus.val, ls_trigger, ls_target);
            const LandscapeGrid grid = landscape_grid(w_pre, w_b, w_def, mcfg, corpus.val, pe,
                                                      ls_target, ls_res, ls_lo, ls_hi);
            write_landscape_csv(grid, ls_out);
        } else if (*in) {
            const WeightSet ws = read_weightset(in_file);
            for (const auto& [name, t] : ws.items()) {
                std::cout << name << " [";
                for (size_t i = 0; i < t.dims.size(); ++i) {
                    if (i) std::cout << "x";
                    std::cout << t.dims[i];
                }
                std::cout << "] l2=" << fmt_float(l2_norm(t)) << '\n';
            }
        } else if (*rx) {
            const json cfg_json = load_json(rx_config);
            const ExperimentConfig cfg = experiment_config_from_json(cfg_json);
            fs::path out = rx_out.empty()
                               ? fs::path(rx_config).parent_path() / "runs"
                               : fs::path(rx_out);
            run_experiment(cfg, out);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
