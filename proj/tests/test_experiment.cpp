#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mixdown/experiment.hpp"

using namespace mixdown;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Micro experiment: one seed, one attack, two defenses, tiny budgets.
ExperimentConfig micro_config() {
    ExperimentConfig cfg = default_experiment_config();
    cfg.corpus.vocab_size = 600;
    cfg.corpus.n_train = 3000;
    cfg.corpus.n_val = 300;
    cfg.corpus.n_clean_subset = 64;
    cfg.model.emb_dim = 24;
    cfg.model.hidden = 48;
    cfg.pretrain.steps = 1200;
    cfg.pretrain.examples = 3000;
    cfg.clean_finetune_steps = 1200;
    cfg.attacks.resize(1);
    cfg.attacks[0].steps = 2800;
    cfg.defenses.resize(2);
    cfg.defenses[0].method = DefenseMethod::finetune;
    cfg.defenses[0].finetune_steps = 320;
    cfg.defenses[1].method = DefenseMethod::finemix;
    cfg.defenses[1].finetune_steps = 320;
    cfg.grid.values = {0.0, 0.2, 0.5, 1.0};
    cfg.seeds = {3};
    return cfg;
}

json strip_timing(json j) {
    j.erase("timing");
    return j;
}

}  // namespace

TEST_CASE("config json round-trips through parse and serialize") {
    const ExperimentConfig cfg = micro_config();
    const json j = experiment_config_to_json(cfg);
    const ExperimentConfig back = experiment_config_from_json(j);
    CHECK(experiment_config_to_json(back) == j);
    CHECK(back.corpus.vocab_size == 600);
    CHECK(back.defenses.size() == 2);
    CHECK(back.grid.values == cfg.grid.values);
}

TEST_CASE("defaults block carries the reference protocol") {
    const ExperimentConfig cfg = default_experiment_config();
    CHECK(cfg.corpus.vocab_size == 2000);
    CHECK(cfg.corpus.n_clean_subset == 64);
    CHECK(cfg.attacks.at(0).poison_ratio == 0.5);
    CHECK(cfg.attacks.at(0).steps == 5000);
    CHECK(cfg.defenses.at(0).finetune_steps == 640);
    CHECK(cfg.grid.values.size() == 23);
    const json j = experiment_config_to_json(cfg);
    CHECK(j.at("defaults_version") == 1);
}

TEST_CASE("run_experiment emits a deterministic report with per-pair metrics") {
    const ExperimentConfig cfg = micro_config();
    const fs::path base = fs::temp_directory_path() / "mixdown_exp_test";
    fs::remove_all(base);
    const json a = run_experiment(cfg, base / "a");
    const json b = run_experiment(cfg, base / "b");
    CHECK(strip_timing(a) == strip_timing(b));

    // the two report files byte-match modulo the timing subtree
    std::ifstream fa(base / "a" / "report.json"), fb(base / "b" / "report.json");
    json ja, jb;
    fa >> ja;
    fb >> jb;
    CHECK(strip_timing(ja) == strip_timing(jb));

    const json& seed = a.at("seeds").at("seed_3");
    CHECK(seed.contains("clean_acc"));
    CHECK(seed.contains("threshold_acc"));
    const json& attack = seed.at("attacks").at("trigger_word_from_clean");
    CHECK(attack.at("asr").get<double>() >= 0.9);
    for (const char* method : {"finetune", "finemix"}) {
        const json& d = attack.at("defenses").at(method);
        CHECK(d.contains("acc_before"));
        CHECK(d.contains("asr_after"));
        CHECK(d.contains("deviation_asr"));
    }
    // artifacts written per seed
    CHECK(fs::exists(base / "a" / "seed_3" / "wpre.wsf"));
    CHECK(fs::exists(base / "a" / "seed_3" / "trigger_word_from_clean" / "wb.wsf"));
    fs::remove_all(base);
}
