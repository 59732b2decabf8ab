#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixdown/attack.hpp"
#include "mixdown/defense.hpp"

namespace mixdown {

// One self-describing experiment: corpus + model + pretraining settings,
// the attacks to mount, the defenses to evaluate, and the rho grid.
struct ExperimentConfig {
    CorpusConfig corpus;
    ModelConfig model;
    PretrainOpts pretrain;
    size_t clean_finetune_steps = 5000;
    std::vector<AttackSpec> attacks;
    std::vector<DefenseSpec> defenses;
    RhoGrid grid = RhoGrid::defaults();
    // <= 0 means automatic: clean-model ACC minus 0.03.
    double threshold_acc = 0.0;
    std::vector<uint64_t> seeds = {1};
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

// Versioned defaults block: the reference protocol with every anchored
// constant (grid, step budgets, poison ratio, scaled K, auto threshold).
ExperimentConfig default_experiment_config();

// Chains gen-corpus -> pretrain -> clean fine-tune -> attacks -> defenses
// per seed, writing checkpoints and a deterministic report.json under
// out_dir. Timing lives in a separate "timing" subtree so reports can be
// compared modulo it. Returns the report.
nlohmann::json run_experiment(const ExperimentConfig& cfg,
                              const std::filesystem::path& out_dir);

// JSON helpers shared with the CLI.
nlohmann::json attack_spec_to_json(const AttackSpec& s);
AttackSpec attack_spec_from_json(const nlohmann::json& j);
nlohmann::json defense_spec_to_json(const DefenseSpec& s);
DefenseSpec defense_spec_from_json(const nlohmann::json& j);
nlohmann::json corpus_config_to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);
nlohmann::json defense_report_to_json(const DefenseReport& r);

}  // namespace mixdown
