#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "morphguard/experiment.hpp"

namespace morphguard {

/// Shared command-line inputs. Every command writes into `out` and finishes
/// with a manifest.json describing the run.
struct CommandOptions {
    ExperimentConfig config;
    std::filesystem::path out = "out";
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> data_dir;  // gen-data output; regenerated from the config when absent
    bool parallel = false;
};

void cmd_gen_data(const CommandOptions& opts);
void cmd_train(const CommandOptions& opts);
void cmd_sweep_margins(const CommandOptions& opts);
void cmd_adapt(const CommandOptions& opts);
void cmd_eval(const CommandOptions& opts);
void cmd_analyze_features(const CommandOptions& opts);
std::string cmd_print_default_config();

/// Files a gen-data bundle consists of.
struct DataFiles {
    static constexpr const char* dataset = "dataset.jsonl";
    static constexpr const char* holdout = "holdout.jsonl";
    static constexpr const char* protocol = "protocol.json";
    static constexpr const char* eval_protocol = "eval_protocol.json";
    static constexpr const char* universe = "universe.json";
};

/// Reads a gen-data bundle back. Only the fields written to disk are filled in.
ExperimentData load_data(const std::filesystem::path& dir);

/// Per-margin results of a sweep, in grid order.
struct SweepEntry {
    double m_mg = 0.0;
    TrainHistory history;
    EvaluationReport report;
};
std::vector<SweepEntry> run_sweep(const ExperimentConfig& config, const ExperimentData& data, bool parallel);

struct AdaptResult {
    DualHeadModel stage1;
    DualHeadModel stage2;
    TrainHistory history1;  // empty when stage 1 came from a checkpoint
    TrainHistory history2;
    EvaluationReport report1;
    EvaluationReport report2;
};
/// Stage 1 trains on bona fides only (skipped when `pretrained` is given),
/// stage 2 adapts on the full morph-augmented training set.
AdaptResult run_adapt(const ExperimentConfig& config, const ExperimentData& data,
                      const std::optional<DualHeadModel>& pretrained);

}  // namespace morphguard
