#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "morphguard/datagen.hpp"
#include "morphguard/encoder.hpp"
#include "morphguard/featviz.hpp"
#include "morphguard/io.hpp"
#include "morphguard/metrics.hpp"

namespace morphguard {

struct DataParams {
    std::size_t classes = 40;
    std::size_t samples_per_class = 50;
    std::size_t input_dim = 64;
    double spread = 0.1;
    double holdout_fraction = 0.2;
    MixRatios ratios;
    double alpha = 0.5;
    std::size_t eval_morphs = 1000;
    std::size_t genuine_pairs = 2000;
    std::size_t impostor_pairs = 2000;

    bool operator==(const DataParams&) const = default;
};

struct ModelParams {
    std::vector<std::size_t> hidden_dims{64};
    std::size_t embedding_dim = 32;

    bool operator==(const ModelParams&) const = default;
};

struct EvalParams {
    std::vector<double> fnmr_targets{0.01, 0.001};
    std::vector<double> fmr_targets{0.001, 0.0001};
    double ellipse_level = 0.9;

    bool operator==(const EvalParams&) const = default;
};

/// Everything a command needs. All seeds are derived from `seed`.
struct ExperimentConfig {
    DataParams data;
    ModelParams model;
    TrainConfig train;
    std::vector<double> margin_grid{0.1, 0.05, 0.0, -0.05, -0.1, -0.2, -0.3};
    TrainConfig stage1;
    TrainConfig stage2;
    EvalParams eval;
    std::uint64_t seed = 1;

    ExperimentConfig();
    void validate() const;

    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Seeds of the individual pipeline stages.
enum class SeedStream : std::uint64_t {
    Data = 0,
    TrainProtocol = 1,
    TrainingSet = 2,
    EvalProtocol = 3,
    EvalPairs = 4,
    ModelInit = 5,
    Train = 6,
    Adapt = 7,
};
std::uint64_t stream_seed(const ExperimentConfig& config, SeedStream stream);

struct ExperimentData {
    IdentityUniverse universe;
    std::vector<Sample> train_bona_fides;
    std::vector<Sample> holdout;
    MorphPairProtocol train_protocol;  // indexes train_bona_fides
    std::vector<Sample> training_set;
    MorphPairProtocol eval_protocol;   // indexes holdout
};

ExperimentData generate_data(const ExperimentConfig& config);

DualHeadModel fresh_model(const ExperimentConfig& config);

/// Copy of `train` whose seed is derived from the experiment seed.
TrainConfig seeded(TrainConfig train, const ExperimentConfig& config, SeedStream stream);

/// Scores and triplets for one model on held-out data.
struct EvaluationInputs {
    VerificationSet verification;
    std::vector<MorphTrial> trials;
    std::vector<Triplet> triplets;  // input space: (parent a, parent b, morph)
};

/// Genuine / impostor pairs are drawn from the held-out bona fides; every eval
/// protocol morph is scored against one other held-out sample of each parent.
EvaluationInputs build_evaluation(const DualHeadModel& model, const std::vector<Sample>& holdout,
                                  const MorphPairProtocol& eval_protocol, const std::vector<int>& subset_of,
                                  const ExperimentConfig& config);

struct EvaluationReport {
    std::vector<MmpmrAtFnmr> mmpmr_points;
    RmmrMinimum rmmr_min;
    std::vector<FnmrAtFmr> fnmr_points;
    VerificationCurves verification_curves;
    ThresholdCurve mmpmr_curve;
    ThresholdCurve rmmr_curve;
    MorphSpread spread;
    double ellipse_level = 0.9;
};

EvaluationReport evaluate(const DualHeadModel& model, const EvaluationInputs& inputs, const ExperimentConfig& config);

/// Operating-point rows in a fixed order: MMPMR@FNMR targets, min RMMR,
/// FNMR@FMR targets, ellipse size (target column holds the ellipse level).
std::vector<ReportRow> report_rows(const EvaluationReport& report);

}  // namespace morphguard
