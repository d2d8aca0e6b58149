#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "morphguard/linalg.hpp"
#include "morphguard/loss.hpp"
#include "morphguard/sample.hpp"

namespace morphguard {

struct DenseLayer {
    Matrix weight;  // out x in
    Vec bias;       // out

    bool operator==(const DenseLayer&) const = default;
};

/// MLP encoder (ReLU between layers, linear last layer, L2-normalized output)
/// with two classification heads over the same class set. The same type is
/// used to hold parameter gradients.
struct DualHeadModel {
    std::vector<DenseLayer> layers;
    Matrix head1;  // classes x embedding_dim
    Matrix head2;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
    std::size_t embedding_dim() const { return layers.empty() ? 0 : layers.back().weight.rows; }
    std::size_t classes() const { return head1.rows; }

    /// Throws ConfigError on inconsistent shapes or non-finite parameters.
    void validate() const;

    /// Same shapes, all zeros.
    DualHeadModel zeros_like() const;

    bool operator==(const DualHeadModel&) const = default;
};

DualHeadModel init_model(std::size_t input_dim, std::span<const std::size_t> hidden_dims, std::size_t embedding_dim,
                         std::size_t classes, std::uint64_t seed);

/// Intermediate values of one forward pass, consumed by backprop.
struct ForwardCache {
    std::vector<Vec> activations;  // activations[0] is the input, then post-ReLU hidden outputs
    std::vector<Vec> pre;          // pre-activation of every layer; pre.back() is the unnormalized output
    double out_norm = 0.0;
};

struct ForwardResult {
    Vec embedding;
    ForwardCache cache;
};

ForwardResult forward(const DualHeadModel& model, std::span<const double> input);

/// Unit embedding only.
Vec embed(const DualHeadModel& model, std::span<const double> input);

struct BatchGradient {
    double loss = 0.0;
    DualHeadModel grad;
};

/// Loss and full parameter gradient of the dual-branch margin loss on a batch.
BatchGradient loss_and_gradient(const DualHeadModel& model, std::span<const Sample* const> batch,
                                const MarginConfig& margin);
BatchGradient loss_and_gradient(const DualHeadModel& model, std::span<const Sample> batch, const MarginConfig& margin);

/// One plain SGD step. Returns the loss before the update.
double train_step(DualHeadModel& model, std::span<const Sample* const> batch, const MarginConfig& margin, double lr);
double train_step(DualHeadModel& model, std::span<const Sample> batch, const MarginConfig& margin, double lr);

struct TrainConfig {
    std::size_t epochs = 10;
    double lr_start = 1e-3;
    double lr_end = 1e-5;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    MarginConfig margin;

    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

struct TrainHistory {
    std::vector<double> epoch_loss;  // mean step loss per epoch
    std::vector<double> epoch_lr;    // learning rate of each epoch's first step
    std::string stage = "train";
    std::size_t steps = 0;
};

/// Learning rate of step `step` out of `total_steps`, linear from start to end.
double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps);

/// Epoch loop with per-epoch shuffles drawn from Rng::stream(seed, epoch).
TrainHistory train(DualHeadModel& model, std::span<const Sample> dataset, const TrainConfig& config);

/// Continues training a pretrained model on a (morph augmented) dataset.
/// Throws ProtocolError when `dataset_classes` differs from the model.
TrainHistory adapt(DualHeadModel& model, std::span<const Sample> dataset, std::size_t dataset_classes,
                   const TrainConfig& config);

}  // namespace morphguard
