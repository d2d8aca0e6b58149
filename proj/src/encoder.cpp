#include "morphguard/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "morphguard/error.hpp"
#include "morphguard/rng.hpp"

namespace morphguard {

namespace {

constexpr double kDegenerateNorm = 1e-12;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (double& w : m.data) w = rng.uniform(-bound, bound);
    return m;
}

// Row-normalized copy of a head plus the original row norms.
struct NormalizedHead {
    Matrix unit;
    Vec norms;
};

NormalizedHead normalize_rows(const Matrix& head) {
    NormalizedHead out{Matrix(head.rows, head.cols), Vec(head.rows)};
    for (std::size_t j = 0; j < head.rows; ++j) {
        const double n = norm2(head.row(j));
        if (!(n >= kDegenerateNorm)) throw DegenerateWeightError("head row " + std::to_string(j) + " has ~zero norm");
        out.norms[j] = n;
        for (std::size_t k = 0; k < head.cols; ++k) out.unit(j, k) = head(j, k) / n;
    }
    return out;
}

// Accumulates d loss / d head and returns d loss / d embedding contribution.
void backprop_head(const NormalizedHead& head, std::span<const double> embedding, std::span<const double> cos_grad,
                   Matrix& head_grad, Vec& embedding_grad) {
    for (std::size_t j = 0; j < head.unit.rows; ++j) {
        const double g = cos_grad[j];
        if (g == 0.0) continue;
        const auto w = head.unit.row(j);
        const double c = dot(embedding, w);
        auto gw = head_grad.row(j);
        for (std::size_t k = 0; k < w.size(); ++k) {
            embedding_grad[k] += g * w[k];
            gw[k] += g * (embedding[k] - c * w[k]) / head.norms[j];
        }
    }
}

void sgd_update(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace

void DualHeadModel::validate() const {
    if (layers.empty()) throw ConfigError("model has no encoder layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.weight.rows == 0 || layer.weight.cols == 0) throw ConfigError("empty layer");
        if (layer.weight.data.size() != layer.weight.rows * layer.weight.cols || layer.bias.size() != layer.weight.rows)
            throw ConfigError("layer " + std::to_string(l) + " has inconsistent storage");
        if (l > 0 && layer.weight.cols != layers[l - 1].weight.rows)
            throw ConfigError("layer " + std::to_string(l) + " does not chain with its predecessor");
        if (!all_finite(layer.weight.data) || !all_finite(layer.bias))
            throw ConfigError("layer " + std::to_string(l) + " has non-finite parameters");
    }
    const std::size_t d = embedding_dim();
    if (head1.rows != head2.rows || head1.cols != head2.cols) throw ConfigError("heads differ in shape");
    if (head1.rows == 0 || head1.cols != d) throw ConfigError("head width does not match embedding dimension");
    if (head1.data.size() != head1.rows * head1.cols || head2.data.size() != head2.rows * head2.cols)
        throw ConfigError("head has inconsistent storage");
    if (!all_finite(head1.data) || !all_finite(head2.data)) throw ConfigError("head has non-finite parameters");
}

DualHeadModel DualHeadModel::zeros_like() const {
    DualHeadModel z;
    z.layers.reserve(layers.size());
    for (const auto& layer : layers)
        z.layers.push_back({Matrix(layer.weight.rows, layer.weight.cols), Vec(layer.bias.size(), 0.0)});
    z.head1 = Matrix(head1.rows, head1.cols);
    z.head2 = Matrix(head2.rows, head2.cols);
    return z;
}

DualHeadModel init_model(std::size_t input_dim, std::span<const std::size_t> hidden_dims, std::size_t embedding_dim,
                         std::size_t classes, std::uint64_t seed) {
    if (input_dim == 0 || embedding_dim == 0 || classes == 0) throw ConfigError("model dimensions must be >= 1");
    if (std::find(hidden_dims.begin(), hidden_dims.end(), std::size_t{0}) != hidden_dims.end())
        throw ConfigError("hidden dimensions must be >= 1");

    Rng rng(seed);
    DualHeadModel model;
    std::size_t fan_in = input_dim;
    auto add_layer = [&](std::size_t out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        model.layers.push_back({uniform_matrix(out, fan_in, bound, rng), Vec(out, 0.0)});
        fan_in = out;
    };
    for (std::size_t h : hidden_dims) add_layer(h);
    add_layer(embedding_dim);

    const double head_bound = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
    model.head1 = uniform_matrix(classes, embedding_dim, head_bound, rng);
    model.head2 = uniform_matrix(classes, embedding_dim, head_bound, rng);
    return model;
}

ForwardResult forward(const DualHeadModel& model, std::span<const double> input) {
    if (input.size() != model.input_dim())
        throw ProtocolError("input dimension " + std::to_string(input.size()) + " does not match model input " +
                            std::to_string(model.input_dim()));
    if (!all_finite(input)) throw NumericInputError("non-finite encoder input");

    ForwardResult r;
    r.cache.activations.reserve(model.layers.size());
    r.cache.pre.reserve(model.layers.size());
    r.cache.activations.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        const Vec& a = r.cache.activations.back();
        Vec z(layer.weight.rows);
        for (std::size_t o = 0; o < layer.weight.rows; ++o) z[o] = dot(layer.weight.row(o), a) + layer.bias[o];
        r.cache.pre.push_back(z);
        if (l + 1 < model.layers.size()) {
            for (double& v : z) v = std::max(v, 0.0);
            r.cache.activations.push_back(std::move(z));
        }
    }
    const Vec& out = r.cache.pre.back();
    const double n = norm2(out);
    if (!(n >= kDegenerateNorm)) throw DegenerateEmbeddingError("encoder output has ~zero norm");
    r.cache.out_norm = n;
    r.embedding = scaled(out, 1.0 / n);
    return r;
}

Vec embed(const DualHeadModel& model, std::span<const double> input) { return forward(model, input).embedding; }

BatchGradient loss_and_gradient(const DualHeadModel& model, std::span<const Sample* const> batch,
                                const MarginConfig& margin) {
    if (batch.empty()) throw EmptyBatchError("empty training batch");

    const NormalizedHead h1 = normalize_rows(model.head1);
    const NormalizedHead h2 = normalize_rows(model.head2);

    std::vector<ForwardResult> passes;
    std::vector<CosineLogits> cos1, cos2;
    passes.reserve(batch.size());
    cos1.reserve(batch.size());
    cos2.reserve(batch.size());
    for (const Sample* s : batch) {
        passes.push_back(forward(model, s->input));
        cos1.push_back(cosine_logits(passes.back().embedding, model.head1));
        cos2.push_back(cosine_logits(passes.back().embedding, model.head2));
    }
    std::vector<MorphGuardItem> items;
    items.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) items.push_back({&cos1[i], &cos2[i], batch[i]->labels});
    const MorphGuardResult lg = morphguard_loss(items, margin);

    BatchGradient out{lg.loss, model.zeros_like()};
    const std::size_t d = model.embedding_dim();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ForwardResult& fr = passes[i];
        const Vec& e = fr.embedding;

        Vec ge(d, 0.0);
        backprop_head(h1, e, lg.grad_head1[i], out.grad.head1, ge);
        backprop_head(h2, e, lg.grad_head2[i], out.grad.head2, ge);

        // Through the L2 normalization: (I - e e^T) / |z|.
        const double proj = dot(e, ge);
        Vec gz(d);
        for (std::size_t k = 0; k < d; ++k) gz[k] = (ge[k] - e[k] * proj) / fr.cache.out_norm;

        for (std::size_t l = model.layers.size(); l-- > 0;) {
            const auto& layer = model.layers[l];
            auto& grad = out.grad.layers[l];
            const Vec& a = fr.cache.activations[l];
            for (std::size_t o = 0; o < layer.weight.rows; ++o) {
                const double g = gz[o];
                if (g == 0.0) continue;
                grad.bias[o] += g;
                auto row = grad.weight.row(o);
                for (std::size_t k = 0; k < a.size(); ++k) row[k] += g * a[k];
            }
            if (l == 0) break;
            Vec ga(layer.weight.cols, 0.0);
            for (std::size_t o = 0; o < layer.weight.rows; ++o) {
                const double g = gz[o];
                if (g == 0.0) continue;
                const auto row = layer.weight.row(o);
                for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g * row[k];
            }
            const Vec& z_prev = fr.cache.pre[l - 1];
            for (std::size_t k = 0; k < ga.size(); ++k)
                if (!(z_prev[k] > 0.0)) ga[k] = 0.0;
            gz = std::move(ga);
        }
    }
    return out;
}

BatchGradient loss_and_gradient(const DualHeadModel& model, std::span<const Sample> batch, const MarginConfig& margin) {
    std::vector<const Sample*> ptrs;
    ptrs.reserve(batch.size());
    for (const Sample& s : batch) ptrs.push_back(&s);
    return loss_and_gradient(model, std::span<const Sample* const>(ptrs), margin);
}

double train_step(DualHeadModel& model, std::span<const Sample* const> batch, const MarginConfig& margin, double lr) {
    BatchGradient bg = loss_and_gradient(model, batch, margin);
    if (lr != 0.0) {
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            sgd_update(model.layers[l].weight.data, bg.grad.layers[l].weight.data, lr);
            sgd_update(model.layers[l].bias, bg.grad.layers[l].bias, lr);
        }
        sgd_update(model.head1.data, bg.grad.head1.data, lr);
        sgd_update(model.head2.data, bg.grad.head2.data, lr);
    }
    return bg.loss;
}

double train_step(DualHeadModel& model, std::span<const Sample> batch, const MarginConfig& margin, double lr) {
    std::vector<const Sample*> ptrs;
    ptrs.reserve(batch.size());
    for (const Sample& s : batch) ptrs.push_back(&s);
    return train_step(model, std::span<const Sample* const>(ptrs), margin, lr);
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(lr_end > 0.0) || !(lr_start >= lr_end) || !std::isfinite(lr_start))
        throw ConfigError("learning rates must satisfy lr_start >= lr_end > 0");
    margin.validate();
}

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
    if (total_steps <= 1 || step == 0) return config.lr_start;
    if (step + 1 >= total_steps) return config.lr_end;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return config.lr_start + (config.lr_end - config.lr_start) * t;
}

TrainHistory train(DualHeadModel& model, std::span<const Sample> dataset, const TrainConfig& config) {
    if (dataset.empty()) throw ConfigError("training dataset is empty");
    config.validate();
    model.validate();

    const std::size_t n = dataset.size();
    const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total = config.epochs * steps_per_epoch;

    TrainHistory history;
    std::vector<std::size_t> order(n);
    std::vector<const Sample*> batch;
    batch.reserve(config.batch_size);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = Rng::stream(config.seed, epoch);
        rng.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        history.epoch_lr.push_back(scheduled_lr(config, step, total));
        for (std::size_t begin = 0; begin < n; begin += config.batch_size, ++step) {
            batch.clear();
            for (std::size_t k = begin; k < std::min(n, begin + config.batch_size); ++k) batch.push_back(&dataset[order[k]]);
            loss_sum += train_step(model, std::span<const Sample* const>(batch), config.margin,
                                   scheduled_lr(config, step, total));
        }
        history.epoch_loss.push_back(loss_sum / static_cast<double>(steps_per_epoch));
    }
    history.steps = step;
    return history;
}

TrainHistory adapt(DualHeadModel& model, std::span<const Sample> dataset, std::size_t dataset_classes,
                   const TrainConfig& config) {
    if (dataset_classes != model.classes())
        throw ProtocolError("pretrained model has " + std::to_string(model.classes()) + " classes, dataset has " +
                            std::to_string(dataset_classes));
    TrainHistory h = train(model, dataset, config);
    h.stage = "adapt";
    return h;
}

}  // namespace morphguard
