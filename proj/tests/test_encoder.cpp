#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "model_util.hpp"
#include "morphguard/datagen.hpp"
#include "morphguard/encoder.hpp"
#include "morphguard/error.hpp"

using namespace morphguard;
using testutil::parameters;

namespace {

DualHeadModel identity_model(std::size_t dim, std::size_t classes) {
    DualHeadModel m;
    DenseLayer layer{Matrix(dim, dim), Vec(dim, 0.0)};
    for (std::size_t i = 0; i < dim; ++i) layer.weight(i, i) = 1.0;
    m.layers.push_back(layer);
    m.head1 = Matrix(classes, dim);
    m.head2 = Matrix(classes, dim);
    for (std::size_t c = 0; c < classes; ++c) {
        m.head1(c, c % dim) = 1.0;
        m.head2(c, (c + 1) % dim) = 1.0;
    }
    return m;
}

const std::size_t kHidden[] = {6};

}  // namespace

TEST_SUITE("init_model") {
    TEST_CASE("deterministic per seed") {
        const auto a = init_model(5, kHidden, 4, 3, 9);
        const auto b = init_model(5, kHidden, 4, 3, 9);
        const auto c = init_model(5, kHidden, 4, 3, 10);
        CHECK(a == b);
        CHECK_FALSE(a == c);
        CHECK_NOTHROW(a.validate());
    }

    TEST_CASE("no hidden layers gives a single linear map") {
        const auto m = init_model(7, {}, 4, 3, 1);
        REQUIRE(m.layers.size() == 1);
        CHECK(m.layers[0].weight.rows == 4);
        CHECK(m.layers[0].weight.cols == 7);
        CHECK(m.input_dim() == 7);
        CHECK(m.embedding_dim() == 4);
        CHECK(m.classes() == 3);
    }

    TEST_CASE("mean absolute weight matches the uniform moment") {
        // U(-a, a) has E|w| = a / 2 with a = 1 / sqrt(fan_in).
        const std::size_t hidden[] = {100};
        const auto m = init_model(100, hidden, 100, 2, 4);
        double sum = 0.0;
        for (double w : m.layers[0].weight.data) sum += std::fabs(w);
        const double mean = sum / static_cast<double>(m.layers[0].weight.data.size());
        const double expected = 0.5 / std::sqrt(100.0);
        CHECK(mean == doctest::Approx(expected).epsilon(0.2));
        for (double b : m.layers[0].bias) CHECK(b == 0.0);
    }

    TEST_CASE("zero dimensions") {
        CHECK_THROWS_AS(init_model(0, kHidden, 4, 3, 1), ConfigError);
        CHECK_THROWS_AS(init_model(5, kHidden, 0, 3, 1), ConfigError);
        CHECK_THROWS_AS(init_model(5, kHidden, 4, 0, 1), ConfigError);
        const std::size_t zero[] = {0};
        CHECK_THROWS_AS(init_model(5, zero, 4, 3, 1), ConfigError);
    }
}

TEST_SUITE("forward") {
    TEST_CASE("identity layer passes a unit input through") {
        const auto m = identity_model(3, 2);
        const Vec x{0.6, 0.0, 0.8};
        CHECK(embed(m, x) == x);
    }

    TEST_CASE("scaling the last layer changes nothing downstream") {
        Rng rng(2);
        auto m = init_model(6, kHidden, 4, 3, 21);
        auto scaled_model = m;
        for (double& w : scaled_model.layers.back().weight.data) w *= 10.0;
        for (double& b : scaled_model.layers.back().bias) b *= 10.0;
        const auto batch = testutil::random_batch(rng, 5, 6, 3);
        for (const auto& s : batch) {
            const Vec a = embed(m, s.input), b = embed(scaled_model, s.input);
            for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-13));
            const auto ca = cosine_logits(a, m.head1), cb = cosine_logits(b, m.head1);
            CHECK(std::max_element(ca.values.begin(), ca.values.end()) - ca.values.begin() ==
                  std::max_element(cb.values.begin(), cb.values.end()) - cb.values.begin());
        }
        const MarginConfig margin;
        const double la = loss_and_gradient(m, std::span<const Sample>(batch), margin).loss;
        const double lb = loss_and_gradient(scaled_model, std::span<const Sample>(batch), margin).loss;
        CHECK(la == doctest::Approx(lb).epsilon(1e-10));
    }

    TEST_CASE("embeddings have unit norm") {
        Rng rng(8);
        const std::size_t hidden[] = {32, 32};
        const auto m = init_model(10, hidden, 8, 4, 3);
        for (int k = 0; k < 1000; ++k) {
            const Vec e = embed(m, testutil::random_input(rng, 10));
            CHECK(std::fabs(norm2(e) - 1.0) < 1e-12);
        }
    }

    TEST_CASE("degenerate output and bad inputs") {
        auto m = identity_model(3, 2);
        CHECK_THROWS_AS(embed(m, Vec{0.0, 0.0, 0.0}), DegenerateEmbeddingError);
        CHECK_THROWS_AS(embed(m, Vec{1.0, 0.0}), ProtocolError);
        CHECK_THROWS_AS(embed(m, Vec{1.0, NAN, 0.0}), NumericInputError);
    }

    TEST_CASE("cache holds the pre-normalization norm") {
        const auto m = identity_model(2, 2);
        const auto r = forward(m, Vec{3.0, 4.0});
        CHECK(r.cache.out_norm == 5.0);
        CHECK(r.embedding[0] == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(r.embedding[1] == doctest::Approx(0.8).epsilon(1e-15));
    }
}

TEST_SUITE("train_step") {
    TEST_CASE("zero learning rate leaves the model unchanged") {
        Rng rng(4);
        auto m = init_model(5, kHidden, 4, 3, 2);
        const auto before = m;
        const auto batch = testutil::random_batch(rng, 4, 5, 3);
        const double loss = train_step(m, std::span<const Sample>(batch), MarginConfig{}, 0.0);
        CHECK(m == before);
        CHECK(loss == loss_and_gradient(before, std::span<const Sample>(batch), MarginConfig{}).loss);
    }

    TEST_CASE("one-sample gradient matches finite differences") {
        Rng rng(12);
        const auto m = init_model(5, kHidden, 4, 3, 7);
        const MarginConfig margin{8.0, 0.5, -0.1};
        int checked = 0;
        while (checked < 10) {
            const auto batch = testutil::random_batch(rng, 1, 5, 3);
            if (!testutil::away_from_clamp(m, batch, margin)) continue;
            const auto r = testutil::check_model_gradient(m, batch, margin);
            CHECK(r.worst < 1e-4);
            ++checked;
        }
    }

    TEST_CASE("end-to-end gradient over random small models") {
        Rng rng(31);
        int checked = 0;
        while (checked < 30) {
            const std::size_t input_dim = 2 + rng.below(7), d = 2 + rng.below(5), classes = 2 + rng.below(4);
            std::vector<std::size_t> hidden;
            for (std::size_t l = rng.below(3); l > 0; --l) hidden.push_back(2 + rng.below(6));
            const auto m = init_model(input_dim, hidden, d, classes, rng.next());
            const MarginConfig margin{rng.uniform(2.0, 32.0), rng.uniform(0.0, 0.6), rng.uniform(-0.3, 0.2)};
            const auto batch = testutil::random_batch(rng, 1 + rng.below(4), input_dim, classes);
            if (!testutil::away_from_clamp(m, batch, margin)) continue;
            CHECK(testutil::check_model_gradient(m, batch, margin).worst < 1e-4);
            ++checked;
        }
    }

    TEST_CASE("duplicated sample has the one-sample gradient") {
        Rng rng(5);
        const auto m = init_model(5, kHidden, 4, 3, 8);
        const auto one = testutil::random_batch(rng, 1, 5, 3);
        const std::vector<Sample> two{one[0], one[0]};
        auto g1 = loss_and_gradient(m, std::span<const Sample>(one), MarginConfig{}).grad;
        auto g2 = loss_and_gradient(m, std::span<const Sample>(two), MarginConfig{}).grad;
        const auto p1 = parameters(g1), p2 = parameters(g2);
        for (std::size_t k = 0; k < p1.size(); ++k) CHECK(*p1[k] == doctest::Approx(*p2[k]).epsilon(1e-12));
    }

    TEST_CASE("empty batch and label errors propagate") {
        auto m = init_model(5, kHidden, 4, 3, 8);
        CHECK_THROWS_AS(train_step(m, std::span<const Sample>{}, MarginConfig{}, 0.1), EmptyBatchError);
        Sample bad{Vec(5, 1.0), {0, 7, SampleKind::Morph}, {0, 7}};
        CHECK_THROWS_AS(train_step(m, std::span<const Sample>(&bad, 1), MarginConfig{}, 0.1), IndexError);
    }
}

TEST_SUITE("train") {
    SynthResult separable(std::uint64_t seed) { return synth_identities(4, 50, 16, 0.1, seed); }

    TEST_CASE("one epoch with a full batch is one step at lr_start") {
        const auto data = separable(3);
        auto m = init_model(16, kHidden, 8, 4, 1);
        TrainConfig cfg;
        cfg.epochs = 1;
        cfg.batch_size = data.bona_fides.size();
        const auto h = train(m, data.bona_fides, cfg);
        CHECK(h.steps == 1);
        REQUIRE(h.epoch_lr.size() == 1);
        CHECK(h.epoch_lr[0] == cfg.lr_start);

        std::vector<std::size_t> order(data.bona_fides.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng::stream(cfg.seed, 0).shuffle(std::span<std::size_t>(order));
        std::vector<const Sample*> batch;
        for (std::size_t i : order) batch.push_back(&data.bona_fides[i]);
        auto manual = init_model(16, kHidden, 8, 4, 1);
        train_step(manual, std::span<const Sample* const>(batch), cfg.margin, cfg.lr_start);
        CHECK(m == manual);
    }

    TEST_CASE("linear schedule endpoints") {
        TrainConfig cfg;
        CHECK(scheduled_lr(cfg, 0, 40) == cfg.lr_start);
        CHECK(std::fabs(scheduled_lr(cfg, 39, 40) - cfg.lr_end) < 1e-12);
        double prev = scheduled_lr(cfg, 0, 40);
        for (std::size_t s = 1; s < 40; ++s) {
            const double lr = scheduled_lr(cfg, s, 40);
            CHECK(lr < prev);
            prev = lr;
        }
        const double mid = scheduled_lr(cfg, 13, 40);
        CHECK(mid == doctest::Approx(cfg.lr_start + (cfg.lr_end - cfg.lr_start) * 13.0 / 39.0).epsilon(1e-14));
    }

    TEST_CASE("deterministic for a fixed seed") {
        const auto data = separable(5);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 16;
        auto a = init_model(16, kHidden, 8, 4, 2);
        auto b = a;
        const auto ha = train(a, data.bona_fides, cfg);
        const auto hb = train(b, data.bona_fides, cfg);
        CHECK(a == b);
        CHECK(ha.epoch_loss == hb.epoch_loss);
        auto c = init_model(16, kHidden, 8, 4, 2);
        cfg.seed = 2;
        train(c, data.bona_fides, cfg);
        CHECK_FALSE(a == c);
    }

    TEST_CASE("loss is finite, nonnegative, and falls over the first five epochs") {
        std::vector<std::vector<double>> losses;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto data = separable(100 + seed);
            const std::size_t hidden[] = {32};
            auto m = init_model(16, hidden, 8, 4, seed);
            TrainConfig cfg;
            cfg.seed = seed;
            const auto h = train(m, data.bona_fides, cfg);
            for (double l : h.epoch_loss) {
                CHECK(std::isfinite(l));
                CHECK(l >= 0.0);
            }
            losses.push_back(h.epoch_loss);
        }
        std::vector<double> median;
        for (std::size_t e = 0; e < 5; ++e) {
            std::vector<double> v;
            for (const auto& l : losses) v.push_back(l[e]);
            std::sort(v.begin(), v.end());
            median.push_back(v[2]);
        }
        for (std::size_t e = 1; e < 5; ++e) CHECK(median[e] < median[e - 1]);
    }

    TEST_CASE("errors") {
        auto m = init_model(16, kHidden, 8, 4, 1);
        CHECK_THROWS_AS(train(m, std::span<const Sample>{}, TrainConfig{}), ConfigError);
        const auto data = separable(1);
        TrainConfig cfg;
        cfg.lr_end = 0.0;
        CHECK_THROWS_AS(train(m, data.bona_fides, cfg), ConfigError);
    }
}

TEST_SUITE("adapt") {
    TEST_CASE("without morphs it continues training") {
        const auto data = synth_identities(4, 20, 16, 0.1, 9);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 16;
        auto a = init_model(16, kHidden, 8, 4, 3);
        auto b = a;
        const auto ha = adapt(a, data.bona_fides, 4, cfg);
        const auto hb = train(b, data.bona_fides, cfg);
        CHECK(a == b);
        CHECK(ha.epoch_loss == hb.epoch_loss);
        CHECK(ha.stage == "adapt");
        CHECK(hb.stage == "train");
    }

    TEST_CASE("stage-2 schedule runs from 1e-4 down to 1e-5") {
        const auto data = synth_identities(4, 20, 16, 0.1, 9);
        TrainConfig cfg;
        cfg.epochs = 4;
        cfg.batch_size = 10;
        cfg.lr_start = 0.0001;
        cfg.lr_end = 0.00001;
        cfg.margin.m_mg = -0.1;
        auto m = init_model(16, kHidden, 8, 4, 3);
        const auto h = adapt(m, data.bona_fides, 4, cfg);
        REQUIRE(h.epoch_lr.size() == 4);
        CHECK(h.epoch_lr[0] == 0.0001);
        for (std::size_t e = 1; e < 4; ++e) CHECK(h.epoch_lr[e] < h.epoch_lr[e - 1]);
        CHECK(std::fabs(scheduled_lr(cfg, h.steps - 1, h.steps) - 0.00001) < 1e-12);
        // Equal spacing per epoch: the schedule is linear in the step index.
        const double d1 = h.epoch_lr[0] - h.epoch_lr[1], d2 = h.epoch_lr[1] - h.epoch_lr[2];
        CHECK(d1 == doctest::Approx(d2).epsilon(1e-9));
    }

    TEST_CASE("deterministic and class-checked") {
        const auto data = synth_identities(4, 10, 16, 0.1, 2);
        TrainConfig cfg;
        cfg.epochs = 2;
        auto a = init_model(16, kHidden, 8, 4, 3);
        auto b = a;
        adapt(a, data.bona_fides, 4, cfg);
        adapt(b, data.bona_fides, 4, cfg);
        CHECK(a == b);
        CHECK_THROWS_AS(adapt(a, data.bona_fides, 6, cfg), ProtocolError);
    }
}
