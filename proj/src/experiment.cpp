#include "morphguard/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "morphguard/error.hpp"
#include "morphguard/rng.hpp"

namespace morphguard {

using nlohmann::json;

namespace {

json margin_to_json(const MarginConfig& m) { return {{"scale", m.scale}, {"m_bf", m.m_bf}, {"m_mg", m.m_mg}}; }

json train_to_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"lr_start", t.lr_start},
            {"lr_end", t.lr_end},
            {"batch_size", t.batch_size},
            {"margin", margin_to_json(t.margin)}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

MarginConfig margin_from_json(const json& j, MarginConfig m) {
    reject_unknown(j, {"scale", "m_bf", "m_mg"}, "margin");
    read(j, "scale", m.scale);
    read(j, "m_bf", m.m_bf);
    read(j, "m_mg", m.m_mg);
    return m;
}

TrainConfig train_from_json(const json& j, TrainConfig t, const std::string& where) {
    reject_unknown(j, {"epochs", "lr_start", "lr_end", "batch_size", "margin"}, where);
    read(j, "epochs", t.epochs);
    read(j, "lr_start", t.lr_start);
    read(j, "lr_end", t.lr_end);
    read(j, "batch_size", t.batch_size);
    if (j.contains("margin")) t.margin = margin_from_json(j.at("margin"), t.margin);
    return t;
}

// Index lists of held-out samples per identity.
std::vector<std::vector<std::size_t>> group_by_identity(const std::vector<Sample>& samples, std::size_t classes) {
    std::vector<std::vector<std::size_t>> out(classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int id = samples[i].source_ids.at(0);
        if (id < 0 || static_cast<std::size_t>(id) >= classes) throw IndexError("held-out identity out of range");
        out[static_cast<std::size_t>(id)].push_back(i);
    }
    return out;
}

std::size_t pick_other(const std::vector<std::size_t>& members, std::size_t exclude, Rng& rng) {
    if (members.size() < 2) throw CapacityError("identity needs two held-out samples");
    for (;;) {
        const std::size_t j = members[rng.below(members.size())];
        if (j != exclude) return j;
    }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
    train.epochs = 10;
    train.lr_start = 1e-3;
    train.lr_end = 1e-5;

    stage1 = train;
    stage1.epochs = 15;
    stage1.margin.m_mg = 0.0;

    stage2 = train;
    stage2.epochs = 10;
    stage2.lr_start = 1e-4;
    stage2.lr_end = 1e-5;
    stage2.margin.m_mg = -0.1;
}

void ExperimentConfig::validate() const {
    if (!(data.ratios.bona_fide > 0.0)) throw ConfigError("data.ratios.bona_fide must be positive");
    if (data.classes < 2 || data.classes % 2 != 0) throw ConfigError("data.classes must be even and >= 2");
    if (data.samples_per_class < 2) throw ConfigError("data.samples_per_class must be >= 2");
    if (!(data.alpha > 0.0 && data.alpha < 1.0)) throw ConfigError("data.alpha must lie in (0, 1)");
    if (!(data.holdout_fraction > 0.0 && data.holdout_fraction < 1.0))
        throw ConfigError("data.holdout_fraction must lie in (0, 1)");
    const auto held = static_cast<std::size_t>(std::ceil(data.holdout_fraction * static_cast<double>(data.samples_per_class)));
    if (held < 3 || held >= data.samples_per_class)
        throw ConfigError("holdout must leave >= 3 held-out and >= 1 training sample per identity");
    if (data.genuine_pairs == 0 || data.impostor_pairs == 0 || data.eval_morphs < 3)
        throw ConfigError("evaluation needs genuine pairs, impostor pairs and >= 3 morphs");
    if (model.embedding_dim < 2 || model.embedding_dim % 2 != 0)
        throw ConfigError("model.embedding_dim must be even and >= 2");
    train.validate();
    stage1.validate();
    stage2.validate();
    for (double m : margin_grid) {
        MarginConfig probe = train.margin;
        probe.m_mg = m;
        probe.validate();
    }
    for (double t : eval.fnmr_targets)
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("FNMR targets must lie in (0, 1)");
    for (double t : eval.fmr_targets)
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("FMR targets must lie in (0, 1)");
    chi2_2dof_quantile(eval.ellipse_level);
}

json config_to_json(const ExperimentConfig& c) {
    return {{"seed", c.seed},
            {"data",
             {{"classes", c.data.classes},
              {"samples_per_class", c.data.samples_per_class},
              {"input_dim", c.data.input_dim},
              {"spread", c.data.spread},
              {"holdout_fraction", c.data.holdout_fraction},
              {"ratios",
               {{"bona_fide", c.data.ratios.bona_fide},
                {"morph", c.data.ratios.morph},
                {"selfmorph", c.data.ratios.selfmorph}}},
              {"alpha", c.data.alpha},
              {"eval_morphs", c.data.eval_morphs},
              {"genuine_pairs", c.data.genuine_pairs},
              {"impostor_pairs", c.data.impostor_pairs}}},
            {"model", {{"hidden_dims", c.model.hidden_dims}, {"embedding_dim", c.model.embedding_dim}}},
            {"train", train_to_json(c.train)},
            {"margin_grid", c.margin_grid},
            {"adapt", {{"stage1", train_to_json(c.stage1)}, {"stage2", train_to_json(c.stage2)}}},
            {"eval",
             {{"fnmr_targets", c.eval.fnmr_targets},
              {"fmr_targets", c.eval.fmr_targets},
              {"ellipse_level", c.eval.ellipse_level}}}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        reject_unknown(j, {"seed", "data", "model", "train", "margin_grid", "adapt", "eval"}, "config");
        read(j, "seed", c.seed);
        if (j.contains("data")) {
            const json& d = j.at("data");
            reject_unknown(d,
                           {"classes", "samples_per_class", "input_dim", "spread", "holdout_fraction", "ratios", "alpha",
                            "eval_morphs", "genuine_pairs", "impostor_pairs"},
                           "data");
            read(d, "classes", c.data.classes);
            read(d, "samples_per_class", c.data.samples_per_class);
            read(d, "input_dim", c.data.input_dim);
            read(d, "spread", c.data.spread);
            read(d, "holdout_fraction", c.data.holdout_fraction);
            read(d, "alpha", c.data.alpha);
            read(d, "eval_morphs", c.data.eval_morphs);
            read(d, "genuine_pairs", c.data.genuine_pairs);
            read(d, "impostor_pairs", c.data.impostor_pairs);
            if (d.contains("ratios")) {
                const json& r = d.at("ratios");
                reject_unknown(r, {"bona_fide", "morph", "selfmorph"}, "data.ratios");
                read(r, "bona_fide", c.data.ratios.bona_fide);
                read(r, "morph", c.data.ratios.morph);
                read(r, "selfmorph", c.data.ratios.selfmorph);
            }
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            reject_unknown(m, {"hidden_dims", "embedding_dim"}, "model");
            read(m, "hidden_dims", c.model.hidden_dims);
            read(m, "embedding_dim", c.model.embedding_dim);
        }
        if (j.contains("train")) c.train = train_from_json(j.at("train"), c.train, "train");
        read(j, "margin_grid", c.margin_grid);
        if (j.contains("adapt")) {
            const json& a = j.at("adapt");
            reject_unknown(a, {"stage1", "stage2"}, "adapt");
            if (a.contains("stage1")) c.stage1 = train_from_json(a.at("stage1"), c.stage1, "adapt.stage1");
            if (a.contains("stage2")) c.stage2 = train_from_json(a.at("stage2"), c.stage2, "adapt.stage2");
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            reject_unknown(e, {"fnmr_targets", "fmr_targets", "ellipse_level"}, "eval");
            read(e, "fnmr_targets", c.eval.fnmr_targets);
            read(e, "fmr_targets", c.eval.fmr_targets);
            read(e, "ellipse_level", c.eval.ellipse_level);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

std::uint64_t stream_seed(const ExperimentConfig& config, SeedStream stream) {
    return Rng::derive(config.seed, static_cast<std::uint64_t>(stream));
}

ExperimentData generate_data(const ExperimentConfig& config) {
    config.validate();
    const DataParams& p = config.data;
    SynthResult synth =
        synth_identities(p.classes, p.samples_per_class, p.input_dim, p.spread, stream_seed(config, SeedStream::Data));
    HoldoutSplit split = holdout_split(synth.bona_fides, p.classes, p.holdout_fraction);

    ExperimentData out;
    out.universe = std::move(synth.universe);
    out.train_bona_fides = std::move(split.train);
    out.holdout = std::move(split.holdout);

    const MixCounts counts = mix_counts(p.ratios, out.train_bona_fides.size(), 0);
    out.train_protocol = pair_protocol(out.universe, out.train_bona_fides, counts.morph,
                                       stream_seed(config, SeedStream::TrainProtocol));
    out.training_set = build_training_set(out.universe, out.train_bona_fides, out.train_protocol, p.ratios, p.alpha,
                                          stream_seed(config, SeedStream::TrainingSet));
    out.eval_protocol =
        pair_protocol(out.universe, out.holdout, p.eval_morphs, stream_seed(config, SeedStream::EvalProtocol));
    return out;
}

DualHeadModel fresh_model(const ExperimentConfig& config) {
    return init_model(config.data.input_dim, config.model.hidden_dims, config.model.embedding_dim, config.data.classes,
                      stream_seed(config, SeedStream::ModelInit));
}

TrainConfig seeded(TrainConfig train, const ExperimentConfig& config, SeedStream stream) {
    train.seed = stream_seed(config, stream);
    return train;
}

EvaluationInputs build_evaluation(const DualHeadModel& model, const std::vector<Sample>& holdout,
                                  const MorphPairProtocol& eval_protocol, const std::vector<int>& subset_of,
                                  const ExperimentConfig& config) {
    if (holdout.empty()) throw ConfigError("no held-out samples");
    if (holdout.front().input.size() != model.input_dim())
        throw ProtocolError("held-out input dimension does not match the checkpoint");
    const std::size_t classes = model.classes();
    const auto groups = group_by_identity(holdout, classes);

    std::vector<Vec> emb;
    emb.reserve(holdout.size());
    for (const Sample& s : holdout) emb.push_back(embed(model, s.input));

    std::vector<std::size_t> populated;
    for (std::size_t c = 0; c < classes; ++c)
        if (groups[c].size() >= 2) populated.push_back(c);
    if (populated.size() < 2) throw CapacityError("need two identities with >= 2 held-out samples");

    EvaluationInputs out;
    Rng rng(stream_seed(config, SeedStream::EvalPairs));
    for (std::size_t k = 0; k < config.data.genuine_pairs; ++k) {
        const auto& members = groups[populated[rng.below(populated.size())]];
        const std::size_t a = members[rng.below(members.size())];
        const std::size_t b = pick_other(members, a, rng);
        out.verification.genuine.push_back(cosine_similarity(emb[a], emb[b]));
    }
    for (std::size_t k = 0; k < config.data.impostor_pairs; ++k) {
        const std::size_t ca = populated[rng.below(populated.size())];
        std::size_t cb = ca;
        while (cb == ca) cb = populated[rng.below(populated.size())];
        const std::size_t a = groups[ca][rng.below(groups[ca].size())];
        const std::size_t b = groups[cb][rng.below(groups[cb].size())];
        out.verification.impostor.push_back(cosine_similarity(emb[a], emb[b]));
    }

    out.trials.reserve(eval_protocol.pairs.size());
    out.triplets.reserve(eval_protocol.pairs.size());
    for (std::size_t i = 0; i < eval_protocol.pairs.size(); ++i) {
        const MorphPair& p = eval_protocol.pairs[i];
        if (p.sample_a >= holdout.size() || p.sample_b >= holdout.size())
            throw IndexError("eval protocol index outside the held-out set");
        const Sample& a = holdout[p.sample_a];
        const Sample& b = holdout[p.sample_b];
        const Sample morph = make_morph(a, b, config.data.alpha, subset_of);
        const Vec me = embed(model, morph.input);
        const std::size_t probe_a = pick_other(groups.at(static_cast<std::size_t>(p.identity_a)), p.sample_a, rng);
        const std::size_t probe_b = pick_other(groups.at(static_cast<std::size_t>(p.identity_b)), p.sample_b, rng);
        out.trials.push_back(
            {std::to_string(i), {cosine_similarity(me, emb[probe_a]), cosine_similarity(me, emb[probe_b])}});
        out.triplets.push_back({a.input, b.input, morph.input});
    }
    return out;
}

EvaluationReport evaluate(const DualHeadModel& model, const EvaluationInputs& inputs, const ExperimentConfig& config) {
    EvaluationReport r;
    r.mmpmr_points = mmpmr_at_fnmr(inputs.trials, inputs.verification, config.eval.fnmr_targets);
    r.rmmr_min = min_rmmr(inputs.trials, inputs.verification);
    r.fnmr_points = fnmr_at_fmr(inputs.verification, config.eval.fmr_targets);
    r.verification_curves = fnmr_fmr_curves(inputs.verification);
    r.rmmr_curve = rmmr_curve(inputs.trials, inputs.verification);
    r.mmpmr_curve = mmpmr_curve(inputs.trials, r.rmmr_curve.thresholds);
    r.spread = morph_spread(inputs.triplets, model, config.eval.ellipse_level);
    r.ellipse_level = config.eval.ellipse_level;
    return r;
}

std::vector<ReportRow> report_rows(const EvaluationReport& r) {
    std::vector<ReportRow> rows;
    for (const auto& p : r.mmpmr_points) rows.push_back({"mmpmr@fnmr", p.target, p.achieved_fnmr, p.threshold, p.mmpmr});
    rows.push_back({"min_rmmr", 0.0, r.rmmr_min.value, r.rmmr_min.threshold, r.rmmr_min.value});
    for (const auto& p : r.fnmr_points) rows.push_back({"fnmr@fmr", p.target, p.achieved_fmr, p.threshold, p.fnmr});
    rows.push_back({"ellipse_size", r.ellipse_level, r.spread.size, 0.0, r.spread.size});
    return rows;
}

}  // namespace morphguard
