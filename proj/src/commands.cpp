#include "morphguard/commands.hpp"

#include <future>
#include <string>

#include "morphguard/checkpoint.hpp"
#include "morphguard/error.hpp"

namespace morphguard {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Bundle {
public:
    Bundle(const CommandOptions& opts, std::string command) : opts_(opts), command_(std::move(command)) {
        std::error_code ec;
        fs::create_directories(opts.out, ec);
        if (ec) throw IoError("cannot create output directory " + opts.out.string() + ": " + ec.message());
    }

    void write(const std::string& name, const std::string& contents) {
        write_file(opts_.out / name, contents);
        outputs_.push_back(name);
    }

    void write_checkpoint(const std::string& name, const DualHeadModel& model) {
        save_checkpoint(model, opts_.out / name);
        outputs_.push_back(name);
    }

    void finish() {
        json inputs = json::object();
        inputs["checkpoint"] = opts_.checkpoint ? json(opts_.checkpoint->string()) : json(nullptr);
        inputs["data_dir"] = opts_.data_dir ? json(opts_.data_dir->string()) : json(nullptr);
        const json manifest = {{"command", command_},
                               {"config", config_to_json(opts_.config)},
                               {"inputs", inputs},
                               {"outputs", outputs_}};
        write_file(opts_.out / "manifest.json", manifest.dump(2) + "\n");
    }

private:
    const CommandOptions& opts_;
    std::string command_;
    std::vector<std::string> outputs_;
};

ExperimentData obtain_data(const CommandOptions& opts) {
    return opts.data_dir ? load_data(*opts.data_dir) : generate_data(opts.config);
}

DualHeadModel require_checkpoint(const CommandOptions& opts) {
    if (!opts.checkpoint) throw ConfigError("this command needs --checkpoint");
    return load_checkpoint(*opts.checkpoint);
}

std::string history_csv(const TrainHistory& h) {
    std::string out = "epoch,loss,lr\n";
    for (std::size_t e = 0; e < h.epoch_loss.size(); ++e)
        out += std::to_string(e) + "," + format_double(h.epoch_loss[e]) + "," + format_double(h.epoch_lr[e]) + "\n";
    return out;
}

void write_report(Bundle& bundle, const std::string& prefix, const EvaluationReport& r) {
    bundle.write(prefix + "fnmr_curve.csv", curve_to_csv(r.verification_curves.fnmr));
    bundle.write(prefix + "fmr_curve.csv", curve_to_csv(r.verification_curves.fmr));
    bundle.write(prefix + "mmpmr_curve.csv", curve_to_csv(r.mmpmr_curve));
    bundle.write(prefix + "rmmr_curve.csv", curve_to_csv(r.rmmr_curve));
    bundle.write(prefix + "operating_points.csv", report_to_csv(report_rows(r)));
    bundle.write(prefix + "ellipse.csv", ellipse_to_csv(r.spread.ellipse));
}

std::string labelled_rows(const std::string& key_header, const std::vector<std::pair<std::string, EvaluationReport>>& runs) {
    std::string out = key_header + ",metric,target,achieved,threshold,value\n";
    for (const auto& [key, report] : runs)
        for (const ReportRow& r : report_rows(report))
            out += key + "," + r.metric + "," + format_double(r.target) + "," + format_double(r.achieved) + "," +
                   format_double(r.threshold) + "," + format_double(r.value) + "\n";
    return out;
}

}  // namespace

ExperimentData load_data(const fs::path& dir) {
    ExperimentData d;
    const json u = [&] {
        try {
            return json::parse(read_file(dir / DataFiles::universe));
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("malformed universe file: ") + e.what(), e.byte);
        }
    }();
    try {
        d.universe.classes = u.at("classes").get<std::size_t>();
        d.universe.input_dim = u.at("input_dim").get<std::size_t>();
        d.universe.subset_of = u.at("subset_of").get<std::vector<int>>();
        d.universe.prototypes = u.at("prototypes").get<std::vector<Vec>>();
        d.universe.spread = u.at("spread").get<double>();
        d.universe.seed = u.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad universe file: ") + e.what(), 0);
    }
    d.training_set = dataset_from_jsonl(read_file(dir / DataFiles::dataset));
    d.holdout = dataset_from_jsonl(read_file(dir / DataFiles::holdout));
    d.train_protocol = protocol_from_json(read_file(dir / DataFiles::protocol));
    d.eval_protocol = protocol_from_json(read_file(dir / DataFiles::eval_protocol));
    for (const Sample& s : d.training_set)
        if (s.labels.kind == SampleKind::BonaFide) d.train_bona_fides.push_back(s);
    return d;
}

void cmd_gen_data(const CommandOptions& opts) {
    const ExperimentData d = generate_data(opts.config);
    Bundle bundle(opts, "gen-data");
    const json universe = {{"classes", d.universe.classes},     {"input_dim", d.universe.input_dim},
                           {"subset_of", d.universe.subset_of}, {"prototypes", d.universe.prototypes},
                           {"spread", d.universe.spread},       {"seed", d.universe.seed}};
    bundle.write(DataFiles::universe, universe.dump() + "\n");
    bundle.write(DataFiles::dataset, dataset_to_jsonl(d.training_set));
    bundle.write(DataFiles::holdout, dataset_to_jsonl(d.holdout));
    bundle.write(DataFiles::protocol, protocol_to_json(d.train_protocol, d.universe.subset_of));
    bundle.write(DataFiles::eval_protocol, protocol_to_json(d.eval_protocol, d.universe.subset_of));
    bundle.finish();
}

void cmd_train(const CommandOptions& opts) {
    const ExperimentData d = obtain_data(opts);
    DualHeadModel model = fresh_model(opts.config);
    const TrainHistory h = train(model, d.training_set, seeded(opts.config.train, opts.config, SeedStream::Train));
    Bundle bundle(opts, "train");
    bundle.write_checkpoint("model.ckpt", model);
    bundle.write("history.csv", history_csv(h));
    bundle.finish();
}

std::vector<SweepEntry> run_sweep(const ExperimentConfig& config, const ExperimentData& data, bool parallel) {
    if (config.margin_grid.empty()) throw ConfigError("margin grid is empty");
    const auto run_one = [&](double m_mg) {
        try {
            TrainConfig tc = seeded(config.train, config, SeedStream::Train);
            tc.margin.m_mg = m_mg;
            DualHeadModel model = fresh_model(config);
            SweepEntry e;
            e.m_mg = m_mg;
            e.history = train(model, data.training_set, tc);
            const EvaluationInputs inputs =
                build_evaluation(model, data.holdout, data.eval_protocol, data.universe.subset_of, config);
            e.report = evaluate(model, inputs, config);
            return e;
        } catch (const Error& err) {
            throw Error(err.kind(), "m_mg=" + format_double(m_mg) + ": " + err.what());
        }
    };

    std::vector<SweepEntry> out;
    out.reserve(config.margin_grid.size());
    if (parallel) {
        std::vector<std::future<SweepEntry>> jobs;
        for (double m : config.margin_grid) jobs.push_back(std::async(std::launch::async, run_one, m));
        for (auto& j : jobs) out.push_back(j.get());
    } else {
        for (double m : config.margin_grid) out.push_back(run_one(m));
    }
    return out;
}

void cmd_sweep_margins(const CommandOptions& opts) {
    const ExperimentData d = obtain_data(opts);
    const std::vector<SweepEntry> entries = run_sweep(opts.config, d, opts.parallel);
    Bundle bundle(opts, "sweep-margins");
    std::vector<std::pair<std::string, EvaluationReport>> runs;
    for (const SweepEntry& e : entries) {
        const std::string key = format_double(e.m_mg);
        const std::string dir = "m_mg=" + key + "/";
        write_report(bundle, dir, e.report);
        bundle.write(dir + "history.csv", history_csv(e.history));
        runs.emplace_back(key, e.report);
    }
    bundle.write("sweep_report.csv", labelled_rows("margin", runs));
    bundle.finish();
}

AdaptResult run_adapt(const ExperimentConfig& config, const ExperimentData& data,
                      const std::optional<DualHeadModel>& pretrained) {
    AdaptResult r;
    if (pretrained) {
        r.stage1 = *pretrained;
    } else {
        r.stage1 = fresh_model(config);
        r.history1 = train(r.stage1, data.train_bona_fides, seeded(config.stage1, config, SeedStream::Train));
    }
    r.stage2 = r.stage1;
    r.history2 = adapt(r.stage2, data.training_set, data.universe.classes, seeded(config.stage2, config, SeedStream::Adapt));
    const auto eval = [&](const DualHeadModel& m) {
        const EvaluationInputs inputs = build_evaluation(m, data.holdout, data.eval_protocol, data.universe.subset_of, config);
        return evaluate(m, inputs, config);
    };
    r.report1 = eval(r.stage1);
    r.report2 = eval(r.stage2);
    return r;
}

void cmd_adapt(const CommandOptions& opts) {
    const ExperimentData d = obtain_data(opts);
    std::optional<DualHeadModel> pretrained;
    if (opts.checkpoint) pretrained = load_checkpoint(*opts.checkpoint);
    const AdaptResult r = run_adapt(opts.config, d, pretrained);

    Bundle bundle(opts, "adapt");
    bundle.write_checkpoint("stage1.ckpt", r.stage1);
    bundle.write_checkpoint("stage2.ckpt", r.stage2);
    if (!pretrained) bundle.write("stage1/history.csv", history_csv(r.history1));
    bundle.write("stage2/history.csv", history_csv(r.history2));
    write_report(bundle, "stage1/", r.report1);
    write_report(bundle, "stage2/", r.report2);
    bundle.write("adapt_report.csv", labelled_rows("stage", {{"stage1", r.report1}, {"stage2", r.report2}}));
    bundle.finish();
}

void cmd_eval(const CommandOptions& opts) {
    const DualHeadModel model = require_checkpoint(opts);
    const ExperimentData d = obtain_data(opts);
    if (model.classes() != d.universe.classes) throw ProtocolError("checkpoint class count does not match the data");
    const EvaluationInputs inputs = build_evaluation(model, d.holdout, d.eval_protocol, d.universe.subset_of, opts.config);
    const EvaluationReport report = evaluate(model, inputs, opts.config);

    Bundle bundle(opts, "eval");
    bundle.write("verification_scores.csv", scores_to_csv(inputs.verification));
    bundle.write("morph_trials.json", trials_to_json(inputs.trials));
    write_report(bundle, "", report);
    bundle.finish();
}

void cmd_analyze_features(const CommandOptions& opts) {
    const DualHeadModel model = require_checkpoint(opts);
    const ExperimentData d = obtain_data(opts);
    const EvaluationInputs inputs = build_evaluation(model, d.holdout, d.eval_protocol, d.universe.subset_of, opts.config);
    const MorphSpread spread = morph_spread(inputs.triplets, model, opts.config.eval.ellipse_level);

    Bundle bundle(opts, "analyze-features");
    bundle.write("aligned_cloud.csv", aligned_cloud_to_csv(spread.aligned));
    bundle.write("ellipse.csv", ellipse_to_csv(spread.ellipse));
    bundle.write("features.svg", render_svg(spread.aligned, spread.ellipse));
    bundle.finish();
}

std::string cmd_print_default_config() { return config_to_json(ExperimentConfig{}).dump(2) + "\n"; }

}  // namespace morphguard
