// morphguard: command-line driver for the dual-branch margin experiments.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "morphguard/commands.hpp"
#include "morphguard/error.hpp"
#include "morphguard/io.hpp"

namespace {

int exit_code(morphguard::ErrorKind kind) {
    switch (kind) {
        case morphguard::ErrorKind::Config: return 2;
        case morphguard::ErrorKind::Protocol: return 3;
        case morphguard::ErrorKind::Numeric: return 4;
        case morphguard::ErrorKind::Io: return 5;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MorphGuard margin-balance laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string checkpoint;
    std::string data_dir;
    bool parallel = false;

    const auto add_common = [&](CLI::App* sub, bool wants_checkpoint) {
        sub->add_option("--config", config_path, "JSON experiment config (defaults when omitted)");
        sub->add_option("--seed", seed, "Master seed, overrides the config");
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--data", data_dir, "gen-data bundle to read instead of regenerating");
        sub->add_flag("--parallel", parallel, "Run independent jobs concurrently");
        if (wants_checkpoint) sub->add_option("--checkpoint", checkpoint, "Model checkpoint");
    };

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset and pairing protocols");
    auto* trn = app.add_subcommand("train", "Train one model with the configured margins");
    auto* sweep = app.add_subcommand("sweep-margins", "Train and evaluate one model per morph margin");
    auto* adp = app.add_subcommand("adapt", "Two-stage training: bona fide pretraining, then morph adaptation");
    auto* ev = app.add_subcommand("eval", "Verification and morph robustness metrics for a checkpoint");
    auto* feat = app.add_subcommand("analyze-features", "Aligned morph feature cloud and confidence ellipse");
    auto* dflt = app.add_subcommand("print-default-config", "Print the default JSON config");
    add_common(gen, false);
    add_common(trn, false);
    add_common(sweep, false);
    add_common(adp, true);
    add_common(ev, true);
    add_common(feat, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (dflt->parsed()) {
            std::cout << morphguard::cmd_print_default_config();
            return 0;
        }

        morphguard::CommandOptions opts;
        if (!config_path.empty()) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(morphguard::read_file(config_path));
            } catch (const nlohmann::json::parse_error& e) {
                throw morphguard::ConfigError(config_path + ": " + e.what());
            }
            opts.config = morphguard::config_from_json(j);
        }
        for (auto* sub : app.get_subcommands())
            if (sub->count("--seed") > 0) opts.config.seed = seed;
        opts.config.validate();
        opts.out = out_dir;
        if (!checkpoint.empty()) opts.checkpoint = checkpoint;
        if (!data_dir.empty()) opts.data_dir = data_dir;
        opts.parallel = parallel;

        if (gen->parsed()) morphguard::cmd_gen_data(opts);
        if (trn->parsed()) morphguard::cmd_train(opts);
        if (sweep->parsed()) morphguard::cmd_sweep_margins(opts);
        if (adp->parsed()) morphguard::cmd_adapt(opts);
        if (ev->parsed()) morphguard::cmd_eval(opts);
        if (feat->parsed()) morphguard::cmd_analyze_features(opts);
    } catch (const morphguard::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    }
    return 0;
}
