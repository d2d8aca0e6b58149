// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [path-to-morphguard-cli]
// Without the CLI path the command re-run check goes through the in-process
// command functions only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "model_util.hpp"
#include "morphguard/checkpoint.hpp"
#include "morphguard/commands.hpp"
#include "morphguard/datagen.hpp"
#include "morphguard/error.hpp"
#include "morphguard/featviz.hpp"
#include "morphguard/loss.hpp"
#include "morphguard/metrics.hpp"
#include "oracles.hpp"
#include "small_config.hpp"

using namespace morphguard;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- 1 -------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    std::size_t configs = 0, params = 0;
    double worst = 0.0;
    while (configs < 120) {
        const std::size_t input_dim = 2 + rng.below(7);  // 2..8
        const std::size_t d = 2 + rng.below(5);          // 2..6
        const std::size_t classes = 2 + rng.below(4);    // 2..5
        std::vector<std::size_t> hidden;
        for (std::size_t l = rng.below(3); l > 0; --l) hidden.push_back(2 + rng.below(7));
        const auto model = init_model(input_dim, hidden, d, classes, rng.next());
        const MarginConfig margin{rng.uniform(4.0, 64.0), rng.uniform(0.0, 0.6), rng.uniform(-0.3, 0.1)};
        const auto batch = testutil::random_batch(rng, 2 + rng.below(4), input_dim, classes);
        const bool has_morph = std::any_of(batch.begin(), batch.end(),
                                           [](const Sample& s) { return s.labels.kind == SampleKind::Morph; });
        const bool has_single = std::any_of(batch.begin(), batch.end(),
                                            [](const Sample& s) { return s.labels.kind != SampleKind::Morph; });
        if (!has_morph || !has_single || !testutil::away_from_clamp(model, batch, margin)) continue;
        const auto r = testutil::check_model_gradient(model, batch, margin);
        worst = std::max(worst, r.worst);
        params += r.parameters;
        ++configs;
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 30.0, std::to_string(configs) + " configs, " + std::to_string(params) +
                                             " parameters, worst relative error " + fmt(worst, 3) + ", " +
                                             fmt(secs, 3) + " s"};
}

// ---- 2 -------------------------------------------------------------------------

Outcome loss_reductions() {
    Rng rng(7);
    bool bitwise = true;
    for (int k = 0; k < 500; ++k) {
        const std::size_t classes = 2 + rng.below(6);
        CosineLogits c1, c2;
        for (std::size_t j = 0; j < classes; ++j) {
            c1.values.push_back(rng.uniform(-0.99, 0.99));
            c2.values.push_back(rng.uniform(-0.99, 0.99));
        }
        const int a = static_cast<int>(rng.below(classes));
        int b = static_cast<int>(rng.below(classes - 1));
        if (b >= a) ++b;
        const MarginConfig cfg{rng.uniform(1.0, 64.0), rng.uniform(0.0, 1.0), 0.0};
        const MorphGuardItem morph{&c1, &c2, {a, b, SampleKind::Morph}};
        const MorphGuardItem bona_a{&c1, &c1, {a, a, SampleKind::BonaFide}};
        const MorphGuardItem bona_b{&c2, &c2, {b, b, SampleKind::BonaFide}};
        const auto m = morphguard_loss(std::span(&morph, 1), cfg);
        const auto ra = morphguard_loss(std::span(&bona_a, 1), cfg);
        const auto rb = morphguard_loss(std::span(&bona_b, 1), cfg);
        bitwise = bitwise && sample_margin(SampleKind::Morph, cfg) == sample_margin(SampleKind::BonaFide, cfg);
        bitwise = bitwise && m.grad_head1[0] == ra.grad_head1[0] && m.grad_head2[0] == rb.grad_head2[0];
        bitwise = bitwise && m.loss == (ra.loss + rb.loss) / 2.0;
    }

    // m_BF = 0, bona fides only, both heads equal: loss = (2/N) sum softmax_ce(s cos).
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const std::size_t input_dim = 3 + rng.below(6), d = 2 + rng.below(5), classes = 2 + rng.below(5);
        const std::size_t hidden[] = {4 + rng.below(4)};
        auto model = init_model(input_dim, hidden, d, classes, rng.next());
        model.head2 = model.head1;
        std::vector<Sample> batch;
        for (std::size_t i = 1 + rng.below(8); i > 0; --i) {
            const int y = static_cast<int>(rng.below(classes));
            batch.push_back({testutil::random_input(rng, input_dim), {y, y, SampleKind::BonaFide}, {y}});
        }
        const double s = rng.uniform(1.0, 64.0);
        double loss = 0.0;
        try {
            loss = loss_and_gradient(model, std::span<const Sample>(batch), MarginConfig{s, 0.0, 0.3}).loss;
        } catch (const DegenerateEmbeddingError&) {
            --k;  // dead ReLU net, draw another model
            continue;
        }
        long double sum = 0.0L;
        for (const auto& smp : batch) {
            const Vec e = embed(model, smp.input);
            Vec z;
            for (std::size_t j = 0; j < classes; ++j) {
                const auto w = model.head1.row(j);
                z.push_back(s * dot(e, w) / norm2(w));
            }
            sum += oracle::softmax_ce(z, static_cast<std::size_t>(smp.labels.y_dot));
        }
        const double expected = static_cast<double>(2.0L * sum / static_cast<long double>(batch.size()));
        worst = std::max(worst, std::fabs(loss - expected));
    }
    return {bitwise && worst < 1e-12, std::string("m_MG = 0 margins ") + (bitwise ? "bitwise equal" : "DIFFER") +
                                          " over 500 morph/bona fide pairs; m_BF = 0 reduction max abs error " +
                                          fmt(worst, 3) + " over 200 batches"};
}

// ---- 3 -------------------------------------------------------------------------

double random_score(Rng& rng, bool coarse) {
    const double s = rng.uniform(-1.0, 1.0);
    return coarse ? std::round(s * 20.0) / 20.0 : s;
}

Outcome metric_oracles() {
    Rng rng(99);
    std::size_t instances = 0, mismatches = 0, checks = 0, unattainable = 0;
    const double targets[] = {0.01, 0.05, 0.2, 0.5};
    const double fmr_targets[] = {0.001, 0.1, 0.3};
    for (; instances < 1200; ++instances) {
        VerificationSet set;
        std::vector<MorphTrial> trials;
        const bool coarse = rng.below(2) == 0;
        for (std::size_t k = 1 + rng.below(30); k > 0; --k) set.genuine.push_back(random_score(rng, coarse));
        for (std::size_t k = 1 + rng.below(30); k > 0; --k) set.impostor.push_back(random_score(rng, coarse));
        for (std::size_t k = 1 + rng.below(13); k > 0; --k) {
            MorphTrial t{"m" + std::to_string(k), {}};
            for (std::size_t n = 2 + rng.below(2); n > 0; --n) t.subject_scores.push_back(random_score(rng, coarse));
            trials.push_back(t);
        }
        const auto expect = [&](bool ok) {
            ++checks;
            if (!ok) ++mismatches;
        };

        const Vec grid = oracle::grid(oracle::all_scores(trials, set));
        expect(candidate_thresholds(trials, set) == grid);
        for (double tau : grid) {
            expect(fnmr_at(set, tau) == oracle::fnmr(set.genuine, tau));
            expect(fmr_at(set, tau) == oracle::fmr(set.impostor, tau));
            expect(mmpmr(trials, tau) == oracle::mmpmr(trials, tau));
            expect(rmmr(mmpmr(trials, tau), fnmr_at(set, tau)) ==
                   oracle::mmpmr(trials, tau) + oracle::fnmr(set.genuine, tau));
        }
        const auto curves = fnmr_fmr_curves(set);
        for (std::size_t i = 0; i < curves.fnmr.thresholds.size(); ++i) {
            expect(curves.fnmr.values[i] == oracle::fnmr(set.genuine, curves.fnmr.thresholds[i]));
            expect(curves.fmr.values[i] == oracle::fmr(set.impostor, curves.fmr.thresholds[i]));
        }
        const auto rc = rmmr_curve(trials, set);
        for (std::size_t i = 0; i < grid.size(); ++i)
            expect(rc.values[i] == oracle::mmpmr(trials, grid[i]) + oracle::fnmr(set.genuine, grid[i]));
        const auto best = min_rmmr(trials, set);
        const auto ob = oracle::min_rmmr(trials, set);
        expect(best.value == ob.value && best.threshold == ob.threshold);

        for (double target : targets) {
            const auto op = oracle::operating_point(
                grid, [&](double tau) { return oracle::fnmr(set.genuine, tau); }, target, true);
            const Vec one{target};
            if (!op.found) {
                ++unattainable;
                bool threw = false;
                try {
                    mmpmr_at_fnmr(trials, set, one);
                } catch (const UnattainableOperatingPointError&) {
                    threw = true;
                }
                expect(threw);
                continue;
            }
            const auto r = mmpmr_at_fnmr(trials, set, one).at(0);
            expect(r.threshold == op.threshold && r.achieved_fnmr == op.achieved &&
                   r.mmpmr == oracle::mmpmr(trials, op.threshold));
        }
        Vec vgrid = set.genuine;
        vgrid.insert(vgrid.end(), set.impostor.begin(), set.impostor.end());
        vgrid = oracle::grid(vgrid);
        for (double target : fmr_targets) {
            const auto op = oracle::operating_point(
                vgrid, [&](double tau) { return oracle::fmr(set.impostor, tau); }, target, false);
            const Vec one{target};
            const auto r = fnmr_at_fmr(set, one).at(0);
            expect(op.found && r.threshold == op.threshold && r.achieved_fmr == op.achieved &&
                   r.fnmr == oracle::fnmr(set.genuine, op.threshold));
        }
    }

    double identity_err = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double m = rng.uniform(), f = rng.uniform();
        identity_err = std::max(identity_err, std::fabs(rmmr(m, f) - (1.0 + m - (1.0 - f))));
    }
    return {mismatches == 0 && identity_err <= 1e-15,
            std::to_string(instances) + " instances, " + std::to_string(checks) + " exact comparisons, " +
                std::to_string(mismatches) + " mismatches (" + std::to_string(unattainable) +
                " unattainable targets agreed); RMMR identity max error " + fmt(identity_err, 3)};
}

// ---- 4 -------------------------------------------------------------------------

Outcome protocol_soundness() {
    std::size_t sets = 0, morphs = 0, bad = 0;
    const auto scan = [&](const ExperimentData& d) {
        ++sets;
        for (const Sample& s : d.training_set) {
            if (s.labels.kind != SampleKind::Morph) continue;
            ++morphs;
            const auto sub_dot = d.universe.subset_of[static_cast<std::size_t>(s.labels.y_dot)];
            const auto sub_ddot = d.universe.subset_of[static_cast<std::size_t>(s.labels.y_ddot)];
            if (s.labels.y_dot == s.labels.y_ddot || sub_dot == sub_ddot || sub_dot != 1) ++bad;
        }
        for (const auto* p : {&d.train_protocol, &d.eval_protocol})
            for (const MorphPair& pair : p->pairs)
                if (d.universe.subset_of[static_cast<std::size_t>(pair.identity_a)] ==
                    d.universe.subset_of[static_cast<std::size_t>(pair.identity_b)])
                    ++bad;
    };
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExperimentConfig c;
        c.seed = seed;
        scan(generate_data(c));
        scan(generate_data(testutil::small_config(seed)));
    }

    const auto r = synth_identities(4, 2, 8, 0.1, 3);
    const auto p = pair_protocol(r.universe, r.bona_fides, 16, 4);
    std::vector<std::pair<std::size_t, std::size_t>> drawn;
    bool cross = true;
    for (const auto& pair : p.pairs) {
        drawn.emplace_back(pair.sample_a, pair.sample_b);
        cross = cross && r.universe.subset_of[static_cast<std::size_t>(pair.identity_a)] !=
                             r.universe.subset_of[static_cast<std::size_t>(pair.identity_b)];
    }
    std::sort(drawn.begin(), drawn.end());
    const bool distinct = std::adjacent_find(drawn.begin(), drawn.end()) == drawn.end();
    bool over_capacity = false;
    try {
        pair_protocol(r.universe, r.bona_fides, 17, 4);
    } catch (const CapacityError&) {
        over_capacity = true;
    }
    const bool exhaustive = drawn.size() == 16 && distinct && cross && over_capacity;
    return {bad == 0 && exhaustive, std::to_string(sets) + " training sets, " + std::to_string(morphs) +
                                        " morphs scanned, " + std::to_string(bad) + " violations; C = 4 x 2 samples: " +
                                        std::to_string(drawn.size()) + " distinct cross-subset pairs" +
                                        (over_capacity ? ", 17th rejected" : "")};
}

// ---- 5 -------------------------------------------------------------------------

Outcome ellipse_coverage() {
    Rng rng(5);
    std::vector<Point2> pts;
    for (int i = 0; i < 10000; ++i) pts.push_back({rng.normal(), rng.normal()});
    const auto e = confidence_ellipse(pts, 0.9);
    std::size_t inside = 0;
    for (const auto& p : pts) inside += e.contains(p) ? 1 : 0;
    const double frac = static_cast<double>(inside) / 10000.0;
    const double q = chi2_2dof_quantile(0.9);

    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Point2 p1{rng.uniform(-3, 3), rng.uniform(-3, 3)}, p2{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const auto t = fit_rigid(p1, p2);
        std::vector<Point2> cloud{p1, p2};
        for (int i = 0; i < 8; ++i) cloud.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3)});
        for (const auto& a : cloud)
            for (const auto& b : cloud) {
                const Point2 ta = t.apply(a), tb = t.apply(b);
                worst = std::max(worst, std::fabs(std::hypot(ta.x - tb.x, ta.y - tb.y) - std::hypot(a.x - b.x, a.y - b.y)));
            }
    }
    const bool ok = frac >= 0.87 && frac <= 0.93 && std::fabs(q - 4.6051702) < 1e-6 && worst < 1e-9;
    return {ok, "coverage " + fmt(frac) + ", q = " + fmt(q, 10) + ", rigid distance max error " + fmt(worst, 3)};
}

// ---- 6 / 7 ---------------------------------------------------------------------

struct Directional {
    Outcome margins;
    Outcome adaptation;
};

Directional directional() {
    const auto t0 = Clock::now();
    std::vector<double> rmmr_base, rmmr_mg, mmpmr_base, mmpmr_mg, stage1, stage2;
    std::ostringstream per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExperimentConfig c;
        c.seed = seed;
        c.margin_grid = {0.0, -0.1};
        const ExperimentData d = generate_data(c);
        const auto sweep = run_sweep(c, d, false);
        rmmr_base.push_back(sweep[0].report.rmmr_min.value);
        rmmr_mg.push_back(sweep[1].report.rmmr_min.value);
        mmpmr_base.push_back(sweep[0].report.mmpmr_points.at(0).mmpmr);
        mmpmr_mg.push_back(sweep[1].report.mmpmr_points.at(0).mmpmr);
        const auto a = run_adapt(c, d, std::nullopt);
        stage1.push_back(a.report1.rmmr_min.value);
        stage2.push_back(a.report2.rmmr_min.value);
        per_seed << "    seed " << seed << ": min-RMMR " << fmt(rmmr_base.back()) << " -> " << fmt(rmmr_mg.back())
                 << ", MMPMR@FNMR=0.01 " << fmt(mmpmr_base.back()) << " -> " << fmt(mmpmr_mg.back())
                 << ", adapt min-RMMR " << fmt(stage1.back()) << " -> " << fmt(stage2.back()) << "\n";
    }
    const double secs = seconds_since(t0);
    std::cout << "  per-seed results (m_MG 0 -> -0.1; stage 1 -> stage 2):\n" << per_seed.str();

    const double rb = median(rmmr_base), rm = median(rmmr_mg), mb = median(mmpmr_base), mm = median(mmpmr_mg);
    const double s1 = median(stage1), s2 = median(stage2);
    Directional out;
    out.margins = {rm < rb && mm < mb && secs < 600.0,
                   "median min-RMMR " + fmt(rb) + " (m_MG=0) vs " + fmt(rm) + " (m_MG=-0.1); median MMPMR@FNMR=0.01 " +
                       fmt(mb) + " vs " + fmt(mm) + "; " + fmt(secs, 3) + " s including adaptation runs"};
    out.adaptation = {s2 <= s1, "median min-RMMR stage 1 " + fmt(s1) + ", stage 2 " + fmt(s2)};
    return out;
}

// ---- 8 -------------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path()));
    std::sort(out.begin(), out.end());
    return out;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome reproducibility(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "morphguard_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto config = testutil::small_config(11);
    write_file(root / "config.json", config_to_json(config).dump(2) + "\n");

    std::size_t runs = 0, files = 0;
    std::vector<std::string> differing;

    // Shared inputs, produced once so both re-runs see the same paths.
    CommandOptions base;
    base.config = config;
    base.out = root / "inputs" / "data";
    cmd_gen_data(base);
    base.out = root / "inputs" / "train";
    cmd_train(base);
    const fs::path data = root / "inputs" / "data";
    const fs::path ckpt = root / "inputs" / "train" / "model.ckpt";

    struct Command {
        std::string name;
        bool data;
        bool checkpoint;
        std::function<void(const CommandOptions&)> run;
    };
    const std::vector<Command> commands{
        {"gen-data", false, false, cmd_gen_data},
        {"train", true, false, cmd_train},
        {"sweep-margins", true, false, cmd_sweep_margins},
        {"adapt", true, true, cmd_adapt},
        {"eval", true, true, cmd_eval},
        {"analyze-features", true, true, cmd_analyze_features},
    };
    for (const auto& cmd : commands) {
        std::vector<fs::path> outs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = root / (cmd.name + "_" + std::to_string(rep));
            if (!cli.empty()) {
                std::string line = quote(cli) + " " + cmd.name + " --config " + quote(root / "config.json") +
                                   " --seed 11 --out " + quote(out);
                if (cmd.data) line += " --data " + quote(data);
                if (cmd.checkpoint) line += " --checkpoint " + quote(ckpt);
                if (cmd.name == "sweep-margins" && rep == 1) line += " --parallel";
                if (std::system(line.c_str()) != 0) differing.push_back(cmd.name + " (exit status)");
            } else {
                CommandOptions o;
                o.config = config;
                o.out = out;
                if (cmd.data) o.data_dir = data;
                if (cmd.checkpoint) o.checkpoint = ckpt;
                o.parallel = cmd.name == "sweep-margins" && rep == 1;
                cmd.run(o);
            }
            outs.push_back(out);
            ++runs;
        }
        const auto a = snapshot(outs[0]), b = snapshot(outs[1]);
        files += a.size();
        if (a != b || a.empty()) differing.push_back(cmd.name);
    }
    {
        std::string first, second;
        if (!cli.empty()) {
            for (int rep = 0; rep < 2; ++rep) {
                const fs::path out = root / ("default_config_" + std::to_string(rep) + ".json");
                const std::string line = quote(cli) + " print-default-config > " + quote(out);
                if (std::system(line.c_str()) != 0) differing.push_back("print-default-config (exit status)");
                (rep == 0 ? first : second) = read_file(out);
            }
        } else {
            first = cmd_print_default_config();
            second = cmd_print_default_config();
        }
        runs += 2;
        if (first != second || first != cmd_print_default_config()) differing.push_back("print-default-config");
    }

    const DualHeadModel model = load_checkpoint(ckpt);
    const std::string bytes = read_file(ckpt);
    save_checkpoint(model, root / "copy.ckpt");
    const bool round_trip = load_checkpoint(root / "copy.ckpt") == model && read_file(root / "copy.ckpt") == bytes &&
                            encode_checkpoint(decode_checkpoint(bytes)) == bytes;
    fs::remove_all(root);

    std::string detail = std::to_string(runs) + " runs of 7 commands" + (cli.empty() ? " (in-process)" : " (CLI)") +
                         ", " + std::to_string(files) + " files compared";
    if (!differing.empty()) {
        detail += "; differing:";
        for (const auto& d : differing) detail += " " + d;
    }
    detail += round_trip ? "; checkpoint round trip bit exact" : "; checkpoint round trip FAILED";
    return {differing.empty() && round_trip, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    int failures = 0;
    const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    };

    report(1, "gradient suite", gradient_suite);
    report(2, "loss reductions", loss_reductions);
    report(3, "metric oracles", metric_oracles);
    report(4, "protocol soundness", protocol_soundness);
    report(5, "ellipse coverage and rigid alignment", ellipse_coverage);
    Directional dir;
    bool ran = false;
    const auto directional_once = [&]() -> Directional& {
        if (!ran) {
            dir = directional();
            ran = true;
        }
        return dir;
    };
    report(6, "margin balance direction", [&] { return directional_once().margins; });
    report(7, "adaptation direction", [&] { return directional_once().adaptation; });
    report(8, "reproducibility", [&] { return reproducibility(cli); });

    std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
