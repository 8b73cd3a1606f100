// Acceptance suite: one PASS/FAIL line per primary criterion.
// Usage: acceptance [criterion ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ris_sense/channel.hpp"
#include "ris_sense/checkpoint.hpp"
#include "ris_sense/dataset.hpp"
#include "ris_sense/gradcheck.hpp"
#include "ris_sense/model.hpp"
#include "ris_sense/parallel.hpp"
#include "ris_sense/spectrogram.hpp"
#include "ris_sense/train.hpp"

using namespace ris;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ris_sense_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto entries = nn::run_gradcheck("all");
    const double elapsed = seconds_since(t0);
    double worst_layer = 0.0, worst_model = 0.0;
    bool ok = true;
    for (const auto& e : entries) {
        ok = ok && e.passed();
        double& worst = e.tolerance == nn::kModelGradTolerance ? worst_model : worst_layer;
        worst = std::max(worst, e.max_rel_error);
    }
    std::ostringstream d;
    d << entries.size() << " checks, worst layer " << fmt("%.2e", worst_layer) << " (tol 1e-6), worst model "
      << fmt("%.2e", worst_model) << " (tol 1e-5), " << fmt("%.1f", elapsed) << " s (limit 60)";
    return {ok && elapsed <= 60.0, d.str()};
}

Outcome shape_suite() {
    Rng rng(derive_seed(ris::cli::kDefaultSeed, {1}));
    auto model = nn::model_init(rng);
    model.set_mode(nn::Mode::Eval);
    const auto x = rng_uniform(rng, {1, 3, 224, 224}, 0.0, 1.0);
    std::vector<Shape> stages;
    const auto probs = model.predict_traced(x, stages);
    const std::vector<Shape> expected{{1, 32, 112, 112}, {1, 64, 56, 56}, {1, 128, 28, 28},
                                      {1, 100352},       {1, 256},        {1, 3}};
    std::string chain = "3x224x224";
    for (const auto& s : stages) {
        std::string part;
        for (std::size_t i = 1; i < s.size(); ++i) part += (i > 1 ? "x" : "") + std::to_string(s[i]);
        chain += " -> " + part;
    }
    return {stages == expected && probs.shape() == Shape{1, 3}, chain};
}

Outcome normalization_suite() {
    Rng rng(derive_seed(ris::cli::kDefaultSeed, {2}));
    auto model = nn::model_init(rng);
    model.set_mode(nn::Mode::Eval);
    std::size_t rows = 0;
    double worst = 0.0;
    bool in_simplex = true;
    while (rows < 1000) {
        const std::size_t b = std::min<std::size_t>(16, 1000 - rows);
        // Mix plain [0,1) inputs with larger-magnitude ones to stress the softmax.
        const double scale = (rows / 16) % 2 == 0 ? 1.0 : 25.0;
        const auto x = rng_uniform(rng, {b, 3, 224, 224}, -scale, scale);
        const auto p = model.predict(x);
        for (std::size_t i = 0; i < b; ++i) {
            double sum = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = p.at({i, c});
                in_simplex = in_simplex && std::isfinite(v) && v >= 0.0 && v <= 1.0;
                sum += v;
            }
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        rows += b;
    }
    return {in_simplex && worst <= 1e-9,
            std::to_string(rows) + " forward rows, max |sum - 1| = " + fmt("%.2e", worst) +
                (in_simplex ? ", all in simplex" : ", SIMPLEX VIOLATION")};
}

Outcome dataset_size_suite() {
    const auto dir = scratch("datasets");
    const auto env = sim::EnvironmentProfile::chamber();
    const auto campaign = sim::run_campaign(env, sim::SweepConfig{}, ris::cli::kDefaultSeed);
    bool ok = true;
    std::ostringstream d;
    for (auto recipe : data::all_recipes()) {
        const auto ds = data::build_recipe(recipe, campaign, ris::cli::kDefaultSeed);
        const auto path = data::write_dataset(ds, dir / data::recipe_name(recipe));
        const auto m = data::read_manifest(path);
        std::size_t measured = 0, derived = 0;
        for (const auto& e : m.entries) (e.provenance == data::Provenance::Measured ? measured : derived) += 1;
        const auto counts = m.class_counts();
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        bool cell = m.entries.size() == data::recipe_size(recipe) && m.leaked_sources() == 0 && *hi - *lo <= 1;
        if (recipe == data::Recipe::MixedMeasured) cell = cell && measured > derived;
        if (recipe == data::Recipe::MixedSynthetic) cell = cell && derived > measured;
        ok = ok && cell;
        d << data::recipe_name(recipe) << "=" << m.entries.size() << " (" << measured << "+" << derived
          << ", leaks " << m.leaked_sources() << ") ";
    }
    fs::remove_all(dir);
    return {ok, d.str() + "; expected 72/720/144/725, mixed_measured orig>noisy, mixed_synthetic noisy>orig"};
}

struct TrainingRun {
    std::vector<train::GridCell> cells;
    double seconds = 0.0;
};

const TrainingRun& measured_runs() {
    static TrainingRun run = [] {
        TrainingRun r;
        train::GridConfig cfg;
        cfg.out_dir = scratch("training");
        cfg.seed = ris::cli::kDefaultSeed;
        cfg.recipes = {data::Recipe::Measured};
        cfg.save_checkpoints = false;
        const auto t0 = Clock::now();
        r.cells = train::run_grid(cfg, [](const train::GridCell& c) {
            std::cout << "  .. " << c.environment << "/measured: "
                      << (c.ok ? fmt("%.4f", c.report.accuracy) : "failed: " + c.error) << " in "
                      << fmt("%.0f s", c.report.runtime_s) << std::endl;
        });
        r.seconds = seconds_since(t0);
        fs::remove_all(cfg.out_dir);
        return r;
    }();
    return run;
}

Outcome surrogate_training_suite() {
    const auto& run = measured_runs();
    auto find = [&](const std::string& env) -> const train::GridCell& {
        return *std::find_if(run.cells.begin(), run.cells.end(), [&](const auto& c) { return c.environment == env; });
    };
    const auto& chamber = find("chamber");
    const auto& meeting = find("meeting");
    const auto& hflab = find("hflab");
    const bool all_ok = chamber.ok && meeting.ok && hflab.ok;
    const double a_c = chamber.report.accuracy, a_m = meeting.report.accuracy, a_h = hflab.report.accuracy;
    bool loss_down = chamber.loss_curve.size() >= 5;
    for (std::size_t e = 1; e < 5 && loss_down; ++e) loss_down = chamber.loss_curve[e] < chamber.loss_curve[e - 1];
    const bool pass = all_ok && a_c >= 0.95 && chamber.report.runtime_s <= 600.0 && a_h >= 0.80 && a_c >= a_m &&
                      a_m >= a_h;
    std::ostringstream d;
    d << "chamber " << fmt("%.3f", a_c) << " (" << fmt("%.0f s", chamber.report.runtime_s) << ", need >=0.95, <=600 s)"
      << ", meeting " << fmt("%.3f", a_m) << ", hflab " << fmt("%.3f", a_h) << " (need >=0.80), ordering "
      << (a_c >= a_m && a_m >= a_h ? "holds" : "VIOLATED") << "; first-5-epoch loss strictly decreasing: "
      << (loss_down ? "yes" : "no");
    return {pass, d.str()};
}

Outcome determinism_suite() {
    // Desk-scale grid (1 epoch, at most 6 train + 6 test images per cell), run twice.
    auto run = [](const fs::path& dir) {
        train::GridConfig cfg;
        cfg.out_dir = dir;
        cfg.seed = 7;
        cfg.train.epochs = 1;
        cfg.train.batch_size = 3;
        cfg.sample_cap = 6;
        return train::run_grid(cfg);
    };
    const auto a_dir = scratch("grid_a"), b_dir = scratch("grid_b");
    const auto a = run(a_dir);
    const auto b = run(b_dir);
    const bool csv_same = slurp(a_dir / "grid.csv") == slurp(b_dir / "grid.csv");
    const bool json_same = slurp(a_dir / "grid.json") == slurp(b_dir / "grid.json");
    std::size_t rows = 0;
    {
        std::istringstream in(slurp(a_dir / "grid.csv"));
        for (std::string line; std::getline(in, line);) ++rows;
    }
    Rng rng(99);
    const auto probe = rng_uniform(rng, {2, 3, 224, 224}, 0.0, 1.0);
    double worst = 0.0;
    std::size_t compared = 0;
    bool all_ok = true;
    for (const auto& c : a) all_ok = all_ok && c.ok;
    for (const auto& entry : fs::directory_iterator(a_dir / "cells")) {
        const auto other = b_dir / "cells" / entry.path().filename();
        const auto ma = nn::load_checkpoint(entry.path());
        const auto mb = nn::load_checkpoint(other);
        const auto pa = ma.predict(probe), pb = mb.predict(probe);
        for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pb[i]));
        ++compared;
    }
    fs::remove_all(a_dir);
    fs::remove_all(b_dir);
    std::ostringstream d;
    d << "grid.csv " << (csv_same ? "identical" : "DIFFERS") << " (" << rows - 1 << " rows), grid.json "
      << (json_same ? "identical" : "DIFFERS") << ", " << compared << " checkpoint pairs, max probe diff "
      << fmt("%.1e", worst) << " (tol 1e-6)" << (all_ok ? "" : ", some cells failed");
    return {csv_same && json_same && rows == 13 && compared == 12 && worst <= 1e-6 && all_ok, d.str()};
}

Outcome physics_suite() {
    sim::SweepConfig cfg;
    const auto chamber = sim::EnvironmentProfile::chamber();

    // Direct-path CIR peak.
    const auto direct_cfg = cfg.direct_only();
    Rng rng(1);
    const auto sweep = sim::synthesize_sweep(chamber, sim::Scenario::los(), 0.0, direct_cfg, rng);
    const auto cir = sim::sweep_to_cir(sweep, sim::Window::Hann);
    std::size_t peak = 0;
    for (std::size_t i = 1; i < cir.size(); ++i) {
        if (std::abs(cir[i]) > std::abs(cir[peak])) peak = i;
    }
    const long expected = std::lround(cfg.direct_delay_s() * cfg.span_hz());
    const bool peak_ok = static_cast<long>(peak) == expected;

    // Blockage ordering of the direct path at every angle and frequency.
    bool order_ok = true;
    for (int a = 0; a < cfg.angle_count(); ++a) {
        const double angle = a * cfg.angle_step_deg;
        auto direct = [&](const sim::Scenario& s) {
            Rng r(2);
            return sim::synthesize_sweep(chamber, s, angle, direct_cfg, r);
        };
        const auto los = direct(sim::Scenario::los());
        const auto n75 = direct(sim::Scenario::nlos_75());
        const auto n100 = direct(sim::Scenario::nlos_100());
        for (std::size_t k = 0; k < los.h.size(); ++k) {
            order_ok = order_ok && std::abs(los.h[k]) >= std::abs(n75.h[k]) && std::abs(n75.h[k]) >= std::abs(n100.h[k]);
        }
    }

    // Parseval over a full campaign, rect window.
    double worst = 0.0;
    for (const auto& s : sim::run_campaign(sim::EnvironmentProfile::hflab(), cfg, ris::cli::kDefaultSeed)) {
        const auto c = sim::sweep_to_cir(s, sim::Window::Rect);
        double eh = 0.0, ec = 0.0;
        for (const auto& v : s.h) eh += std::norm(v);
        for (const auto& v : c) ec += std::norm(v);
        worst = std::max(worst, std::abs(eh / static_cast<double>(s.h.size()) - ec));
    }
    std::ostringstream d;
    d << "direct peak bin " << peak << " (expected round(tau*span) = " << expected << "), blockage ordering "
      << (order_ok ? "holds at all 72 angles x 401 freqs" : "VIOLATED") << ", Parseval max error "
      << fmt("%.1e", worst) << " (tol 1e-9)";
    return {peak_ok && order_ok && worst <= 1e-9, d.str()};
}

Outcome augmentation_suite() {
    const auto campaign = sim::run_campaign(sim::EnvironmentProfile::meeting(), sim::SweepConfig{}, ris::cli::kDefaultSeed);
    std::vector<img::Image> images;
    for (std::size_t i = 0; i < campaign.size(); i += 18) {
        images.push_back(img::cir_to_spectrogram(sim::sweep_to_cir(campaign[i], sim::Window::Hann)));
    }
    Rng rng(derive_seed(ris::cli::kDefaultSeed, {3}));
    bool flip_ok = true, hue_ok = true, neutral_ok = true, dims_ok = true;
    int worst_hue = 0, worst_neutral = 0;
    std::size_t outputs = 0;
    auto check_dims = [&](const img::Image& im) {
        dims_ok = dims_ok && im.height() == 224 && im.width() == 224 && im.bytes().size() == 224 * 224 * 3;
        ++outputs;
    };
    for (const auto& im : images) {
        const auto once = img::augment(im, {img::AugmentOp::hflip()}, rng);
        const auto twice = img::augment(once, {img::AugmentOp::hflip()}, rng);
        flip_ok = flip_ok && twice == im;
        const auto hue = img::augment(im, {img::AugmentOp::hue(360.0)}, rng);
        worst_hue = std::max(worst_hue, img::max_abs_diff(hue, im));
        const auto neutral = img::augment(
            im, {img::AugmentOp::brightness(1.0), img::AugmentOp::contrast(1.0), img::AugmentOp::saturation(1.0)}, rng);
        worst_neutral = std::max(worst_neutral, img::max_abs_diff(neutral, im));
        for (const auto* out : {&once, &twice, &hue, &neutral}) check_dims(*out);
        for (int k = 0; k < 10; ++k) {
            auto aug = img::augment(im, img::random_ops(rng), rng);
            check_dims(aug);
            check_dims(img::add_noise(aug, img::NoiseLevel::Heavy, rng));
        }
    }
    hue_ok = worst_hue <= 1;
    neutral_ok = worst_neutral <= 1;
    std::ostringstream d;
    d << images.size() << " spectrograms: hflip involution " << (flip_ok ? "bitwise" : "FAILED") << ", hue 360 max diff "
      << worst_hue << ", neutral max diff " << worst_neutral << ", " << outputs << " outputs "
      << (dims_ok ? "all 224x224x3" : "WRONG SIZE");
    return {flip_ok && hue_ok && neutral_ok && dims_ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> suites{
        {"gradient", gradient_suite},
        {"shape", shape_suite},
        {"normalization", normalization_suite},
        {"dataset-size", dataset_size_suite},
        {"physics", physics_suite},
        {"augmentation", augmentation_suite},
        {"determinism", determinism_suite},
        {"surrogate-training", surrogate_training_suite},
    };
    std::set<std::string> only(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, fn] : suites) {
        if (!only.empty() && !only.count(name)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << fmt("%.1f s", seconds_since(t0)) << "]  "
                  << o.detail << std::endl;
        failures += o.pass ? 0 : 1;
    }
    std::cout << (failures == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(failures) + " criterion(s) failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
