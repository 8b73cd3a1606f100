#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>

#include "ris_sense/channel.hpp"
#include "ris_sense/checkpoint.hpp"
#include "ris_sense/dataset.hpp"
#include "ris_sense/errors.hpp"
#include "ris_sense/gradcheck.hpp"
#include "ris_sense/train.hpp"

namespace ris::cli {

namespace {

namespace fs = std::filesystem;

const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const ShapeError*>(&e)) return "ShapeError";
    if (dynamic_cast<const RangeError*>(&e)) return "RangeError";
    if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
    if (dynamic_cast<const ModeError*>(&e)) return "ModeError";
    if (dynamic_cast<const DegenerateBatchError*>(&e)) return "DegenerateBatchError";
    if (dynamic_cast<const CorruptCacheError*>(&e)) return "CorruptCacheError";
    if (dynamic_cast<const LabelError*>(&e)) return "LabelError";
    if (dynamic_cast<const ParameterError*>(&e)) return "ParameterError";
    if (dynamic_cast<const CapacityError*>(&e)) return "CapacityError";
    if (dynamic_cast<const IngestionError*>(&e)) return "IngestionError";
    if (dynamic_cast<const EmptySplitError*>(&e)) return "EmptySplitError";
    if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "RuntimeError";
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

void print_report(std::ostream& out, const train::EvalReport& r) {
    out << "accuracy: " << percent(r.accuracy) << " (" << r.confusion[0][0] + r.confusion[1][1] + r.confusion[2][2]
        << "/" << r.total() << ")\n";
    out << "confusion (rows = true, cols = predicted; " << nn::class_name(0) << ", " << nn::class_name(1) << ", "
        << nn::class_name(2) << "):\n";
    for (const auto& row : r.confusion) out << "  " << row[0] << ' ' << row[1] << ' ' << row[2] << '\n';
}

struct SimulateArgs {
    std::string env = "chamber";
    fs::path out;
    std::uint64_t seed = kDefaultSeed;
    int points = 401;
    double angle_step = 5.0;
    bool csv = false;
};

struct DatasetArgs {
    std::string recipe;
    std::string env = "chamber";
    fs::path campaign;
    fs::path out;
    std::uint64_t seed = kDefaultSeed;
};

struct TrainArgs {
    fs::path manifest;
    fs::path out;
    int epochs = 30;
    std::size_t batch = 16;
    double lr = 1e-3;
    std::uint64_t seed = kDefaultSeed;
    std::size_t sample_cap = 0;
};

struct EvalArgs {
    fs::path model;
    fs::path manifest;
    fs::path json;
    std::string split = "test";
};

struct GridArgs {
    fs::path out;
    std::uint64_t seed = kDefaultSeed;
    int epochs = 30;
    std::size_t batch = 16;
    double lr = 1e-3;
    std::size_t sample_cap = 0;
    bool record_runtime = false;
    std::vector<std::string> envs{"chamber", "meeting", "hflab"};
    std::vector<std::string> recipes{"measured", "synthetic", "mixed_measured", "mixed_synthetic"};
};

struct GradcheckArgs {
    std::string module = "all";
    std::uint64_t seed = 2024;
};

int do_simulate(const SimulateArgs& a, std::ostream& out) {
    out << "seed: " << a.seed << '\n';
    const auto env = sim::EnvironmentProfile::from_name(a.env);
    sim::SweepConfig cfg;
    cfg.n_points = a.points;
    cfg.angle_step_deg = a.angle_step;
    const auto sweeps = sim::run_campaign(env, cfg, a.seed);
    const auto files = sim::write_campaign(a.out, env, cfg, a.seed, sweeps, a.csv);
    out << "wrote " << files.size() << " sweeps (" << env.name << ", " << cfg.angle_count() << " angles x 3 scenarios) to "
        << a.out.string() << '\n';
    return 0;
}

int do_dataset(const DatasetArgs& a, std::ostream& out) {
    out << "seed: " << a.seed << '\n';
    const auto recipe = data::recipe_from_name(a.recipe);
    const auto env = sim::EnvironmentProfile::from_name(a.env);
    std::vector<sim::ChannelSweep> campaign;
    if (a.campaign.empty()) {
        campaign = sim::run_campaign(env, sim::SweepConfig{}, a.seed);
        out << "campaign: simulated in memory\n";
    } else {
        campaign = sim::read_campaign(a.campaign);
        if (!campaign.empty() && campaign.front().meta.environment != env.name) {
            throw ParameterError("campaign in " + a.campaign.string() + " is for environment '" +
                                 campaign.front().meta.environment + "', not '" + env.name + "'");
        }
        out << "campaign: " << a.campaign.string() << " (" << campaign.size() << " sweeps)\n";
    }
    const auto ds = data::build_recipe(recipe, campaign, a.seed);
    const auto manifest = data::write_dataset(ds, a.out);
    const auto counts = ds.manifest.class_counts();
    out << "recipe " << data::recipe_name(recipe) << ": " << ds.manifest.entries.size() << " images (train "
        << ds.manifest.count(data::Split::Train) << ", test " << ds.manifest.count(data::Split::Test) << "; classes "
        << counts[0] << '/' << counts[1] << '/' << counts[2] << ")\n";
    out << "manifest: " << manifest.string() << '\n';
    return 0;
}

int do_train(const TrainArgs& a, std::ostream& out) {
    out << "seed: " << a.seed << '\n';
    train::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.adam.lr = a.lr;
    cfg.seed = a.seed;
    cfg.validate();
    const auto ds = data::subsample(data::load_dataset(a.manifest), a.sample_cap);
    out << "training on " << ds.manifest.count(data::Split::Train) << " images, testing on "
        << ds.manifest.count(data::Split::Test) << " (" << data::recipe_name(ds.manifest.recipe) << ", "
        << ds.manifest.environment << ")\n";
    const auto t0 = std::chrono::steady_clock::now();
    auto result = train::train(ds, cfg, [&](int epoch, double loss) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char buf[96];
        std::snprintf(buf, sizeof buf, "epoch %3d  loss %.6f  (%.1fs)", epoch, loss, s);
        out << buf << std::endl;
    });
    print_report(out, result.report);
    nlohmann::json info = cfg.to_json();
    info["manifest"] = fs::absolute(a.manifest).string();
    info["recipe"] = data::recipe_name(ds.manifest.recipe);
    info["environment"] = ds.manifest.environment;
    info["loss_curve"] = result.loss_curve;
    info["test_accuracy"] = result.report.accuracy;
    nn::save_checkpoint(result.model, a.out, a.seed, info);
    out << "model: " << a.out.string() << '\n';
    return 0;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
    const auto info = nn::read_checkpoint_info(a.model);
    out << "seed: " << info.header.value("seed", std::uint64_t{0}) << '\n';
    const auto model = nn::load_checkpoint(a.model);
    const auto ds = data::load_dataset(a.manifest);
    auto report = train::evaluate(model, ds, data::split_from_name(a.split));
    report.seed = info.header.value("seed", std::uint64_t{0});
    print_report(out, report);
    if (!a.json.empty()) {
        std::ofstream f(a.json, std::ios::trunc);
        f << report.to_json(false).dump(2) << '\n';
        if (!f) throw FormatError(FormatError::Kind::Io, "cannot write " + a.json.string());
        out << "report: " << a.json.string() << '\n';
    }
    return 0;
}

int do_grid(const GridArgs& a, std::ostream& out) {
    out << "seed: " << a.seed << '\n';
    train::GridConfig cfg;
    cfg.out_dir = a.out;
    cfg.seed = a.seed;
    cfg.train.epochs = a.epochs;
    cfg.train.batch_size = a.batch;
    cfg.train.adam.lr = a.lr;
    cfg.sample_cap = a.sample_cap;
    cfg.record_runtime = a.record_runtime;
    cfg.environments = a.envs;
    cfg.recipes.clear();
    for (const auto& r : a.recipes) cfg.recipes.push_back(data::recipe_from_name(r));
    for (const auto& e : a.envs) sim::EnvironmentProfile::from_name(e);
    const auto cells = train::run_grid(cfg, [&](const train::GridCell& c) {
        out << c.environment << " / " << data::recipe_name(c.recipe) << ": "
            << (c.ok ? percent(c.report.accuracy) : "FAILED (" + c.error + ")") << std::endl;
    });
    const auto failed = std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok; });
    out << "wrote grid.csv, grid.json, grid.svg to " << a.out.string() << '\n';
    if (failed > 0) {
        out << failed << " cell(s) failed\n";
        return 2;
    }
    return 0;
}

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    out << "seed: " << a.seed << '\n';
    const auto entries = nn::run_gradcheck(a.module, a.seed);
    bool ok = true;
    for (const auto& e : entries) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-24s max_rel_error %.3e  tol %.0e  %s", e.name.c_str(), e.max_rel_error,
                      e.tolerance, e.passed() ? "ok" : "FAIL");
        out << buf << '\n';
        ok = ok && e.passed();
    }
    out << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
    return ok ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Indoor LOS/NLOS sensing: channel simulation, spectrogram datasets and CNN training"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Simulate a measurement campaign and write one sweep file per cell");
    simulate->add_option("--env", sim_args.env, "Environment: chamber, meeting or hflab")->required();
    simulate->add_option("--out", sim_args.out, "Output directory")->required();
    simulate->add_option("--seed", sim_args.seed, "Random seed");
    simulate->add_option("--points", sim_args.points, "Frequency points per sweep")->check(CLI::Range(16, 100000));
    simulate->add_option("--angle-step", sim_args.angle_step, "Turntable step in degrees (must divide 360)");
    simulate->add_flag("--csv", sim_args.csv, "Also write a CSV per sweep");

    DatasetArgs ds_args;
    auto* dataset = app.add_subcommand("dataset", "Dataset operations");
    dataset->require_subcommand(1);
    auto* build = dataset->add_subcommand("build", "Render spectrograms and write a recipe manifest");
    build->add_option("--recipe", ds_args.recipe, "measured, synthetic, mixed_measured or mixed_synthetic")->required();
    build->add_option("--env", ds_args.env, "Environment of the campaign")->required();
    build->add_option("--campaign", ds_args.campaign, "Campaign directory from 'simulate' (default: simulate in memory)");
    build->add_option("--out", ds_args.out, "Output directory")->required();
    build->add_option("--seed", ds_args.seed, "Random seed");

    TrainArgs tr_args;
    auto* train_cmd = app.add_subcommand("train", "Train the CNN on a manifest and save a checkpoint");
    train_cmd->add_option("--manifest", tr_args.manifest, "manifest.json")->required();
    train_cmd->add_option("--out", tr_args.out, "Checkpoint path (.ccnn)")->required();
    train_cmd->add_option("--epochs", tr_args.epochs, "Epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", tr_args.batch, "Batch size (>= 2)");
    train_cmd->add_option("--lr", tr_args.lr, "Adam learning rate");
    train_cmd->add_option("--seed", tr_args.seed, "Random seed");
    train_cmd->add_option("--sample-cap", tr_args.sample_cap, "Use at most N train and N test images (0 = all)");

    EvalArgs ev_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
    eval->add_option("--model", ev_args.model, "Checkpoint path")->required();
    eval->add_option("--manifest", ev_args.manifest, "manifest.json")->required();
    eval->add_option("--json", ev_args.json, "Write the report as JSON");
    eval->add_option("--split", ev_args.split, "train or test")->check(CLI::IsMember({"train", "test"}));

    GridArgs gr_args;
    auto* grid = app.add_subcommand("grid", "Train and evaluate every environment x recipe cell");
    grid->add_option("--out", gr_args.out, "Output directory")->required();
    grid->add_option("--seed", gr_args.seed, "Random seed");
    grid->add_option("--epochs", gr_args.epochs, "Epochs per cell")->check(CLI::PositiveNumber);
    grid->add_option("--batch", gr_args.batch, "Batch size (>= 2)");
    grid->add_option("--lr", gr_args.lr, "Adam learning rate");
    grid->add_option("--sample-cap", gr_args.sample_cap, "At most N train and N test images per cell (0 = all)");
    grid->add_flag("--record-runtime", gr_args.record_runtime, "Record wall-clock runtimes (output no longer reproducible)");
    grid->add_option("--env", gr_args.envs, "Environments to run")->delimiter(',');
    grid->add_option("--recipe", gr_args.recipes, "Recipes to run")->delimiter(',');

    GradcheckArgs gc_args;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    gradcheck->add_option("--module", gc_args.module, "all, conv, bn, relu, pool, linear, dropout, softmax or model");
    gradcheck->add_option("--seed", gc_args.seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? 0 : 1;
    }

    try {
        if (*simulate) return do_simulate(sim_args, out);
        if (*build) return do_dataset(ds_args, out);
        if (*train_cmd) return do_train(tr_args, out);
        if (*eval) return do_eval(ev_args, out);
        if (*grid) return do_grid(gr_args, out);
        if (*gradcheck) {
            const auto& mods = nn::gradcheck_modules();
            if (gc_args.module != "all" && std::find(mods.begin(), mods.end(), gc_args.module) == mods.end()) {
                err << "error: unknown --module '" << gc_args.module << "'\n";
                return 1;
            }
            return do_gradcheck(gc_args, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << error_kind(e) << ": " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace ris::cli
