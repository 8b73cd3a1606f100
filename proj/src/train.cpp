#include "ris_sense/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ris_sense/checkpoint.hpp"
#include "ris_sense/errors.hpp"

namespace ris::train {

namespace {

constexpr std::uint64_t kInitKey = 0x1A;
constexpr std::uint64_t kShuffleKey = 0x5F;
constexpr std::uint64_t kDropoutKey = 0xD0;
constexpr std::uint64_t kGridCampaignKey = 0xCA;
constexpr std::uint64_t kGridDataKey = 0xDA;
constexpr std::uint64_t kGridTrainKey = 0x7A;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Tensor batch_tensor(const data::Dataset& ds, const std::vector<std::size_t>& order, std::size_t begin,
                    std::size_t end) {
    std::vector<const img::Image*> images;
    for (std::size_t i = begin; i < end; ++i) images.push_back(&ds.images[order[i]]);
    return img::images_to_tensor(images);
}

std::size_t environment_index(const std::string& env) {
    const auto& names = sim::EnvironmentProfile::names();
    const auto it = std::find(names.begin(), names.end(), env);
    if (it == names.end()) throw ParameterError("unknown environment '" + env + "'");
    return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

AdamState adam_init(const std::vector<Tensor*>& params) {
    AdamState s;
    for (const auto* p : params) {
        s.m.emplace_back(p->shape(), 0.0);
        s.v.emplace_back(p->shape(), 0.0);
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, long t,
               const AdamConfig& cfg) {
    if (t < 1) throw RangeError("adam_step: step index must be >= 1");
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], grads[i], "adam_step");
        require_same_shape(*params[i], state.m[i], "adam_step");
        require_same_shape(*params[i], state.v[i], "adam_step");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i]->raw();
        const double* g = grads[i].raw();
        double* m = state.m[i].raw();
        double* v = state.v[i].raw();
        for (std::size_t k = 0; k < params[i]->size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            if (cfg.lr == 0.0) continue;
            p[k] -= cfg.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
        }
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ParameterError("train: epochs must be >= 1");
    if (batch_size < 2) throw ParameterError("train: batch_size must be >= 2 (BatchNorm needs more than one sample)");
    if (!(adam.lr >= 0.0) || !(adam.eps > 0.0)) throw ParameterError("train: invalid optimizer settings");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"optimizer", {{"name", "adam"}, {"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
            {"seed", seed},
            {"shuffle", shuffle}};
}

// ---------------------------------------------------------------------------

std::size_t EvalReport::total() const {
    std::size_t n = 0;
    for (const auto& row : confusion) {
        for (auto v : row) n += v;
    }
    return n;
}

nlohmann::json EvalReport::to_json(bool with_runtime) const {
    nlohmann::json j = {{"recipe", recipe},
                        {"environment", environment},
                        {"accuracy", accuracy},
                        {"confusion", confusion},
                        {"precision", precision},
                        {"recall", recall},
                        {"class_order", {nn::class_name(0), nn::class_name(1), nn::class_name(2)}},
                        {"seed", seed},
                        {"train_n", train_n},
                        {"test_n", test_n}};
    if (with_runtime) j["runtime_s"] = runtime_s;
    return j;
}

EvalReport score_predictions(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) throw ShapeError("score_predictions: label and prediction counts differ");
    if (truth.empty()) throw EmptySplitError("score_predictions: nothing to score");
    EvalReport r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= nn::kNumClasses || predicted[i] < 0 || predicted[i] >= nn::kNumClasses) {
            throw LabelError("score_predictions: label outside [0, 3)");
        }
        r.confusion[truth[i]][predicted[i]] += 1;
    }
    std::size_t trace = 0;
    for (int c = 0; c < nn::kNumClasses; ++c) {
        trace += r.confusion[c][c];
        std::size_t row = 0, col = 0;
        for (int k = 0; k < nn::kNumClasses; ++k) {
            row += r.confusion[c][k];
            col += r.confusion[k][c];
        }
        r.recall[c] = row ? static_cast<double>(r.confusion[c][c]) / row : 0.0;
        r.precision[c] = col ? static_cast<double>(r.confusion[c][c]) / col : 0.0;
    }
    r.accuracy = static_cast<double>(trace) / static_cast<double>(truth.size());
    r.test_n = truth.size();
    return r;
}

std::vector<int> argmax_rows(const Tensor& scores) {
    if (scores.rank() != 2) throw ShapeError("argmax_rows: expected [N, C]");
    std::vector<int> out;
    const std::size_t cols = scores.dim(1);
    for (std::size_t i = 0; i < scores.dim(0); ++i) {
        const double* row = scores.raw() + i * cols;
        out.push_back(static_cast<int>(std::max_element(row, row + cols) - row));
    }
    return out;
}

std::vector<int> predict_labels(const nn::CcnnModel& model, const data::Dataset& ds,
                                const std::vector<std::size_t>& indices, std::size_t batch_size) {
    std::vector<int> out;
    for (std::size_t b = 0; b < indices.size(); b += batch_size) {
        const auto x = batch_tensor(ds, indices, b, std::min(b + batch_size, indices.size()));
        const auto labels = argmax_rows(model.predict(x));
        out.insert(out.end(), labels.begin(), labels.end());
    }
    return out;
}

EvalReport evaluate(const nn::CcnnModel& model, const data::Dataset& ds, data::Split split) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto idx = ds.indices(split);
    if (idx.empty()) throw EmptySplitError("evaluate: the " + data::split_name(split) + " split is empty");
    std::vector<int> truth;
    for (auto i : idx) truth.push_back(ds.manifest.entries[i].label);
    auto r = score_predictions(truth, predict_labels(model, ds, idx));
    r.recipe = data::recipe_name(ds.manifest.recipe);
    r.environment = ds.manifest.environment;
    r.train_n = ds.manifest.count(data::Split::Train);
    r.test_n = ds.manifest.count(data::Split::Test);
    r.seed = ds.manifest.seed;
    r.runtime_s = seconds_since(t0);
    return r;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t b = 0; b < n; b += batch_size) out.emplace_back(b, std::min(b + batch_size, n));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out.pop_back();
        out.back().second = n;
    }
    return out;
}

TrainResult train(nn::CcnnModel model, const data::Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto train_idx = ds.indices(data::Split::Train);
    if (train_idx.size() < 2) throw EmptySplitError("train: the train split needs at least two images");

    model.set_mode(nn::Mode::Train);
    auto state = adam_init(model.parameters());
    TrainResult result{model, {}, {}};
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        if (cfg.shuffle) {
            Rng rng(derive_seed(cfg.seed, {kShuffleKey, static_cast<std::uint64_t>(epoch)}));
            const auto perm = shuffled_indices(rng, order.size());
            for (std::size_t i = 0; i < perm.size(); ++i) order[i] = train_idx[perm[i]];
        }
        double loss_sum = 0.0;
        const auto batches = make_batches(order.size(), cfg.batch_size);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto [begin, end] = batches[b];
            const auto x = batch_tensor(ds, order, begin, end);
            std::vector<int> labels;
            for (std::size_t i = begin; i < end; ++i) labels.push_back(ds.manifest.entries[order[i]].label);
            Rng dropout_rng(derive_seed(cfg.seed, {kDropoutKey, static_cast<std::uint64_t>(epoch), b}));
            const auto cache = model.forward_train(x, dropout_rng);
            const auto loss = nn::softmax_cross_entropy(cache.logits, labels);
            if (!std::isfinite(loss.loss)) throw NumericError("train: loss became non-finite");
            const auto grads = model.backward(cache, loss.grad_logits);
            adam_step(model.parameters(), grads.tensors, state, ++step, cfg.adam);
            loss_sum += loss.loss * static_cast<double>(end - begin);
        }
        const double mean_loss = loss_sum / static_cast<double>(order.size());
        result.loss_curve.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch + 1, mean_loss);
    }
    model.set_mode(nn::Mode::Eval);
    result.report = evaluate(model, ds, data::Split::Test);
    result.report.seed = cfg.seed;
    result.report.runtime_s = seconds_since(t0);
    result.model = std::move(model);
    return result;
}

TrainResult train(const data::Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch,
                  nn::Architecture arch) {
    Rng rng(derive_seed(cfg.seed, {kInitKey}));
    return train(nn::model_init(rng, arch), ds, cfg, on_epoch);
}

// ---------------------------------------------------------------------------

ReferenceAccuracy paper_reference(data::Recipe recipe, const std::string& environment) {
    // Rows: recipe. Columns: meeting, hflab, chamber.
    static const std::map<data::Recipe, std::array<ReferenceAccuracy, 3>> table{
        {data::Recipe::Measured, {{{95.0, 71.0}, {86.0, 29.0}, {99.9, 64.0}}}},
        {data::Recipe::Synthetic, {{{93.0, 50.0}, {92.0, 38.0}, {94.0, 51.2}}}},
        {data::Recipe::MixedMeasured, {{{94.0, 86.0}, {93.0, 75.0}, {94.0, 86.0}}}},
        {data::Recipe::MixedSynthetic, {{{88.0, 88.0}, {86.0, 85.5}, {88.0, 88.0}}}},
    };
    const auto& row = table.at(recipe);
    if (environment == "meeting") return row[0];
    if (environment == "hflab") return row[1];
    if (environment == "chamber") return row[2];
    throw ParameterError("no reference value for environment '" + environment + "'");
}

std::string grid_csv(const std::vector<GridCell>& cells, bool with_runtime) {
    std::ostringstream os;
    os << "recipe,environment,set_size,train_n,test_n,accuracy,paper_reference_cnn,paper_reference_vgg16,runtime_s,"
          "seed,status\n";
    for (const auto& c : cells) {
        const auto ref = paper_reference(c.recipe, c.environment);
        os << data::recipe_name(c.recipe) << ',' << c.environment << ',' << c.set_size << ',' << c.report.train_n << ','
           << c.report.test_n << ',' << (c.ok ? fixed(c.report.accuracy, 4) : "") << ',' << fixed(ref.cnn, 1) << ','
           << fixed(ref.vgg16, 1) << ',' << (with_runtime ? fixed(c.report.runtime_s, 2) : "") << ','
           << c.report.seed << ',' << (c.ok ? "ok" : "failed") << '\n';
    }
    return os.str();
}

nlohmann::json grid_json(const std::vector<GridCell>& cells, bool with_runtime) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cells) {
        auto j = c.report.to_json(with_runtime);
        j["recipe"] = data::recipe_name(c.recipe);
        j["environment"] = c.environment;
        j["set_size"] = c.set_size;
        j["status"] = c.ok ? "ok" : "failed";
        if (!c.ok) {
            j["error"] = c.error;
            j["accuracy"] = nullptr;
        }
        j["loss_curve"] = c.loss_curve;
        const auto ref = paper_reference(c.recipe, c.environment);
        j["paper_reference_cnn"] = ref.cnn;
        j["paper_reference_vgg16"] = ref.vgg16;
        out.push_back(std::move(j));
    }
    return out;
}

std::string grid_svg(const std::vector<GridCell>& cells) {
    const std::vector<std::string> colors{"#3b528b", "#21918c", "#5ec962", "#fde725"};
    std::vector<std::string> envs;
    std::vector<data::Recipe> recipes;
    for (const auto& c : cells) {
        if (std::find(envs.begin(), envs.end(), c.environment) == envs.end()) envs.push_back(c.environment);
        if (std::find(recipes.begin(), recipes.end(), c.recipe) == recipes.end()) recipes.push_back(c.recipe);
    }
    const double width = 760, height = 420, left = 60, right = 170, top = 40, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    const double group_w = envs.empty() ? plot_w : plot_w / static_cast<double>(envs.size());
    const double bar_w = recipes.empty() ? 0 : group_w * 0.8 / static_cast<double>(recipes.size());
    auto y_of = [&](double pct) { return top + plot_h * (1.0 - pct / 100.0); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<title>Test accuracy by environment and dataset recipe</title>\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
       << "Test accuracy by environment and dataset recipe</text>\n";
    for (int pct = 0; pct <= 100; pct += 20) {
        const double y = y_of(pct);
        os << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\"" << y
           << "\" stroke=\"#dddddd\"/>\n"
           << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << pct << "%</text>\n";
    }
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    for (std::size_t e = 0; e < envs.size(); ++e) {
        const double gx = left + group_w * static_cast<double>(e) + group_w * 0.1;
        for (std::size_t r = 0; r < recipes.size(); ++r) {
            const auto it = std::find_if(cells.begin(), cells.end(), [&](const GridCell& c) {
                return c.environment == envs[e] && c.recipe == recipes[r];
            });
            if (it == cells.end()) continue;
            const double x = gx + bar_w * static_cast<double>(r);
            if (it->ok) {
                const double pct = 100.0 * it->report.accuracy;
                os << "<rect x=\"" << x << "\" y=\"" << y_of(pct) << "\" width=\"" << bar_w * 0.9 << "\" height=\""
                   << top + plot_h - y_of(pct) << "\" fill=\"" << colors[r % colors.size()] << "\"><title>"
                   << envs[e] << " / " << data::recipe_name(recipes[r]) << ": " << fixed(pct, 1)
                   << "%</title></rect>\n";
            } else {
                os << "<text x=\"" << x + bar_w * 0.45 << "\" y=\"" << top + plot_h - 4
                   << "\" text-anchor=\"middle\" fill=\"red\">failed</text>\n";
            }
            const double ref = paper_reference(recipes[r], envs[e]).cnn;
            os << "<line class=\"paper_reference\" x1=\"" << x << "\" y1=\"" << y_of(ref) << "\" x2=\""
               << x + bar_w * 0.9 << "\" y2=\"" << y_of(ref) << "\" stroke=\"black\" stroke-width=\"2\" "
               << "stroke-dasharray=\"4 2\"><title>paper_reference CNN " << fixed(ref, 1) << "%</title></line>\n";
        }
        os << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << top + plot_h + 20 << "\" text-anchor=\"middle\">"
           << envs[e] << "</text>\n";
    }
    const double lx = left + plot_w + 20;
    for (std::size_t r = 0; r < recipes.size(); ++r) {
        const double ly = top + 20.0 * static_cast<double>(r);
        os << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
           << colors[r % colors.size()] << "\"/>\n"
           << "<text x=\"" << lx + 18 << "\" y=\"" << ly + 10 << "\">" << data::recipe_name(recipes[r]) << "</text>\n";
    }
    const double ry = top + 20.0 * static_cast<double>(recipes.size()) + 10;
    os << "<line x1=\"" << lx << "\" y1=\"" << ry + 6 << "\" x2=\"" << lx + 12 << "\" y2=\"" << ry + 6
       << "\" stroke=\"black\" stroke-width=\"2\" stroke-dasharray=\"4 2\"/>\n"
       << "<text x=\"" << lx + 18 << "\" y=\"" << ry + 10 << "\">paper_reference (CNN)</text>\n"
       << "</svg>\n";
    return os.str();
}

std::vector<GridCell> run_grid(const GridConfig& cfg, const CellCallback& on_cell) {
    cfg.train.validate();
    cfg.sweep.validate();
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.save_checkpoints) std::filesystem::create_directories(cfg.out_dir / "cells");

    std::vector<GridCell> cells;
    for (const auto& env_name : cfg.environments) {
        std::vector<sim::ChannelSweep> campaign;
        std::string campaign_error;
        std::size_t e = 0;
        try {
            e = environment_index(env_name);
            campaign = sim::run_campaign(sim::EnvironmentProfile::from_name(env_name), cfg.sweep,
                                         derive_seed(cfg.seed, {kGridCampaignKey, e}));
        } catch (const std::exception& ex) {
            campaign_error = ex.what();
        }
        for (auto recipe : cfg.recipes) {
            GridCell cell;
            cell.environment = env_name;
            cell.recipe = recipe;
            cell.set_size = data::recipe_size(recipe);
            const auto r = static_cast<std::uint64_t>(recipe);
            cell.report.seed = derive_seed(cfg.seed, {kGridTrainKey, e, r});
            try {
                if (!campaign_error.empty()) throw Error(campaign_error);
                const auto full = data::build_recipe(recipe, campaign, derive_seed(cfg.seed, {kGridDataKey, e, r}));
                cell.set_size = full.manifest.entries.size();
                const auto ds = data::subsample(full, cfg.sample_cap);
                auto tc = cfg.train;
                tc.seed = cell.report.seed;
                auto result = train(ds, tc);
                cell.report = result.report;
                cell.loss_curve = result.loss_curve;
                cell.ok = true;
                if (cfg.save_checkpoints) {
                    nlohmann::json info = tc.to_json();
                    info["recipe"] = data::recipe_name(recipe);
                    info["environment"] = env_name;
                    info["loss_curve"] = result.loss_curve;
                    nn::save_checkpoint(result.model,
                                        cfg.out_dir / "cells" / (env_name + "_" + data::recipe_name(recipe) + ".ccnn"),
                                        tc.seed, info);
                }
            } catch (const std::exception& ex) {
                cell.ok = false;
                cell.error = ex.what();
            }
            cells.push_back(cell);
            if (on_cell) on_cell(cells.back());
        }
    }

    auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(cfg.out_dir / name, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + (cfg.out_dir / name).string());
    };
    write("grid.csv", grid_csv(cells, cfg.record_runtime));
    write("grid.json", grid_json(cells, cfg.record_runtime).dump(2) + "\n");
    write("grid.svg", grid_svg(cells));
    return cells;
}

}  // namespace ris::train
