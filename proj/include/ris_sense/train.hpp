#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ris_sense/dataset.hpp"
#include "ris_sense/model.hpp"

namespace ris::train {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

/// Zero moments shaped like params.
AdamState adam_init(const std::vector<Tensor*>& params);

/// One bias-corrected Adam update at step t >= 1:
///   p -= lr * m_hat / (sqrt(v_hat) + eps)
/// Throws ShapeError if params, grads and state disagree; RangeError if t < 1.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, long t,
               const AdamConfig& cfg);

struct TrainConfig {
    int epochs = 30;
    std::size_t batch_size = 16;
    AdamConfig adam;
    std::uint64_t seed = 0;
    bool shuffle = true;

    /// Throws ParameterError unless epochs >= 1 and batch_size >= 2.
    void validate() const;
    nlohmann::json to_json() const;
};

struct EvalReport {
    std::string recipe;
    std::string environment;
    double accuracy = 0.0;
    std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
    std::array<double, 3> precision{};
    std::array<double, 3> recall{};
    double runtime_s = 0.0;
    std::uint64_t seed = 0;
    std::size_t train_n = 0;
    std::size_t test_n = 0;

    std::size_t total() const;
    nlohmann::json to_json(bool with_runtime = true) const;
};

/// Confusion, accuracy and per-class precision/recall from label pairs.
/// Precision of a never-predicted class is reported as 0.
EvalReport score_predictions(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Argmax class of each row of a [N, 3] probability/logit tensor.
std::vector<int> argmax_rows(const Tensor& scores);

/// Eval-mode predictions for the given dataset entries, in batches.
std::vector<int> predict_labels(const nn::CcnnModel& model, const data::Dataset& ds,
                                const std::vector<std::size_t>& indices, std::size_t batch_size = 16);

/// Scores the model on one split. Never mutates the model. Throws
/// EmptySplitError when the split has no entries.
EvalReport evaluate(const nn::CcnnModel& model, const data::Dataset& ds, data::Split split = data::Split::Test);

struct TrainResult {
    nn::CcnnModel model;
    std::vector<double> loss_curve;  // mean training loss per epoch
    EvalReport report;               // test split, eval mode
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Trains the model on the train split with Adam and softmax cross-entropy,
/// then evaluates on the test split. Shuffle order and dropout masks derive
/// from cfg.seed, so equal inputs give bit-identical results. A trailing
/// batch of one sample is merged into the previous batch (BatchNorm needs
/// at least two).
TrainResult train(nn::CcnnModel model, const data::Dataset& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// As above with a fresh Glorot-initialised model drawn from cfg.seed.
TrainResult train(const data::Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {},
                  nn::Architecture arch = nn::Architecture::standard());

/// Batch boundaries for n samples: [start, end) pairs.
std::vector<std::pair<std::size_t, std::size_t>> make_batches(std::size_t n, std::size_t batch_size);

// ---------------------------------------------------------------------------
// Experiment grid: 3 environments x 4 recipes.

/// Published reference accuracies (percent) for the CNN and VGG-16 columns.
struct ReferenceAccuracy {
    double cnn = 0.0;
    double vgg16 = 0.0;
};
ReferenceAccuracy paper_reference(data::Recipe recipe, const std::string& environment);

struct GridConfig {
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    TrainConfig train;  // seed field is ignored; each cell derives its own
    sim::SweepConfig sweep;
    std::vector<std::string> environments{"chamber", "meeting", "hflab"};
    std::vector<data::Recipe> recipes{data::all_recipes()};
    /// Desk-scale knob: at most this many train and this many test images per
    /// cell (0 = no cap).
    std::size_t sample_cap = 0;
    /// Write wall-clock runtimes into CSV/JSON (makes outputs non-reproducible).
    bool record_runtime = false;
    bool save_checkpoints = true;
};

struct GridCell {
    std::string environment;
    data::Recipe recipe = data::Recipe::Measured;
    std::size_t set_size = 0;
    bool ok = false;
    std::string error;
    EvalReport report;
    std::vector<double> loss_curve;
};

using CellCallback = std::function<void(const GridCell&)>;

/// Runs every (environment, recipe) cell; a failing cell is recorded and the
/// grid continues. Writes grid.csv, grid.json, grid.svg and cells/*.ccnn.
std::vector<GridCell> run_grid(const GridConfig& cfg, const CellCallback& on_cell = {});

std::string grid_csv(const std::vector<GridCell>& cells, bool with_runtime);
nlohmann::json grid_json(const std::vector<GridCell>& cells, bool with_runtime);
std::string grid_svg(const std::vector<GridCell>& cells);

}  // namespace ris::train
