#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ris_sense/channel.hpp"
#include "ris_sense/image.hpp"
#include "ris_sense/spectrogram.hpp"

namespace ris::data {

enum class Recipe { Measured, Synthetic, MixedMeasured, MixedSynthetic };
enum class Provenance { Measured, Augmented, NoisyAugmented };
enum class Split { Train, Test };

std::string recipe_name(Recipe r);
Recipe recipe_from_name(const std::string& name);  // ParameterError if unknown
const std::vector<Recipe>& all_recipes();
std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);
std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// Entry count of each recipe: 72 / 720 / 144 / 725.
std::size_t recipe_size(Recipe r);

struct Entry {
    std::string path;  // relative to the manifest
    int label = 0;
    Provenance provenance = Provenance::Measured;
    Split split = Split::Train;
    double source_angle_deg = 0.0;
    std::uint64_t seed = 0;  // seed of the augmentation/noise draw; 0 for measured
};

/// Source identity used for leakage checks: (label, source angle).
std::pair<int, long> source_key(const Entry& e);

struct Manifest {
    Recipe recipe = Recipe::Measured;
    std::string environment;
    std::uint64_t seed = 0;
    std::vector<Entry> entries;

    std::size_t count(Split s) const;
    std::vector<std::size_t> class_counts() const;
    /// Number of source images that feed both splits (0 when leak-free).
    std::size_t leaked_sources() const;
};

/// A manifest together with its decoded images (same order as entries).
struct Dataset {
    Manifest manifest;
    std::vector<img::Image> images;

    std::vector<std::size_t> indices(Split s) const;
};

struct RecipeOptions {
    img::StftConfig stft;
    sim::Window cir_window = sim::Window::Hann;
    double test_fraction = 0.2;
};

/// Measured images per class of a recipe (24 / 0 / 32 / 24) and derived
/// (augmented or noisy) images per recipe (0 / 720 / 48 / 653).
std::size_t measured_per_class(Recipe r);
std::size_t derived_total(Recipe r);

/// Builds a recipe from a campaign of one environment. Train/test split is
/// assigned per source image before any augmentation, stratified by label.
/// Throws CapacityError when the campaign has too few angles per scenario.
Dataset build_recipe(Recipe recipe, const std::vector<sim::ChannelSweep>& campaign, std::uint64_t seed,
                     const RecipeOptions& opts = {});

/// Convenience: simulate the environment's campaign, then build the recipe.
Dataset build_recipe(Recipe recipe, const sim::EnvironmentProfile& env, const sim::SweepConfig& cfg,
                     std::uint64_t seed, const RecipeOptions& opts = {});

/// Keeps at most cap train and cap test entries (0 = keep all), drawing
/// classes round-robin within each split and preserving entry order.
Dataset subsample(const Dataset& ds, std::size_t cap);

/// Writes images/<index>.png and manifest.json under dir; returns the manifest path.
std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Manifest read_manifest(const std::filesystem::path& manifest_path);
/// Reads the manifest and decodes every image. IngestionError names an
/// unreadable image.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace ris::data
