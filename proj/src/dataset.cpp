#include "ris_sense/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "ris_sense/errors.hpp"
#include "ris_sense/model.hpp"
#include "ris_sense/parallel.hpp"

namespace ris::data {

namespace {

constexpr std::uint64_t kSplitKey = 0x5B;
constexpr std::uint64_t kSyntheticSourceKey = 0x5C;
constexpr std::uint64_t kDerivedKey = 0xA6;

// Sweeps of one scenario, ordered by angle index.
using ClassSweeps = std::vector<const sim::ChannelSweep*>;

struct Source {
    const sim::ChannelSweep* sweep = nullptr;
    Split split = Split::Train;
};

std::size_t split_test_count(std::size_t n, double fraction) {
    auto t = static_cast<std::size_t>(std::lround(static_cast<double>(n) * fraction));
    if (n >= 2) t = std::clamp<std::size_t>(t, 1, n - 1);
    return t;
}

std::string image_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "images/%04zu.png", index);
    return buf;
}

}  // namespace

std::string recipe_name(Recipe r) {
    switch (r) {
        case Recipe::Measured: return "measured";
        case Recipe::Synthetic: return "synthetic";
        case Recipe::MixedMeasured: return "mixed_measured";
        case Recipe::MixedSynthetic: return "mixed_synthetic";
    }
    return "unknown";
}

Recipe recipe_from_name(const std::string& name) {
    for (auto r : all_recipes()) {
        if (recipe_name(r) == name) return r;
    }
    throw ParameterError("unknown recipe '" + name + "' (expected measured, synthetic, mixed_measured or mixed_synthetic)");
}

const std::vector<Recipe>& all_recipes() {
    static const std::vector<Recipe> r{Recipe::Measured, Recipe::Synthetic, Recipe::MixedMeasured,
                                       Recipe::MixedSynthetic};
    return r;
}

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Measured: return "measured";
        case Provenance::Augmented: return "augmented";
        case Provenance::NoisyAugmented: return "noisy-augmented";
    }
    return "unknown";
}

Provenance provenance_from_name(const std::string& name) {
    for (auto p : {Provenance::Measured, Provenance::Augmented, Provenance::NoisyAugmented}) {
        if (provenance_name(p) == name) return p;
    }
    throw ParameterError("unknown provenance '" + name + "'");
}

std::string split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "test") return Split::Test;
    throw ParameterError("unknown split '" + name + "'");
}

std::size_t measured_per_class(Recipe r) {
    switch (r) {
        case Recipe::Measured: return 24;
        case Recipe::Synthetic: return 0;
        case Recipe::MixedMeasured: return 32;
        case Recipe::MixedSynthetic: return 24;
    }
    return 0;
}

std::size_t derived_total(Recipe r) {
    switch (r) {
        case Recipe::Measured: return 0;
        case Recipe::Synthetic: return 720;
        case Recipe::MixedMeasured: return 48;
        case Recipe::MixedSynthetic: return 653;
    }
    return 0;
}

std::size_t recipe_size(Recipe r) { return 3 * measured_per_class(r) + derived_total(r); }

std::pair<int, long> source_key(const Entry& e) { return {e.label, std::lround(e.source_angle_deg * 1000.0)}; }

std::size_t Manifest::count(Split s) const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.split == s; }));
}

std::vector<std::size_t> Manifest::class_counts() const {
    std::vector<std::size_t> c(nn::kNumClasses, 0);
    for (const auto& e : entries) c.at(static_cast<std::size_t>(e.label)) += 1;
    return c;
}

std::size_t Manifest::leaked_sources() const {
    std::set<std::pair<int, long>> train, test;
    for (const auto& e : entries) (e.split == Split::Train ? train : test).insert(source_key(e));
    std::size_t n = 0;
    for (const auto& k : test) n += train.count(k);
    return n;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (manifest.entries[i].split == s) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------

Dataset build_recipe(Recipe recipe, const std::vector<sim::ChannelSweep>& campaign, std::uint64_t seed,
                     const RecipeOptions& opts) {
    if (campaign.empty()) throw CapacityError("build_recipe: campaign is empty");
    std::vector<ClassSweeps> by_class(nn::kNumClasses);
    for (const auto& s : campaign) by_class.at(static_cast<std::size_t>(s.meta.scenario)).push_back(&s);
    for (auto& c : by_class) {
        std::stable_sort(c.begin(), c.end(), [](auto* a, auto* b) { return a->meta.angle_index < b->meta.angle_index; });
    }

    const std::size_t per_class = measured_per_class(recipe);
    const std::size_t needed = std::max<std::size_t>(per_class, 2);
    for (std::size_t label = 0; label < by_class.size(); ++label) {
        if (by_class[label].size() < needed) {
            throw CapacityError("recipe " + recipe_name(recipe) + " needs " + std::to_string(needed) +
                                " angles per scenario, campaign has " + std::to_string(by_class[label].size()) +
                                " for class " + nn::class_name(static_cast<int>(label)));
        }
    }

    // Source images and their split, per class.
    std::vector<std::vector<Source>> sources(nn::kNumClasses);
    for (std::size_t label = 0; label < by_class.size(); ++label) {
        const auto& sweeps = by_class[label];
        const std::size_t angles = sweeps.size();
        auto& src = sources[label];
        if (recipe == Recipe::Synthetic) {
            Rng rng(derive_seed(seed, {kSyntheticSourceKey, label}));
            const auto order = shuffled_indices(rng, angles);
            src.push_back({sweeps[order[0]], Split::Train});
            src.push_back({sweeps[order[1]], Split::Test});
            continue;
        }
        for (std::size_t i = 0; i < per_class; ++i) src.push_back({sweeps[i * angles / per_class], Split::Train});
        Rng rng(derive_seed(seed, {kSplitKey, label}));
        const auto order = shuffled_indices(rng, per_class);
        const std::size_t n_test = split_test_count(per_class, opts.test_fraction);
        for (std::size_t i = 0; i < n_test; ++i) src[order[i]].split = Split::Test;
    }

    // Plan entries: measured sources first (class-major, angle order), then derived images.
    struct Plan {
        Entry entry;
        std::size_t label;
        std::size_t source;
    };
    std::vector<Plan> plan;
    if (recipe != Recipe::Synthetic) {
        for (std::size_t label = 0; label < sources.size(); ++label) {
            for (std::size_t i = 0; i < sources[label].size(); ++i) {
                const auto& s = sources[label][i];
                Entry e;
                e.label = static_cast<int>(label);
                e.provenance = Provenance::Measured;
                e.split = s.split;
                e.source_angle_deg = s.sweep->meta.angle_deg;
                plan.push_back({e, label, i});
            }
        }
    }
    const std::size_t derived = derived_total(recipe);
    const Provenance derived_kind = recipe == Recipe::Synthetic ? Provenance::Augmented : Provenance::NoisyAugmented;
    for (std::size_t label = 0; label < sources.size() && derived > 0; ++label) {
        const std::size_t n = derived / nn::kNumClasses + (label < derived % nn::kNumClasses ? 1 : 0);
        const std::size_t n_test = split_test_count(n, opts.test_fraction);
        std::vector<std::size_t> train_src, test_src;
        for (std::size_t i = 0; i < sources[label].size(); ++i) {
            (sources[label][i].split == Split::Train ? train_src : test_src).push_back(i);
        }
        for (std::size_t k = 0; k < n; ++k) {
            const bool test = k >= n - n_test;
            const auto& pool = test ? test_src : train_src;
            const std::size_t rank = test ? k - (n - n_test) : k;
            const std::size_t si = pool[rank % pool.size()];
            Entry e;
            e.label = static_cast<int>(label);
            e.provenance = derived_kind;
            e.split = test ? Split::Test : Split::Train;
            e.source_angle_deg = sources[label][si].sweep->meta.angle_deg;
            e.seed = derive_seed(seed, {kDerivedKey, label, k});
            plan.push_back({e, label, si});
        }
    }

    // Render each distinct source once, then every entry.
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    for (const auto& p : plan) keys.emplace_back(p.label, p.source);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<img::Image> rendered(keys.size());
    parallel_for(keys.size(), [&](std::size_t i) {
        const auto* sweep = sources[keys[i].first][keys[i].second].sweep;
        rendered[i] = img::cir_to_spectrogram(sim::sweep_to_cir(*sweep, opts.cir_window), opts.stft);
    });
    auto source_image = [&](const Plan& p) -> const img::Image& {
        const auto it = std::lower_bound(keys.begin(), keys.end(), std::make_pair(p.label, p.source));
        return rendered[static_cast<std::size_t>(it - keys.begin())];
    };

    Dataset ds;
    ds.manifest.recipe = recipe;
    ds.manifest.environment = campaign.front().meta.environment;
    ds.manifest.seed = seed;
    ds.images.resize(plan.size());
    parallel_for(plan.size(), [&](std::size_t i) {
        const auto& p = plan[i];
        const auto& src = source_image(p);
        if (p.entry.provenance == Provenance::Measured) {
            ds.images[i] = src;
            return;
        }
        Rng rng(p.entry.seed);
        auto im = img::augment(src, img::random_ops(rng), rng);
        if (recipe == Recipe::MixedMeasured) im = img::add_noise(im, img::NoiseLevel::Slight, rng);
        if (recipe == Recipe::MixedSynthetic) im = img::add_noise(im, img::NoiseLevel::Heavy, rng);
        ds.images[i] = std::move(im);
    });
    for (std::size_t i = 0; i < plan.size(); ++i) {
        plan[i].entry.path = image_name(i);
        ds.manifest.entries.push_back(plan[i].entry);
    }
    return ds;
}

Dataset build_recipe(Recipe recipe, const sim::EnvironmentProfile& env, const sim::SweepConfig& cfg,
                     std::uint64_t seed, const RecipeOptions& opts) {
    const auto campaign = sim::run_campaign(env, cfg, seed);
    return build_recipe(recipe, campaign, seed, opts);
}

Dataset subsample(const Dataset& ds, std::size_t cap) {
    if (cap == 0) return ds;
    std::vector<bool> keep(ds.manifest.entries.size(), false);
    for (auto split : {Split::Train, Split::Test}) {
        std::vector<std::vector<std::size_t>> per_class(nn::kNumClasses);
        for (auto i : ds.indices(split)) per_class[static_cast<std::size_t>(ds.manifest.entries[i].label)].push_back(i);
        std::size_t taken = 0;
        for (std::size_t round = 0; taken < cap; ++round) {
            bool any = false;
            for (auto& c : per_class) {
                if (round < c.size() && taken < cap) {
                    keep[c[round]] = true;
                    ++taken;
                    any = true;
                }
            }
            if (!any) break;
        }
    }
    Dataset out;
    out.manifest = ds.manifest;
    out.manifest.entries.clear();
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        out.manifest.entries.push_back(ds.manifest.entries[i]);
        out.images.push_back(ds.images[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    if (ds.images.size() != ds.manifest.entries.size()) throw ShapeError("write_dataset: image/entry count mismatch");
    std::filesystem::create_directories(dir / "images");
    parallel_for(ds.images.size(), [&](std::size_t i) { img::write_png(dir / ds.manifest.entries[i].path, ds.images[i]); });

    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : ds.manifest.entries) {
        entries.push_back({{"path", e.path},
                           {"label", e.label},
                           {"provenance", provenance_name(e.provenance)},
                           {"split", split_name(e.split)},
                           {"source_angle_deg", e.source_angle_deg},
                           {"seed", e.seed}});
    }
    const nlohmann::json doc = {{"recipe", recipe_name(ds.manifest.recipe)},
                                {"environment", ds.manifest.environment},
                                {"seed", ds.manifest.seed},
                                {"entries", entries}};
    const auto path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    out << doc.dump(1) << '\n';
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
    return path;
}

Manifest read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IngestionError("cannot open manifest " + manifest_path.string());
    Manifest m;
    try {
        const auto doc = nlohmann::json::parse(in);
        m.recipe = recipe_from_name(doc.at("recipe").get<std::string>());
        m.environment = doc.at("environment").get<std::string>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& j : doc.at("entries")) {
            Entry e;
            e.path = j.at("path").get<std::string>();
            e.label = j.at("label").get<int>();
            if (e.label < 0 || e.label >= nn::kNumClasses) throw LabelError("manifest label out of range: " + e.path);
            e.provenance = provenance_from_name(j.at("provenance").get<std::string>());
            e.split = split_from_name(j.at("split").get<std::string>());
            e.source_angle_deg = j.at("source_angle_deg").get<double>();
            e.seed = j.value("seed", std::uint64_t{0});
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    return m;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    Dataset ds;
    ds.manifest = read_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    ds.images.resize(ds.manifest.entries.size());
    parallel_for(ds.images.size(), [&](std::size_t i) {
        const auto path = root / ds.manifest.entries[i].path;
        auto im = img::read_png(path);
        if (im.height() != img::kImageSize || im.width() != img::kImageSize) {
            throw IngestionError("image " + path.string() + " is not 224x224");
        }
        ds.images[i] = std::move(im);
    });
    return ds;
}

}  // namespace ris::data
