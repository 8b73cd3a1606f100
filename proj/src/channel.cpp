#include "ris_sense/channel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "ris_sense/errors.hpp"

namespace ris::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kLayoutKey = 0xC1;
constexpr char kSweepMagic[4] = {'C', 'I', 'R', '1'};

double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

Complex path_term(double amplitude, double frequency, double delay, double phase) {
    return std::polar(amplitude, phase - 2.0 * kPi * frequency * delay);
}

}  // namespace

// ---------------------------------------------------------------------------

EnvironmentProfile EnvironmentProfile::chamber() { return {EnvironmentKind::Chamber, "chamber", 0, 0.0, 0.0, 0.0, {}}; }

// Meeting-room reflections stay well below even the 1.00 m-blocked direct
// path (-20 dB); the lab's strongest ones approach the 0.75 m-blocked one.
EnvironmentProfile EnvironmentProfile::meeting() {
    return {EnvironmentKind::Meeting, "meeting", 6, -36.0, -28.0, 10.0, {}};
}

EnvironmentProfile EnvironmentProfile::hflab() {
    return {EnvironmentKind::HfLab, "hflab", 24, -20.0, -12.0, 40.0, {}};
}

const std::vector<std::string>& EnvironmentProfile::names() {
    static const std::vector<std::string> n{"chamber", "meeting", "hflab"};
    return n;
}

EnvironmentProfile EnvironmentProfile::from_name(const std::string& name) {
    if (name == "chamber") return chamber();
    if (name == "meeting") return meeting();
    if (name == "hflab") return hflab();
    throw ParameterError("unknown environment '" + name + "' (expected chamber, meeting or hflab)");
}

Scenario Scenario::los() { return {ScenarioKind::Los, 0.0, 0.0}; }
Scenario Scenario::nlos_100() { return {ScenarioKind::Nlos100, 1.00, 5.0}; }
Scenario Scenario::nlos_75() { return {ScenarioKind::Nlos75, 0.75, 5.0}; }

const std::vector<Scenario>& Scenario::all() {
    static const std::vector<Scenario> s{los(), nlos_100(), nlos_75()};
    return s;
}

Scenario Scenario::from_name(const std::string& name) {
    for (const auto& s : all()) {
        if (s.name() == name) return s;
    }
    throw ParameterError("unknown scenario '" + name + "'");
}

std::string Scenario::name() const {
    switch (kind) {
        case ScenarioKind::Los: return "los";
        case ScenarioKind::Nlos100: return "nlos100";
        case ScenarioKind::Nlos75: return "nlos75";
    }
    return "unknown";
}

double Scenario::blockage_loss_db() const { return 20.0 * plate_side_m * plate_side_m; }

// ---------------------------------------------------------------------------

void SweepConfig::validate() const {
    if (!(f_start_hz < f_stop_hz)) throw ParameterError("sweep: f_start must be below f_stop");
    if (n_points < 16) throw ParameterError("sweep: n_points must be at least 16");
    if (!(angle_step_deg > 0.0) || angle_step_deg > 360.0) throw ParameterError("sweep: angle step must be in (0, 360]");
    const double steps = 360.0 / angle_step_deg;
    if (std::abs(steps - std::round(steps)) > 1e-9) {
        throw ParameterError("sweep: 360 / angle_step must be an integer");
    }
    if (!(tx_rx_distance_m > 0.0)) throw ParameterError("sweep: tx-rx distance must be positive");
    if (!(beamwidth_deg > 0.0) || pattern_floor < 0.0 || pattern_floor > 1.0) {
        throw ParameterError("sweep: invalid receive pattern");
    }
}

int SweepConfig::angle_count() const { return static_cast<int>(std::lround(360.0 / angle_step_deg)); }

double SweepConfig::frequency(int k) const {
    return f_start_hz + span_hz() * static_cast<double>(k) / static_cast<double>(n_points - 1);
}

double SweepConfig::delay_bin_s() const {
    const double step = span_hz() / static_cast<double>(n_points - 1);
    return 1.0 / (static_cast<double>(n_points) * step);
}

SweepConfig SweepConfig::direct_only() const {
    SweepConfig c = *this;
    c.include_ris = c.include_clutter = c.include_noise = false;
    return c;
}

double receive_pattern(double offset_deg, const SweepConfig& cfg) {
    double d = std::fmod(offset_deg + 180.0, 360.0);
    if (d < 0) d += 360.0;
    d -= 180.0;
    if (std::abs(d) >= cfg.beamwidth_deg) return cfg.pattern_floor;
    const double c = std::cos(kPi * d / (2.0 * cfg.beamwidth_deg));
    return cfg.pattern_floor + (1.0 - cfg.pattern_floor) * c * c;
}

std::vector<ClutterPath> realize_layout(const EnvironmentProfile& env, Rng& rng) {
    std::vector<ClutterPath> layout;
    const double max_excess = 5.0 * env.reverberation_decay_ns * 1e-9;
    for (int k = 0; k < env.clutter_path_count; ++k) {
        ClutterPath p;
        p.excess_delay_s = max_excess * rng.uniform();
        p.angle_deg = 360.0 * rng.uniform();
        p.gain_db = env.clutter_gain_db_min + (env.clutter_gain_db_max - env.clutter_gain_db_min) * rng.uniform();
        p.phase_rad = 2.0 * kPi * rng.uniform();
        layout.push_back(p);
    }
    return layout;
}

ChannelSweep synthesize_sweep(const EnvironmentProfile& env, const Scenario& scn, double angle_deg,
                              const SweepConfig& cfg, Rng& rng) {
    cfg.validate();
    if (!(angle_deg >= 0.0 && angle_deg < 360.0)) throw ParameterError("sweep: angle must lie in [0, 360)");

    ChannelSweep sweep;
    sweep.meta = {env.name, scn.kind, angle_deg, 0, rng.seed()};
    const int n = cfg.n_points;
    sweep.frequencies.resize(n);
    sweep.h.assign(n, Complex{});
    for (int k = 0; k < n; ++k) sweep.frequencies[k] = cfg.frequency(k);

    const double direct_delay = cfg.direct_delay_s();
    if (cfg.include_direct) {
        const double a = db_to_amplitude(-scn.blockage_loss_db()) * receive_pattern(angle_deg, cfg);
        for (int k = 0; k < n; ++k) sweep.h[k] += path_term(a, sweep.frequencies[k], direct_delay, 0.0);
    }
    if (cfg.include_ris) {
        const double spread = cfg.tx_rx_distance_m / (cfg.ris_tx_distance_m + cfg.ris_rx_distance_m);
        const double a = db_to_amplitude(cfg.ris_gain_db) * spread * receive_pattern(angle_deg - cfg.ris_angle_deg, cfg);
        for (int k = 0; k < n; ++k) sweep.h[k] += path_term(a, sweep.frequencies[k], cfg.ris_delay_s(), 0.0);
    }
    if (cfg.include_clutter && env.clutter_path_count > 0) {
        const auto layout = env.layout.empty() ? realize_layout(env, rng) : env.layout;
        const double decay = env.reverberation_decay_ns * 1e-9;
        for (const auto& p : layout) {
            const double gain_db = p.gain_db + cfg.clutter_jitter_db * rng.normal();
            const double phase = p.phase_rad + cfg.clutter_phase_jitter_rad * (2.0 * rng.uniform() - 1.0);
            const double a = db_to_amplitude(gain_db) * std::exp(-p.excess_delay_s / decay) *
                             receive_pattern(angle_deg - p.angle_deg, cfg);
            for (int k = 0; k < n; ++k) {
                sweep.h[k] += path_term(a, sweep.frequencies[k], direct_delay + p.excess_delay_s, phase);
            }
        }
    }
    if (cfg.include_noise) {
        const double sigma = db_to_amplitude(cfg.noise_floor_db) / std::sqrt(2.0);
        for (auto& v : sweep.h) {
            const double re = sigma * rng.normal();
            const double im = sigma * rng.normal();
            v += Complex(re, im);
        }
    }
    return sweep;
}

// ---------------------------------------------------------------------------

std::vector<Complex> inverse_dft(const std::vector<Complex>& spectrum, Window window) {
    const std::size_t n = spectrum.size();
    std::vector<Complex> weighted(n);
    for (std::size_t k = 0; k < n; ++k) {
        double w = 1.0;
        if (window == Window::Hann && n > 1) w = 0.5 - 0.5 * std::cos(2.0 * kPi * double(k) / double(n - 1));
        weighted[k] = w * spectrum[k];
    }
    std::vector<Complex> twiddle(n);
    for (std::size_t m = 0; m < n; ++m) twiddle[m] = std::polar(1.0, 2.0 * kPi * double(m) / double(n));
    std::vector<Complex> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        Complex acc{};
        for (std::size_t k = 0; k < n; ++k) acc += weighted[k] * twiddle[(k * t) % n];
        out[t] = acc / static_cast<double>(n);
    }
    return out;
}

std::vector<Complex> sweep_to_cir(const ChannelSweep& sweep, Window window) {
    if (sweep.h.size() < 16) throw ParameterError("sweep_to_cir: at least 16 frequency points required");
    return inverse_dft(sweep.h, window);
}

std::vector<ChannelSweep> run_campaign(const EnvironmentProfile& env, const SweepConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    EnvironmentProfile room = env;
    if (room.layout.empty() && room.clutter_path_count > 0) {
        Rng layout_rng(derive_seed(seed, {kLayoutKey}));
        room.layout = realize_layout(room, layout_rng);
    }
    const auto& scenarios = Scenario::all();
    const int angles = cfg.angle_count();
    std::vector<ChannelSweep> out;
    out.reserve(scenarios.size() * static_cast<std::size_t>(angles));
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        for (int a = 0; a < angles; ++a) {
            Rng rng(derive_seed(seed, {s, static_cast<std::uint64_t>(a)}));
            auto sweep = synthesize_sweep(room, scenarios[s], a * cfg.angle_step_deg, cfg, rng);
            sweep.meta.angle_index = a;
            out.push_back(std::move(sweep));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string sweep_file_name(const SweepMeta& meta) {
    std::ostringstream os;
    os << meta.environment << '_' << Scenario::all()[static_cast<int>(meta.scenario)].name() << '_' << std::setw(3)
       << std::setfill('0') << meta.angle_index << ".cir";
    return os.str();
}

void write_sweep_file(const std::filesystem::path& path, const ChannelSweep& sweep, const SweepConfig& cfg) {
    static_assert(std::endian::native == std::endian::little, "sweep writer assumes a little-endian host");
    const auto& scn = Scenario::all()[static_cast<int>(sweep.meta.scenario)];
    const nlohmann::json header = {{"format", "CIR1"},
                                   {"domain", "frequency"},
                                   {"environment", sweep.meta.environment},
                                   {"scenario", scn.name()},
                                   {"label", scn.label()},
                                   {"angle_deg", sweep.meta.angle_deg},
                                   {"angle_index", sweep.meta.angle_index},
                                   {"seed", sweep.meta.seed},
                                   {"f_start_hz", cfg.f_start_hz},
                                   {"f_stop_hz", cfg.f_stop_hz},
                                   {"n_points", sweep.h.size()}};
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
    out.write(kSweepMagic, 4);
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& v : sweep.h) {
        const double pair[2] = {v.real(), v.imag()};
        out.write(reinterpret_cast<const char*>(pair), sizeof pair);
    }
    if (!out) throw FormatError(FormatError::Kind::Io, "failed writing " + path.string());
}

ChannelSweep read_sweep_file(const std::filesystem::path& path) {
    using Kind = FormatError::Kind;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(Kind::Io, "cannot open " + path.string());
    char magic[4];
    std::uint32_t len = 0;
    if (!in.read(magic, 4) || std::memcmp(magic, kSweepMagic, 4) != 0) {
        throw FormatError(Kind::BadMagic, path.string() + ": not a CIR1 file");
    }
    if (!in.read(reinterpret_cast<char*>(&len), 4)) throw FormatError(Kind::TruncatedPayload, path.string() + ": truncated");
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw FormatError(Kind::TruncatedPayload, path.string() + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(Kind::BadHeader, path.string() + ": " + e.what());
    }
    ChannelSweep sweep;
    try {
        sweep.meta.environment = header.at("environment").get<std::string>();
        sweep.meta.scenario = Scenario::from_name(header.at("scenario").get<std::string>()).kind;
        sweep.meta.angle_deg = header.at("angle_deg").get<double>();
        sweep.meta.angle_index = header.at("angle_index").get<int>();
        sweep.meta.seed = header.at("seed").get<std::uint64_t>();
        SweepConfig cfg;
        cfg.f_start_hz = header.at("f_start_hz").get<double>();
        cfg.f_stop_hz = header.at("f_stop_hz").get<double>();
        cfg.n_points = header.at("n_points").get<int>();
        cfg.validate();
        for (int k = 0; k < cfg.n_points; ++k) sweep.frequencies.push_back(cfg.frequency(k));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(Kind::BadHeader, path.string() + ": " + e.what());
    }
    sweep.h.resize(sweep.frequencies.size());
    for (auto& v : sweep.h) {
        double pair[2];
        if (!in.read(reinterpret_cast<char*>(pair), sizeof pair)) {
            throw FormatError(Kind::TruncatedPayload, path.string() + ": truncated samples");
        }
        v = Complex(pair[0], pair[1]);
    }
    return sweep;
}

void write_sweep_csv(const std::filesystem::path& path, const ChannelSweep& sweep) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
    out << "freq_hz,re,im\n" << std::setprecision(17);
    for (std::size_t k = 0; k < sweep.h.size(); ++k) {
        out << sweep.frequencies[k] << ',' << sweep.h[k].real() << ',' << sweep.h[k].imag() << '\n';
    }
}

std::vector<std::filesystem::path> write_campaign(const std::filesystem::path& dir, const EnvironmentProfile& env,
                                                  const SweepConfig& cfg, std::uint64_t seed,
                                                  const std::vector<ChannelSweep>& sweeps, bool with_csv) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& sweep : sweeps) {
        const auto name = sweep_file_name(sweep.meta);
        write_sweep_file(dir / name, sweep, cfg);
        if (with_csv) write_sweep_csv(dir / std::filesystem::path(name).replace_extension(".csv"), sweep);
        files.push_back(name);
        written.push_back(dir / name);
    }
    const nlohmann::json index = {{"environment", env.name},
                                  {"seed", seed},
                                  {"f_start_hz", cfg.f_start_hz},
                                  {"f_stop_hz", cfg.f_stop_hz},
                                  {"n_points", cfg.n_points},
                                  {"angle_step_deg", cfg.angle_step_deg},
                                  {"angle_count", cfg.angle_count()},
                                  {"files", files}};
    std::ofstream out(dir / "campaign.json", std::ios::trunc);
    out << index.dump(2) << '\n';
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot write campaign index in " + dir.string());
    return written;
}

std::vector<ChannelSweep> read_campaign(const std::filesystem::path& dir) {
    std::ifstream in(dir / "campaign.json");
    if (!in) throw IngestionError("campaign index not found: " + (dir / "campaign.json").string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Kind::BadHeader, "campaign.json: " + std::string(e.what()));
    }
    std::vector<ChannelSweep> sweeps;
    for (const auto& name : index.at("files")) sweeps.push_back(read_sweep_file(dir / name.get<std::string>()));
    return sweeps;
}

}  // namespace ris::sim
