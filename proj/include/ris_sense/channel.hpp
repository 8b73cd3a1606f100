#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ris_sense/rng.hpp"

namespace ris::sim {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

enum class EnvironmentKind { Chamber, Meeting, HfLab };

/// One multipath reflection relative to the direct path.
struct ClutterPath {
    double excess_delay_s = 0.0;
    double angle_deg = 0.0;
    double gain_db = 0.0;  // relative to the unblocked direct path, before decay
    double phase_rad = 0.0;
};

struct EnvironmentProfile {
    EnvironmentKind kind = EnvironmentKind::Chamber;
    std::string name;
    int clutter_path_count = 0;
    double clutter_gain_db_min = 0.0;
    double clutter_gain_db_max = 0.0;
    double reverberation_decay_ns = 0.0;
    /// Static reflector layout of the room. Empty means synthesize_sweep
    /// draws a fresh layout from its rng.
    std::vector<ClutterPath> layout;

    static EnvironmentProfile chamber();
    static EnvironmentProfile meeting();
    static EnvironmentProfile hflab();
    /// "chamber", "meeting" or "hflab"; throws ParameterError otherwise.
    static EnvironmentProfile from_name(const std::string& name);
    static const std::vector<std::string>& names();
};

enum class ScenarioKind { Los, Nlos100, Nlos75 };

struct Scenario {
    ScenarioKind kind = ScenarioKind::Los;
    double plate_side_m = 0.0;
    double plate_thickness_mm = 0.0;

    static Scenario los();
    static Scenario nlos_100();
    static Scenario nlos_75();
    static const std::vector<Scenario>& all();  // class-index order
    static Scenario from_name(const std::string& name);

    /// Class index: 0 LOS, 1 NLOS 1.00 m plate, 2 NLOS 0.75 m plate.
    int label() const { return static_cast<int>(kind); }
    std::string name() const;
    /// Direct-path blockage loss: 20 dB * (side / 1 m)^2.
    double blockage_loss_db() const;
};

/// Frequency sweep and static geometry. The receiver sits on a turntable
/// tx_rx_distance_m from the transmitter; the direct path arrives from 0 deg
/// and the RIS reflection from ris_angle_deg in the turntable frame.
struct SweepConfig {
    double f_start_hz = 4.8e9;
    double f_stop_hz = 5.2e9;
    int n_points = 401;
    double tx_rx_distance_m = 0.431;
    double angle_step_deg = 5.0;
    double ris_gain_db = -8.0;
    double ris_tx_distance_m = 1.2;
    double ris_rx_distance_m = 1.2;
    double ris_angle_deg = 10.0;
    double beamwidth_deg = 60.0;
    double pattern_floor = 0.3;       // amplitude outside the main lobe
    double noise_floor_db = -70.0;    // per-sample noise vs the unblocked direct path; below the 60 dB display range
    double clutter_jitter_db = 1.0;   // per-measurement gain wobble of reflectors
    double clutter_phase_jitter_rad = 0.3;
    bool include_direct = true;
    bool include_ris = true;
    bool include_clutter = true;
    bool include_noise = true;

    void validate() const;
    int angle_count() const;
    double span_hz() const { return f_stop_hz - f_start_hz; }
    double frequency(int k) const;
    /// Spacing of CIR delay bins: 1 / (n_points * frequency step).
    double delay_bin_s() const;
    double direct_delay_s() const { return tx_rx_distance_m / kSpeedOfLight; }
    double ris_delay_s() const { return (ris_tx_distance_m + ris_rx_distance_m) / kSpeedOfLight; }
    /// Config with only the direct path enabled.
    SweepConfig direct_only() const;
};

struct SweepMeta {
    std::string environment;
    ScenarioKind scenario = ScenarioKind::Los;
    double angle_deg = 0.0;
    int angle_index = 0;
    std::uint64_t seed = 0;
};

struct ChannelSweep {
    std::vector<double> frequencies;
    std::vector<Complex> h;
    SweepMeta meta;
};

/// Amplitude of the raised-cosine receive pattern at an offset from boresight.
double receive_pattern(double offset_deg, const SweepConfig& cfg);

/// Draws a static reflector layout for the environment.
std::vector<ClutterPath> realize_layout(const EnvironmentProfile& env, Rng& rng);

/// h(f) = sum_k a_k G(angle - theta_k) exp(-j 2 pi f tau_k) over the direct
/// path (blocked by the plate), the RIS reflection and the room's clutter,
/// plus complex Gaussian measurement noise.
ChannelSweep synthesize_sweep(const EnvironmentProfile& env, const Scenario& scn, double angle_deg,
                              const SweepConfig& cfg, Rng& rng);

enum class Window { Hann, Rect };

/// cir[n] = (1/N) sum_k w[k] h[k] exp(+j 2 pi k n / N)
std::vector<Complex> sweep_to_cir(const ChannelSweep& sweep, Window window);
std::vector<Complex> inverse_dft(const std::vector<Complex>& spectrum, Window window);

/// Every scenario at every turntable angle, scenario-major then angle. The
/// room layout comes from derive_seed(seed, {0xC1u}); cell (s, a) uses
/// derive_seed(seed, {s, a}).
std::vector<ChannelSweep> run_campaign(const EnvironmentProfile& env, const SweepConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sweep files: "CIR1", uint32 LE header length, UTF-8 JSON header, then
// n_points interleaved (re, im) little-endian float64 samples of h(f).

void write_sweep_file(const std::filesystem::path& path, const ChannelSweep& sweep, const SweepConfig& cfg);
ChannelSweep read_sweep_file(const std::filesystem::path& path);
/// Columns freq_hz, re, im.
void write_sweep_csv(const std::filesystem::path& path, const ChannelSweep& sweep);

/// Writes one file per cell plus campaign.json; returns the written paths.
std::vector<std::filesystem::path> write_campaign(const std::filesystem::path& dir, const EnvironmentProfile& env,
                                                  const SweepConfig& cfg, std::uint64_t seed,
                                                  const std::vector<ChannelSweep>& sweeps, bool with_csv);
/// Reads campaign.json and every sweep it lists, in campaign order.
std::vector<ChannelSweep> read_campaign(const std::filesystem::path& dir);

std::string sweep_file_name(const SweepMeta& meta);

}  // namespace ris::sim
