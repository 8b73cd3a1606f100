#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "ris_sense/channel.hpp"
#include "ris_sense/errors.hpp"

using namespace ris;
using namespace ris::sim;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Closed-form rect-window IDFT magnitude of a single unit path:
// |sum_k exp(j 2 pi k x)| / N = |sin(pi N x) / (N sin(pi x))|, x = n/N - tau*df.
double dirichlet_magnitude(int n, int N, double tau, double df) {
    const double x = static_cast<double>(n) / N - tau * df;
    const double den = N * std::sin(kPi * x);
    if (std::abs(den) < 1e-12) return 1.0;
    return std::abs(std::sin(kPi * N * x) / den);
}

std::size_t argmax_abs(const std::vector<Complex>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    }
    return best;
}

ChannelSweep single_path(const SweepConfig& cfg, double tau) {
    ChannelSweep s;
    for (int k = 0; k < cfg.n_points; ++k) {
        s.frequencies.push_back(cfg.frequency(k));
        s.h.push_back(std::polar(1.0, -2.0 * kPi * cfg.frequency(k) * tau));
    }
    return s;
}

double direct_magnitude(const Scenario& scn, double angle) {
    SweepConfig cfg = SweepConfig{}.direct_only();
    Rng rng(1);
    return std::abs(synthesize_sweep(EnvironmentProfile::chamber(), scn, angle, cfg, rng).h[0]);
}

}  // namespace

TEST_CASE("profiles and scenarios") {
    CHECK(EnvironmentProfile::chamber().clutter_path_count == 0);
    CHECK(EnvironmentProfile::hflab().clutter_path_count > EnvironmentProfile::meeting().clutter_path_count);
    CHECK(EnvironmentProfile::from_name("meeting").name == "meeting");
    CHECK_THROWS_AS(EnvironmentProfile::from_name("garage"), ParameterError);
    for (const auto& s : Scenario::all()) CHECK((s.plate_side_m == 0.0) == (s.kind == ScenarioKind::Los));
    CHECK(Scenario::nlos_100().blockage_loss_db() == doctest::Approx(20.0));
    CHECK(Scenario::nlos_75().blockage_loss_db() == doctest::Approx(11.25));
    CHECK(Scenario::from_name("nlos75").label() == 2);
}

TEST_CASE("sweep config validation") {
    SweepConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.angle_count() == 72);
    CHECK(cfg.frequency(0) == 4.8e9);
    CHECK(cfg.frequency(400) == doctest::Approx(5.2e9));
    cfg.angle_step_deg = 7.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.n_points = 15;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.f_stop_hz = cfg.f_start_hz;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("direct delay is d/c") {
    SweepConfig cfg;
    CHECK(cfg.direct_delay_s() == doctest::Approx(1.437e-9).epsilon(1e-3));
    // Phase slope of the direct-only chamber sweep recovers the delay.
    Rng rng(3);
    const auto s = synthesize_sweep(EnvironmentProfile::chamber(), Scenario::los(), 0.0, cfg.direct_only(), rng);
    const double dphi = std::arg(s.h[1] / s.h[0]);
    const double df = s.frequencies[1] - s.frequencies[0];
    CHECK(-dphi / (2 * kPi * df) == doctest::Approx(0.431 / kSpeedOfLight).epsilon(1e-9));
}

TEST_CASE("synthesize_sweep rejects angles outside [0, 360)") {
    SweepConfig cfg;
    Rng rng(1);
    CHECK_THROWS_AS(synthesize_sweep(EnvironmentProfile::chamber(), Scenario::los(), 360.0, cfg, rng), ParameterError);
    CHECK_THROWS_AS(synthesize_sweep(EnvironmentProfile::chamber(), Scenario::los(), -1.0, cfg, rng), ParameterError);
}

TEST_CASE("blockage ordering at every angle") {
    SweepConfig cfg;
    for (int a = 0; a < cfg.angle_count(); ++a) {
        const double angle = a * cfg.angle_step_deg;
        const double los = direct_magnitude(Scenario::los(), angle);
        const double n75 = direct_magnitude(Scenario::nlos_75(), angle);
        const double n100 = direct_magnitude(Scenario::nlos_100(), angle);
        CHECK(los >= n75);
        CHECK(n75 > n100);
    }
}

TEST_CASE("same seed gives identical sweep") {
    SweepConfig cfg;
    const auto env = EnvironmentProfile::hflab();
    Rng a(99), b(99), c(100);
    const auto sa = synthesize_sweep(env, Scenario::nlos_75(), 45.0, cfg, a);
    const auto sb = synthesize_sweep(env, Scenario::nlos_75(), 45.0, cfg, b);
    const auto sc = synthesize_sweep(env, Scenario::nlos_75(), 45.0, cfg, c);
    CHECK(sa.h == sb.h);
    CHECK(sa.h != sc.h);
    for (const auto& v : sa.h) CHECK(std::isfinite(std::abs(v)));
}

TEST_CASE("receive pattern") {
    SweepConfig cfg;
    CHECK(receive_pattern(0.0, cfg) == doctest::Approx(1.0));
    CHECK(receive_pattern(90.0, cfg) == doctest::Approx(cfg.pattern_floor));
    CHECK(receive_pattern(30.0, cfg) == doctest::Approx(0.3 + 0.7 * 0.5));
    CHECK(receive_pattern(350.0, cfg) == doctest::Approx(receive_pattern(10.0, cfg)));
}

TEST_CASE("flat spectrum maps to an impulse at bin 0") {
    std::vector<Complex> flat(64, Complex(1.0, 0.0));
    const auto cir = inverse_dft(flat, Window::Rect);
    CHECK(std::abs(cir[0] - 1.0) < 1e-12);
    for (std::size_t n = 1; n < cir.size(); ++n) CHECK(std::abs(cir[n]) < 1e-12);
}

TEST_CASE("2.5 ns path lands in delay bin 1") {
    SweepConfig cfg;
    const double df = cfg.span_hz() / (cfg.n_points - 1);
    const auto sweep = single_path(cfg, 2.5e-9);
    const auto cir = sweep_to_cir(sweep, Window::Rect);
    CHECK(argmax_abs(cir) == 1);
    for (int n = 0; n < cfg.n_points; n += 37) {
        CHECK(std::abs(cir[n]) == doctest::Approx(dirichlet_magnitude(n, cfg.n_points, 2.5e-9, df)).epsilon(1e-9));
    }
    CHECK(argmax_abs(sweep_to_cir(sweep, Window::Hann)) == 1);
}

TEST_CASE("Parseval with rect window") {
    SweepConfig cfg;
    Rng rng(5);
    const auto sweep = synthesize_sweep(EnvironmentProfile::hflab(), Scenario::nlos_100(), 120.0, cfg, rng);
    const auto cir = sweep_to_cir(sweep, Window::Rect);
    double eh = 0, ec = 0;
    for (const auto& v : sweep.h) eh += std::norm(v);
    for (const auto& v : cir) ec += std::norm(v);
    CHECK(std::abs(eh / sweep.h.size() - ec) < 1e-9);
}

TEST_CASE("sweep_to_cir requires 16 points") {
    ChannelSweep s;
    s.h.assign(15, Complex(1.0));
    s.frequencies.assign(15, 0.0);
    CHECK_THROWS_AS(sweep_to_cir(s, Window::Rect), ParameterError);
}

TEST_CASE("campaign size and ordering") {
    SweepConfig cfg;
    const auto env = EnvironmentProfile::meeting();
    const auto all = run_campaign(env, cfg, 11);
    REQUIRE(all.size() == 216);
    CHECK(all[0].meta.environment == "meeting");
    CHECK(all[0].meta.scenario == ScenarioKind::Los);
    CHECK(all[0].meta.angle_deg == 0.0);
    CHECK(all[72].meta.scenario == ScenarioKind::Nlos100);
    CHECK(all[73].meta.angle_deg == 5.0);
    CHECK(all[215].meta.scenario == ScenarioKind::Nlos75);
    CHECK(all[215].meta.angle_deg == 355.0);

    cfg.angle_step_deg = 90.0;
    const auto coarse = run_campaign(env, cfg, 11);
    CHECK(coarse.size() == 12);
    CHECK(coarse[5].meta.angle_deg == 90.0);
}

TEST_CASE("campaign is deterministic") {
    SweepConfig cfg;
    cfg.angle_step_deg = 30.0;
    const auto a = run_campaign(EnvironmentProfile::hflab(), cfg, 4);
    const auto b = run_campaign(EnvironmentProfile::hflab(), cfg, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].h == b[i].h);
}

TEST_CASE("chamber energy concentrates near the deterministic paths") {
    SweepConfig cfg;
    const double span = cfg.span_hz();
    const int direct_bin = static_cast<int>(std::lround(cfg.direct_delay_s() * span));
    const int ris_bin = static_cast<int>(std::lround(cfg.ris_delay_s() * span));
    CHECK(direct_bin == 1);
    CHECK(ris_bin == 3);
    const auto sweeps = run_campaign(EnvironmentProfile::chamber(), cfg, 21);
    for (std::size_t i = 0; i < sweeps.size(); i += 7) {
        const auto cir = sweep_to_cir(sweeps[i], Window::Hann);
        const int n = static_cast<int>(cir.size());
        double total = 0, near = 0;
        for (int t = 0; t < n; ++t) {
            total += std::norm(cir[t]);
            auto close = [&](int c) {
                const int d = std::abs(t - c);
                return std::min(d, n - d) <= 2;
            };
            if (close(direct_bin) || close(ris_bin)) near += std::norm(cir[t]);
        }
        CHECK(near / total >= 0.99);
    }
}

TEST_CASE("direct-path CIR peak matches round(tau * span)") {
    SweepConfig cfg = SweepConfig{}.direct_only();
    Rng rng(8);
    const auto sweep = synthesize_sweep(EnvironmentProfile::chamber(), Scenario::los(), 0.0, cfg, rng);
    CHECK(static_cast<long>(argmax_abs(sweep_to_cir(sweep, Window::Hann))) ==
          std::lround(cfg.direct_delay_s() * cfg.span_hz()));
    CHECK(static_cast<long>(argmax_abs(sweep_to_cir(sweep, Window::Rect))) ==
          std::lround(cfg.direct_delay_s() * cfg.span_hz()));
}

TEST_CASE("sweep files round trip") {
    SweepConfig cfg;
    cfg.angle_step_deg = 120.0;
    const auto dir = fs::temp_directory_path() / "ris_sense_test_campaign";
    fs::remove_all(dir);
    const auto sweeps = run_campaign(EnvironmentProfile::meeting(), cfg, 3);
    const auto paths = write_campaign(dir, EnvironmentProfile::meeting(), cfg, 3, sweeps, true);
    CHECK(paths.size() == 9);
    CHECK(fs::exists(dir / "campaign.json"));
    CHECK(fs::exists(dir / "meeting_nlos75_002.csv"));
    const auto back = read_campaign(dir);
    REQUIRE(back.size() == sweeps.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].h == sweeps[i].h);
        CHECK(back[i].frequencies == sweeps[i].frequencies);
        CHECK(back[i].meta.scenario == sweeps[i].meta.scenario);
        CHECK(back[i].meta.angle_deg == sweeps[i].meta.angle_deg);
        CHECK(back[i].meta.seed == sweeps[i].meta.seed);
    }

    const auto bad = dir / "bad.cir";
    std::ofstream(bad) << "NOPE";
    try {
        read_sweep_file(bad);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::BadMagic);
    }
    fs::resize_file(paths[0], fs::file_size(paths[0]) - 8);
    try {
        read_sweep_file(paths[0]);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatError::Kind::TruncatedPayload);
    }
    fs::remove_all(dir);
}
