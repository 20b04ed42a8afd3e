// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "rdsense/simulate.hpp"

using namespace rdsense;
using namespace rdsense::sim;

namespace {

RadioConfig default_radio() { return RadioConfig{}; }

TargetTrack constant_track(std::size_t frames, double delay_s, double doppler_hz, Complex amp = {1.0, 0.0}) {
    TargetTrack t;
    t.states.assign(frames, TargetState{delay_s, doppler_hz, amp});
    return t;
}

}  // namespace

TEST_CASE("synthesize: single static unit target gives all-ones matrix") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 8;
    const auto d = synthesize_channel(cfg, {constant_track(8, 0.0, 0.0)}, {}, 8);
    for (const auto& v : d.data) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("synthesize: coupling only fills the matrix with the leakage term") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 8;
    ImpairmentSpec imp;
    imp.coupling_amplitude = Complex{0.3, -0.7};
    const auto d = synthesize_channel(cfg, {}, imp, 4);
    for (const auto& v : d.data) CHECK(std::abs(v - Complex{0.3, -0.7}) < 1e-15);
}

TEST_CASE("synthesize: bin-1 target peaks at (doppler 1, delay 1) in the DFT oracle") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 8;
    const std::size_t m = 8;
    const double doppler = 1.0 / (static_cast<double>(m) * cfg.frame_interval_s);
    const double delay = 1.0 / (static_cast<double>(cfg.num_subcarriers) * cfg.subcarrier_spacing_hz());
    const auto d = synthesize_channel(cfg, {constant_track(m, delay, doppler)}, {}, m);
    const auto peak = oracle::argmax_rd(oracle::native_rd_power(d), cfg.num_subcarriers);
    CHECK(peak.doppler_bin == 1);
    CHECK(peak.delay_bin == 1);
}

TEST_CASE("synthesize: mismatched track length is rejected") {
    RadioConfig cfg = default_radio();
    CHECK_THROWS_AS(synthesize_channel(cfg, {constant_track(7, 0.0, 0.0)}, {}, 8), std::invalid_argument);
}

TEST_CASE("synthesize: aliased doppler sets the flag") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 4;
    const double nyq = 0.5 / cfg.frame_interval_s;
    const auto d = synthesize_channel(cfg, {constant_track(4, 0.0, nyq * 1.1)}, {}, 4);
    CHECK(d.doppler_aliased);
    const auto ok = synthesize_channel(cfg, {constant_track(4, 0.0, nyq * 0.5)}, {}, 4);
    CHECK_FALSE(ok.doppler_aliased);
}

TEST_CASE("synthesize: linearity over track sets (shared seed, coupling added once)") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 32;
    const std::size_t m = 16;
    ImpairmentSpec imp;
    imp.coupling_amplitude = Complex{2.0, 1.0};
    imp.timing_offset_samples = 0.4;
    imp.phase_drift_std = 0.1;
    imp.rng_seed = 77;

    const auto track_a = constant_track(m, 2.1e-9, 4.0, Complex{1.0, 0.2});
    const auto track_b = constant_track(m, 5.3e-9, -7.0, Complex{0.5, -0.1});

    const auto d_ab = synthesize_channel(cfg, {track_a, track_b}, imp, m);
    const auto d_a = synthesize_channel(cfg, {track_a}, imp, m);
    const auto d_b = synthesize_channel(cfg, {track_b}, imp, m);
    const auto d_none = synthesize_channel(cfg, {}, imp, m);

    for (std::size_t i = 0; i < d_ab.data.size(); ++i) {
        const Complex sum = d_a.data[i] + d_b.data[i] - d_none.data[i];
        CHECK(std::abs(sum - d_ab.data[i]) <= 1e-12 * std::max(1.0, std::abs(d_ab.data[i])));
    }
}

TEST_CASE("synthesize: deterministic under a fixed seed") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 16;
    ImpairmentSpec imp;
    imp.noise_power = 0.5;
    imp.phase_drift_std = 0.2;
    imp.rng_seed = 1234;
    const auto a = synthesize_channel(cfg, {constant_track(8, 1e-9, 3.0)}, imp, 8);
    const auto b = synthesize_channel(cfg, {constant_track(8, 1e-9, 3.0)}, imp, 8);
    REQUIRE(a.data.size() == b.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("synthesize: noise energy converges to the configured power") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 512;
    ImpairmentSpec imp;
    imp.noise_power = 0.8;
    imp.rng_seed = 99;
    const auto d = synthesize_channel(cfg, {}, imp, 16);  // 8192 samples
    double mean = 0.0;
    for (const auto& v : d.data) mean += std::norm(v);
    mean /= static_cast<double>(d.data.size());
    CHECK(mean == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("apply_impairments: zero spec is a bit-exact no-op") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 16;
    auto d = synthesize_channel(cfg, {constant_track(4, 1e-9, 5.0)}, {}, 4);
    const auto before = d.data;
    apply_impairments(d, {});
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(d.data[i] == before[i]);
}

TEST_CASE("apply_impairments: one-sample timing offset shifts the delay bin by one") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 16;
    const std::size_t m = 8;
    const double delay = 2.0 / (static_cast<double>(cfg.num_subcarriers) * cfg.subcarrier_spacing_hz());
    auto d = synthesize_channel(cfg, {constant_track(m, delay, 0.0)}, {}, m);
    const auto before = oracle::argmax_rd(oracle::native_rd_power(d), cfg.num_subcarriers);
    REQUIRE(before.delay_bin == 2);

    ImpairmentSpec imp;
    imp.timing_offset_samples = 1.0;  // one native delay bin
    apply_impairments(d, imp);
    const auto after = oracle::argmax_rd(oracle::native_rd_power(d), cfg.num_subcarriers);
    CHECK(after.delay_bin == 3);
    CHECK(after.doppler_bin == before.doppler_bin);
}

TEST_CASE("apply_impairments: phase drift spreads the zero-doppler peak") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 16;
    const std::size_t m = 32;
    auto clean = synthesize_channel(cfg, {constant_track(m, 0.0, 0.0)}, {}, m);
    auto drifted = clean;
    ImpairmentSpec imp;
    imp.phase_drift_std = 0.3;
    imp.rng_seed = 5;
    apply_impairments(drifted, imp);

    const auto p_clean = oracle::native_rd_power(clean);
    const auto p_drift = oracle::native_rd_power(drifted);
    const double ratio_clean = oracle::argmax_rd(p_clean, cfg.num_subcarriers).power / oracle::total(p_clean);
    const double ratio_drift = oracle::argmax_rd(p_drift, cfg.num_subcarriers).power / oracle::total(p_drift);
    CHECK(ratio_drift < ratio_clean);
}

TEST_CASE("gesture_track: kinematic consistency for every class") {
    RadioConfig cfg = default_radio();
    for (int g = 0; g < kNumGestureKinds; ++g) {
        const auto track = gesture_track(static_cast<GestureKind>(g), 0.22, 1.0, 2.4, cfg, 42 + g);
        REQUIRE(track.states.size() == 96);
        const double lambda = cfg.wavelength_m();
        for (std::size_t m = 0; m + 1 < track.states.size(); ++m) {
            const double dr = (track.states[m + 1].delay_s - track.states[m].delay_s) * kSpeedOfLight / 2.0;
            const double v = -track.states[m].doppler_hz * lambda / 2.0;
            CHECK(std::abs(dr - v * cfg.frame_interval_s) <= 1e-3);
        }
    }
}

TEST_CASE("gesture_track: push-pull doppler stays under the configured peak speed") {
    RadioConfig cfg = default_radio();
    GestureParams gp;
    const double duration = 3.2;
    const auto track = gesture_track(GestureKind::kPushPull, 0.20, 1.0, duration, cfg, 7, gp);
    // analytic peak speed with the worst-case waveform jitter
    const double v_max = gp.push_pull_excursion_m * (1.0 + gp.jitter_frac) * std::numbers::pi / duration;
    const double bound = 2.0 * v_max / cfg.wavelength_m();
    double max_doppler = 0.0;
    // numerical differentiation of the generated R(t) as an independent check
    double max_fd_from_range = 0.0;
    for (std::size_t m = 0; m < track.states.size(); ++m) {
        max_doppler = std::max(max_doppler, std::abs(track.states[m].doppler_hz));
        if (m + 1 < track.states.size()) {
            const double dr = (track.states[m + 1].delay_s - track.states[m].delay_s) * kSpeedOfLight / 2.0;
            max_fd_from_range = std::max(max_fd_from_range,
                                         std::abs(2.0 * dr / (cfg.frame_interval_s * cfg.wavelength_m())));
        }
    }
    CHECK(max_doppler <= bound * (1.0 + 1e-9));
    CHECK(max_fd_from_range <= bound * 1.02);  // finite-difference sampling slack
}

TEST_CASE("gesture_track: zero speed scale freezes the track") {
    RadioConfig cfg = default_radio();
    const auto track = gesture_track(GestureKind::kSlide, 0.25, 0.0, 2.0, cfg, 3);
    for (const auto& s : track.states) {
        CHECK(s.doppler_hz == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(s.delay_s == doctest::Approx(track.states.front().delay_s).epsilon(1e-15));
    }
}

TEST_CASE("gesture_track: double rotate crosses zero doppler at least four times") {
    RadioConfig cfg = default_radio();
    const auto track = gesture_track(GestureKind::kDoubleRotate, 0.22, 1.0, 2.4, cfg, 11);
    int sign_changes = 0;
    double prev = track.states.front().doppler_hz;
    for (const auto& s : track.states) {
        if (s.doppler_hz * prev < 0.0) ++sign_changes;
        if (s.doppler_hz != 0.0) prev = s.doppler_hz;
    }
    CHECK(sign_changes >= 4);
}

TEST_CASE("gesture_track: unknown kind is rejected") {
    RadioConfig cfg = default_radio();
    CHECK_THROWS_AS(gesture_track(static_cast<GestureKind>(99), 0.2, 1.0, 2.0, cfg, 0), std::invalid_argument);
    CHECK_THROWS_AS(gesture_kind_from_string("wave"), std::invalid_argument);
}

TEST_CASE("background_mover_track: frozen delay and doppler values") {
    RadioConfig cfg = default_radio();
    const auto track = background_mover_track(1.5, 0.3, 2.0, cfg);
    // tau = 2 * 1.5 / c, f_D = -2 * 0.3 / (c / 6.345 GHz)
    CHECK(track.states.front().delay_s == doctest::Approx(10.0069e-9).epsilon(1e-4));
    CHECK(track.states.front().doppler_hz == doctest::Approx(-12.6988).epsilon(1e-3));

    const auto still = background_mover_track(1.0, 0.0, 1.0, cfg);
    for (const auto& s : still.states) {
        CHECK(s.doppler_hz == 0.0);
        CHECK(s.delay_s == still.states.front().delay_s);
    }
}

TEST_CASE("background movers at 1 m and 2 m land in their native delay gates") {
    RadioConfig cfg = default_radio();
    cfg.num_subcarriers = 64;
    const std::size_t m = 16;
    // given the native bin c/(2B) = 0.937 m, targets at 1 m and 2 m occupy bins 1 and 2
    for (const auto& [range, expected_bin] : {std::pair<double, std::size_t>{1.0, 1}, {2.0, 2}}) {
        const auto track = background_mover_track(range, 0.0, m * cfg.frame_interval_s, cfg);
        const auto d = synthesize_channel(cfg, {track}, {}, m);
        const auto peak = oracle::argmax_rd(oracle::native_rd_power(d), cfg.num_subcarriers);
        CHECK(peak.delay_bin == expected_bin);
    }
}

TEST_CASE("embed_track pads with resting states") {
    RadioConfig cfg = default_radio();
    const auto g = gesture_track(GestureKind::kPushPull, 0.2, 1.0, 1.0, cfg, 1);
    const auto full = embed_track(g, 100, 20);
    REQUIRE(full.states.size() == 100);
    CHECK(full.states[0].doppler_hz == 0.0);
    CHECK(full.states[0].delay_s == g.states.front().delay_s);
    CHECK(full.states[25].delay_s == g.states[5].delay_s);
    CHECK(full.states[99].doppler_hz == 0.0);
}
