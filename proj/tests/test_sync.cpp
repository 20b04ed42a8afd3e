// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "rdsense/simulate.hpp"
#include "rdsense/sync.hpp"

using namespace rdsense;
using namespace rdsense::sync;

namespace {

// Zadoff-Chu sequence: constant magnitude, impulse-like periodic
// autocorrelation, ideal for delay tests.
std::vector<Complex> zadoff_chu(std::size_t len, std::size_t root = 1) {
    std::vector<Complex> seq(len);
    for (std::size_t n = 0; n < len; ++n) {
        const double phase = -std::numbers::pi * static_cast<double>(root) * static_cast<double>(n) *
                             static_cast<double>(n + 1) / static_cast<double>(len);
        seq[n] = std::polar(1.0, phase);
    }
    return seq;
}

// Circular fractional delay via the frequency domain.
std::vector<Complex> circular_delay(const std::vector<Complex>& seq, double delay_samples) {
    const std::size_t len = seq.size();
    std::vector<Complex> spec(len, Complex{0.0, 0.0});
    for (std::size_t f = 0; f < len; ++f) {
        for (std::size_t t = 0; t < len; ++t) {
            spec[f] += seq[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(f * t) /
                                                    static_cast<double>(len));
        }
    }
    std::vector<Complex> out(len, Complex{0.0, 0.0});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t f = 0; f < len; ++f) {
            double sf = static_cast<double>(f);
            if (sf > static_cast<double>(len) / 2.0) sf -= static_cast<double>(len);
            const double shift = -2.0 * std::numbers::pi * sf * delay_samples / static_cast<double>(len);
            out[t] += spec[f] / static_cast<double>(len) *
                      std::polar(1.0, 2.0 * std::numbers::pi * sf * static_cast<double>(t) /
                                          static_cast<double>(len) + shift);
        }
    }
    return out;
}

// rx = int_delay zeros, then two periods of the circularly frac-delayed ZC:
// the correlation around the first period is exactly circular.
std::vector<Complex> delayed_rx(const std::vector<Complex>& ref, long int_delay, double frac_delay) {
    const auto shifted = circular_delay(ref, frac_delay);
    std::vector<Complex> rx(static_cast<std::size_t>(int_delay), Complex{0.0, 0.0});
    rx.insert(rx.end(), shifted.begin(), shifted.end());
    rx.insert(rx.end(), shifted.begin(), shifted.end());
    return rx;
}

ChannelMatrix static_scene(const RadioConfig& cfg, std::size_t frames, Complex coupling,
                           double noise_power = 0.0, std::uint64_t seed = 1) {
    sim::ImpairmentSpec imp;
    imp.coupling_amplitude = coupling;
    imp.noise_power = noise_power;
    imp.rng_seed = seed;
    sim::TargetTrack t;
    t.states.assign(frames, sim::TargetState{2.0 * 0.2 / kSpeedOfLight, 0.0, Complex{1.0, 0.0}});
    return sim::synthesize_channel(cfg, {t}, imp, frames);
}

}  // namespace

TEST_CASE("coarse_delay: exact integer shifts") {
    const auto ref = zadoff_chu(64);
    SUBCASE("delay 5") { CHECK(coarse_delay(delayed_rx(ref, 5, 0.0), ref) == 5); }
    SUBCASE("no delay") {
        std::vector<Complex> rx(ref.begin(), ref.end());
        CHECK(coarse_delay(rx, ref) == 0);
    }
    SUBCASE("all-zero input is rejected") {
        std::vector<Complex> zeros(64, Complex{0.0, 0.0});
        CHECK_THROWS_AS(coarse_delay(zeros, ref), std::invalid_argument);
        CHECK_THROWS_AS(coarse_delay(ref, zeros), std::invalid_argument);
    }
}

TEST_CASE("coarse_delay: 7-sample shift survives 20 dB AWGN in >= 99 of 100 seeded trials") {
    const auto ref = zadoff_chu(64);
    const auto clean = delayed_rx(ref, 7, 0.0);
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::mt19937_64 rng(1000 + trial);
        std::normal_distribution<double> gauss(0.0, std::sqrt(0.01 / 2.0));  // 20 dB below unit power
        auto rx = clean;
        for (auto& v : rx) v += Complex{gauss(rng), gauss(rng)};
        if (coarse_delay(rx, ref) == 7) ++hits;
    }
    CHECK(hits >= 99);
}

TEST_CASE("fine_delay: recovers injected fractional delays") {
    const auto ref = zadoff_chu(64);
    SUBCASE("0.25 samples at U=8") {
        const auto rx = delayed_rx(ref, 6, 0.25);
        const long coarse = coarse_delay(rx, ref);
        const double fine = fine_delay(rx, ref, coarse, 8);
        CHECK(std::abs(static_cast<double>(coarse) + fine - 6.25) <= 1.0 / 16.0 + 1e-9);
    }
    SUBCASE("zero fractional delay") {
        const auto rx = delayed_rx(ref, 6, 0.0);
        CHECK(std::abs(fine_delay(rx, ref, 6, 8)) <= 1.0 / 16.0 + 1e-9);
    }
    SUBCASE("U=1 collapses to zero") {
        const auto rx = delayed_rx(ref, 6, 0.4);
        CHECK(fine_delay(rx, ref, 6, 1) == 0.0);
    }
    SUBCASE("U=0 is rejected") {
        const auto rx = delayed_rx(ref, 6, 0.0);
        CHECK_THROWS_AS(fine_delay(rx, ref, 6, 0), std::invalid_argument);
    }
}

TEST_CASE("delay chain property: |l_eff - d| <= 1/(2U) noiseless") {
    const auto ref = zadoff_chu(64);
    const std::size_t upsample = 16;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<long> int_part(0, 20);
    std::uniform_real_distribution<double> frac_part(-0.45, 0.45);
    for (int trial = 0; trial < 40; ++trial) {
        const long d_int = int_part(rng);
        double d_frac = frac_part(rng);
        // keep away from the grid's half-cell boundaries, where the argmax
        // legitimately rounds either way
        const double cell = 1.0 / static_cast<double>(upsample);
        const double to_boundary = std::abs(std::remainder(d_frac, cell)) - cell / 2.0;
        if (std::abs(to_boundary) < 0.005) d_frac += 0.01;
        const double truth = static_cast<double>(d_int) + d_frac;

        const auto rx = delayed_rx(ref, d_int, d_frac);
        const auto est = estimate_delay(rx, ref, upsample);
        CHECK(std::abs(est.effective_samples - truth) <= 1.0 / (2.0 * static_cast<double>(upsample)) + 1e-6);
        CHECK(est.effective_samples ==
              static_cast<double>(est.coarse_samples) + est.fine_samples);  // exact by construction
    }
}

TEST_CASE("phase_correct: drift-free input gets zero fixes") {
    RadioConfig cfg;
    cfg.num_subcarriers = 32;
    auto d = static_scene(cfg, 16, Complex{10.0, 0.0});
    const auto before = d.data;
    const auto log = phase_correct(d, SyncConfig{});
    for (double fix : log.applied_fix_rad) CHECK(fix == 0.0);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(d.data[i] == before[i]);
}

TEST_CASE("phase_correct: constant k*delta jump is undone on frame 1 with H=1") {
    RadioConfig cfg;
    cfg.num_subcarriers = 32;
    SyncConfig sc;
    sc.history_len = 1;
    const int k = 5;
    const double jump = -static_cast<double>(k) * sc.phase_step_rad;

    auto d = static_scene(cfg, 8, Complex{10.0, 0.0});
    for (std::size_t m = 1; m < d.num_frames; ++m) {
        for (auto& v : d.frame(m)) v *= std::polar(1.0, jump);
    }
    const auto log = phase_correct(d, sc);
    CHECK(log.applied_fix_rad[0] == 0.0);
    CHECK(log.applied_fix_rad[1] == doctest::Approx(static_cast<double>(k) * sc.phase_step_rad).epsilon(1e-12));
    // residual inter-frame deviation below delta/2 afterwards
    for (std::size_t m = 1; m < d.num_frames; ++m) {
        Complex mean_prev{0.0, 0.0}, mean_cur{0.0, 0.0};
        for (const auto& v : d.frame(m - 1)) mean_prev += v;
        for (const auto& v : d.frame(m)) mean_cur += v;
        const double dev = std::arg(mean_cur / mean_prev);
        CHECK(std::abs(dev) < sc.phase_step_rad / 2.0 + 1e-12);
    }
}

TEST_CASE("phase_correct: fixes are integer multiples of delta and magnitudes are preserved") {
    RadioConfig cfg;
    cfg.num_subcarriers = 64;
    sim::ImpairmentSpec imp;
    imp.coupling_amplitude = Complex{5.0, 0.0};
    imp.phase_drift_std = 0.25;
    imp.noise_power = 0.01;
    imp.rng_seed = 31;
    sim::TargetTrack t;
    t.states.assign(64, sim::TargetState{1.5e-9, 0.0, Complex{1.0, 0.0}});
    auto d = sim::synthesize_channel(cfg, {t}, imp, 64);
    const auto before = d;

    SyncConfig sc;
    const auto log = phase_correct(d, sc);
    for (double fix : log.applied_fix_rad) {
        const double steps = fix / sc.phase_step_rad;
        CHECK(std::abs(steps - std::round(steps)) < 1e-9);
    }
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        CHECK(std::abs(d.data[i]) == doctest::Approx(std::abs(before.data[i])).epsilon(1e-12));
    }
}

TEST_CASE("phase_correct: random-walk drift corrected, zero-doppler power restored >= 10 dB (median of 20 seeds)") {
    RadioConfig cfg;
    cfg.num_subcarriers = 32;
    const std::size_t frames = 2048;
    std::vector<double> improvements;
    for (int seed = 0; seed < 20; ++seed) {
        sim::ImpairmentSpec imp;
        imp.phase_drift_std = 0.2;
        imp.rng_seed = 400 + seed;
        sim::TargetTrack t;
        t.states.assign(frames, sim::TargetState{2.0 * 0.2 / kSpeedOfLight, 0.0, Complex{1.0, 0.0}});
        auto drifted = sim::synthesize_channel(cfg, {t}, imp, frames);
        auto corrected = drifted;
        phase_correct(corrected, SyncConfig{});

        auto zero_doppler_power = [](const ChannelMatrix& d) {
            Complex acc{0.0, 0.0};
            for (const auto& v : d.data) acc += v;
            return std::norm(acc / static_cast<double>(d.data.size()));
        };
        const double before = zero_doppler_power(drifted);
        const double after = zero_doppler_power(corrected);
        improvements.push_back(10.0 * std::log10(after / before));
    }
    std::sort(improvements.begin(), improvements.end());
    const double median = improvements[improvements.size() / 2];
    CHECK(median >= 10.0);
}

TEST_CASE("phase_correct: degenerate inputs are rejected") {
    ChannelMatrix d = ChannelMatrix::zeros(1, 8);
    SyncConfig sc;
    CHECK_THROWS_AS(phase_correct(d, sc), std::invalid_argument);
    ChannelMatrix z = ChannelMatrix::zeros(4, 8);
    CHECK_THROWS_AS(phase_correct(z, sc), std::invalid_argument);  // all-zero frame
}

TEST_CASE("cancel_self_interference: frame-constant input cancels exactly to zero") {
    ChannelMatrix d = ChannelMatrix::zeros(8, 16);
    for (std::size_t m = 0; m < 8; ++m) {
        for (std::size_t n = 0; n < 16; ++n) d.at(m, n) = Complex{static_cast<double>(n), -1.5};
    }
    cancel_self_interference(d);
    for (const auto& v : d.data) CHECK(v == Complex{0.0, 0.0});
}

TEST_CASE("cancel_self_interference: pure doppler-bin-1 tone is untouched") {
    RadioConfig cfg;
    cfg.num_subcarriers = 16;
    const std::size_t m = 16;
    const double doppler = 1.0 / (static_cast<double>(m) * cfg.frame_interval_s);
    sim::TargetTrack t;
    t.states.assign(m, sim::TargetState{1e-9, doppler, Complex{1.0, 0.0}});
    auto d = sim::synthesize_channel(cfg, {t}, {}, m);
    const auto before = d;
    cancel_self_interference(d);
    // a bin-1 tone has zero temporal mean, so SIC must preserve it
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        CHECK(std::abs(d.data[i] - before.data[i]) <= 1e-10 * std::max(1.0, std::abs(before.data[i])));
    }
}

TEST_CASE("cancel_self_interference: idempotent and zero-mean output") {
    RadioConfig cfg;
    cfg.num_subcarriers = 16;
    sim::ImpairmentSpec imp;
    imp.noise_power = 1.0;
    imp.coupling_amplitude = Complex{30.0, 10.0};
    imp.rng_seed = 8;
    auto d = sim::synthesize_channel(cfg, {}, imp, 32);
    cancel_self_interference(d);
    const auto once = d;
    // per-subcarrier temporal mean is zero
    for (std::size_t n = 0; n < d.num_subcarriers; ++n) {
        Complex mean{0.0, 0.0};
        for (std::size_t m = 0; m < d.num_frames; ++m) mean += d.at(m, n);
        CHECK(std::abs(mean) / static_cast<double>(d.num_frames) < 1e-12);
    }
    cancel_self_interference(d);
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        CHECK(std::abs(d.data[i] - once.data[i]) <= 1e-12 * std::max(1.0, std::abs(once.data[i])));
    }
    ChannelMatrix one = ChannelMatrix::zeros(1, 4);
    CHECK_THROWS_AS(cancel_self_interference(one), std::invalid_argument);
}

TEST_CASE("calibrate_timing: removes an injected ramp using the coupling path") {
    RadioConfig cfg;
    cfg.num_subcarriers = 128;
    const std::size_t frames = 16;
    auto d = static_scene(cfg, frames, Complex{30.0, 0.0});
    sim::ImpairmentSpec imp;
    imp.timing_offset_samples = 3.3;
    sim::apply_impairments(d, imp);

    const auto est = calibrate_timing(d, 16);
    CHECK(std::abs(est.effective_samples - 3.3) <= 1.0 / 32.0 + 1e-9);
}

TEST_CASE("full chain on an unimpaired matrix only subtracts the mean") {
    RadioConfig cfg;
    cfg.num_subcarriers = 64;
    const std::size_t frames = 32;
    const double doppler = 2.0 / (static_cast<double>(frames) * cfg.frame_interval_s);
    sim::TargetTrack moving;
    moving.states.assign(frames, sim::TargetState{2.0 * 0.3 / kSpeedOfLight, doppler, Complex{0.03, 0.0}});
    sim::ImpairmentSpec imp;
    imp.coupling_amplitude = Complex{10.0, 0.0};
    auto d = sim::synthesize_channel(cfg, {moving}, imp, frames);

    auto reference = d;
    cancel_self_interference(reference);

    auto chained = d;
    const auto est = calibrate_timing(chained, 16);
    CHECK(est.effective_samples == 0.0);
    phase_correct(chained, SyncConfig{});
    cancel_self_interference(chained);

    for (std::size_t i = 0; i < chained.data.size(); ++i) {
        CHECK(std::abs(chained.data[i] - reference.data[i]) <= 1e-9);
    }
}
