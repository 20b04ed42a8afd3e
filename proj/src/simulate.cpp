// SPDX-License-Identifier: Apache-2.0
#include "rdsense/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rdsense::sim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Separate RNG stream for the phase walk so noise draws do not shift when the
// drift is toggled.
constexpr std::uint64_t kDriftStreamSalt = 0x9E3779B97F4A7C15ull;

double uniform_pm1(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

}  // namespace

const char* to_string(GestureKind kind) {
    switch (kind) {
        case GestureKind::kPushPull: return "push_pull";
        case GestureKind::kSlide: return "slide";
        case GestureKind::kUpDown: return "up_down";
        case GestureKind::kDoublePulse: return "double_pulse";
        case GestureKind::kDoubleRotate: return "double_rotate";
    }
    throw std::invalid_argument("unknown GestureKind");
}

GestureKind gesture_kind_from_string(const std::string& name) {
    for (int k = 0; k < kNumGestureKinds; ++k) {
        auto kind = static_cast<GestureKind>(k);
        if (name == to_string(kind)) return kind;
    }
    throw std::invalid_argument("unknown gesture kind: '" + name + "'");
}

void ImpairmentSpec::validate() const {
    if (noise_power < 0.0) throw std::invalid_argument("ImpairmentSpec: noise_power must be >= 0");
    if (phase_drift_std < 0.0) throw std::invalid_argument("ImpairmentSpec: phase_drift_std must be >= 0");
}

ChannelMatrix synthesize_channel(const RadioConfig& cfg, const std::vector<TargetTrack>& tracks,
                                 const ImpairmentSpec& imp, std::size_t num_frames) {
    cfg.validate();
    imp.validate();
    for (std::size_t k = 0; k < tracks.size(); ++k) {
        if (tracks[k].states.size() != num_frames) {
            throw std::invalid_argument("synthesize_channel: track " + std::to_string(k) + " has " +
                                        std::to_string(tracks[k].states.size()) + " states, expected " +
                                        std::to_string(num_frames) + " frames");
        }
    }

    const std::size_t n_sub = cfg.num_subcarriers;
    const double df = cfg.subcarrier_spacing_hz();
    const double t_frame = cfg.frame_interval_s;
    const double nyquist_doppler = 0.5 / t_frame;

    ChannelMatrix d = ChannelMatrix::zeros(num_frames, n_sub);

    for (const auto& track : tracks) {
        for (std::size_t m = 0; m < num_frames; ++m) {
            const TargetState& s = track.states[m];
            if (std::abs(s.doppler_hz) >= nyquist_doppler) d.doppler_aliased = true;
            const double doppler_phase = kTwoPi * t_frame * static_cast<double>(m) * s.doppler_hz;
            const Complex frame_factor = s.amplitude * std::polar(1.0, doppler_phase);
            const double ramp_step = -kTwoPi * df * s.delay_s;
            // exp(-j 2 pi n df tau) built by recurrence over n
            const Complex step = std::polar(1.0, ramp_step);
            Complex ramp{1.0, 0.0};
            Complex* row = d.data.data() + m * n_sub;
            for (std::size_t n = 0; n < n_sub; ++n) {
                row[n] += frame_factor * ramp;
                ramp *= step;
            }
        }
    }

    if (imp.coupling_amplitude != Complex{0.0, 0.0}) {
        for (auto& v : d.data) v += imp.coupling_amplitude;
    }

    if (imp.noise_power > 0.0) {
        std::mt19937_64 rng(imp.rng_seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(imp.noise_power / 2.0));
        for (auto& v : d.data) v += Complex{gauss(rng), gauss(rng)};
    }

    apply_impairments(d, imp);
    return d;
}

void apply_impairments(ChannelMatrix& d, const ImpairmentSpec& imp) {
    imp.validate();
    const std::size_t n_sub = d.num_subcarriers;

    if (imp.timing_offset_samples != 0.0) {
        const Complex step = std::polar(1.0, -kTwoPi * imp.timing_offset_samples / static_cast<double>(n_sub));
        std::vector<Complex> ramp(n_sub);
        Complex r{1.0, 0.0};
        for (std::size_t n = 0; n < n_sub; ++n) {
            ramp[n] = r;
            r *= step;
        }
        for (std::size_t m = 0; m < d.num_frames; ++m) {
            Complex* row = d.data.data() + m * n_sub;
            for (std::size_t n = 0; n < n_sub; ++n) row[n] *= ramp[n];
        }
    }

    if (imp.phase_drift_std > 0.0) {
        std::mt19937_64 rng(imp.rng_seed ^ kDriftStreamSalt);
        std::normal_distribution<double> gauss(0.0, imp.phase_drift_std);
        double psi = 0.0;
        for (std::size_t m = 0; m < d.num_frames; ++m) {
            psi += gauss(rng);
            const Complex rot = std::polar(1.0, psi);
            Complex* row = d.data.data() + m * n_sub;
            for (std::size_t n = 0; n < n_sub; ++n) row[n] *= rot;
        }
    }
}

namespace {

// Closed-form range/speed/amplitude waveforms per gesture class, evaluated at
// normalized phase p in [0, 1]. Speed is the analytic dR/dt so that track
// kinematics stay consistent to O(T^2).
struct WaveformSample {
    double range_m;
    double speed_mps;
    double amplitude;
};

WaveformSample eval_gesture(GestureKind kind, double p, double base_range, double duration_s,
                            double scale, double phase_jitter, double env_jitter,
                            const GestureParams& gp) {
    const double w = kTwoPi / duration_s;  // one cycle over the gesture
    const double q = p + phase_jitter;
    WaveformSample out{base_range, 0.0, 1.0};
    switch (kind) {
        case GestureKind::kPushPull: {
            // hand toward the antenna and back: one smooth range excursion
            const double e = gp.push_pull_excursion_m * scale;
            const double s2 = std::sin(std::numbers::pi * q);
            out.range_m = base_range - e * s2 * s2;
            out.speed_mps = -e * 0.5 * w * std::sin(kTwoPi * q);
            out.amplitude = 0.85 + 0.15 * s2 * s2;
            break;
        }
        case GestureKind::kSlide: {
            // cross-range sweep: weak radial ripple, profile-dependent brightness
            const double a = gp.slide_radial_m * scale;
            out.range_m = base_range + a * std::sin(kTwoPi * q);
            out.speed_mps = a * w * std::cos(kTwoPi * q);
            const double c = std::cos(std::numbers::pi * (p + env_jitter));
            out.amplitude = 0.40 + 0.60 * c * c;
            break;
        }
        case GestureKind::kUpDown: {
            // vertical motion: two radial micro-cycles, bright on each pass
            const double a = gp.up_down_radial_m * scale;
            out.range_m = base_range + a * std::sin(2.0 * kTwoPi * q);
            out.speed_mps = a * 2.0 * w * std::cos(2.0 * kTwoPi * q);
            const double s = std::sin(kTwoPi * (p + env_jitter));
            out.amplitude = 0.35 + 0.65 * s * s;
            break;
        }
        case GestureKind::kDoublePulse: {
            // two open-hand appearances: amplitude bursts with a small push each
            const double dip = gp.pulse_dip_m * scale;
            const double width = 0.10;
            const double g1 = std::exp(-0.5 * std::pow((q - 0.30) / width, 2));
            const double g2 = std::exp(-0.5 * std::pow((q - 0.70) / width, 2));
            out.range_m = base_range - dip * (g1 + g2);
            const double dg1 = g1 * (q - 0.30) / (width * width);
            const double dg2 = g2 * (q - 0.70) / (width * width);
            out.speed_mps = dip * (dg1 + dg2) / duration_s;
            out.amplitude = 0.15 + 0.85 * std::min(1.0, g1 + g2);
            break;
        }
        case GestureKind::kDoubleRotate: {
            // two full rotations: sinusoidal Doppler, two periods
            const double v = gp.rotate_peak_speed_mps * scale;
            out.range_m = base_range + (v * duration_s / (2.0 * kTwoPi)) * std::sin(2.0 * kTwoPi * q);
            out.speed_mps = v * std::cos(2.0 * kTwoPi * q);
            const double s = std::sin(2.0 * kTwoPi * (p + env_jitter));
            out.amplitude = 0.55 + 0.45 * std::abs(s);
            break;
        }
    }
    return out;
}

}  // namespace

TargetTrack gesture_track(GestureKind kind, double base_range_m, double speed_scale,
                          double duration_s, const RadioConfig& cfg, std::uint64_t rng_seed,
                          const GestureParams& params) {
    cfg.validate();
    if (static_cast<int>(kind) < 0 || static_cast<int>(kind) >= kNumGestureKinds) {
        throw std::invalid_argument("gesture_track: unknown gesture kind");
    }
    if (base_range_m <= 0.0) throw std::invalid_argument("gesture_track: base_range must be positive");
    if (duration_s <= 0.0) throw std::invalid_argument("gesture_track: duration must be positive");
    if (speed_scale < 0.0) throw std::invalid_argument("gesture_track: speed_scale must be >= 0");

    std::mt19937_64 rng(rng_seed);
    const double scale = speed_scale * (1.0 + params.jitter_frac * uniform_pm1(rng));
    const double phase_jitter = 0.05 * uniform_pm1(rng);
    const double env_jitter = 0.04 * uniform_pm1(rng);
    const double range_jitter = 1.0 + 0.03 * uniform_pm1(rng);
    const double base = base_range_m * range_jitter;

    const double t_frame = cfg.frame_interval_s;
    const auto num_frames = static_cast<std::size_t>(std::llround(duration_s / t_frame));
    const double lambda = cfg.wavelength_m();

    TargetTrack track;
    track.label_hint = kind;
    track.states.reserve(num_frames);
    for (std::size_t m = 0; m < num_frames; ++m) {
        const double p = (static_cast<double>(m) * t_frame) / duration_s;
        const WaveformSample w = eval_gesture(kind, p, base, duration_s, scale, phase_jitter, env_jitter, params);
        TargetState s;
        s.delay_s = 2.0 * w.range_m / kSpeedOfLight;
        s.doppler_hz = -2.0 * w.speed_mps / lambda;
        s.amplitude = Complex{w.amplitude, 0.0};
        track.states.push_back(s);
    }
    return track;
}

TargetTrack background_mover_track(double range_m, double velocity_mps, double duration_s,
                                   const RadioConfig& cfg, double amplitude) {
    cfg.validate();
    if (range_m <= 0.0) throw std::invalid_argument("background_mover_track: range must be positive");
    if (duration_s <= 0.0) throw std::invalid_argument("background_mover_track: duration must be positive");

    const double t_frame = cfg.frame_interval_s;
    const auto num_frames = static_cast<std::size_t>(std::llround(duration_s / t_frame));
    const double lambda = cfg.wavelength_m();

    TargetTrack track;
    track.states.reserve(num_frames);
    for (std::size_t m = 0; m < num_frames; ++m) {
        const double r = range_m + velocity_mps * static_cast<double>(m) * t_frame;
        TargetState s;
        s.delay_s = 2.0 * std::max(r, 1e-3) / kSpeedOfLight;
        s.doppler_hz = -2.0 * velocity_mps / lambda;
        s.amplitude = Complex{amplitude, 0.0};
        track.states.push_back(s);
    }
    return track;
}

TargetTrack embed_track(const TargetTrack& track, std::size_t total_frames, std::size_t start_frame) {
    if (track.states.empty()) throw std::invalid_argument("embed_track: empty track");
    if (start_frame + track.states.size() > total_frames) {
        throw std::invalid_argument("embed_track: track does not fit into the capture");
    }
    TargetTrack out;
    out.label_hint = track.label_hint;
    out.states.assign(total_frames, TargetState{});
    TargetState rest_before = track.states.front();
    rest_before.doppler_hz = 0.0;
    TargetState rest_after = track.states.back();
    rest_after.doppler_hz = 0.0;
    for (std::size_t m = 0; m < total_frames; ++m) {
        if (m < start_frame) {
            out.states[m] = rest_before;
        } else if (m < start_frame + track.states.size()) {
            out.states[m] = track.states[m - start_frame];
        } else {
            out.states[m] = rest_after;
        }
    }
    return out;
}

}  // namespace rdsense::sim
