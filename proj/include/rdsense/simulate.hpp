// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdsense/channel.hpp"
#include "rdsense/radio.hpp"

namespace rdsense::sim {

/// Point-scatterer state for one OFDM frame.
struct TargetState {
    double delay_s = 0.0;
    double doppler_hz = 0.0;
    Complex amplitude{1.0, 0.0};
};

enum class GestureKind : int {
    kPushPull = 0,
    kSlide = 1,
    kUpDown = 2,
    kDoublePulse = 3,
    kDoubleRotate = 4,
};
inline constexpr int kNumGestureKinds = 5;

const char* to_string(GestureKind kind);
GestureKind gesture_kind_from_string(const std::string& name);

/// Per-frame trajectory of a single scatterer. One state per synthesized frame.
struct TargetTrack {
    std::vector<TargetState> states;
    std::optional<GestureKind> label_hint;
};

/// Hardware impairments applied on top of the ideal target returns.
/// `timing_offset_samples` is in units of 1/bandwidth; it becomes the
/// per-subcarrier phase ramp exp(-j 2 pi n t_off / N).
struct ImpairmentSpec {
    Complex coupling_amplitude{0.0, 0.0};  // frame-constant Tx-Rx leakage
    double noise_power = 0.0;              // variance of complex AWGN
    double timing_offset_samples = 0.0;    // may be fractional
    double phase_drift_std = 0.0;          // random-walk increment std, rad/frame
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// Hand-motion waveform constants used by gesture_track(). All values are
/// repo-level tuning, scaled by speed_scale; none are hardware claims.
struct GestureParams {
    double push_pull_excursion_m = 0.16;
    double slide_radial_m = 0.022;
    double up_down_radial_m = 0.016;
    double pulse_dip_m = 0.035;
    double rotate_peak_speed_mps = 0.27;
    double jitter_frac = 0.06;  // seeded waveform jitter amplitude
};

/// Evaluate the channel model for the given tracks: for every frame m and
/// subcarrier n sum a_k exp(j 2 pi T m f_D,k) exp(-j 2 pi n df tau_k), add the
/// frame-constant coupling term and complex AWGN, then apply timing/phase
/// impairments. Deterministic for a fixed ImpairmentSpec seed.
ChannelMatrix synthesize_channel(const RadioConfig& cfg,
                                 const std::vector<TargetTrack>& tracks,
                                 const ImpairmentSpec& imp,
                                 std::size_t num_frames);

/// Kinematic realization of one gesture class: returns a track of
/// round(duration / T) frames with tau = 2 R(t) / c and f_D = -(2 / lambda) dR/dt.
TargetTrack gesture_track(GestureKind kind, double base_range_m, double speed_scale,
                          double duration_s, const RadioConfig& cfg, std::uint64_t rng_seed,
                          const GestureParams& params = {});

/// Constant-velocity scatterer at a given standoff (secondary mover in the scene).
TargetTrack background_mover_track(double range_m, double velocity_mps, double duration_s,
                                   const RadioConfig& cfg, double amplitude = 1.0);

/// Apply the multiplicative impairments only: the global timing-offset phase
/// ramp and the per-frame random-walk common phase. In place; a zero spec is
/// a bit-exact no-op.
void apply_impairments(ChannelMatrix& d, const ImpairmentSpec& imp);

/// Embed a gesture/mover track into a longer capture: frames before
/// start_frame hold the first state with zero Doppler, frames after the track
/// hold the last state with zero Doppler (a resting scatterer).
TargetTrack embed_track(const TargetTrack& track, std::size_t total_frames, std::size_t start_frame);

}  // namespace rdsense::sim
