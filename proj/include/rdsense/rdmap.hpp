// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdsense/channel.hpp"
#include "rdsense/radio.hpp"
#include "rdsense/simulate.hpp"

namespace rdsense::rd {

/// Geometry of the zoomed range-Doppler evaluation grid plus the coherent
/// processing interval arithmetic. Defaults give 68 range cells over
/// 0..0.63 m and 61 velocity cells over +-0.45 m/s, 32-frame CPIs hopping by
/// 4 frames (10 RD frames per second at a 40 Hz stream).
struct RDGrid {
    double range_min_m = 0.0;
    double range_max_m = 0.63;
    double range_cell_m = 0.0093;
    double velocity_span_mps = 0.45;
    double velocity_cell_mps = 0.015;
    std::size_t cpi_frames = 32;
    std::size_t cpi_hop_frames = 4;

    std::size_t num_range_cells() const {
        return static_cast<std::size_t>((range_max_m - range_min_m) / range_cell_m + 1e-9) + 1;
    }
    std::size_t num_velocity_cells() const {
        return 2 * static_cast<std::size_t>(velocity_span_mps / velocity_cell_mps + 1e-9) + 1;
    }
    double range_at(std::size_t i) const { return range_min_m + static_cast<double>(i) * range_cell_m; }
    double velocity_at(std::size_t j) const {
        const auto half = static_cast<double>(num_velocity_cells() / 2);
        return (static_cast<double>(j) - half) * velocity_cell_mps;
    }
    void validate() const;
};

/// One RD frame: SNR values in dB over (range cell, velocity cell), already
/// referenced to the estimated noise floor.
struct RDMap {
    std::size_t num_range = 0;
    std::size_t num_velocity = 0;
    std::vector<double> snr_db;  // range-major
    double noise_floor_db = 0.0;
    double timestamp_s = 0.0;
    bool velocity_aliased = false;

    double& at(std::size_t r, std::size_t v) { return snr_db[r * num_velocity + v]; }
    double at(std::size_t r, std::size_t v) const { return snr_db[r * num_velocity + v]; }
};

/// Median of a linear-power grid, in dB. SNR(cell) = power_dB - floor_dB.
double estimate_noise_floor(std::span<const double> linear_power);

/// Dense two-axis DFT evaluation from a channel-matrix CPI to an RDMap.
/// The delay axis is a direct zoomed DFT on the configured range cells (the
/// cells are ~100x finer than the native c/2B bin, so a plain FFT would not
/// do); the velocity axis evaluates the frame DFT on the dense velocity grid.
class RangeDopplerTransform {
public:
    RangeDopplerTransform(const RadioConfig& cfg, const RDGrid& grid);

    /// One RD map from grid.cpi_frames frames starting at frame_begin.
    /// The slice is expected to be synchronized and interference-cancelled.
    RDMap map(const ChannelMatrix& d, std::size_t frame_begin, double timestamp_s) const;

    /// Linear power grid (range-major) before the dB/noise-floor conversion.
    std::vector<double> linear_power(const ChannelMatrix& d, std::size_t frame_begin) const;

    /// Dense delay profile of every frame in the stream, frame-major
    /// [frame][range cell]. Overlapping CPIs can share this.
    std::vector<Complex> delay_profile(const ChannelMatrix& d) const;

    /// RD map from a precomputed stream profile. When subtract_cpi_mean is
    /// set, the per-gate temporal mean over the CPI is removed first, which
    /// is exactly self-interference cancellation folded through the (linear)
    /// delay transform.
    RDMap map_from_profile(std::span<const Complex> profile, std::size_t frame_begin,
                           double timestamp_s, bool subtract_cpi_mean) const;

    const RDGrid& grid() const { return grid_; }

private:
    RadioConfig cfg_;
    RDGrid grid_;
    std::size_t num_range_ = 0;
    std::size_t num_velocity_ = 0;
    std::vector<Complex> delay_kernel_;    // [subcarrier][range cell]
    std::vector<Complex> doppler_kernel_;  // [velocity cell][frame]
};

/// Unitary M-point DFT across frames of a single gate's time series
/// (Doppler bin 0 first). Parseval: sum |S|^2 == sum |x|^2.
std::vector<Complex> native_doppler_spectrum(std::span<const Complex> gate_series);

/// Clip the SNR map to [5, 40] dB, scale linearly to [0, 1] and
/// bilinear-resize to out_hw x out_hw (row = range, column = velocity).
std::vector<float> normalize_frame(const RDMap& map, std::size_t out_hw = 64);

inline constexpr double kSnrClipLowDb = 5.0;
inline constexpr double kSnrClipHighDb = 40.0;

/// A labeled (or unlabeled) sequence of normalized RD frames.
struct RDClip {
    std::size_t num_frames = 32;
    std::size_t frame_hw = 64;
    std::vector<float> values;  // num_frames * hw * hw, in [0, 1]
    std::optional<sim::GestureKind> label;
    std::uint32_t user_id = 0;
    std::uint32_t location_id = 0;
    double start_time_s = 0.0;
};

struct GestureInterval {
    sim::GestureKind kind;
    double start_s = 0.0;
    double end_s = 0.0;
};

/// Slide a window of `window` frames with the given stride over a stream of
/// normalized frames. A window is labeled only when a gesture interval is
/// fully contained in its time span; other windows come out unlabeled.
/// Streams shorter than the window yield no clips.
std::vector<RDClip> segment_clips(const std::vector<std::vector<float>>& frames,
                                  const std::vector<double>& timestamps,
                                  double frame_span_s,
                                  const std::vector<GestureInterval>& gestures,
                                  std::size_t window = 32, std::size_t stride = 1,
                                  std::size_t frame_hw = 64);

enum class SpectrogramMode { kRangeFiltered, kAllSubcarriers };

/// Time x velocity dB grid (columns = CPIs, rows = velocity cells).
struct VelocitySpectrogram {
    std::size_t num_velocity = 0;
    std::size_t num_times = 0;
    std::vector<double> snr_db;  // velocity-major: [v * num_times + t]
    double noise_floor_db = 0.0;
    std::vector<double> timestamps_s;
    SpectrogramMode mode = SpectrogramMode::kAllSubcarriers;

    double at(std::size_t v, std::size_t t) const { return snr_db[v * num_times + t]; }
};

/// Doppler-over-time view of a synchronized stream. kRangeFiltered computes a
/// dense delay profile per CPI, keeps gates up to threshold_m and sums the
/// retained gates' Doppler power per velocity; kAllSubcarriers averages the
/// subcarriers per frame first (the bistatic-equivalent baseline). Both modes
/// subtract the per-CPI temporal mean before the Doppler transform.
VelocitySpectrogram velocity_spectrogram(const ChannelMatrix& stream, const RadioConfig& cfg,
                                         const RDGrid& grid, SpectrogramMode mode,
                                         double threshold_m = 1.0);

}  // namespace rdsense::rd
