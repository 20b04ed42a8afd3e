// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "rdsense/channel.hpp"

namespace rdsense::sync {

struct SyncConfig {
    std::size_t upsample_factor = 16;                  // fine-delay grid is 1/U samples
    std::size_t history_len = 8;                       // frames in the phase reference
    double phase_step_rad = std::numbers::pi / 64.0;   // quantization step delta

    void validate() const {
        if (upsample_factor < 1) throw std::invalid_argument("SyncConfig: upsample_factor must be >= 1");
        if (history_len < 1) throw std::invalid_argument("SyncConfig: history_len must be >= 1");
        if (phase_step_rad <= 0.0 || phase_step_rad > std::numbers::pi) {
            throw std::invalid_argument("SyncConfig: phase_step must be in (0, pi]");
        }
    }
};

struct DelayEstimate {
    long coarse_samples = 0;
    double fine_samples = 0.0;   // in (-0.5, 0.5], on the 1/U grid
    double effective_samples = 0.0;  // coarse + fine
};

/// Per-frame record of the quantized common-phase correction.
struct PhaseCorrectionLog {
    std::vector<double> frame_phase_rad;      // theta_m of the raw frame
    std::vector<double> reference_phase_rad;  // phi_{m-1}
    std::vector<double> applied_fix_rad;      // integer multiple of delta

    void write_csv(std::ostream& os) const;
};

/// Integer lag of the cross-correlation magnitude peak between a received
/// sequence and the known reference. Lags span the full linear-correlation
/// support; ties resolve toward the smallest lag.
long coarse_delay(std::span<const Complex> rx, std::span<const Complex> ref);

/// Fractional refinement around a coarse lag: the correlation is interpolated
/// on a 1/U sample grid (frequency-domain zero padding) and the magnitude
/// peak offset in (-0.5, 0.5] is returned. U = 1 collapses to 0.
double fine_delay(std::span<const Complex> rx, std::span<const Complex> ref, long coarse,
                  std::size_t upsample_factor);

DelayEstimate estimate_delay(std::span<const Complex> rx, std::span<const Complex> ref,
                             std::size_t upsample_factor);

/// Causal common-phase correction, Eq.-style: per frame the mean-subcarrier
/// phase is steered onto the circular mean of the previous
/// min(m, history_len) corrected frames, quantized to multiples of delta.
/// Frame 0 anchors the stream. Corrects `d` in place.
PhaseCorrectionLog phase_correct(ChannelMatrix& d, const SyncConfig& cfg);

/// Remove the frame-constant component: subtract the per-subcarrier temporal
/// mean across all frames. In place; requires at least 2 frames.
void cancel_self_interference(ChannelMatrix& d);

/// Pipeline-level timing calibration: locates the strongest path of the
/// frame-averaged impulse response (in practice the Tx-Rx coupling) on the
/// 1/U grid and removes the corresponding subcarrier phase ramp in place.
DelayEstimate calibrate_timing(ChannelMatrix& d, std::size_t upsample_factor);

}  // namespace rdsense::sync
