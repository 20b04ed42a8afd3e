// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rdsense/dataset.hpp"
#include "rdsense/rdmap.hpp"
#include "rdsense/simulate.hpp"
#include "rdsense/sync.hpp"

namespace rdsense::scen {

struct GestureEvent {
    sim::GestureKind kind = sim::GestureKind::kPushPull;
    double start_s = 0.9;
    double duration_s = 2.4;
    double base_range_m = 0.22;
    double speed_scale = 1.0;
    std::uint64_t seed = 0;
};

struct BackgroundMover {
    double range_m = 1.5;
    double velocity_mps = -0.25;
    double amplitude = 0.4;
};

struct CaptureSpec {
    std::string id;
    std::uint32_t user = 0;
    std::uint32_t location = 0;
    double duration_s = 4.7;
    std::uint64_t seed = 0;
    sim::ImpairmentSpec impairments;
    std::vector<GestureEvent> gestures;
    std::vector<BackgroundMover> background;
};

struct Scenario {
    std::uint64_t schema_version = 1;
    RadioConfig radio;
    std::uint64_t seed = 0;
    std::vector<CaptureSpec> captures;
};

/// Strict parser: unknown keys anywhere in the file are rejected.
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

struct CaptureResult {
    CaptureSpec spec;
    ChannelMatrix matrix;
    std::vector<rd::GestureInterval> intervals;
};

CaptureResult synthesize_capture(const RadioConfig& radio, const CaptureSpec& spec);

// channel-matrix archive (one .rdcm + .json sidecar per capture, plus index.json)
void write_capture(const std::filesystem::path& dir, const CaptureResult& capture);
CaptureResult read_capture(const std::filesystem::path& dir, const std::string& id);
void write_archive_index(const std::filesystem::path& dir, const Scenario& scenario);
std::vector<std::string> read_archive_index(const std::filesystem::path& dir, RadioConfig* radio = nullptr);

struct PipelineConfig {
    rd::RDGrid grid;
    sync::SyncConfig sync;
    bool delay_calibration = true;
    bool phase_correction = true;
    std::size_t clip_window = 32;
    std::size_t clip_stride = 4;  // RD frames between emitted windows
};

/// Sync chain + CPI loop + normalization + segmentation for one capture.
/// Per-CPI self-interference cancellation is folded through the shared delay
/// profile of the stream (identical result, one profile pass).
std::vector<rd::RDClip> run_pipeline(const CaptureResult& capture, const RadioConfig& radio,
                                     const PipelineConfig& pcfg);

/// Synthetic benchmark: `users` simulated users x 5 gestures x `reps`
/// repetitions, one capture per repetition. Users 0..1 record in location 0,
/// the rest in location 1; location_override forces all captures to one id.
Scenario make_benchmark_scenario(const RadioConfig& radio, std::size_t users, std::size_t reps,
                                 std::uint64_t seed, bool with_movers, int location_override = -1);

/// Simulate + pipeline + keep the best-centered labeled clip per capture.
std::vector<rd::RDClip> build_benchmark_clips(const Scenario& scenario, const PipelineConfig& pcfg);

}  // namespace rdsense::scen
