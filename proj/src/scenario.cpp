// SPDX-License-Identifier: Apache-2.0
#include "rdsense/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace rdsense::scen {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& context) {
    for (const auto& [key, value] : j.items()) {
        if (allowed.count(key) == 0) {
            throw std::invalid_argument("scenario: unknown key '" + key + "' in " + context);
        }
    }
}

Complex parse_complex(const json& j, const std::string& context) {
    if (j.is_number()) return Complex{j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2) return Complex{j[0].get<double>(), j[1].get<double>()};
    throw std::invalid_argument("scenario: " + context + " must be a number or [re, im]");
}

json complex_to_json(const Complex& c) {
    if (c.imag() == 0.0) return json(c.real());
    return json::array({c.real(), c.imag()});
}

RadioConfig parse_radio(const json& j) {
    check_keys(j, {"carrier_freq_hz", "bandwidth_hz", "num_subcarriers", "frame_interval_s"}, "radio");
    RadioConfig cfg;
    if (j.contains("carrier_freq_hz")) cfg.carrier_freq_hz = j["carrier_freq_hz"].get<double>();
    if (j.contains("bandwidth_hz")) cfg.bandwidth_hz = j["bandwidth_hz"].get<double>();
    if (j.contains("num_subcarriers")) cfg.num_subcarriers = j["num_subcarriers"].get<std::size_t>();
    if (j.contains("frame_interval_s")) cfg.frame_interval_s = j["frame_interval_s"].get<double>();
    cfg.validate();
    return cfg;
}

sim::ImpairmentSpec parse_impairments(const json& j) {
    check_keys(j, {"coupling_amplitude", "noise_power", "timing_offset_samples", "phase_drift_std", "rng_seed"},
               "impairments");
    sim::ImpairmentSpec imp;
    if (j.contains("coupling_amplitude")) imp.coupling_amplitude = parse_complex(j["coupling_amplitude"], "coupling_amplitude");
    if (j.contains("noise_power")) imp.noise_power = j["noise_power"].get<double>();
    if (j.contains("timing_offset_samples")) imp.timing_offset_samples = j["timing_offset_samples"].get<double>();
    if (j.contains("phase_drift_std")) imp.phase_drift_std = j["phase_drift_std"].get<double>();
    if (j.contains("rng_seed")) imp.rng_seed = j["rng_seed"].get<std::uint64_t>();
    imp.validate();
    return imp;
}

GestureEvent parse_gesture(const json& j) {
    check_keys(j, {"kind", "start_s", "duration_s", "base_range_m", "speed_scale", "seed"}, "gesture");
    GestureEvent g;
    g.kind = sim::gesture_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("start_s")) g.start_s = j["start_s"].get<double>();
    if (j.contains("duration_s")) g.duration_s = j["duration_s"].get<double>();
    if (j.contains("base_range_m")) g.base_range_m = j["base_range_m"].get<double>();
    if (j.contains("speed_scale")) g.speed_scale = j["speed_scale"].get<double>();
    if (j.contains("seed")) g.seed = j["seed"].get<std::uint64_t>();
    return g;
}

BackgroundMover parse_mover(const json& j) {
    check_keys(j, {"range_m", "velocity_mps", "amplitude"}, "background mover");
    BackgroundMover m;
    m.range_m = j.at("range_m").get<double>();
    if (j.contains("velocity_mps")) m.velocity_mps = j["velocity_mps"].get<double>();
    if (j.contains("amplitude")) m.amplitude = j["amplitude"].get<double>();
    return m;
}

CaptureSpec parse_capture(const json& j, std::size_t index) {
    check_keys(j, {"id", "user", "location", "duration_s", "seed", "impairments", "gestures", "background"},
               "capture");
    CaptureSpec c;
    c.id = j.contains("id") ? j["id"].get<std::string>() : "capture_" + std::to_string(index);
    if (j.contains("user")) c.user = j["user"].get<std::uint32_t>();
    if (j.contains("location")) c.location = j["location"].get<std::uint32_t>();
    if (j.contains("duration_s")) c.duration_s = j["duration_s"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("impairments")) c.impairments = parse_impairments(j["impairments"]);
    if (j.contains("gestures")) {
        for (const auto& g : j["gestures"]) c.gestures.push_back(parse_gesture(g));
    }
    if (j.contains("background")) {
        for (const auto& m : j["background"]) c.background.push_back(parse_mover(m));
    }
    return c;
}

json capture_to_json(const CaptureSpec& c) {
    json j;
    j["id"] = c.id;
    j["user"] = c.user;
    j["location"] = c.location;
    j["duration_s"] = c.duration_s;
    j["seed"] = c.seed;
    json imp;
    imp["coupling_amplitude"] = complex_to_json(c.impairments.coupling_amplitude);
    imp["noise_power"] = c.impairments.noise_power;
    imp["timing_offset_samples"] = c.impairments.timing_offset_samples;
    imp["phase_drift_std"] = c.impairments.phase_drift_std;
    imp["rng_seed"] = c.impairments.rng_seed;
    j["impairments"] = imp;
    j["gestures"] = json::array();
    for (const auto& g : c.gestures) {
        json gj;
        gj["kind"] = sim::to_string(g.kind);
        gj["start_s"] = g.start_s;
        gj["duration_s"] = g.duration_s;
        gj["base_range_m"] = g.base_range_m;
        gj["speed_scale"] = g.speed_scale;
        gj["seed"] = g.seed;
        j["gestures"].push_back(gj);
    }
    j["background"] = json::array();
    for (const auto& m : c.background) {
        json mj;
        mj["range_m"] = m.range_m;
        mj["velocity_mps"] = m.velocity_mps;
        mj["amplitude"] = m.amplitude;
        j["background"].push_back(mj);
    }
    return j;
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_scenario: cannot open " + path.string());
    json j;
    is >> j;
    check_keys(j, {"schema_version", "radio", "seed", "captures"}, "scenario root");
    Scenario s;
    if (!j.contains("schema_version")) throw std::invalid_argument("scenario: missing schema_version");
    s.schema_version = j["schema_version"].get<std::uint64_t>();
    if (s.schema_version != 1) throw std::invalid_argument("scenario: unsupported schema_version");
    if (j.contains("radio")) s.radio = parse_radio(j["radio"]);
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("captures")) {
        std::size_t i = 0;
        for (const auto& c : j["captures"]) s.captures.push_back(parse_capture(c, i++));
    }
    return s;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
    json j;
    j["schema_version"] = s.schema_version;
    json radio;
    radio["carrier_freq_hz"] = s.radio.carrier_freq_hz;
    radio["bandwidth_hz"] = s.radio.bandwidth_hz;
    radio["num_subcarriers"] = s.radio.num_subcarriers;
    radio["frame_interval_s"] = s.radio.frame_interval_s;
    j["radio"] = radio;
    j["seed"] = s.seed;
    j["captures"] = json::array();
    for (const auto& c : s.captures) j["captures"].push_back(capture_to_json(c));
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_scenario: cannot open " + path.string());
    os << j.dump(2) << '\n';
}

CaptureResult synthesize_capture(const RadioConfig& radio, const CaptureSpec& spec) {
    radio.validate();
    const double t_frame = radio.frame_interval_s;
    const auto total_frames = static_cast<std::size_t>(std::llround(spec.duration_s / t_frame));
    if (total_frames < 2) throw std::invalid_argument("synthesize_capture: capture too short");

    std::vector<sim::TargetTrack> tracks;
    std::vector<rd::GestureInterval> intervals;
    for (const auto& g : spec.gestures) {
        auto track = sim::gesture_track(g.kind, g.base_range_m, g.speed_scale, g.duration_s, radio, g.seed);
        const auto start_frame = static_cast<std::size_t>(std::llround(g.start_s / t_frame));
        if (start_frame + track.states.size() > total_frames) {
            throw std::invalid_argument("synthesize_capture: gesture '" + std::string(sim::to_string(g.kind)) +
                                        "' does not fit in capture '" + spec.id + "'");
        }
        tracks.push_back(sim::embed_track(track, total_frames, start_frame));
        intervals.push_back({g.kind, g.start_s, g.start_s + g.duration_s});
    }
    for (const auto& m : spec.background) {
        tracks.push_back(sim::background_mover_track(m.range_m, m.velocity_mps, spec.duration_s, radio, m.amplitude));
    }

    sim::ImpairmentSpec imp = spec.impairments;
    if (imp.rng_seed == 0) imp.rng_seed = spec.seed;

    CaptureResult out;
    out.spec = spec;
    out.matrix = sim::synthesize_channel(radio, tracks, imp, total_frames);
    out.intervals = std::move(intervals);
    return out;
}

namespace {
constexpr char kMatrixMagic[4] = {'R', 'D', 'C', 'M'};
}

void write_capture(const std::filesystem::path& dir, const CaptureResult& capture) {
    std::filesystem::create_directories(dir);
    const auto bin_path = dir / (capture.spec.id + ".rdcm");
    std::ofstream os(bin_path, std::ios::binary);
    if (!os) throw std::runtime_error("write_capture: cannot open " + bin_path.string());
    os.write(kMatrixMagic, 4);
    const std::uint32_t version = 1;
    const auto frames = static_cast<std::uint64_t>(capture.matrix.num_frames);
    const auto subs = static_cast<std::uint64_t>(capture.matrix.num_subcarriers);
    const std::uint8_t aliased = capture.matrix.doppler_aliased ? 1 : 0;
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&frames), 8);
    os.write(reinterpret_cast<const char*>(&subs), 8);
    os.write(reinterpret_cast<const char*>(&aliased), 1);
    os.write(reinterpret_cast<const char*>(capture.matrix.data.data()),
             static_cast<std::streamsize>(capture.matrix.data.size() * sizeof(Complex)));
    if (!os) throw std::runtime_error("write_capture: write failed");

    json side = capture_to_json(capture.spec);
    side["intervals"] = json::array();
    for (const auto& iv : capture.intervals) {
        json ij;
        ij["kind"] = sim::to_string(iv.kind);
        ij["start_s"] = iv.start_s;
        ij["end_s"] = iv.end_s;
        side["intervals"].push_back(ij);
    }
    std::ofstream ss(dir / (capture.spec.id + ".json"));
    ss << side.dump(2) << '\n';
}

CaptureResult read_capture(const std::filesystem::path& dir, const std::string& id) {
    const auto bin_path = dir / (id + ".rdcm");
    std::ifstream is(bin_path, std::ios::binary);
    if (!is) throw std::runtime_error("read_capture: cannot open " + bin_path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMatrixMagic, 4) != 0) throw std::runtime_error("read_capture: bad magic");
    std::uint32_t version = 0;
    std::uint64_t frames = 0, subs = 0;
    std::uint8_t aliased = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&frames), 8);
    is.read(reinterpret_cast<char*>(&subs), 8);
    is.read(reinterpret_cast<char*>(&aliased), 1);
    if (!is || version != 1) throw std::runtime_error("read_capture: bad header");

    CaptureResult out;
    out.matrix.num_frames = frames;
    out.matrix.num_subcarriers = subs;
    out.matrix.doppler_aliased = aliased != 0;
    out.matrix.data.resize(frames * subs);
    is.read(reinterpret_cast<char*>(out.matrix.data.data()),
            static_cast<std::streamsize>(out.matrix.data.size() * sizeof(Complex)));
    if (!is) throw std::runtime_error("read_capture: truncated matrix");

    std::ifstream ss(dir / (id + ".json"));
    if (!ss) throw std::runtime_error("read_capture: missing sidecar for " + id);
    json side;
    ss >> side;
    json spec_json = side;
    spec_json.erase("intervals");
    out.spec = parse_capture(spec_json, 0);
    if (side.contains("intervals")) {
        for (const auto& ij : side["intervals"]) {
            out.intervals.push_back({sim::gesture_kind_from_string(ij.at("kind").get<std::string>()),
                                     ij.at("start_s").get<double>(), ij.at("end_s").get<double>()});
        }
    }
    return out;
}

void write_archive_index(const std::filesystem::path& dir, const Scenario& scenario) {
    std::filesystem::create_directories(dir);
    json j;
    j["schema_version"] = 1;
    json radio;
    radio["carrier_freq_hz"] = scenario.radio.carrier_freq_hz;
    radio["bandwidth_hz"] = scenario.radio.bandwidth_hz;
    radio["num_subcarriers"] = scenario.radio.num_subcarriers;
    radio["frame_interval_s"] = scenario.radio.frame_interval_s;
    j["radio"] = radio;
    j["captures"] = json::array();
    for (const auto& c : scenario.captures) j["captures"].push_back(c.id);
    std::ofstream os(dir / "index.json");
    os << j.dump(2) << '\n';
}

std::vector<std::string> read_archive_index(const std::filesystem::path& dir, RadioConfig* radio) {
    std::ifstream is(dir / "index.json");
    if (!is) throw std::runtime_error("read_archive_index: missing index.json in " + dir.string());
    json j;
    is >> j;
    if (radio != nullptr && j.contains("radio")) *radio = parse_radio(j["radio"]);
    std::vector<std::string> ids;
    for (const auto& id : j.at("captures")) ids.push_back(id.get<std::string>());
    return ids;
}

std::vector<rd::RDClip> run_pipeline(const CaptureResult& capture, const RadioConfig& radio,
                                     const PipelineConfig& pcfg) {
    pcfg.grid.validate();
    pcfg.sync.validate();

    ChannelMatrix d = capture.matrix;
    if (pcfg.delay_calibration) sync::calibrate_timing(d, pcfg.sync.upsample_factor);
    if (pcfg.phase_correction) sync::phase_correct(d, pcfg.sync);

    const rd::RangeDopplerTransform transform(radio, pcfg.grid);
    const auto profile = transform.delay_profile(d);

    const std::size_t m_cpi = pcfg.grid.cpi_frames;
    const std::size_t hop = pcfg.grid.cpi_hop_frames;
    std::vector<std::vector<float>> frames;
    std::vector<double> timestamps;
    for (std::size_t begin = 0; begin + m_cpi <= d.num_frames; begin += hop) {
        const double t = static_cast<double>(begin) * radio.frame_interval_s;
        const rd::RDMap map = transform.map_from_profile(profile, begin, t, /*subtract_cpi_mean=*/true);
        frames.push_back(rd::normalize_frame(map));
        timestamps.push_back(t);
    }

    const double frame_span = static_cast<double>(m_cpi) * radio.frame_interval_s;
    auto clips = rd::segment_clips(frames, timestamps, frame_span, capture.intervals, pcfg.clip_window,
                                   pcfg.clip_stride);
    for (auto& c : clips) {
        c.user_id = capture.spec.user;
        c.location_id = capture.spec.location;
    }
    return clips;
}

Scenario make_benchmark_scenario(const RadioConfig& radio, std::size_t users, std::size_t reps,
                                 std::uint64_t seed, bool with_movers, int location_override) {
    Scenario s;
    s.radio = radio;
    s.seed = seed;

    // persistent per-user traits: who moves how fast, how far, where they sit
    const double speed[] = {0.88, 1.00, 1.12, 0.94, 1.06, 0.97, 1.09, 0.91};
    const double range[] = {0.20, 0.24, 0.18, 0.27, 0.22, 0.25, 0.19, 0.23};
    const double duration[] = {2.4, 2.2, 2.6, 2.3, 2.5, 2.4, 2.2, 2.5};

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t u = 0; u < users; ++u) {
        const std::uint32_t location =
            location_override >= 0 ? static_cast<std::uint32_t>(location_override) : (u < 2 ? 0u : 1u);
        for (int g = 0; g < sim::kNumGestureKinds; ++g) {
            for (std::size_t rep = 0; rep < reps; ++rep) {
                CaptureSpec c;
                c.id = "u" + std::to_string(u) + "_" + sim::to_string(static_cast<sim::GestureKind>(g)) +
                       "_r" + std::to_string(rep);
                c.user = static_cast<std::uint32_t>(u);
                c.location = location;
                c.duration_s = 4.7;
                c.seed = seed + 7919ull * (u * 1000 + static_cast<std::size_t>(g) * 100 + rep) + 13ull;

                c.impairments.coupling_amplitude = Complex{25.0 + 10.0 * unit(rng), 0.0};
                c.impairments.noise_power = 1.5 + 1.0 * unit(rng);
                c.impairments.timing_offset_samples = -2.0 + 4.0 * unit(rng);
                c.impairments.phase_drift_std = 0.02 + 0.03 * unit(rng);
                c.impairments.rng_seed = c.seed ^ 0xFACEull;

                GestureEvent ev;
                ev.kind = static_cast<sim::GestureKind>(g);
                ev.start_s = 0.9 + 0.2 * (unit(rng) - 0.5);
                ev.duration_s = duration[u % 8] * (1.0 + 0.06 * (unit(rng) - 0.5));
                ev.base_range_m = range[u % 8];
                ev.speed_scale = speed[u % 8];
                ev.seed = c.seed ^ 0xBEEFull;
                c.gestures.push_back(ev);

                if (with_movers) {
                    BackgroundMover m1;
                    m1.range_m = 1.1 + 0.5 * unit(rng);
                    m1.velocity_mps = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.15 + 0.15 * unit(rng));
                    if (m1.velocity_mps > 0 && m1.range_m > 1.4) m1.velocity_mps *= -1.0;  // keep within ~1-2 m
                    m1.amplitude = 0.3 + 0.3 * unit(rng);
                    c.background.push_back(m1);
                    BackgroundMover m2;
                    m2.range_m = 1.6 + 0.4 * unit(rng);
                    m2.velocity_mps = -(0.10 + 0.10 * unit(rng));
                    m2.amplitude = 0.2 + 0.2 * unit(rng);
                    c.background.push_back(m2);
                }
                s.captures.push_back(std::move(c));
            }
        }
    }
    return s;
}

std::vector<rd::RDClip> build_benchmark_clips(const Scenario& scenario, const PipelineConfig& pcfg) {
    std::vector<rd::RDClip> dataset;
    for (const auto& spec : scenario.captures) {
        const auto capture = synthesize_capture(scenario.radio, spec);
        auto clips = run_pipeline(capture, scenario.radio, pcfg);

        // keep the labeled window whose center sits closest to the gesture center
        const rd::RDClip* best = nullptr;
        double best_dist = 0.0;
        const double frame_span = static_cast<double>(pcfg.grid.cpi_frames) * scenario.radio.frame_interval_s;
        const double clip_len = static_cast<double>(pcfg.clip_window - 1) *
                                static_cast<double>(pcfg.grid.cpi_hop_frames) * scenario.radio.frame_interval_s +
                                frame_span;
        for (const auto& c : clips) {
            if (!c.label) continue;
            double gesture_center = 0.0;
            for (const auto& iv : capture.intervals) {
                if (iv.kind == *c.label) gesture_center = 0.5 * (iv.start_s + iv.end_s);
            }
            const double clip_center = c.start_time_s + 0.5 * clip_len;
            const double dist = std::abs(clip_center - gesture_center);
            if (best == nullptr || dist < best_dist) {
                best = &c;
                best_dist = dist;
            }
        }
        if (best == nullptr) {
            throw std::runtime_error("build_benchmark_clips: capture '" + spec.id + "' produced no labeled clip");
        }
        dataset.push_back(*best);
    }
    return dataset;
}

}  // namespace rdsense::scen
