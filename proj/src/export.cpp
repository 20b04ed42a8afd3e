// SPDX-License-Identifier: Apache-2.0
#include "rdsense/export.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace rdsense::rd {

namespace {

void write_sidecar(const std::filesystem::path& path, nlohmann::json meta) {
    std::ofstream os(path.string() + ".json");
    os << meta.dump(2) << '\n';
}

void write_pgm(const std::filesystem::path& path, const std::vector<double>& values, std::size_t width,
               std::size_t height, double lo, double hi) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("export: cannot open " + path.string());
    os << "P5\n" << width << ' ' << height << "\n255\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double unit = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
        const auto byte = static_cast<unsigned char>(unit * 255.0 + 0.5);
        os.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

}  // namespace

void export_rdmap_csv(const RDMap& map, const RDGrid& grid, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export: cannot open " + path.string());
    for (std::size_t r = 0; r < map.num_range; ++r) {
        for (std::size_t v = 0; v < map.num_velocity; ++v) {
            os << map.at(r, v);
            os << (v + 1 < map.num_velocity ? ',' : '\n');
        }
    }
    nlohmann::json meta;
    meta["rows"] = "range cells";
    meta["cols"] = "velocity cells";
    meta["range_min_m"] = grid.range_min_m;
    meta["range_cell_m"] = grid.range_cell_m;
    meta["velocity_cell_mps"] = grid.velocity_cell_mps;
    meta["velocity_span_mps"] = grid.velocity_span_mps;
    meta["noise_floor_db"] = map.noise_floor_db;
    meta["timestamp_s"] = map.timestamp_s;
    meta["unit"] = "dB SNR";
    write_sidecar(path, meta);
}

void export_spectrogram_csv(const VelocitySpectrogram& spec, const RDGrid& grid,
                            const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export: cannot open " + path.string());
    for (std::size_t v = 0; v < spec.num_velocity; ++v) {
        for (std::size_t t = 0; t < spec.num_times; ++t) {
            os << spec.at(v, t);
            os << (t + 1 < spec.num_times ? ',' : '\n');
        }
    }
    nlohmann::json meta;
    meta["rows"] = "velocity cells";
    meta["cols"] = "time (CPI)";
    meta["velocity_cell_mps"] = grid.velocity_cell_mps;
    meta["velocity_span_mps"] = grid.velocity_span_mps;
    meta["timestamps_s"] = spec.timestamps_s;
    meta["noise_floor_db"] = spec.noise_floor_db;
    meta["mode"] = spec.mode == SpectrogramMode::kRangeFiltered ? "range_filtered" : "all_subcarriers";
    meta["unit"] = "dB SNR";
    write_sidecar(path, meta);
}

void export_rdmap_pgm(const RDMap& map, const std::filesystem::path& path, double lo_db, double hi_db) {
    write_pgm(path, map.snr_db, map.num_velocity, map.num_range, lo_db, hi_db);
}

void export_spectrogram_pgm(const VelocitySpectrogram& spec, const std::filesystem::path& path,
                            double lo_db, double hi_db) {
    write_pgm(path, spec.snr_db, spec.num_times, spec.num_velocity, lo_db, hi_db);
}

}  // namespace rdsense::rd
