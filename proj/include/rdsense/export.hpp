// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "rdsense/rdmap.hpp"

namespace rdsense::rd {

/// Row-major CSV plus a .json sidecar with the axis metadata.
void export_rdmap_csv(const RDMap& map, const RDGrid& grid, const std::filesystem::path& path);
void export_spectrogram_csv(const VelocitySpectrogram& spec, const RDGrid& grid,
                            const std::filesystem::path& path);

/// 8-bit binary PGM heatmap; values are clamped to [lo_db, hi_db].
void export_rdmap_pgm(const RDMap& map, const std::filesystem::path& path, double lo_db = 0.0,
                      double hi_db = 40.0);
void export_spectrogram_pgm(const VelocitySpectrogram& spec, const std::filesystem::path& path,
                            double lo_db = 0.0, double hi_db = 40.0);

}  // namespace rdsense::rd
