// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rdsense/rdmap.hpp"

namespace rdsense::io {

/// Binary clip store, little-endian. Layout:
///   magic "RDCS" | u32 version | u32 clip_count | u32 frames | u32 height |
///   u32 width | records | u64 fnv1a checksum of all record bytes.
/// Each record: i32 label (-1 = none) | u32 user | u32 location |
///   f64 start_time | f32 payload[frames*height*width].
inline constexpr std::uint32_t kClipStoreVersion = 1;

/// Writes clips plus a JSON manifest sidecar at <path>.manifest.json.
/// Returns the number of clips written. Round-trips are bit-exact.
std::size_t save_clips(const std::vector<rd::RDClip>& clips, const std::filesystem::path& path);

/// Loads a clip store, verifying magic, version, length, and checksum.
std::vector<rd::RDClip> load_clips(const std::filesystem::path& path);

enum class SplitProtocol { kInDomain, kLeaveOneUserOut, kCrossLocation };

struct SplitSpec {
    SplitProtocol protocol = SplitProtocol::kInDomain;
    double train_frac = 0.70;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint32_t held_out_user = 0;                 // kLeaveOneUserOut
    std::vector<std::uint32_t> train_locations;      // kCrossLocation
    std::uint32_t test_location = 0;                 // kCrossLocation
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Partition clips by the configured protocol. Partitions are disjoint,
/// exhaustive, and deterministic under the seed. Held-out users/locations
/// never appear in train or val.
SplitIndices make_split(const std::vector<rd::RDClip>& clips, const SplitSpec& spec);

}  // namespace rdsense::io
