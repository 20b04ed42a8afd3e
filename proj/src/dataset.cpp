// SPDX-License-Identifier: Apache-2.0
#include "rdsense/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace rdsense::io {

namespace {

constexpr std::array<char, 4> kMagic = {'R', 'D', 'C', 'S'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t len, std::uint64_t state = 0xCBF29CE484222325ull) {
    for (std::size_t i = 0; i < len; ++i) {
        state ^= data[i];
        state *= 0x100000001B3ull;
    }
    return state;
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("clip store: truncated file");
    return v;
}

}  // namespace

std::size_t save_clips(const std::vector<rd::RDClip>& clips, const std::filesystem::path& path) {
    std::size_t frames = 32, hw = 64;
    if (!clips.empty()) {
        frames = clips.front().num_frames;
        hw = clips.front().frame_hw;
    }
    for (const auto& c : clips) {
        if (c.num_frames != frames || c.frame_hw != hw || c.values.size() != frames * hw * hw) {
            throw std::invalid_argument("save_clips: inconsistent clip shape");
        }
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_clips: cannot open " + path.string());
    os.write(kMagic.data(), kMagic.size());
    write_pod(os, kClipStoreVersion);
    write_pod(os, static_cast<std::uint32_t>(clips.size()));
    write_pod(os, static_cast<std::uint32_t>(frames));
    write_pod(os, static_cast<std::uint32_t>(hw));
    write_pod(os, static_cast<std::uint32_t>(hw));

    std::uint64_t checksum = 0xCBF29CE484222325ull;
    for (const auto& c : clips) {
        const std::int32_t label = c.label ? static_cast<std::int32_t>(*c.label) : -1;
        write_pod(os, label);
        write_pod(os, c.user_id);
        write_pod(os, c.location_id);
        write_pod(os, c.start_time_s);
        os.write(reinterpret_cast<const char*>(c.values.data()),
                 static_cast<std::streamsize>(c.values.size() * sizeof(float)));
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&label), sizeof(label), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&c.user_id), sizeof(c.user_id), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&c.location_id), sizeof(c.location_id), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&c.start_time_s), sizeof(c.start_time_s), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(c.values.data()), c.values.size() * sizeof(float), checksum);
    }
    write_pod(os, checksum);
    if (!os) throw std::runtime_error("save_clips: write failed");
    os.close();

    // manifest sidecar
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["clip_count"] = clips.size();
    manifest["shape"] = {frames, hw, hw};
    std::map<std::string, std::size_t> label_counts;
    std::set<std::uint32_t> users, locations;
    std::size_t unlabeled = 0;
    for (const auto& c : clips) {
        if (c.label) {
            ++label_counts[sim::to_string(*c.label)];
        } else {
            ++unlabeled;
        }
        users.insert(c.user_id);
        locations.insert(c.location_id);
    }
    manifest["labels"] = label_counts;
    manifest["unlabeled"] = unlabeled;
    manifest["users"] = users;
    manifest["locations"] = locations;
    std::ofstream ms(path.string() + ".manifest.json");
    ms << manifest.dump(2) << '\n';

    return clips.size();
}

std::vector<rd::RDClip> load_clips(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_clips: cannot open " + path.string());

    std::array<char, 4> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw std::runtime_error("load_clips: bad magic");
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kClipStoreVersion) {
        throw std::runtime_error("load_clips: unsupported version " + std::to_string(version));
    }
    const auto count = read_pod<std::uint32_t>(is);
    const auto frames = read_pod<std::uint32_t>(is);
    const auto height = read_pod<std::uint32_t>(is);
    const auto width = read_pod<std::uint32_t>(is);
    if (height != width) throw std::runtime_error("load_clips: non-square frames unsupported");

    const std::size_t payload = static_cast<std::size_t>(frames) * height * width;
    std::vector<rd::RDClip> clips;
    clips.reserve(count);
    std::uint64_t checksum = 0xCBF29CE484222325ull;
    for (std::uint32_t i = 0; i < count; ++i) {
        rd::RDClip c;
        c.num_frames = frames;
        c.frame_hw = height;
        const auto label = read_pod<std::int32_t>(is);
        c.user_id = read_pod<std::uint32_t>(is);
        c.location_id = read_pod<std::uint32_t>(is);
        c.start_time_s = read_pod<double>(is);
        c.values.resize(payload);
        is.read(reinterpret_cast<char*>(c.values.data()), static_cast<std::streamsize>(payload * sizeof(float)));
        if (!is) throw std::runtime_error("load_clips: truncated payload in clip " + std::to_string(i));
        if (label >= 0) {
            if (label >= sim::kNumGestureKinds) throw std::runtime_error("load_clips: bad label id");
            c.label = static_cast<sim::GestureKind>(label);
        }
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&label), sizeof(label), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&c.user_id), sizeof(c.user_id), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&c.location_id), sizeof(c.location_id), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(&c.start_time_s), sizeof(c.start_time_s), checksum);
        checksum = fnv1a(reinterpret_cast<const std::uint8_t*>(c.values.data()), payload * sizeof(float), checksum);
        clips.push_back(std::move(c));
    }
    const auto stored = read_pod<std::uint64_t>(is);
    if (stored != checksum) throw std::runtime_error("load_clips: checksum mismatch");
    return clips;
}

void SplitSpec::validate() const {
    if (train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0 ||
        std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw std::invalid_argument("SplitSpec: fractions must be non-negative and sum to 1");
    }
}

SplitIndices make_split(const std::vector<rd::RDClip>& clips, const SplitSpec& spec) {
    spec.validate();
    SplitIndices out;
    const std::size_t n = clips.size();

    switch (spec.protocol) {
        case SplitProtocol::kInDomain: {
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            std::mt19937_64 rng(spec.rng_seed);
            std::shuffle(order.begin(), order.end(), rng);
            const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(n)));
            const auto n_val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(n)));
            out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
            out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
            out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
            break;
        }
        case SplitProtocol::kLeaveOneUserOut: {
            bool seen = false;
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i) {
                if (clips[i].user_id == spec.held_out_user) {
                    out.test.push_back(i);
                    seen = true;
                } else {
                    rest.push_back(i);
                }
            }
            if (!seen) throw std::invalid_argument("make_split: held-out user not present in the store");
            // remaining data splits train/val at the configured proportion
            std::mt19937_64 rng(spec.rng_seed);
            std::shuffle(rest.begin(), rest.end(), rng);
            const double denom = spec.train_frac + spec.val_frac;
            const auto n_train = static_cast<std::size_t>(
                std::floor(denom > 0.0 ? spec.train_frac / denom * static_cast<double>(rest.size()) : 0.0));
            out.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
            out.val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
            break;
        }
        case SplitProtocol::kCrossLocation: {
            std::set<std::uint32_t> train_locs(spec.train_locations.begin(), spec.train_locations.end());
            if (train_locs.count(spec.test_location) != 0) {
                throw std::invalid_argument("make_split: test location listed among train locations");
            }
            std::set<std::uint32_t> present;
            for (const auto& c : clips) present.insert(c.location_id);
            for (auto loc : train_locs) {
                if (present.count(loc) == 0) throw std::invalid_argument("make_split: unknown train location id");
            }
            if (present.count(spec.test_location) == 0) {
                throw std::invalid_argument("make_split: unknown test location id");
            }
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < n; ++i) {
                if (clips[i].location_id == spec.test_location) {
                    out.test.push_back(i);
                } else if (train_locs.count(clips[i].location_id) != 0) {
                    pool.push_back(i);
                } else {
                    throw std::invalid_argument("make_split: clip location " +
                                                std::to_string(clips[i].location_id) +
                                                " is neither a train nor the test location");
                }
            }
            std::mt19937_64 rng(spec.rng_seed);
            std::shuffle(pool.begin(), pool.end(), rng);
            const double denom = spec.train_frac + spec.val_frac;
            const auto n_train = static_cast<std::size_t>(
                std::floor(denom > 0.0 ? spec.train_frac / denom * static_cast<double>(pool.size()) : 0.0));
            out.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
            out.val.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
            break;
        }
    }
    return out;
}

}  // namespace rdsense::io
