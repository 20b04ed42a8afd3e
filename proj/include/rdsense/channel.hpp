// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace rdsense {

using Complex = std::complex<double>;

/// Frequency-domain channel matrix D(m, n): one row per OFDM frame m,
/// one column per subcarrier n. Stored frame-major.
struct ChannelMatrix {
    std::size_t num_frames = 0;
    std::size_t num_subcarriers = 0;
    std::vector<Complex> data;
    bool doppler_aliased = false;  // set when a track exceeded the unambiguous span

    static ChannelMatrix zeros(std::size_t frames, std::size_t subcarriers) {
        ChannelMatrix d;
        d.num_frames = frames;
        d.num_subcarriers = subcarriers;
        d.data.assign(frames * subcarriers, Complex{0.0, 0.0});
        return d;
    }

    Complex& at(std::size_t m, std::size_t n) { return data[m * num_subcarriers + n]; }
    const Complex& at(std::size_t m, std::size_t n) const { return data[m * num_subcarriers + n]; }

    std::span<Complex> frame(std::size_t m) {
        return {data.data() + m * num_subcarriers, num_subcarriers};
    }
    std::span<const Complex> frame(std::size_t m) const {
        return {data.data() + m * num_subcarriers, num_subcarriers};
    }

    /// Copy of frames [begin, begin + count).
    ChannelMatrix slice(std::size_t begin, std::size_t count) const {
        if (begin + count > num_frames) throw std::out_of_range("ChannelMatrix::slice: range exceeds frame count");
        ChannelMatrix out;
        out.num_frames = count;
        out.num_subcarriers = num_subcarriers;
        out.doppler_aliased = doppler_aliased;
        out.data.assign(data.begin() + static_cast<std::ptrdiff_t>(begin * num_subcarriers),
                        data.begin() + static_cast<std::ptrdiff_t>((begin + count) * num_subcarriers));
        return out;
    }
};

}  // namespace rdsense
