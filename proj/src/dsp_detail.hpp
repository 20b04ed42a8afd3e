// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small direct-evaluation DFT helpers shared by the sync and RD pipelines.
// Sequence lengths here are a few hundred samples at most, so O(L^2)
// transforms are cheaper than pulling in an FFT dependency.

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace rdsense::detail {

using Complex = std::complex<double>;

inline std::vector<Complex> dft(std::span<const Complex> x) {
    const std::size_t len = x.size();
    std::vector<Complex> spec(len);
    const double step = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t f = 0; f < len; ++f) {
        const Complex w = std::polar(1.0, step * static_cast<double>(f));
        Complex acc{0.0, 0.0};
        Complex rot{1.0, 0.0};
        for (std::size_t t = 0; t < len; ++t) {
            acc += x[t] * rot;
            rot *= w;
        }
        spec[f] = acc;
    }
    return spec;
}

/// Band-limited (periodic) interpolation of a sequence from its DFT,
/// evaluated at fractional index pos. Frequencies are treated as signed so
/// the result matches frequency-domain zero-padding.
inline Complex interp_from_spectrum(std::span<const Complex> spec, double pos) {
    const auto len = static_cast<double>(spec.size());
    const std::size_t half = spec.size() / 2;
    const bool even = spec.size() % 2 == 0;
    Complex acc{0.0, 0.0};
    for (std::size_t f = 0; f < spec.size(); ++f) {
        if (even && f == half) {
            // split the Nyquist bin symmetrically
            const double ang = 2.0 * std::numbers::pi * static_cast<double>(half) * pos / len;
            acc += spec[f] * std::cos(ang);
            continue;
        }
        double sf = static_cast<double>(f);
        if (f > half) sf -= len;
        acc += spec[f] * std::polar(1.0, 2.0 * std::numbers::pi * sf * pos / len);
    }
    return acc / len;
}

/// Fractional offset (in samples, on the 1/upsample grid, within (-0.5, 0.5])
/// of the interpolated-magnitude peak of `seq` around integer index `center`.
/// Interpolation is periodic in the sequence length.
inline double zoom_peak_offset(std::span<const Complex> seq, std::size_t center, std::size_t upsample) {
    if (upsample == 0) throw std::invalid_argument("zoom_peak_offset: upsample factor must be >= 1");
    if (upsample == 1) return 0.0;
    const auto spec = dft(seq);
    const auto len = static_cast<double>(seq.size());
    const long u = static_cast<long>(upsample);
    double best_mag = -1.0;
    long best_k = 0;
    for (long k = -(u / 2) + 1; k <= u / 2; ++k) {
        double pos = static_cast<double>(center) + static_cast<double>(k) / static_cast<double>(u);
        pos = std::fmod(pos + len, len);
        const double mag = std::abs(interp_from_spectrum(spec, pos));
        if (mag > best_mag) {
            best_mag = mag;
            best_k = k;
        }
    }
    return static_cast<double>(best_k) / static_cast<double>(u);
}

}  // namespace rdsense::detail
