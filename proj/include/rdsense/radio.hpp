// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>

namespace rdsense {

inline constexpr double kSpeedOfLight = 299792458.0;

/// OFDM radio parameters of the sensing link. Defaults match a 6 GHz
/// Wi-Fi NIC: 160 MHz bandwidth, 512 subcarriers, channel estimates at 40 Hz.
struct RadioConfig {
    double carrier_freq_hz = 6.345e9;
    double bandwidth_hz = 160e6;
    std::size_t num_subcarriers = 512;
    double frame_interval_s = 0.025;

    double subcarrier_spacing_hz() const {
        return bandwidth_hz / static_cast<double>(num_subcarriers);
    }
    double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
    /// Largest radial speed representable without Doppler aliasing.
    double unambiguous_velocity_mps() const {
        return wavelength_m() / (4.0 * frame_interval_s);
    }
    /// Delay resolution of the raw band, expressed as one-way range.
    double native_range_bin_m() const {
        return kSpeedOfLight / (2.0 * bandwidth_hz);
    }

    void validate() const {
        if (num_subcarriers < 2) throw std::invalid_argument("RadioConfig: need at least 2 subcarriers");
        if (carrier_freq_hz <= 0.0) throw std::invalid_argument("RadioConfig: carrier frequency must be positive");
        if (bandwidth_hz <= 0.0) throw std::invalid_argument("RadioConfig: bandwidth must be positive");
        if (frame_interval_s <= 0.0) throw std::invalid_argument("RadioConfig: frame interval must be positive");
    }
};

}  // namespace rdsense
