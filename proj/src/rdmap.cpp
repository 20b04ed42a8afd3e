// SPDX-License-Identifier: Apache-2.0
#include "rdsense/rdmap.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rdsense/sync.hpp"

namespace rdsense::rd {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void RDGrid::validate() const {
    if (range_max_m <= range_min_m) throw std::invalid_argument("RDGrid: range_max must exceed range_min");
    if (range_cell_m <= 0.0 || velocity_cell_mps <= 0.0) throw std::invalid_argument("RDGrid: cells must be positive");
    if (velocity_span_mps <= 0.0) throw std::invalid_argument("RDGrid: velocity span must be positive");
    if (cpi_frames < 2) throw std::invalid_argument("RDGrid: cpi_frames must be >= 2");
    if (cpi_hop_frames < 1) throw std::invalid_argument("RDGrid: cpi_hop must be >= 1");
}

double estimate_noise_floor(std::span<const double> linear_power) {
    if (linear_power.empty()) throw std::invalid_argument("estimate_noise_floor: empty grid");
    std::vector<double> sorted(linear_power.begin(), linear_power.end());
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    if (median <= 0.0) throw std::invalid_argument("estimate_noise_floor: zero-power grid");
    return 10.0 * std::log10(median);
}

RangeDopplerTransform::RangeDopplerTransform(const RadioConfig& cfg, const RDGrid& grid)
    : cfg_(cfg), grid_(grid) {
    cfg.validate();
    grid.validate();
    num_range_ = grid.num_range_cells();
    num_velocity_ = grid.num_velocity_cells();

    const std::size_t n_sub = cfg.num_subcarriers;
    const double df = cfg.subcarrier_spacing_hz();
    const double lambda = cfg.wavelength_m();
    const double t_frame = cfg.frame_interval_s;
    const std::size_t m_cpi = grid.cpi_frames;

    // Correlate each subcarrier against exp(+j 2 pi n df tau_r): a target at
    // tau_r sums coherently to amplitude 1 with the 1/N scaling.
    delay_kernel_.resize(n_sub * num_range_);
    for (std::size_t n = 0; n < n_sub; ++n) {
        for (std::size_t r = 0; r < num_range_; ++r) {
            const double tau = 2.0 * grid.range_at(r) / kSpeedOfLight;
            delay_kernel_[n * num_range_ + r] =
                std::polar(1.0 / static_cast<double>(n_sub), kTwoPi * static_cast<double>(n) * df * tau);
        }
    }

    // Velocity cell v maps to Doppler f = -2 v / lambda; evaluate the frame
    // DFT at those frequencies with 1/M scaling (unit target -> unit peak).
    doppler_kernel_.resize(num_velocity_ * m_cpi);
    for (std::size_t j = 0; j < num_velocity_; ++j) {
        const double doppler_hz = -2.0 * grid_.velocity_at(j) / lambda;
        for (std::size_t m = 0; m < m_cpi; ++m) {
            doppler_kernel_[j * m_cpi + m] = std::polar(
                1.0 / static_cast<double>(m_cpi), -kTwoPi * t_frame * static_cast<double>(m) * doppler_hz);
        }
    }
}

std::vector<Complex> RangeDopplerTransform::delay_profile(const ChannelMatrix& d) const {
    if (d.num_subcarriers != cfg_.num_subcarriers) {
        throw std::invalid_argument("RangeDopplerTransform: subcarrier count mismatch");
    }
    const std::size_t n_sub = cfg_.num_subcarriers;
    std::vector<Complex> profile(d.num_frames * num_range_, Complex{0.0, 0.0});
    for (std::size_t m = 0; m < d.num_frames; ++m) {
        const Complex* row = d.data.data() + m * n_sub;
        Complex* out = profile.data() + m * num_range_;
        for (std::size_t n = 0; n < n_sub; ++n) {
            const Complex v = row[n];
            const Complex* kern = delay_kernel_.data() + n * num_range_;
            for (std::size_t r = 0; r < num_range_; ++r) out[r] += v * kern[r];
        }
    }
    return profile;
}

std::vector<double> RangeDopplerTransform::linear_power(const ChannelMatrix& d, std::size_t frame_begin) const {
    const std::size_t m_cpi = grid_.cpi_frames;
    if (frame_begin + m_cpi > d.num_frames) {
        throw std::invalid_argument("RangeDopplerTransform: CPI exceeds available frames");
    }
    const ChannelMatrix slice = d.slice(frame_begin, m_cpi);
    const std::vector<Complex> profile = delay_profile(slice);

    std::vector<double> power(num_range_ * num_velocity_, 0.0);
    for (std::size_t j = 0; j < num_velocity_; ++j) {
        const Complex* kern = doppler_kernel_.data() + j * m_cpi;
        for (std::size_t r = 0; r < num_range_; ++r) {
            Complex acc{0.0, 0.0};
            for (std::size_t m = 0; m < m_cpi; ++m) acc += profile[m * num_range_ + r] * kern[m];
            power[r * num_velocity_ + j] = std::norm(acc);
        }
    }
    return power;
}

namespace {

RDMap power_to_map(std::vector<double>&& power, std::size_t num_range, std::size_t num_velocity,
                   double timestamp_s, bool aliased) {
    RDMap out;
    out.num_range = num_range;
    out.num_velocity = num_velocity;
    out.timestamp_s = timestamp_s;
    out.velocity_aliased = aliased;
    out.noise_floor_db = estimate_noise_floor(power);
    out.snr_db.resize(power.size());
    for (std::size_t i = 0; i < power.size(); ++i) {
        const double db = power[i] > 0.0 ? 10.0 * std::log10(power[i]) : -400.0;
        out.snr_db[i] = db - out.noise_floor_db;
    }
    return out;
}

}  // namespace

RDMap RangeDopplerTransform::map(const ChannelMatrix& d, std::size_t frame_begin, double timestamp_s) const {
    std::vector<double> power = linear_power(d, frame_begin);
    return power_to_map(std::move(power), num_range_, num_velocity_, timestamp_s,
                        grid_.velocity_span_mps > cfg_.unambiguous_velocity_mps() + 1e-12);
}

RDMap RangeDopplerTransform::map_from_profile(std::span<const Complex> profile, std::size_t frame_begin,
                                              double timestamp_s, bool subtract_cpi_mean) const {
    const std::size_t m_cpi = grid_.cpi_frames;
    if ((frame_begin + m_cpi) * num_range_ > profile.size()) {
        throw std::invalid_argument("map_from_profile: CPI exceeds the profile");
    }

    std::vector<Complex> cpi(m_cpi * num_range_);
    for (std::size_t m = 0; m < m_cpi; ++m) {
        const Complex* src = profile.data() + (frame_begin + m) * num_range_;
        std::copy(src, src + num_range_, cpi.begin() + static_cast<std::ptrdiff_t>(m * num_range_));
    }
    if (subtract_cpi_mean) {
        for (std::size_t r = 0; r < num_range_; ++r) {
            Complex mean{0.0, 0.0};
            for (std::size_t m = 0; m < m_cpi; ++m) mean += cpi[m * num_range_ + r];
            mean /= static_cast<double>(m_cpi);
            for (std::size_t m = 0; m < m_cpi; ++m) cpi[m * num_range_ + r] -= mean;
        }
    }

    std::vector<double> power(num_range_ * num_velocity_, 0.0);
    for (std::size_t j = 0; j < num_velocity_; ++j) {
        const Complex* kern = doppler_kernel_.data() + j * m_cpi;
        for (std::size_t r = 0; r < num_range_; ++r) {
            Complex acc{0.0, 0.0};
            for (std::size_t m = 0; m < m_cpi; ++m) acc += cpi[m * num_range_ + r] * kern[m];
            power[r * num_velocity_ + j] = std::norm(acc);
        }
    }
    return power_to_map(std::move(power), num_range_, num_velocity_, timestamp_s,
                        grid_.velocity_span_mps > cfg_.unambiguous_velocity_mps() + 1e-12);
}

std::vector<Complex> native_doppler_spectrum(std::span<const Complex> gate_series) {
    const std::size_t m = gate_series.size();
    if (m == 0) throw std::invalid_argument("native_doppler_spectrum: empty series");
    std::vector<Complex> spec(m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (std::size_t d = 0; d < m; ++d) {
        Complex acc{0.0, 0.0};
        const Complex w = std::polar(1.0, -kTwoPi * static_cast<double>(d) / static_cast<double>(m));
        Complex rot{1.0, 0.0};
        for (std::size_t t = 0; t < m; ++t) {
            acc += gate_series[t] * rot;
            rot *= w;
        }
        spec[d] = acc * scale;
    }
    return spec;
}

std::vector<float> normalize_frame(const RDMap& map, std::size_t out_hw) {
    if (map.num_range == 0 || map.num_velocity == 0) throw std::invalid_argument("normalize_frame: empty map");
    const double lo = kSnrClipLowDb;
    const double hi = kSnrClipHighDb;

    // clip + scale at source resolution
    std::vector<double> unit(map.snr_db.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        const double v = std::clamp(map.snr_db[i], lo, hi);
        unit[i] = (v - lo) / (hi - lo);
    }

    // bilinear resize with half-pixel centers (constants stay constant)
    std::vector<float> out(out_hw * out_hw);
    const double sr = static_cast<double>(map.num_range) / static_cast<double>(out_hw);
    const double sv = static_cast<double>(map.num_velocity) / static_cast<double>(out_hw);
    for (std::size_t y = 0; y < out_hw; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sr - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(map.num_range - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, map.num_range - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_hw; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sv - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(map.num_velocity - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, map.num_velocity - 1);
            const double wx = fx - static_cast<double>(x0);
            const double v00 = unit[y0 * map.num_velocity + x0];
            const double v01 = unit[y0 * map.num_velocity + x1];
            const double v10 = unit[y1 * map.num_velocity + x0];
            const double v11 = unit[y1 * map.num_velocity + x1];
            const double v = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * ((1.0 - wx) * v10 + wx * v11);
            out[y * out_hw + x] = static_cast<float>(v);
        }
    }
    return out;
}

std::vector<RDClip> segment_clips(const std::vector<std::vector<float>>& frames,
                                  const std::vector<double>& timestamps, double frame_span_s,
                                  const std::vector<GestureInterval>& gestures, std::size_t window,
                                  std::size_t stride, std::size_t frame_hw) {
    if (frames.size() != timestamps.size()) throw std::invalid_argument("segment_clips: frame/timestamp count mismatch");
    if (window == 0 || stride == 0) throw std::invalid_argument("segment_clips: window and stride must be positive");
    std::vector<RDClip> clips;
    if (frames.size() < window) return clips;

    for (std::size_t begin = 0; begin + window <= frames.size(); begin += stride) {
        const double t0 = timestamps[begin];
        const double t1 = timestamps[begin + window - 1] + frame_span_s;
        RDClip clip;
        clip.num_frames = window;
        clip.frame_hw = frame_hw;
        clip.start_time_s = t0;
        clip.values.reserve(window * frame_hw * frame_hw);
        for (std::size_t i = 0; i < window; ++i) {
            const auto& f = frames[begin + i];
            if (f.size() != frame_hw * frame_hw) throw std::invalid_argument("segment_clips: frame size mismatch");
            clip.values.insert(clip.values.end(), f.begin(), f.end());
        }
        // complete-containment rule: the whole annotated interval must fit
        for (const auto& g : gestures) {
            if (g.start_s >= t0 && g.end_s <= t1) {
                clip.label = g.kind;
                break;
            }
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

VelocitySpectrogram velocity_spectrogram(const ChannelMatrix& stream, const RadioConfig& cfg,
                                         const RDGrid& grid, SpectrogramMode mode, double threshold_m) {
    cfg.validate();
    grid.validate();
    if (mode == SpectrogramMode::kRangeFiltered) {
        if (threshold_m <= grid.range_min_m) {
            throw std::invalid_argument("velocity_spectrogram: threshold below the grid start");
        }
    }
    const std::size_t m_cpi = grid.cpi_frames;
    if (stream.num_frames < m_cpi) throw std::invalid_argument("velocity_spectrogram: stream shorter than one CPI");

    const std::size_t num_vel = grid.num_velocity_cells();
    const std::size_t num_cpis = (stream.num_frames - m_cpi) / grid.cpi_hop_frames + 1;
    const double t_frame = cfg.frame_interval_s;
    const double lambda = cfg.wavelength_m();
    const std::size_t n_sub = cfg.num_subcarriers;
    const double df = cfg.subcarrier_spacing_hz();

    // retained gates: range_min .. threshold at range_cell spacing
    std::size_t num_gates = 1;
    if (mode == SpectrogramMode::kRangeFiltered) {
        num_gates = static_cast<std::size_t>((threshold_m - grid.range_min_m) / grid.range_cell_m + 1e-9) + 1;
    }

    std::vector<Complex> delay_kernel;
    if (mode == SpectrogramMode::kRangeFiltered) {
        delay_kernel.resize(n_sub * num_gates);
        for (std::size_t n = 0; n < n_sub; ++n) {
            for (std::size_t r = 0; r < num_gates; ++r) {
                const double tau = 2.0 * (grid.range_min_m + static_cast<double>(r) * grid.range_cell_m) / kSpeedOfLight;
                delay_kernel[n * num_gates + r] =
                    std::polar(1.0 / static_cast<double>(n_sub), kTwoPi * static_cast<double>(n) * df * tau);
            }
        }
    }

    std::vector<Complex> doppler_kernel(num_vel * m_cpi);
    for (std::size_t j = 0; j < num_vel; ++j) {
        const auto half = static_cast<double>(num_vel / 2);
        const double v = (static_cast<double>(j) - half) * grid.velocity_cell_mps;
        const double doppler_hz = -2.0 * v / lambda;
        for (std::size_t m = 0; m < m_cpi; ++m) {
            doppler_kernel[j * m_cpi + m] =
                std::polar(1.0 / static_cast<double>(m_cpi), -kTwoPi * t_frame * static_cast<double>(m) * doppler_hz);
        }
    }

    std::vector<double> power(num_vel * num_cpis, 0.0);
    std::vector<double> timestamps(num_cpis);
    std::vector<Complex> gate_series(m_cpi * num_gates);

    for (std::size_t c = 0; c < num_cpis; ++c) {
        const std::size_t begin = c * grid.cpi_hop_frames;
        timestamps[c] = static_cast<double>(begin) * t_frame;

        std::fill(gate_series.begin(), gate_series.end(), Complex{0.0, 0.0});
        for (std::size_t m = 0; m < m_cpi; ++m) {
            const Complex* row = stream.data.data() + (begin + m) * n_sub;
            Complex* out = gate_series.data() + m * num_gates;
            if (mode == SpectrogramMode::kRangeFiltered) {
                for (std::size_t n = 0; n < n_sub; ++n) {
                    const Complex v = row[n];
                    const Complex* kern = delay_kernel.data() + n * num_gates;
                    for (std::size_t r = 0; r < num_gates; ++r) out[r] += v * kern[r];
                }
            } else {
                Complex acc{0.0, 0.0};
                for (std::size_t n = 0; n < n_sub; ++n) acc += row[n];
                out[0] = acc / static_cast<double>(n_sub);
            }
        }

        // per-CPI static removal (self-interference residue)
        for (std::size_t r = 0; r < num_gates; ++r) {
            Complex mean{0.0, 0.0};
            for (std::size_t m = 0; m < m_cpi; ++m) mean += gate_series[m * num_gates + r];
            mean /= static_cast<double>(m_cpi);
            for (std::size_t m = 0; m < m_cpi; ++m) gate_series[m * num_gates + r] -= mean;
        }

        for (std::size_t j = 0; j < num_vel; ++j) {
            const Complex* kern = doppler_kernel.data() + j * m_cpi;
            double sum = 0.0;
            for (std::size_t r = 0; r < num_gates; ++r) {
                Complex acc{0.0, 0.0};
                for (std::size_t m = 0; m < m_cpi; ++m) acc += gate_series[m * num_gates + r] * kern[m];
                sum += std::norm(acc);
            }
            power[j * num_cpis + c] = sum;
        }
    }

    VelocitySpectrogram out;
    out.num_velocity = num_vel;
    out.num_times = num_cpis;
    out.mode = mode;
    out.timestamps_s = std::move(timestamps);
    out.noise_floor_db = estimate_noise_floor(power);
    out.snr_db.resize(power.size());
    for (std::size_t i = 0; i < power.size(); ++i) {
        const double db = power[i] > 0.0 ? 10.0 * std::log10(power[i]) : -400.0;
        out.snr_db[i] = db - out.noise_floor_db;
    }
    return out;
}

}  // namespace rdsense::rd
