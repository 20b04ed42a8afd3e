// SPDX-License-Identifier: Apache-2.0
#include "rdsense/sync.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>

#include "dsp_detail.hpp"

namespace rdsense::sync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool all_zero(std::span<const Complex> seq) {
    return std::all_of(seq.begin(), seq.end(), [](const Complex& v) { return v == Complex{0.0, 0.0}; });
}

// Full linear cross-correlation c[i] = sum_t conj(ref[t]) rx[t + i - (Lr - 1)].
// Index i runs over 0 .. Lx + Lr - 2; lag = i - (Lr - 1).
std::vector<Complex> cross_correlation(std::span<const Complex> rx, std::span<const Complex> ref) {
    const long lx = static_cast<long>(rx.size());
    const long lr = static_cast<long>(ref.size());
    std::vector<Complex> c(static_cast<std::size_t>(lx + lr - 1), Complex{0.0, 0.0});
    for (long i = 0; i < lx + lr - 1; ++i) {
        const long lag = i - (lr - 1);
        const long t_begin = std::max<long>(0, -lag);
        const long t_end = std::min<long>(lr, lx - lag);
        Complex acc{0.0, 0.0};
        for (long t = t_begin; t < t_end; ++t) {
            acc += std::conj(ref[static_cast<std::size_t>(t)]) * rx[static_cast<std::size_t>(t + lag)];
        }
        c[static_cast<std::size_t>(i)] = acc;
    }
    return c;
}

}  // namespace

void PhaseCorrectionLog::write_csv(std::ostream& os) const {
    os << "frame,theta_rad,reference_rad,fix_rad\n";
    for (std::size_t m = 0; m < frame_phase_rad.size(); ++m) {
        os << m << ',' << frame_phase_rad[m] << ',' << reference_phase_rad[m] << ',' << applied_fix_rad[m] << '\n';
    }
}

long coarse_delay(std::span<const Complex> rx, std::span<const Complex> ref) {
    if (rx.empty() || ref.empty()) throw std::invalid_argument("coarse_delay: empty sequence");
    if (ref.size() > rx.size()) throw std::invalid_argument("coarse_delay: reference longer than received sequence");
    if (all_zero(rx) || all_zero(ref)) throw std::invalid_argument("coarse_delay: all-zero input has no correlation peak");

    const auto c = cross_correlation(rx, ref);
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double mag = std::abs(c[i]);
        if (mag > best) {  // scan order breaks ties toward the smallest lag
            best = mag;
            best_i = i;
        }
    }
    return static_cast<long>(best_i) - static_cast<long>(ref.size() - 1);
}

double fine_delay(std::span<const Complex> rx, std::span<const Complex> ref, long coarse,
                  std::size_t upsample_factor) {
    if (upsample_factor == 0) throw std::invalid_argument("fine_delay: upsample factor must be >= 1");
    if (upsample_factor == 1) return 0.0;
    if (rx.empty() || ref.empty()) throw std::invalid_argument("fine_delay: empty sequence");

    const auto c = cross_correlation(rx, ref);
    const long center = coarse + static_cast<long>(ref.size() - 1);
    if (center < 0 || center >= static_cast<long>(c.size())) {
        throw std::invalid_argument("fine_delay: coarse lag outside the correlation support");
    }
    return detail::zoom_peak_offset(c, static_cast<std::size_t>(center), upsample_factor);
}

DelayEstimate estimate_delay(std::span<const Complex> rx, std::span<const Complex> ref,
                             std::size_t upsample_factor) {
    DelayEstimate est;
    est.coarse_samples = coarse_delay(rx, ref);
    est.fine_samples = fine_delay(rx, ref, est.coarse_samples, upsample_factor);
    est.effective_samples = static_cast<double>(est.coarse_samples) + est.fine_samples;
    return est;
}

PhaseCorrectionLog phase_correct(ChannelMatrix& d, const SyncConfig& cfg) {
    cfg.validate();
    if (d.num_frames < 2) throw std::invalid_argument("phase_correct: need at least 2 frames");
    if (d.num_subcarriers == 0) throw std::invalid_argument("phase_correct: empty frames");

    const double delta = cfg.phase_step_rad;
    PhaseCorrectionLog log;
    log.frame_phase_rad.resize(d.num_frames);
    log.reference_phase_rad.resize(d.num_frames);
    log.applied_fix_rad.resize(d.num_frames);

    std::deque<Complex> history;  // unit phasors of corrected frames

    for (std::size_t m = 0; m < d.num_frames; ++m) {
        auto row = d.frame(m);
        Complex mean{0.0, 0.0};
        for (const Complex& v : row) mean += v;
        mean /= static_cast<double>(d.num_subcarriers);
        if (mean == Complex{0.0, 0.0}) {
            throw std::invalid_argument("phase_correct: frame " + std::to_string(m) + " has undefined mean phase");
        }
        const double theta = std::arg(mean);
        log.frame_phase_rad[m] = theta;

        double fix = 0.0;
        double reference = theta;
        if (m > 0) {
            Complex ref_sum{0.0, 0.0};
            for (const Complex& p : history) ref_sum += p;
            reference = std::arg(ref_sum);
            const double delta_theta = std::arg(std::polar(1.0, reference - theta));
            fix = std::round(delta_theta / delta) * delta;
            if (fix != 0.0) {
                const Complex rot = std::polar(1.0, fix);
                for (Complex& v : row) v *= rot;
            }
        }
        log.reference_phase_rad[m] = reference;
        log.applied_fix_rad[m] = fix;

        history.push_back(std::polar(1.0, theta + fix));
        if (history.size() > cfg.history_len) history.pop_front();
    }
    return log;
}

void cancel_self_interference(ChannelMatrix& d) {
    if (d.num_frames < 2) throw std::invalid_argument("cancel_self_interference: need at least 2 frames");
    const std::size_t n_sub = d.num_subcarriers;
    std::vector<Complex> mean(n_sub, Complex{0.0, 0.0});
    for (std::size_t m = 0; m < d.num_frames; ++m) {
        const Complex* row = d.data.data() + m * n_sub;
        for (std::size_t n = 0; n < n_sub; ++n) mean[n] += row[n];
    }
    const double inv_m = 1.0 / static_cast<double>(d.num_frames);
    for (auto& v : mean) v *= inv_m;
    for (std::size_t m = 0; m < d.num_frames; ++m) {
        Complex* row = d.data.data() + m * n_sub;
        for (std::size_t n = 0; n < n_sub; ++n) row[n] -= mean[n];
    }
}

DelayEstimate calibrate_timing(ChannelMatrix& d, std::size_t upsample_factor) {
    if (upsample_factor == 0) throw std::invalid_argument("calibrate_timing: upsample factor must be >= 1");
    if (d.num_frames == 0 || d.num_subcarriers == 0) throw std::invalid_argument("calibrate_timing: empty matrix");
    const std::size_t n_sub = d.num_subcarriers;

    std::vector<Complex> mean(n_sub, Complex{0.0, 0.0});
    for (std::size_t m = 0; m < d.num_frames; ++m) {
        const Complex* row = d.data.data() + m * n_sub;
        for (std::size_t n = 0; n < n_sub; ++n) mean[n] += row[n];
    }
    if (all_zero(mean)) throw std::invalid_argument("calibrate_timing: zero frame average");

    // impulse response of the averaged frame (IDFT over subcarriers)
    std::vector<Complex> impulse(n_sub, Complex{0.0, 0.0});
    for (std::size_t t = 0; t < n_sub; ++t) {
        const Complex w = std::polar(1.0, kTwoPi * static_cast<double>(t) / static_cast<double>(n_sub));
        Complex rot{1.0, 0.0};
        Complex acc{0.0, 0.0};
        for (std::size_t n = 0; n < n_sub; ++n) {
            acc += mean[n] * rot;
            rot *= w;
        }
        impulse[t] = acc / static_cast<double>(n_sub);
    }

    std::size_t best_t = 0;
    double best_mag = -1.0;
    for (std::size_t t = 0; t < n_sub; ++t) {
        const double mag = std::abs(impulse[t]);
        if (mag > best_mag) {
            best_mag = mag;
            best_t = t;
        }
    }

    DelayEstimate est;
    est.fine_samples = detail::zoom_peak_offset(impulse, best_t, upsample_factor);
    // delays are circular; report the peak in signed samples
    long coarse = static_cast<long>(best_t);
    if (coarse > static_cast<long>(n_sub / 2)) coarse -= static_cast<long>(n_sub);
    est.coarse_samples = coarse;
    est.effective_samples = static_cast<double>(coarse) + est.fine_samples;

    if (est.effective_samples != 0.0) {
        const Complex step = std::polar(1.0, kTwoPi * est.effective_samples / static_cast<double>(n_sub));
        std::vector<Complex> ramp(n_sub);
        Complex r{1.0, 0.0};
        for (std::size_t n = 0; n < n_sub; ++n) {
            ramp[n] = r;
            r *= step;
        }
        for (std::size_t m = 0; m < d.num_frames; ++m) {
            Complex* row = d.data.data() + m * n_sub;
            for (std::size_t n = 0; n < n_sub; ++n) row[n] *= ramp[n];
        }
    }
    return est;
}

}  // namespace rdsense::sync
