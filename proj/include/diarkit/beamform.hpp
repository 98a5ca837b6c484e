#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "diarkit/wav.hpp"

namespace diarkit {

struct DasConfig {
    int reference_channel = 0;
    int max_delay = 160;  // samples searched on either side (10 ms at 16 kHz)
};

struct DasResult {
    MultiChannelAudio audio;       // single channel
    std::vector<int> delays;       // per input channel, relative to the reference
    bool single_channel_warning = false;
};

// GCC-PHAT time delay: returns d maximizing the phase-transform cross
// correlation, i.e. signal[t + d] is aligned with reference[t]. Ties resolve
// to the smallest |d|, then to the smaller d.
inline int gcc_phat_delay(const Eigen::Ref<const Eigen::VectorXd>& signal,
                          const Eigen::Ref<const Eigen::VectorXd>& reference, int max_delay) {
    if (signal.size() != reference.size()) {
        throw std::invalid_argument("gcc_phat_delay: length mismatch");
    }
    const Eigen::Index n = signal.size();
    Eigen::Index fft_size = 1;
    while (fft_size < 2 * n) fft_size <<= 1;

    std::vector<double> a(fft_size, 0.0), b(fft_size, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        a[i] = signal(i);
        b[i] = reference(i);
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> fa, fb;
    fft.fwd(fa, a);
    fft.fwd(fb, b);
    std::vector<std::complex<double>> cross(fft_size);
    for (Eigen::Index i = 0; i < fft_size; ++i) {
        const std::complex<double> c = fa[i] * std::conj(fb[i]);
        const double mag = std::abs(c);
        cross[i] = mag > 1e-15 ? c / mag : std::complex<double>(0.0, 0.0);
    }
    std::vector<double> corr;
    fft.inv(corr, cross);

    // corr[d] = sum_t signal[t + d] * reference[t]; negative lags wrap.
    const int limit = static_cast<int>(std::min<Eigen::Index>(max_delay, n - 1));
    int best = 0;
    double best_val = -1e300;
    for (int d = -limit; d <= limit; ++d) {
        const Eigen::Index idx = d >= 0 ? d : fft_size + d;
        const double v = corr[idx];
        const bool better =
            v > best_val + 1e-12 ||
            (std::abs(v - best_val) <= 1e-12 &&
             (std::abs(d) < std::abs(best) || (std::abs(d) == std::abs(best) && d < best)));
        if (better) {
            best_val = v;
            best = d;
        }
    }
    return best;
}

// Delay-and-sum beamforming with one global integer delay per channel,
// estimated against the reference channel over the whole session. Output
// length equals input length; shifted-in edges are zero.
inline DasResult das_beamform(const MultiChannelAudio& audio, const DasConfig& cfg = {}) {
    const int channels = audio.channels();
    if (channels < 1) throw std::invalid_argument("das_beamform: empty audio");
    if (cfg.reference_channel < 0 || cfg.reference_channel >= channels) {
        throw std::invalid_argument("das_beamform: reference channel out of range");
    }

    DasResult result;
    result.audio.sample_rate = audio.sample_rate;
    if (channels == 1) {
        result.audio.samples = audio.samples;
        result.delays = {0};
        result.single_channel_warning = true;
        return result;
    }

    const Eigen::Index n = audio.num_samples();
    const Eigen::VectorXd ref = audio.samples.row(cfg.reference_channel);
    result.delays.resize(channels, 0);
    for (int c = 0; c < channels; ++c) {
        if (c == cfg.reference_channel) continue;
        result.delays[c] = gcc_phat_delay(audio.samples.row(c), ref, cfg.max_delay);
    }

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < channels; ++c) {
        const int d = result.delays[c];
        for (Eigen::Index t = 0; t < n; ++t) {
            const Eigen::Index src = t + d;
            if (src >= 0 && src < n) sum(t) += audio.samples(c, src);
        }
    }
    result.audio.samples = (sum / channels).transpose();
    return result;
}

}  // namespace diarkit
