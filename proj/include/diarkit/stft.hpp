#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "diarkit/wav.hpp"

namespace diarkit {

struct StftConfig {
    int frame_length = 400;  // samples (25 ms at 16 kHz)
    int frame_shift = 160;   // samples (10 ms)
    int fft_size = 512;
};

// Complex STFT per channel. Matrices are frames x bins, bins = fft_size/2 + 1.
struct Spectrogram {
    std::vector<Eigen::MatrixXcd> channels;
    int frame_length = 400;
    int frame_shift = 160;
    int fft_size = 512;

    int num_channels() const { return static_cast<int>(channels.size()); }
    Eigen::Index num_frames() const { return channels.empty() ? 0 : channels[0].rows(); }
    int bins() const { return fft_size / 2 + 1; }

    double total_power() const {
        double p = 0.0;
        for (const auto& ch : channels) p += ch.squaredNorm();
        return p;
    }
};

inline Eigen::VectorXd hamming_window(int length) {
    Eigen::VectorXd w(length);
    for (int n = 0; n < length; ++n) {
        w(n) = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (length - 1));
    }
    return w;
}

// Frames fully inside the signal; the final partial frame is dropped.
inline int stft_frame_count(Eigen::Index num_samples, int frame_length, int frame_shift) {
    if (num_samples < frame_length) return 0;
    return 1 + static_cast<int>((num_samples - frame_length) / frame_shift);
}

inline Spectrogram stft(const MultiChannelAudio& audio, const StftConfig& cfg = {}) {
    if (cfg.frame_length > cfg.fft_size) {
        throw std::invalid_argument("stft: frame_length must not exceed fft_size");
    }
    if (cfg.frame_shift <= 0 || cfg.frame_shift > cfg.frame_length) {
        throw std::invalid_argument("stft: need 0 < frame_shift <= frame_length");
    }
    const int frames = stft_frame_count(audio.num_samples(), cfg.frame_length, cfg.frame_shift);
    if (frames == 0) throw std::invalid_argument("stft: audio shorter than one frame");

    const Eigen::VectorXd window = hamming_window(cfg.frame_length);
    const int bins = cfg.fft_size / 2 + 1;

    Spectrogram spec;
    spec.frame_length = cfg.frame_length;
    spec.frame_shift = cfg.frame_shift;
    spec.fft_size = cfg.fft_size;
    spec.channels.resize(audio.channels());

    Eigen::FFT<double> fft;
    std::vector<double> buf(cfg.fft_size);
    std::vector<std::complex<double>> out(cfg.fft_size);
    for (int c = 0; c < audio.channels(); ++c) {
        Eigen::MatrixXcd& m = spec.channels[c];
        m.resize(frames, bins);
        for (int f = 0; f < frames; ++f) {
            const Eigen::Index start = static_cast<Eigen::Index>(f) * cfg.frame_shift;
            for (int n = 0; n < cfg.frame_length; ++n) {
                buf[n] = audio.samples(c, start + n) * window(n);
            }
            std::fill(buf.begin() + cfg.frame_length, buf.end(), 0.0);
            fft.fwd(out, buf);
            for (int b = 0; b < bins; ++b) m(f, b) = out[b];
        }
    }
    return spec;
}

// Weighted overlap-add inverse. Reconstructs num_samples samples; the leading
// and trailing frame_length-worth of samples are edge regions where the
// window-sum normalization is partial.
inline MultiChannelAudio istft(const Spectrogram& spec, Eigen::Index num_samples,
                               int sample_rate = 16000) {
    const int frames = static_cast<int>(spec.num_frames());
    const Eigen::VectorXd window = hamming_window(spec.frame_length);

    MultiChannelAudio audio;
    audio.sample_rate = sample_rate;
    audio.samples = Eigen::MatrixXd::Zero(spec.num_channels(), num_samples);
    Eigen::VectorXd norm = Eigen::VectorXd::Zero(num_samples);

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> full(spec.fft_size);
    std::vector<double> time(spec.fft_size);
    for (int c = 0; c < spec.num_channels(); ++c) {
        const Eigen::MatrixXcd& m = spec.channels[c];
        for (int f = 0; f < frames; ++f) {
            for (int b = 0; b < spec.bins(); ++b) full[b] = m(f, b);
            for (int b = spec.bins(); b < spec.fft_size; ++b) {
                full[b] = std::conj(m(f, spec.fft_size - b));
            }
            fft.inv(time, full);
            const Eigen::Index start = static_cast<Eigen::Index>(f) * spec.frame_shift;
            for (int n = 0; n < spec.frame_length && start + n < num_samples; ++n) {
                audio.samples(c, start + n) += time[n] * window(n);
                if (c == 0) norm(start + n) += window(n) * window(n);
            }
        }
    }
    for (Eigen::Index t = 0; t < num_samples; ++t) {
        if (norm(t) > 1e-12) audio.samples.col(t) /= norm(t);
    }
    return audio;
}

}  // namespace diarkit
