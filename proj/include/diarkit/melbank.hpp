#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/rng.hpp"
#include "diarkit/stft.hpp"
#include "diarkit/wav.hpp"

namespace diarkit {

inline constexpr int kMelDims = 64;

// Log Mel-filterbank energies, 25 ms frames every 10 ms.
struct MelFeatures {
    Eigen::MatrixXd values;  // frames x 64
    double frame_shift = 0.010;
    double frame_length = 0.025;

    Eigen::Index num_frames() const { return values.rows(); }
    int dims() const { return static_cast<int>(values.cols()); }
};

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filterbank, num_filters x bins.
inline Eigen::MatrixXd mel_filterbank(int num_filters, int fft_size, int sample_rate,
                                      double low_hz, double high_hz) {
    const int bins = fft_size / 2 + 1;
    const double low_mel = hz_to_mel(low_hz);
    const double high_mel = hz_to_mel(high_hz);
    std::vector<double> centers_hz(num_filters + 2);
    for (int i = 0; i < num_filters + 2; ++i) {
        centers_hz[i] = mel_to_hz(low_mel + (high_mel - low_mel) * i / (num_filters + 1));
    }
    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(num_filters, bins);
    for (int m = 0; m < num_filters; ++m) {
        const double left = centers_hz[m], center = centers_hz[m + 1], right = centers_hz[m + 2];
        for (int b = 0; b < bins; ++b) {
            const double hz = static_cast<double>(b) * sample_rate / fft_size;
            if (hz > left && hz < center) {
                fb(m, b) = (hz - left) / (center - left);
            } else if (hz >= center && hz < right) {
                fb(m, b) = (right - hz) / (right - center);
            }
        }
    }
    return fb;
}

}  // namespace detail

// 64-dimensional log Mel-filterbank energies (25 ms / 10 ms, 512-point FFT,
// filters spanning 0-8000 Hz, natural log floored at 1e-10). Input must be a
// single channel at 16 kHz; there is no implicit resampling.
inline MelFeatures logmel(const MultiChannelAudio& audio, bool apply_cmn = true) {
    if (audio.sample_rate != 16000) {
        throw std::invalid_argument("logmel: expected 16000 Hz input, got " +
                                    std::to_string(audio.sample_rate));
    }
    if (audio.channels() != 1) {
        throw std::invalid_argument("logmel: expected single-channel input");
    }
    StftConfig stft_cfg;  // 400/160/512
    const Spectrogram spec = stft(audio, stft_cfg);
    static const Eigen::MatrixXd fbank =
        detail::mel_filterbank(kMelDims, stft_cfg.fft_size, 16000, 0.0, 8000.0);

    const Eigen::Index frames = spec.num_frames();
    MelFeatures feats;
    feats.values.resize(frames, kMelDims);
    const Eigen::MatrixXd power = spec.channels[0].cwiseAbs2();
    for (Eigen::Index f = 0; f < frames; ++f) {
        const Eigen::VectorXd energies = fbank * power.row(f).transpose();
        for (int m = 0; m < kMelDims; ++m) {
            feats.values(f, m) = std::log(std::max(energies(m), 1e-10));
        }
    }
    if (apply_cmn) {
        const Eigen::RowVectorXd mean = feats.values.colwise().mean();
        feats.values.rowwise() -= mean;
    }
    return feats;
}

// Zeroes one contiguous band of filterbank columns; the band width is drawn
// uniformly from {0, ..., max_bins} and the start uniformly over valid
// positions. Deterministic under the seed.
inline MelFeatures freq_mask(const MelFeatures& features, int max_bins, uint64_t seed) {
    if (max_bins < 0 || max_bins > features.dims()) {
        throw std::invalid_argument("freq_mask: max_bins out of range");
    }
    Rng rng(seed);
    const int width = rng.uniform_int(0, max_bins);
    MelFeatures out = features;
    if (width == 0) return out;
    const int start = rng.uniform_int(0, features.dims() - width);
    out.values.middleCols(start, width).setZero();
    return out;
}

// MELF binary feature container: magic "MELF", u32 frames, u32 dims, then
// f32 row-major data, all little-endian.
inline void save_melf(const MelFeatures& feats, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("melf: cannot write " + path);
    out.write("MELF", 4);
    const uint32_t frames = static_cast<uint32_t>(feats.num_frames());
    const uint32_t dims = static_cast<uint32_t>(feats.dims());
    out.write(reinterpret_cast<const char*>(&frames), 4);
    out.write(reinterpret_cast<const char*>(&dims), 4);
    for (uint32_t f = 0; f < frames; ++f) {
        for (uint32_t d = 0; d < dims; ++d) {
            const float v = static_cast<float>(feats.values(f, d));
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    if (!out) throw std::runtime_error("melf: write failed: " + path);
}

inline MelFeatures load_melf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("melf: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "MELF", 4) != 0) {
        throw std::runtime_error("melf: bad magic in " + path);
    }
    uint32_t frames = 0, dims = 0;
    in.read(reinterpret_cast<char*>(&frames), 4);
    in.read(reinterpret_cast<char*>(&dims), 4);
    if (!in) throw std::runtime_error("melf: truncated header in " + path);
    MelFeatures feats;
    feats.values.resize(frames, dims);
    for (uint32_t f = 0; f < frames; ++f) {
        for (uint32_t d = 0; d < dims; ++d) {
            float v;
            in.read(reinterpret_cast<char*>(&v), 4);
            if (!in) throw std::runtime_error("melf: truncated data in " + path);
            feats.values(f, d) = v;
        }
    }
    return feats;
}

}  // namespace diarkit
