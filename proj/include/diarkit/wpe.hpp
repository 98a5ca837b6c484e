#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "diarkit/stft.hpp"

namespace diarkit {

struct WpeConfig {
    int taps = 10;
    int delay = 3;
    int iterations = 3;
    double variance_floor = 1e-10;
    double diagonal_loading = 1e-8;  // scaled by trace of the correlation matrix
};

// Dereverberation by variance-weighted multi-channel linear prediction.
// Per frequency bin: iteratively estimate the per-frame variance from the
// current output, solve the regularized normal equations for prediction
// filters over delayed stacked frames, and subtract the prediction from the
// observation. iterations = 0 returns the input unchanged.
inline Spectrogram wpe_dereverberate(const Spectrogram& spec, const WpeConfig& cfg = {}) {
    if (cfg.taps < 1) throw std::invalid_argument("wpe: taps must be >= 1");
    if (cfg.delay < 1) throw std::invalid_argument("wpe: delay must be >= 1");
    if (cfg.iterations < 0) throw std::invalid_argument("wpe: iterations must be >= 0");
    for (const auto& ch : spec.channels) {
        if (!ch.allFinite()) throw std::invalid_argument("wpe: non-finite value in spectrogram");
    }
    if (cfg.iterations == 0) return spec;

    const int channels = spec.num_channels();
    const int frames = static_cast<int>(spec.num_frames());
    const int bins = spec.bins();
    const int dim = channels * cfg.taps;

    Spectrogram out = spec;
    Eigen::MatrixXcd y(channels, frames);         // observation, one bin
    Eigen::MatrixXcd x(channels, frames);         // current estimate
    Eigen::MatrixXcd stacked(dim, frames);        // delayed stacked observations
    Eigen::VectorXd inv_var(frames);

    for (int b = 0; b < bins; ++b) {
        for (int c = 0; c < channels; ++c) {
            for (int f = 0; f < frames; ++f) y(c, f) = spec.channels[c](f, b);
        }
        // Frames before the delay window are zero-padded.
        stacked.setZero();
        for (int tap = 0; tap < cfg.taps; ++tap) {
            const int offset = cfg.delay + tap;
            for (int f = offset; f < frames; ++f) {
                stacked.block(tap * channels, f, channels, 1) = y.col(f - offset);
            }
        }

        x = y;
        for (int it = 0; it < cfg.iterations; ++it) {
            for (int f = 0; f < frames; ++f) {
                const double power = x.col(f).squaredNorm() / channels;
                inv_var(f) = 1.0 / std::max(power, cfg.variance_floor);
            }
            const Eigen::MatrixXcd weighted = stacked * inv_var.asDiagonal();
            Eigen::MatrixXcd corr = weighted * stacked.adjoint();          // dim x dim
            const Eigen::MatrixXcd cross = weighted * y.adjoint();         // dim x channels
            const double load = cfg.diagonal_loading * corr.real().trace() + 1e-12;
            corr.diagonal().array() += load;
            const Eigen::MatrixXcd filters = corr.ldlt().solve(cross);     // dim x channels
            x = y - filters.adjoint() * stacked;
        }
        for (int c = 0; c < channels; ++c) {
            for (int f = 0; f < frames; ++f) out.channels[c](f, b) = x(c, f);
        }
    }
    return out;
}

}  // namespace diarkit
