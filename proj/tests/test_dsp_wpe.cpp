#include <catch2/catch_amalgamated.hpp>

#include "diarkit/rng.hpp"
#include "diarkit/stft.hpp"
#include "diarkit/wpe.hpp"

using namespace diarkit;

namespace {

// Amplitude-modulated noise burst; WPE needs a non-stationary source.
Eigen::VectorXd modulated_noise(Rng& rng, int n) {
    Eigen::VectorXd x(n);
    double env = 0.5;
    for (int t = 0; t < n; ++t) {
        if (t % 800 == 0) env = rng.uniform(0.05, 1.0);
        x(t) = env * rng.normal();
    }
    return x;
}

// Exponential-decay reverberation kernel (~decay_s to -60 dB).
Eigen::VectorXd reverb_kernel(Rng& rng, double decay_s, int sample_rate) {
    const int taps = static_cast<int>(decay_s * sample_rate);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(taps);
    h(0) = 1.0;
    for (int t = 1; t < taps; ++t) {
        h(t) = 0.4 * rng.normal() * std::exp(-6.91 * t / taps);
    }
    return h;
}

Eigen::VectorXd convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index t = 0; t < x.size(); ++t) {
        const Eigen::Index kmax = std::min<Eigen::Index>(t + 1, h.size());
        for (Eigen::Index k = 0; k < kmax; ++k) y(t) += h(k) * x(t - k);
    }
    return y;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST_CASE("wpe with zero iterations is the identity") {
    Rng rng(11);
    MultiChannelAudio a;
    a.sample_rate = 16000;
    a.samples.resize(2, 8000);
    for (int c = 0; c < 2; ++c) {
        for (int t = 0; t < 8000; ++t) a.samples(c, t) = rng.normal();
    }
    const auto spec = stft(a);
    WpeConfig cfg;
    cfg.iterations = 0;
    const auto out = wpe_dereverberate(spec, cfg);
    for (int c = 0; c < 2; ++c) {
        CHECK((out.channels[c] - spec.channels[c]).norm() == 0.0);
    }
}

TEST_CASE("wpe barely changes anechoic noise") {
    // The least-squares fit captures ~dim/T of the power even on white
    // noise, so the "output ~ input" check needs enough frames per bin.
    Rng rng(12);
    const int n = 16000 * 40;
    MultiChannelAudio a;
    a.sample_rate = 16000;
    a.samples.resize(2, n);
    for (int c = 0; c < 2; ++c) {
        for (int t = 0; t < n; ++t) a.samples(c, t) = rng.normal();
    }
    const auto spec = stft(a);
    WpeConfig cfg;
    cfg.taps = 3;
    cfg.iterations = 2;
    const auto out = wpe_dereverberate(spec, cfg);
    double diff = 0.0, ref = 0.0;
    for (int c = 0; c < 2; ++c) {
        diff += (out.channels[c] - spec.channels[c]).squaredNorm();
        ref += spec.channels[c].squaredNorm();
    }
    CHECK(std::sqrt(diff / ref) < 0.05);
    CHECK(out.total_power() <= spec.total_power() * (1.0 + 1e-6));
}

TEST_CASE("wpe raises dry-source correlation on synthetic reverb") {
    Rng rng(13);
    const int n = 48000;
    const Eigen::VectorXd dry = modulated_noise(rng, n);
    MultiChannelAudio reverbed;
    reverbed.sample_rate = 16000;
    reverbed.samples.resize(2, n);
    for (int c = 0; c < 2; ++c) {
        Rng krng(100 + c);
        reverbed.samples.row(c) = convolve(dry, reverb_kernel(krng, 0.2, 16000)).transpose();
    }
    const auto spec = stft(reverbed);
    WpeConfig cfg;  // taps 10, delay 3, 3 iterations
    const auto out = wpe_dereverberate(spec, cfg);
    CHECK(out.total_power() <= spec.total_power() * (1.0 + 1e-6));

    const auto recon = istft(out, n);
    const double corr_in = correlation(reverbed.samples.row(0), dry);
    const double corr_out = correlation(recon.samples.row(0), dry);
    INFO("corr_in " << corr_in << " corr_out " << corr_out);
    CHECK(corr_out > corr_in);
}

TEST_CASE("wpe input validation") {
    Rng rng(14);
    MultiChannelAudio a;
    a.sample_rate = 16000;
    a.samples.resize(1, 4000);
    for (int t = 0; t < 4000; ++t) a.samples(0, t) = rng.normal();
    auto spec = stft(a);
    WpeConfig bad;
    bad.taps = 0;
    CHECK_THROWS(wpe_dereverberate(spec, bad));
    bad = {};
    bad.delay = 0;
    CHECK_THROWS(wpe_dereverberate(spec, bad));
    spec.channels[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(wpe_dereverberate(spec, WpeConfig{}));
}
