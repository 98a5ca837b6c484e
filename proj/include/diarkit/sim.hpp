#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "diarkit/annotation.hpp"
#include "diarkit/embedding.hpp"
#include "diarkit/overlap.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/timeline.hpp"
#include "diarkit/wav.hpp"

namespace diarkit {

struct MeetingSpec {
    int num_speakers = 3;          // 2..4
    double duration = 60.0;        // seconds, >= 30 for stable statistics
    double overlap_target = 0.2;   // fraction of speech time, <= 0.5
    double turn_length = 2.5;      // mean seconds
    uint64_t seed = 1;
    double reverb_time = 0.0;      // seconds; 0 disables reverb
    int prototype_dim = 32;
    std::string session_id;        // default: "sim<seed>"

    void validate() const {
        if (num_speakers < 2 || num_speakers > 4) {
            throw std::invalid_argument("meeting spec: num_speakers must be in [2, 4]");
        }
        if (duration < 30.0) {
            throw std::invalid_argument("meeting spec: duration must be >= 30 s");
        }
        if (overlap_target < 0.0 || overlap_target > 0.5) {
            throw std::invalid_argument("meeting spec: overlap_target must be in [0, 0.5]");
        }
        if (turn_length <= 0.0) throw std::invalid_argument("meeting spec: bad turn_length");
    }
};

struct SyntheticSession {
    SpeakerAnnotation reference;
    MultiChannelAudio audio;              // 8 channels; empty when audio was skipped
    std::vector<Eigen::VectorXd> sources; // one full-length track per speaker
    Eigen::MatrixXd prototypes;           // num_speakers x prototype_dim, unit rows
    std::vector<int> channel_delays;      // integer samples per channel
    int sample_rate = 16000;

    Timeline vad() const { return reference.support(); }
    Timeline overlap() const { return reference.overlap_regions(); }
    double overlap_ratio() const {
        const double v = vad().total_duration();
        return v > 0.0 ? overlap().total_duration() / v : 0.0;
    }
};

namespace sim_detail {

inline double snap_ms(double t) { return std::round(t * 1000.0) / 1000.0; }

struct Turn {
    int speaker = 0;
    double length = 0.0;
    double lead_gap = 0.0;  // gap to the previous turn's end; negative = overlap
};

inline std::vector<double> turn_onsets(const std::vector<Turn>& turns) {
    std::vector<double> onsets(turns.size());
    double cursor = 0.0;
    for (size_t i = 0; i < turns.size(); ++i) {
        onsets[i] = std::max(0.0, cursor + turns[i].lead_gap);
        cursor = onsets[i] + turns[i].length;
    }
    return onsets;
}

inline SpeakerAnnotation turns_to_reference(const std::vector<Turn>& turns,
                                            const std::string& session_id) {
    const auto onsets = turn_onsets(turns);
    std::vector<SpeakerAnnotation::Entry> entries;
    for (size_t i = 0; i < turns.size(); ++i) {
        entries.push_back({Segment(snap_ms(onsets[i]), snap_ms(turns[i].length)),
                           "spk" + std::to_string(turns[i].speaker)});
    }
    return SpeakerAnnotation(session_id, std::move(entries));
}

// RBJ biquad bandpass, applied in place.
inline void bandpass(Eigen::VectorXd& x, double center_hz, double q, int sample_rate) {
    const double w0 = 2.0 * M_PI * center_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    const double b0 = alpha / a0, b2 = -alpha / a0;
    const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        const double xn = x(n);
        const double yn = b0 * xn + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = xn;
        y2 = y1;
        y1 = yn;
        x(n) = yn;
    }
}

inline Eigen::VectorXd fft_convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& kernel) {
    const Eigen::Index out_len = x.size();
    Eigen::Index fft_size = 1;
    while (fft_size < x.size() + kernel.size()) fft_size <<= 1;
    std::vector<double> a(fft_size, 0.0), b(fft_size, 0.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) a[i] = x(i);
    for (Eigen::Index i = 0; i < kernel.size(); ++i) b[i] = kernel(i);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> fa, fb;
    fft.fwd(fa, a);
    fft.fwd(fb, b);
    for (Eigen::Index i = 0; i < fft_size; ++i) fa[i] *= fb[i];
    std::vector<double> conv;
    fft.inv(conv, fa);
    Eigen::VectorXd out(out_len);
    for (Eigen::Index i = 0; i < out_len; ++i) out(i) = conv[i];
    return out;
}

inline uint64_t segment_hash(const Segment& s, int channel) {
    const uint64_t a = static_cast<uint64_t>(std::llround(s.onset * 1e6));
    const uint64_t b = static_cast<uint64_t>(std::llround(s.duration * 1e6));
    uint64_t h = a * 0x9E3779B97F4A7C15ull;
    h ^= b + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    h ^= static_cast<uint64_t>(channel + 1) * 0xBF58476D1CE4E5B9ull;
    return h;
}

// Advances next-turn onsets in 1 ms-snapped steps until the overlap ratio
// reaches the target. The first injection opens a 0.25 s overlap; later ones
// grow it by 0.05 s. Pairwise overlap regions are kept disjoint so at most
// two speakers ever talk at once. Returns false when the layout cannot reach
// the target.
inline bool inject_overlaps(std::vector<Turn>& turns, double target,
                            const std::string& session_id, Rng& rng) {
    auto measure_ratio = [&]() {
        const SpeakerAnnotation ref = turns_to_reference(turns, session_id);
        const double vad = ref.support().total_duration();
        return vad > 0.0 ? ref.overlap_regions().total_duration() / vad : 0.0;
    };
    if (target <= 0.0) return true;
    constexpr double kFirstOverlap = 0.25;
    constexpr double kStep = 0.05;
    const int max_steps = 400000;
    int steps = 0;
    while (measure_ratio() < target - 0.02) {
        if (++steps > max_steps) return false;
        const auto onsets = turn_onsets(turns);
        std::vector<size_t> eligible;
        for (size_t i = 1; i < turns.size(); ++i) {
            const double cur_overlap = -std::min(0.0, turns[i].lead_gap);
            const double next_overlap =
                cur_overlap == 0.0 ? kFirstOverlap : cur_overlap + kStep;
            if (next_overlap > 0.8 * std::min(turns[i - 1].length, turns[i].length)) continue;
            const double new_onset = onsets[i - 1] + turns[i - 1].length - next_overlap;
            if (i >= 2 && new_onset < onsets[i - 2] + turns[i - 2].length + 0.05) continue;
            if (new_onset < onsets[i - 1] + 0.05) continue;
            // Advancing turn i also drags every later turn; if turn i+1
            // overlaps turn i it must not reach back into turn i-1.
            if (i + 1 < turns.size() && turns[i + 1].lead_gap < 0.0) {
                const double next_onset = new_onset + turns[i].length + turns[i + 1].lead_gap;
                if (next_onset < onsets[i - 1] + turns[i - 1].length + 0.05) continue;
            }
            eligible.push_back(i);
        }
        if (eligible.empty()) break;
        const size_t i = eligible[rng.uniform_int(0, static_cast<int>(eligible.size()) - 1)];
        const double cur_overlap = -std::min(0.0, turns[i].lead_gap);
        const double next_overlap = cur_overlap == 0.0 ? kFirstOverlap : cur_overlap + kStep;
        turns[i].lead_gap = snap_ms(-next_overlap);
    }
    return measure_ratio() >= target - 0.04;
}

}  // namespace sim_detail

enum class SimAudioLevel {
    None,         // reference and prototypes only
    SourcesOnly,  // adds per-speaker source tracks
    Full,         // adds the 8-channel mixture with noise (and optional reverb)
};

// Generates a seeded synthetic meeting: exponential turn/gap lengths with the
// first turns cycling through all speakers, then overlaps injected by
// advancing next-turn onsets until the overlap ratio reaches the target
// (within ±0.05, typically ±0.02). At most two speakers ever talk at once.
// Sources are band-limited modulated noise with speaker-distinct spectral
// envelopes; the 8 channels are integer-delayed mixtures (delay = channel
// index) plus additive noise at an SNR drawn uniformly from [-5, 5] dB.
inline SyntheticSession generate_session(const MeetingSpec& spec, SimAudioLevel level) {
    spec.validate();
    Rng rng(spec.seed ^ 0x5D1A4F2CB19E8D37ull);
    const std::string session_id =
        spec.session_id.empty() ? "sim" + std::to_string(spec.seed) : spec.session_id;

    // Turn skeleton. All boundaries live on a 1 ms grid so that annotations
    // survive RTTM round trips exactly. Layouts that cannot reach the overlap
    // target (too many minimum-length turns) are redrawn.
    std::vector<sim_detail::Turn> turns;
    bool reached = false;
    for (int attempt = 0; attempt < 8 && !reached; ++attempt) {
        turns.clear();
        double cursor = 0.0;
        int prev_speaker = -1;
        std::vector<double> spoken(spec.num_speakers, 0.0);
        while (cursor < spec.duration) {
            sim_detail::Turn t;
            if (static_cast<int>(turns.size()) < spec.num_speakers) {
                t.speaker = static_cast<int>(turns.size());
            } else if (rng.uniform() < 0.5) {
                // Keep speaker time roughly balanced: hand the floor to the
                // least-heard speaker.
                t.speaker = -1;
                for (int s = 0; s < spec.num_speakers; ++s) {
                    if (s == prev_speaker) continue;
                    if (t.speaker < 0 || spoken[s] < spoken[t.speaker]) t.speaker = s;
                }
            } else {
                do {
                    t.speaker = rng.uniform_int(0, spec.num_speakers - 1);
                } while (t.speaker == prev_speaker);
            }
            t.length = sim_detail::snap_ms(
                std::clamp(rng.exponential(spec.turn_length), 0.8, 4.0 * spec.turn_length));
            t.lead_gap = turns.empty()
                             ? sim_detail::snap_ms(rng.uniform(0.0, 0.5))
                             : sim_detail::snap_ms(std::clamp(rng.exponential(0.4), 0.05, 1.5));
            turns.push_back(t);
            cursor += t.lead_gap + t.length;
            spoken[t.speaker] += t.length;
            prev_speaker = t.speaker;
        }
        if (!turns.empty()) {
            // Trim the final turn to the requested horizon.
            auto onsets = sim_detail::turn_onsets(turns);
            sim_detail::Turn& last = turns.back();
            if (onsets.back() + last.length > spec.duration) {
                last.length = sim_detail::snap_ms(spec.duration - onsets.back());
                if (last.length < 0.8) turns.pop_back();
            }
        }
        if (static_cast<int>(turns.size()) < spec.num_speakers + 1) continue;
        reached = sim_detail::inject_overlaps(turns, spec.overlap_target, session_id, rng);
    }
    if (!reached) {
        throw std::runtime_error("generate_session: overlap target " +
                                 std::to_string(spec.overlap_target) +
                                 " infeasible for duration " + std::to_string(spec.duration));
    }

    SyntheticSession session;
    session.reference = sim_detail::turns_to_reference(turns, session_id);
    session.sample_rate = 16000;

    // Sanity: never more than two simultaneous speakers.
    for (const auto& frame : rasterize(session.reference, 0.01, session.reference.extent_end())) {
        if (frame.size() > 2) {
            throw std::runtime_error("generate_session: simultaneity constraint violated");
        }
    }

    // Speaker prototypes: unit vectors with pairwise cosine < 0.4.
    Rng proto_rng = rng.fork(101);
    session.prototypes.resize(spec.num_speakers, spec.prototype_dim);
    for (int s = 0; s < spec.num_speakers; ++s) {
        while (true) {
            Eigen::VectorXd v(spec.prototype_dim);
            for (int d = 0; d < spec.prototype_dim; ++d) v(d) = proto_rng.normal();
            v.normalize();
            bool ok = true;
            for (int t = 0; t < s; ++t) {
                if (std::abs(v.dot(session.prototypes.row(t).transpose())) >= 0.4) ok = false;
            }
            if (ok) {
                session.prototypes.row(s) = v;
                break;
            }
        }
    }

    session.channel_delays = {0, 1, 2, 3, 4, 5, 6, 7};
    if (level == SimAudioLevel::None) return session;

    // Per-speaker source tracks: band-limited noise with a slow random
    // amplitude envelope, active only inside the speaker's turns.
    const double session_end = session.reference.extent_end() + 0.2;
    const Eigen::Index num_samples =
        static_cast<Eigen::Index>(std::llround(session_end * session.sample_rate));
    const std::array<double, 4> centers = {500.0, 950.0, 1700.0, 2800.0};
    session.sources.assign(spec.num_speakers, Eigen::VectorXd::Zero(num_samples));
    for (int s = 0; s < spec.num_speakers; ++s) {
        Rng src_rng = rng.fork(200 + s);
        Eigen::VectorXd noise(num_samples);
        for (Eigen::Index t = 0; t < num_samples; ++t) noise(t) = src_rng.normal();
        sim_detail::bandpass(noise, centers[s], 1.5, session.sample_rate);

        // Piecewise-linear envelope with 100 ms knots.
        const Eigen::Index knot = session.sample_rate / 10;
        const Eigen::Index num_knots = num_samples / knot + 2;
        std::vector<double> knots(num_knots);
        for (auto& v : knots) v = src_rng.uniform(0.25, 1.0);
        for (Eigen::Index t = 0; t < num_samples; ++t) {
            const Eigen::Index k = t / knot;
            const double frac = static_cast<double>(t - k * knot) / knot;
            noise(t) *= knots[k] * (1.0 - frac) + knots[k + 1] * frac;
        }

        // Gate to the speaker's turns with 10 ms ramps.
        Eigen::VectorXd gate = Eigen::VectorXd::Zero(num_samples);
        const Eigen::Index ramp = session.sample_rate / 100;
        const Timeline speaker_tl = session.reference.speaker_timeline("spk" + std::to_string(s));
        for (const Segment& seg : speaker_tl.segments()) {
            const Eigen::Index a =
                static_cast<Eigen::Index>(std::llround(seg.onset * session.sample_rate));
            const Eigen::Index b = std::min<Eigen::Index>(
                num_samples, static_cast<Eigen::Index>(std::llround(seg.end() * session.sample_rate)));
            for (Eigen::Index t = a; t < b; ++t) {
                double g = 1.0;
                if (t - a < ramp) g = static_cast<double>(t - a) / ramp;
                if (b - t < ramp) g = std::min(g, static_cast<double>(b - t) / ramp);
                gate(t) = g;
            }
        }
        noise.array() *= gate.array();

        const double rms = std::sqrt(noise.squaredNorm() / std::max<Eigen::Index>(1, num_samples));
        if (rms > 1e-12) noise *= 0.05 / rms;
        session.sources[s] = std::move(noise);
    }
    if (level == SimAudioLevel::SourcesOnly) return session;

    // 8-channel mixture: channel c hears every source delayed by c samples.
    session.audio.sample_rate = session.sample_rate;
    session.audio.samples = Eigen::MatrixXd::Zero(8, num_samples);
    for (int c = 0; c < 8; ++c) {
        const int d = session.channel_delays[c];
        for (int s = 0; s < spec.num_speakers; ++s) {
            for (Eigen::Index t = d; t < num_samples; ++t) {
                session.audio.samples(c, t) += session.sources[s](t - d);
            }
        }
    }
    if (spec.reverb_time > 0.0) {
        Rng rev_rng = rng.fork(300);
        const Eigen::Index taps =
            static_cast<Eigen::Index>(spec.reverb_time * session.sample_rate);
        const double decay = spec.reverb_time / 6.91;  // ~T60 envelope
        Eigen::VectorXd kernel = Eigen::VectorXd::Zero(taps);
        kernel(0) = 1.0;
        for (Eigen::Index n = 1; n < taps; ++n) {
            kernel(n) = 0.35 * rev_rng.normal() *
                        std::exp(-static_cast<double>(n) / (decay * session.sample_rate));
        }
        for (int c = 0; c < 8; ++c) {
            session.audio.samples.row(c) =
                sim_detail::fft_convolve(session.audio.samples.row(c), kernel).transpose();
        }
    }
    {
        const double snr_db = rng.uniform(-5.0, 5.0);
        const double signal_power = session.audio.samples.row(0).squaredNorm() / num_samples;
        const double noise_power = signal_power / std::pow(10.0, snr_db / 10.0);
        const double noise_rms = std::sqrt(noise_power);
        Rng noise_rng = rng.fork(400);
        for (int c = 0; c < 8; ++c) {
            for (Eigen::Index t = 0; t < num_samples; ++t) {
                session.audio.samples(c, t) += noise_rms * noise_rng.normal();
            }
        }
    }
    return session;
}

inline SyntheticSession generate_session(const MeetingSpec& spec, bool with_audio = true) {
    return generate_session(spec, with_audio ? SimAudioLevel::Full : SimAudioLevel::None);
}

// Embedding oracle: a positioned segment maps to the time-weighted sum of
// the prototypes of the speakers active inside it (plus seeded Gaussian
// jitter of scale noise_sigma), normalized. A separated-track clip maps to
// the prototype mixture weighted by waveform similarity against each true
// source, which degrades gracefully with separator leakage.
class OracleEmbeddingProvider final : public EmbeddingProvider {
  public:
    OracleEmbeddingProvider(const SyntheticSession& session, double noise_sigma, uint64_t seed)
        : session_(session), sigma_(noise_sigma), seed_(seed) {
        if (noise_sigma < 0.0) {
            throw std::invalid_argument("oracle embeddings: noise_sigma must be >= 0");
        }
    }

    int dim() const override { return static_cast<int>(session_.prototypes.cols()); }

    Eigen::VectorXd embed(const Segment& segment) const override {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim());
        double total_weight = 0.0;
        for (int s = 0; s < session_.prototypes.rows(); ++s) {
            const Timeline tl =
                session_.reference.speaker_timeline("spk" + std::to_string(s));
            double active = 0.0;
            for (const Segment& t : tl.segments()) {
                active += Segment::intersection_length(t, segment);
            }
            if (active > 0.0) {
                v += active * session_.prototypes.row(s).transpose();
                total_weight += active;
            }
        }
        Rng rng(seed_ ^ sim_detail::segment_hash(segment, -1));
        if (total_weight <= 0.0) {
            // No active speaker: noise-only vector.
            for (int d = 0; d < dim(); ++d) v(d) = rng.normal();
            ++no_speaker_count_;
            return v.normalized();
        }
        v /= total_weight;
        for (int d = 0; d < dim(); ++d) v(d) += sigma_ * rng.normal();
        return l2_normalized(v);
    }

    Eigen::VectorXd embed_clip(const Eigen::VectorXd& clip, const Segment& where,
                               int channel) const override {
        if (session_.sources.empty()) {
            throw std::runtime_error("oracle embeddings: session has no source tracks");
        }
        const Eigen::Index a = static_cast<Eigen::Index>(
            std::llround(where.onset * session_.sample_rate));
        const Eigen::Index len = std::min<Eigen::Index>(
            clip.size(), session_.sources[0].size() - a);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim());
        const double clip_norm = clip.head(len).norm();
        for (size_t s = 0; s < session_.sources.size(); ++s) {
            const Eigen::VectorXd src = session_.sources[s].segment(a, len);
            const double src_norm = src.norm();
            if (src_norm < 1e-9 || clip_norm < 1e-9) continue;
            const double similarity = std::max(0.0, clip.head(len).dot(src) / (clip_norm * src_norm));
            v += similarity * session_.prototypes.row(static_cast<Eigen::Index>(s)).transpose();
        }
        Rng rng(seed_ ^ sim_detail::segment_hash(where, channel));
        if (v.norm() < 1e-9) {
            for (int d = 0; d < dim(); ++d) v(d) = rng.normal();
            return v.normalized();
        }
        for (int d = 0; d < dim(); ++d) v(d) += sigma_ * rng.normal();
        return l2_normalized(v);
    }

    int no_speaker_count() const { return no_speaker_count_; }

  private:
    const SyntheticSession& session_;
    double sigma_;
    uint64_t seed_;
    mutable int no_speaker_count_ = 0;
};

// Separation oracle: returns the two true source tracks on the segment, each
// mixed with `leakage` of the other; channel order is seeded per segment.
// Errors unless exactly two speakers are active in the segment.
class OracleSeparator final : public Separator {
  public:
    OracleSeparator(const SyntheticSession& session, double leakage, uint64_t seed = 17)
        : session_(session), leakage_(leakage), seed_(seed) {
        if (leakage < 0.0 || leakage >= 0.5) {
            throw std::invalid_argument("oracle separator: need 0 <= leakage < 0.5");
        }
        if (session.sources.empty()) {
            throw std::invalid_argument("oracle separator: session has no source tracks");
        }
    }

    std::array<Eigen::VectorXd, 2> separate(const Segment& segment) const override {
        std::vector<int> active;
        for (int s = 0; s < session_.prototypes.rows(); ++s) {
            const Timeline tl =
                session_.reference.speaker_timeline("spk" + std::to_string(s));
            double t_active = 0.0;
            for (const Segment& t : tl.segments()) {
                t_active += Segment::intersection_length(t, segment);
            }
            if (t_active > 0.01) active.push_back(s);
        }
        if (active.size() != 2) {
            throw std::runtime_error("oracle separator: segment [" +
                                     std::to_string(segment.onset) + ", " +
                                     std::to_string(segment.end()) + ") has " +
                                     std::to_string(active.size()) + " active speakers");
        }
        const Eigen::Index a =
            static_cast<Eigen::Index>(std::llround(segment.onset * session_.sample_rate));
        const Eigen::Index len = std::min<Eigen::Index>(
            static_cast<Eigen::Index>(std::llround(segment.duration * session_.sample_rate)),
            session_.sources[0].size() - a);
        const Eigen::VectorXd s0 = session_.sources[active[0]].segment(a, len);
        const Eigen::VectorXd s1 = session_.sources[active[1]].segment(a, len);
        std::array<Eigen::VectorXd, 2> tracks = {(1.0 - leakage_) * s0 + leakage_ * s1,
                                                 leakage_ * s0 + (1.0 - leakage_) * s1};
        Rng rng(seed_ ^ sim_detail::segment_hash(segment, 7));
        if (rng.uniform() < 0.5) std::swap(tracks[0], tracks[1]);
        return tracks;
    }

  private:
    const SyntheticSession& session_;
    double leakage_;
    uint64_t seed_;
};

}  // namespace diarkit
