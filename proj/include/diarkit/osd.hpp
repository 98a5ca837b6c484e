#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/annotation.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/timeline.hpp"

namespace diarkit {

inline constexpr double kOsdFrameShift = 0.010;

// Per-frame class posteriors: columns are (silence, single speaker, overlap).
struct FramePosteriors {
    Eigen::MatrixXd values;  // frames x 3, rows sum to 1
    double frame_shift = kOsdFrameShift;

    Eigen::Index num_frames() const { return values.rows(); }

    void validate() const {
        for (Eigen::Index f = 0; f < values.rows(); ++f) {
            double sum = 0.0;
            for (int c = 0; c < 3; ++c) {
                if (values(f, c) < -1e-9) {
                    throw std::invalid_argument("posteriors: negative probability at frame " +
                                                std::to_string(f));
                }
                sum += values(f, c);
            }
            if (std::abs(sum - 1.0) > 1e-5) {
                throw std::invalid_argument("posteriors: row " + std::to_string(f) +
                                            " sums to " + std::to_string(sum));
            }
        }
    }
};

struct OsdConfig {
    int window = 400;    // frames
    int stride = 200;    // frames
    double threshold = 0.55;
    double min_overlap_duration = 0.0;  // seconds

    void validate() const {
        if (stride <= 0 || stride > window) {
            throw std::invalid_argument("osd config: need 0 < stride <= window");
        }
        if (!(threshold > 0.0 && threshold < 1.0)) {
            throw std::invalid_argument("osd config: need 0 < threshold < 1");
        }
        if (min_overlap_duration < 0.0) {
            throw std::invalid_argument("osd config: min_overlap_duration must be >= 0");
        }
    }
};

// Produces 3-class posterior rows for a window of session frames. The
// implementation owns the session input (features, raw multi-channel audio,
// or a precomputed matrix); channel handling is its concern. Providers that
// cannot be called from several threads at once return false from
// thread_safe().
class PosteriorProvider {
  public:
    virtual ~PosteriorProvider() = default;
    virtual Eigen::Index total_frames() const = 0;
    // Returns frame_count x 3 posteriors for frames [frame_begin, frame_begin + frame_count).
    virtual Eigen::MatrixXd infer_window(Eigen::Index frame_begin,
                                         Eigen::Index frame_count) const = 0;
    virtual bool thread_safe() const { return true; }
};

// Provider backed by a full per-frame posterior matrix (e.g. loaded from an
// OSDPOST file written by an external model).
class MatrixPosteriorProvider final : public PosteriorProvider {
  public:
    explicit MatrixPosteriorProvider(FramePosteriors posteriors)
        : posteriors_(std::move(posteriors)) {
        posteriors_.validate();
    }

    Eigen::Index total_frames() const override { return posteriors_.num_frames(); }

    Eigen::MatrixXd infer_window(Eigen::Index begin, Eigen::Index count) const override {
        if (begin < 0 || begin + count > posteriors_.num_frames()) {
            throw std::out_of_range("posterior provider: window out of range");
        }
        return posteriors_.values.middleRows(begin, count);
    }

  private:
    FramePosteriors posteriors_;
};

// Synthetic provider deriving each frame's true class (silence / single /
// overlap) from a reference annotation. Emits 1 - noise_level probability
// mass on the true class plus seeded Gaussian jitter scaled by the noise
// level, so detection errors appear at a rate that grows with the noise.
class OraclePosteriorProvider final : public PosteriorProvider {
  public:
    OraclePosteriorProvider(const SpeakerAnnotation& reference, double noise_level, uint64_t seed,
                            double horizon = -1.0) {
        if (noise_level < 0.0 || noise_level >= 0.5) {
            throw std::invalid_argument("oracle posteriors: need 0 <= noise_level < 0.5");
        }
        const double end = horizon > 0.0 ? horizon : reference.extent_end();
        const auto frames = rasterize(reference, kOsdFrameShift, end);
        posteriors_.values.resize(static_cast<Eigen::Index>(frames.size()), 3);
        Rng rng(seed);
        for (size_t f = 0; f < frames.size(); ++f) {
            const size_t active = frames[f].size();
            const int true_class = active == 0 ? 0 : (active == 1 ? 1 : 2);
            Eigen::Vector3d p(noise_level / 2.0, noise_level / 2.0, noise_level / 2.0);
            p(true_class) = 1.0 - noise_level;
            if (noise_level > 0.0) {
                for (int c = 0; c < 3; ++c) {
                    p(c) = std::max(1e-6, p(c) + noise_level * rng.normal());
                }
            }
            p /= p.sum();
            posteriors_.values.row(f) = p;
        }
    }

    Eigen::Index total_frames() const override { return posteriors_.num_frames(); }

    Eigen::MatrixXd infer_window(Eigen::Index begin, Eigen::Index count) const override {
        if (begin < 0 || begin + count > posteriors_.num_frames()) {
            throw std::out_of_range("posterior provider: window out of range");
        }
        return posteriors_.values.middleRows(begin, count);
    }

  private:
    FramePosteriors posteriors_;
};

// Sliding-window inference: windows start at 0, stride, 2*stride, ...; the
// final window is right-aligned so tail frames are covered. Each frame's
// posterior is the arithmetic mean of every window output covering it.
inline FramePosteriors aggregate_windows(const PosteriorProvider& provider,
                                         const OsdConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index total = provider.total_frames();
    if (total < 1) throw std::invalid_argument("aggregate_windows: empty input");

    std::vector<Eigen::Index> starts;
    if (total <= cfg.window) {
        starts.push_back(0);
    } else {
        for (Eigen::Index s = 0; s + cfg.window <= total; s += cfg.stride) starts.push_back(s);
        if (starts.back() + cfg.window < total) starts.push_back(total - cfg.window);
    }

    FramePosteriors out;
    out.values = Eigen::MatrixXd::Zero(total, 3);
    Eigen::VectorXd coverage = Eigen::VectorXd::Zero(total);
    for (size_t w = 0; w < starts.size(); ++w) {
        const Eigen::Index begin = starts[w];
        const Eigen::Index count = std::min<Eigen::Index>(cfg.window, total - begin);
        const Eigen::MatrixXd block = provider.infer_window(begin, count);
        if (block.rows() != count || block.cols() != 3) {
            throw std::runtime_error("aggregate_windows: provider returned wrong shape for window " +
                                     std::to_string(w) + " (got " + std::to_string(block.rows()) +
                                     "x" + std::to_string(block.cols()) + ", want " +
                                     std::to_string(count) + "x3)");
        }
        out.values.middleRows(begin, count) += block;
        coverage.segment(begin, count).array() += 1.0;
    }
    for (Eigen::Index f = 0; f < total; ++f) {
        out.values.row(f) /= coverage(f);
        const double sum = out.values.row(f).sum();
        if (sum > 0.0) out.values.row(f) /= sum;
    }
    return out;
}

// Equal-weighted fusion: element-wise arithmetic mean.
inline FramePosteriors fuse_posteriors(const std::vector<FramePosteriors>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("fuse_posteriors: no inputs");
    FramePosteriors out = inputs[0];
    for (size_t i = 1; i < inputs.size(); ++i) {
        if (inputs[i].values.rows() != out.values.rows() ||
            std::abs(inputs[i].frame_shift - out.frame_shift) > 1e-9) {
            throw std::invalid_argument("fuse_posteriors: shape or frame-shift mismatch at input " +
                                        std::to_string(i));
        }
        out.values += inputs[i].values;
    }
    out.values /= static_cast<double>(inputs.size());
    return out;
}

struct OverlapDecision {
    Timeline overlap;
    Timeline single;
};

// Thresholds the overlap posterior column, converts frames to segments, and
// refines against the VAD: overlap = detected ∩ vad, single = vad − overlap.
// Overlap segments shorter than min_overlap_duration return to single, so
// overlap ∪ single = vad holds exactly.
inline OverlapDecision decide_overlap(const FramePosteriors& post, const Timeline& vad,
                                      const OsdConfig& cfg = {}) {
    cfg.validate();
    std::vector<Segment> detected;
    const double shift = post.frame_shift;
    Eigen::Index run_start = -1;
    for (Eigen::Index f = 0; f <= post.num_frames(); ++f) {
        const bool on = f < post.num_frames() && post.values(f, 2) >= cfg.threshold;
        if (on && run_start < 0) run_start = f;
        if (!on && run_start >= 0) {
            detected.emplace_back(run_start * shift, (f - run_start) * shift);
            run_start = -1;
        }
    }
    Timeline overlap = timeline_intersection(Timeline(std::move(detected)), vad);
    if (cfg.min_overlap_duration > 0.0) {
        std::vector<Segment> kept;
        for (const Segment& s : overlap.segments()) {
            if (s.duration >= cfg.min_overlap_duration - kTimeEps) kept.push_back(s);
        }
        overlap = Timeline(std::move(kept));
    }
    return {overlap, timeline_difference(vad, overlap)};
}

// |overlap| / |vad|; 0 for an empty VAD.
inline double overlap_ratio(const Timeline& overlap, const Timeline& vad) {
    const double v = vad.total_duration();
    if (v <= 0.0) return 0.0;
    return overlap.total_duration() / v;
}

// OSDPOST text format: header "OSDPOST <session_id> <num_frames> <frame_shift_ms>",
// then one line per frame with three space-separated probabilities.
inline void save_posteriors(const FramePosteriors& post, const std::string& session_id,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("osdpost: cannot write " + path);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "OSDPOST %s %lld %.17g\n", session_id.c_str(),
                  static_cast<long long>(post.num_frames()), post.frame_shift * 1000.0);
    out << buf;
    for (Eigen::Index f = 0; f < post.num_frames(); ++f) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", post.values(f, 0),
                      post.values(f, 1), post.values(f, 2));
        out << buf;
    }
    if (!out) throw std::runtime_error("osdpost: write failed: " + path);
}

struct LoadedPosteriors {
    FramePosteriors posteriors;
    std::string session_id;
};

inline LoadedPosteriors load_posteriors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("osdpost: cannot open " + path);
    std::string magic;
    LoadedPosteriors result;
    long long frames = 0;
    double shift_ms = 0.0;
    in >> magic >> result.session_id >> frames >> shift_ms;
    if (!in || magic != "OSDPOST" || frames < 0) {
        throw std::runtime_error("osdpost: bad header in " + path);
    }
    result.posteriors.frame_shift = shift_ms / 1000.0;
    result.posteriors.values.resize(frames, 3);
    for (long long f = 0; f < frames; ++f) {
        for (int c = 0; c < 3; ++c) {
            if (!(in >> result.posteriors.values(f, c))) {
                throw std::runtime_error("osdpost: truncated at frame " + std::to_string(f) +
                                         " in " + path);
            }
        }
    }
    result.posteriors.validate();
    return result;
}

}  // namespace diarkit
