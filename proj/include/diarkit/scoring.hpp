#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/annotation.hpp"
#include "diarkit/hungarian.hpp"

namespace diarkit {

struct DerBreakdown {
    double missed_speech = 0.0;      // seconds
    double false_alarm = 0.0;        // seconds
    double speaker_confusion = 0.0;  // seconds
    double total_reference = 0.0;    // seconds of scored reference speaker time
    double der = 0.0;
};

struct ScoringConfig {
    double collar = 0.25;       // seconds excluded around reference boundaries
    bool score_overlap = true;  // when false, frames with >1 reference speaker are skipped
    double frame_shift = 0.01;  // scoring grid
};

namespace detail {

// Frame-level speaker activity as index sets, shared scoring grid.
inline std::vector<std::vector<int>> activity_frames(const SpeakerAnnotation& ann,
                                                     const std::vector<std::string>& labels,
                                                     double shift, int num_frames) {
    std::vector<std::vector<int>> frames(num_frames);
    std::vector<double> covered(num_frames);
    const long long half_shift_us = to_micros(shift) / 2;
    for (size_t k = 0; k < labels.size(); ++k) {
        std::fill(covered.begin(), covered.end(), 0.0);
        const Timeline tl = ann.speaker_timeline(labels[k]);
        for (const Segment& s : tl.segments()) {
            const int first = std::max(0, static_cast<int>(std::floor(s.onset / shift)));
            const int last =
                std::min<int>(num_frames - 1, static_cast<int>(std::ceil(s.end() / shift)));
            for (int i = first; i <= last; ++i) {
                covered[i] += Segment::intersection_length(s, Segment(i * shift, shift));
            }
        }
        for (int i = 0; i < num_frames; ++i) {
            if (to_micros(covered[i]) > half_shift_us) frames[i].push_back(static_cast<int>(k));
        }
    }
    return frames;
}

inline std::vector<char> collar_mask(const SpeakerAnnotation& reference, double collar,
                                     double shift, int num_frames) {
    std::vector<char> excluded(num_frames, 0);
    if (collar <= 0.0) return excluded;
    std::vector<Segment> zones;
    for (const auto& e : reference.entries()) {
        for (const double b : {e.segment.onset, e.segment.end()}) {
            const double lo = std::max(0.0, b - collar);
            const double hi = b + collar;
            if (hi - lo >= kTimeEps) zones.emplace_back(lo, hi - lo);
        }
    }
    const Timeline collar_tl((std::move(zones)));
    std::vector<double> covered(num_frames, 0.0);
    for (const Segment& s : collar_tl.segments()) {
        const int first = std::max(0, static_cast<int>(std::floor(s.onset / shift)));
        const int last =
            std::min<int>(num_frames - 1, static_cast<int>(std::ceil(s.end() / shift)));
        for (int i = first; i <= last; ++i) {
            covered[i] += Segment::intersection_length(s, Segment(i * shift, shift));
        }
    }
    const long long half_shift_us = to_micros(shift) / 2;
    for (int i = 0; i < num_frames; ++i) {
        if (to_micros(covered[i]) > half_shift_us) excluded[i] = 1;
    }
    return excluded;
}

}  // namespace detail

// Frame-based DER on a 10 ms grid. The optimal one-to-one speaker mapping is
// found by the Hungarian algorithm on co-occurring speaker time; labels are
// sorted so that equal-cost ties resolve lexicographically. The collar
// excludes frames around every reference segment boundary.
inline DerBreakdown score_der(const SpeakerAnnotation& reference,
                              const SpeakerAnnotation& hypothesis,
                              const ScoringConfig& cfg = {}) {
    if (reference.empty()) throw std::invalid_argument("score_der: no reference speech");
    if (reference.session_id() != hypothesis.session_id()) {
        throw std::invalid_argument("score_der: session id mismatch ('" + reference.session_id() +
                                    "' vs '" + hypothesis.session_id() + "')");
    }
    const double shift = cfg.frame_shift;
    const double horizon = std::max(reference.extent_end(), hypothesis.extent_end());
    const int num_frames = frame_count(horizon, shift);

    const std::vector<std::string> ref_labels = reference.speakers();
    const std::vector<std::string> hyp_labels = hypothesis.speakers();
    const auto ref_frames = detail::activity_frames(reference, ref_labels, shift, num_frames);
    const auto hyp_frames = detail::activity_frames(hypothesis, hyp_labels, shift, num_frames);
    const auto excluded = detail::collar_mask(reference, cfg.collar, shift, num_frames);

    auto scored = [&](int i) {
        if (excluded[i]) return false;
        if (!cfg.score_overlap && ref_frames[i].size() > 1) return false;
        return true;
    };

    // Co-occurrence seconds between every (ref, hyp) speaker pair over scored frames.
    const int nr = static_cast<int>(ref_labels.size());
    const int nh = static_cast<int>(hyp_labels.size());
    std::vector<double> cooc(static_cast<size_t>(nr) * nh, 0.0);
    for (int i = 0; i < num_frames; ++i) {
        if (!scored(i)) continue;
        for (int r : ref_frames[i]) {
            for (int h : hyp_frames[i]) {
                cooc[static_cast<size_t>(r) * nh + h] += shift;
            }
        }
    }
    const std::vector<int> ref_to_hyp =
        (nr > 0 && nh > 0) ? hungarian_max_assignment(cooc, nr, nh) : std::vector<int>(nr, -1);
    // A pairing with no co-occurring time gives no credit; drop it.
    std::vector<int> mapped(nr, -1);
    for (int r = 0; r < nr; ++r) {
        const int h = ref_to_hyp[r];
        if (h >= 0 && cooc[static_cast<size_t>(r) * nh + h] > 0.0) mapped[r] = h;
    }

    DerBreakdown out;
    for (int i = 0; i < num_frames; ++i) {
        if (!scored(i)) continue;
        const auto& refs = ref_frames[i];
        const auto& hyps = hyp_frames[i];
        const int n_ref = static_cast<int>(refs.size());
        const int n_hyp = static_cast<int>(hyps.size());
        int n_correct = 0;
        for (int r : refs) {
            if (mapped[r] >= 0 &&
                std::find(hyps.begin(), hyps.end(), mapped[r]) != hyps.end()) {
                ++n_correct;
            }
        }
        out.total_reference += n_ref * shift;
        out.missed_speech += std::max(0, n_ref - n_hyp) * shift;
        out.false_alarm += std::max(0, n_hyp - n_ref) * shift;
        out.speaker_confusion += (std::min(n_ref, n_hyp) - n_correct) * shift;
    }
    if (out.total_reference <= 0.0) {
        throw std::invalid_argument("score_der: no scored reference speech (collar too large?)");
    }
    out.der = (out.missed_speech + out.false_alarm + out.speaker_confusion) / out.total_reference;
    return out;
}

struct OsdFrameMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long tp = 0, fp = 0, fn = 0;
};

// Frame-level precision/recall/F1 on the overlap class.
inline OsdFrameMetrics score_osd_frames(const std::vector<bool>& reference_overlap,
                                        const std::vector<bool>& predicted_overlap) {
    if (reference_overlap.size() != predicted_overlap.size()) {
        throw std::invalid_argument("score_osd_frames: frame count mismatch (" +
                                    std::to_string(reference_overlap.size()) + " vs " +
                                    std::to_string(predicted_overlap.size()) + ")");
    }
    OsdFrameMetrics m;
    for (size_t i = 0; i < reference_overlap.size(); ++i) {
        if (predicted_overlap[i] && reference_overlap[i]) ++m.tp;
        if (predicted_overlap[i] && !reference_overlap[i]) ++m.fp;
        if (!predicted_overlap[i] && reference_overlap[i]) ++m.fn;
    }
    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

// Equal error rate. Sweeps thresholds over the pooled score set ("accept"
// means score >= threshold) and linearly interpolates between the adjacent
// operating points where the false-accept and false-reject curves cross.
inline double compute_eer(std::vector<double> target_scores,
                          std::vector<double> nontarget_scores) {
    if (target_scores.empty()) throw std::invalid_argument("compute_eer: empty target scores");
    if (nontarget_scores.empty()) {
        throw std::invalid_argument("compute_eer: empty nontarget scores");
    }
    std::sort(target_scores.begin(), target_scores.end());
    std::sort(nontarget_scores.begin(), nontarget_scores.end());

    std::vector<double> pooled = target_scores;
    pooled.insert(pooled.end(), nontarget_scores.begin(), nontarget_scores.end());
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    const double nt = static_cast<double>(target_scores.size());
    const double nn = static_cast<double>(nontarget_scores.size());
    auto operating_point = [&](double thr) {
        // FR: targets below threshold; FA: nontargets at or above it.
        const auto t_below = std::lower_bound(target_scores.begin(), target_scores.end(), thr) -
                             target_scores.begin();
        const auto n_below =
            std::lower_bound(nontarget_scores.begin(), nontarget_scores.end(), thr) -
            nontarget_scores.begin();
        return std::pair<double, double>(1.0 - static_cast<double>(n_below) / nn,
                                         static_cast<double>(t_below) / nt);
    };

    double prev_fa = 1.0, prev_fr = 0.0;  // threshold below every score
    for (size_t i = 0; i <= pooled.size(); ++i) {
        double fa, fr;
        if (i < pooled.size()) {
            std::tie(fa, fr) = operating_point(pooled[i]);
        } else {
            fa = 0.0;
            fr = 1.0;  // threshold above every score
        }
        if (fr >= fa) {
            const double d_prev = prev_fa - prev_fr;  // >= 0 by loop invariant
            const double d_cur = fr - fa;
            const double denom = d_prev + d_cur;
            if (denom <= 0.0) return fa;  // both points already on the diagonal
            const double t = d_prev / denom;
            return prev_fa + t * (fa - prev_fa);
        }
        prev_fa = fa;
        prev_fr = fr;
    }
    return 0.5;  // unreachable
}

}  // namespace diarkit
