#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/annotation.hpp"
#include "diarkit/hungarian.hpp"
#include "diarkit/scoring.hpp"
#include "diarkit/timeline.hpp"

namespace diarkit {

struct HypothesisSet {
    std::vector<SpeakerAnnotation> hypotheses;
    std::vector<double> weights;  // optional; when empty, rank weighting applies

    void validate() const {
        if (hypotheses.empty()) throw std::invalid_argument("fusion: no hypotheses");
        for (size_t i = 1; i < hypotheses.size(); ++i) {
            if (hypotheses[i].session_id() != hypotheses[0].session_id()) {
                throw std::invalid_argument("fusion: hypotheses from different sessions");
            }
        }
        if (!weights.empty()) {
            if (weights.size() != hypotheses.size()) {
                throw std::invalid_argument("fusion: weight count mismatch");
            }
            for (double w : weights) {
                if (!(w > 0.0)) throw std::invalid_argument("fusion: weights must be positive");
            }
        }
    }
};

struct FusionConfig {
    double rank_weight_exponent = 1.0;  // weight_i ∝ rank_i^-exponent; 0 = uniform
};

namespace detail {

inline double co_occurrence_seconds(const Timeline& a, const Timeline& b) {
    return timeline_intersection(a, b).total_duration();
}

}  // namespace detail

// Maps every hypothesis's labels onto a globally consistent set. Hypothesis
// 0 anchors; each later hypothesis is matched one-to-one against the
// already-mapped pool by Hungarian assignment on co-occurring speaking time.
// Labels with no co-occurrence keep nothing from the pool and get fresh
// global ids.
inline HypothesisSet map_labels(const HypothesisSet& hyps) {
    hyps.validate();
    if (hyps.hypotheses.size() < 2) {
        throw std::invalid_argument("map_labels: need at least two hypotheses");
    }

    HypothesisSet out;
    out.weights = hyps.weights;
    out.hypotheses.push_back(hyps.hypotheses[0]);

    // Accumulated activity per global label across mapped hypotheses.
    std::map<std::string, std::vector<Timeline>> pool;
    for (const std::string& label : hyps.hypotheses[0].speakers()) {
        pool[label].push_back(hyps.hypotheses[0].speaker_timeline(label));
    }
    int fresh_counter = 0;
    auto fresh_label = [&]() {
        std::string candidate;
        do {
            candidate = "U" + std::to_string(fresh_counter++);
        } while (pool.count(candidate));
        return candidate;
    };

    for (size_t h = 1; h < hyps.hypotheses.size(); ++h) {
        const SpeakerAnnotation& hyp = hyps.hypotheses[h];
        std::vector<std::string> global_labels;
        for (const auto& [label, tl] : pool) global_labels.push_back(label);
        const std::vector<std::string> local_labels = hyp.speakers();

        const int ng = static_cast<int>(global_labels.size());
        const int nl = static_cast<int>(local_labels.size());
        std::vector<double> value(static_cast<size_t>(nl) * ng, 0.0);
        std::vector<Timeline> local_tls;
        for (int l = 0; l < nl; ++l) {
            local_tls.push_back(hyp.speaker_timeline(local_labels[l]));
        }
        for (int l = 0; l < nl; ++l) {
            for (int g = 0; g < ng; ++g) {
                double co = 0.0;
                for (const Timeline& tl : pool[global_labels[g]]) {
                    co += detail::co_occurrence_seconds(local_tls[l], tl);
                }
                value[static_cast<size_t>(l) * ng + g] = co;
            }
        }
        const std::vector<int> match = hungarian_max_assignment(value, nl, ng);

        std::map<std::string, std::string> rename;
        for (int l = 0; l < nl; ++l) {
            const int g = match[l];
            if (g >= 0 && value[static_cast<size_t>(l) * ng + g] > 0.0) {
                rename[local_labels[l]] = global_labels[g];
            } else {
                rename[local_labels[l]] = fresh_label();
            }
        }
        SpeakerAnnotation mapped = hyp.relabeled(rename);
        for (const std::string& label : mapped.speakers()) {
            pool[label].push_back(mapped.speaker_timeline(label));
        }
        out.hypotheses.push_back(std::move(mapped));
    }
    return out;
}

namespace detail {

// Ranks hypotheses by average pairwise DER (every other hypothesis serving
// as reference, collar 0, overlap scored); tied averages share an averaged
// rank so equal hypotheses get equal weight.
inline std::vector<double> rank_weights(const std::vector<SpeakerAnnotation>& hyps,
                                        double exponent) {
    const size_t n = hyps.size();
    std::vector<double> avg_der(n, 0.0);
    ScoringConfig cfg;
    cfg.collar = 0.0;
    cfg.score_overlap = true;
    for (size_t i = 0; i < n; ++i) {
        double total = 0.0;
        int count = 0;
        for (size_t j = 0; j < n; ++j) {
            if (i == j || hyps[j].empty()) continue;
            total += score_der(hyps[j], hyps[i], cfg).der;
            ++count;
        }
        avg_der[i] = count > 0 ? total / count : 0.0;
    }
    // Fractional ranks: ties get the mean of the positions they span.
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return avg_der[a] < avg_der[b]; });
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && std::abs(avg_der[order[j + 1]] - avg_der[order[i]]) < 1e-12) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = shared;
        i = j + 1;
    }
    std::vector<double> weights(n);
    double total = 0.0;
    for (size_t k = 0; k < n; ++k) {
        weights[k] = std::pow(rank[k], -exponent);
        total += weights[k];
    }
    for (double& w : weights) w /= total;
    return weights;
}

}  // namespace detail

// Overlap-aware weighted voting. The timeline is cut at every boundary from
// every hypothesis; in each homogeneous region hypotheses vote their weight
// for each of their active speakers, the expected speaker count is the
// weighted mean of per-hypothesis active counts rounded half-up (at least 1
// wherever anyone has speech), and the top-voted labels win.
inline SpeakerAnnotation doverlap_vote(const HypothesisSet& mapped, const FusionConfig& cfg = {}) {
    mapped.validate();
    const auto& hyps = mapped.hypotheses;
    if (hyps.size() == 1) return hyps[0];

    std::vector<double> weights = mapped.weights;
    if (weights.empty()) {
        weights = detail::rank_weights(hyps, cfg.rank_weight_exponent);
    } else {
        double total = 0.0;
        for (double w : weights) total += w;
        for (double& w : weights) w /= total;
    }

    // Region boundaries from every hypothesis.
    std::vector<double> cuts;
    for (const auto& hyp : hyps) {
        for (const auto& e : hyp.entries()) {
            cuts.push_back(e.segment.onset);
            cuts.push_back(e.segment.end());
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) <= kTimeEps; }),
               cuts.end());

    std::vector<SpeakerAnnotation::Entry> out_entries;
    for (size_t r = 0; r + 1 < cuts.size(); ++r) {
        const double lo = cuts[r], hi = cuts[r + 1];
        if (hi - lo < kTimeEps) continue;
        const double mid = 0.5 * (lo + hi);

        std::map<std::string, double> votes;
        double expected_count = 0.0;
        bool any_speech = false;
        for (size_t h = 0; h < hyps.size(); ++h) {
            int active = 0;
            for (const auto& e : hyps[h].entries()) {
                if (e.segment.onset >= hi) break;
                // Entries are cut at every region boundary, so covering the
                // midpoint means covering the whole region.
                if (e.segment.onset - kTimeEps <= mid && mid < e.segment.end() + kTimeEps) {
                    votes[e.speaker] += weights[h];
                    ++active;
                }
            }
            expected_count += weights[h] * active;
            if (active > 0) any_speech = true;
        }
        if (!any_speech) continue;
        int count = static_cast<int>(std::floor(expected_count + 0.5));  // half-up
        count = std::max(count, 1);
        count = std::min<int>(count, static_cast<int>(votes.size()));

        std::vector<std::pair<std::string, double>> ranked(votes.begin(), votes.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (std::abs(a.second - b.second) > 1e-12) return a.second > b.second;
            return a.first < b.first;
        });
        for (int i = 0; i < count; ++i) {
            out_entries.push_back({Segment(lo, hi - lo), ranked[i].first});
        }
    }
    return SpeakerAnnotation(hyps[0].session_id(), std::move(out_entries));
}

// Convenience wrapper: label mapping followed by the vote.
inline SpeakerAnnotation fuse_hypotheses(const HypothesisSet& hyps, const FusionConfig& cfg = {}) {
    hyps.validate();
    if (hyps.hypotheses.size() == 1) return hyps.hypotheses[0];
    return doverlap_vote(map_labels(hyps), cfg);
}

}  // namespace diarkit
