#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/annotation.hpp"
#include "diarkit/embedding.hpp"
#include "diarkit/timeline.hpp"
#include "diarkit/wav.hpp"

namespace diarkit {

// At most two speakers talk at once; all overlap assignment is pairwise.
inline constexpr int kMaxSimultaneousSpeakers = 2;

// Overlap segments longer than this are split into equal chunks before
// separation and verification (2x the 1.5 s embedding window), so one
// embedding per separated track stays meaningful.
inline constexpr double kMaxSeparationChunk = 3.0;

// Splits an overlap segment for separation into chunks no longer than
// kMaxSeparationChunk, of equal length.
inline std::vector<Segment> chunk_overlap_segment(const Segment& s) {
    if (s.duration <= kMaxSeparationChunk + kTimeEps) return {s};
    const int parts = static_cast<int>(std::ceil(s.duration / kMaxSeparationChunk - kTimeEps));
    const double len = s.duration / parts;
    std::vector<Segment> out;
    for (int i = 0; i < parts; ++i) {
        const double onset = s.onset + i * len;
        const double end = i + 1 == parts ? s.end() : s.onset + (i + 1) * len;
        out.emplace_back(onset, end - onset);
    }
    return out;
}

// Source separation of an overlap segment into exactly two single-channel
// tracks of the segment's length.
class Separator {
  public:
    virtual ~Separator() = default;
    virtual std::array<Eigen::VectorXd, 2> separate(const Segment& segment) const = 0;
};

// Reads pre-separated WAV pairs from "<dir>/<onset_ms>_<dur_ms>_ch{0,1}.wav".
class FileSeparator final : public Separator {
  public:
    explicit FileSeparator(std::string directory, int sample_rate = 16000)
        : dir_(std::move(directory)), sample_rate_(sample_rate) {}

    static std::string track_filename(const Segment& s, int channel) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%lld_%lld_ch%d.wav",
                      static_cast<long long>(std::llround(s.onset * 1000.0)),
                      static_cast<long long>(std::llround(s.duration * 1000.0)), channel);
        return buf;
    }

    std::array<Eigen::VectorXd, 2> separate(const Segment& segment) const override {
        std::array<Eigen::VectorXd, 2> tracks;
        for (int ch = 0; ch < 2; ++ch) {
            const std::string path = dir_ + "/" + track_filename(segment, ch);
            const MultiChannelAudio audio = load_wav(path);
            if (audio.channels() != 1) {
                throw std::runtime_error("separator: expected mono track in " + path);
            }
            tracks[ch] = audio.samples.row(0);
        }
        return tracks;
    }

  private:
    std::string dir_;
    int sample_rate_;
};

// Speaker labels assigned to overlap segments (or chunks of them), with the
// similarity score that won each label. Normally two distinct labels; a
// degenerate session with a single speaker yields one label, flagged.
struct OverlapAssignment {
    struct Entry {
        Segment segment;
        std::vector<std::string> labels;
        std::vector<double> scores;
        bool degenerate = false;
        bool heuristic_fallback = false;
    };
    std::vector<Entry> entries;
};

namespace detail {

struct SpeakerDistance {
    std::string label;
    double distance = 0.0;
    double adjacent_length = 0.0;  // length of the nearest segment, for ties
};

inline std::vector<SpeakerDistance> rank_by_distance(const Segment& target,
                                                     const SpeakerAnnotation& labeled) {
    std::map<std::string, SpeakerDistance> best;
    for (const auto& e : labeled.entries()) {
        const double d = Segment::gap(e.segment, target);
        auto it = best.find(e.speaker);
        if (it == best.end()) {
            best[e.speaker] = {e.speaker, d, e.segment.duration};
        } else if (d < it->second.distance - kTimeEps ||
                   (std::abs(d - it->second.distance) <= kTimeEps &&
                    e.segment.duration > it->second.adjacent_length + kTimeEps)) {
            it->second.distance = d;
            it->second.adjacent_length = e.segment.duration;
        }
    }
    std::vector<SpeakerDistance> ranked;
    ranked.reserve(best.size());
    for (auto& [label, sd] : best) ranked.push_back(sd);
    std::sort(ranked.begin(), ranked.end(), [](const SpeakerDistance& a, const SpeakerDistance& b) {
        if (std::abs(a.distance - b.distance) > kTimeEps) return a.distance < b.distance;
        if (std::abs(a.adjacent_length - b.adjacent_length) > kTimeEps) {
            return a.adjacent_length > b.adjacent_length;
        }
        return a.label < b.label;
    });
    return ranked;
}

}  // namespace detail

// Heuristic assignment: each overlap segment takes the two temporally
// closest distinct speakers. Distance is the gap to the speaker's nearest
// single-speaker segment (0 when touching or overlapping); ties prefer the
// longer adjacent segment, then the lexicographically smaller label.
inline OverlapAssignment assign_heuristic(const Timeline& overlap,
                                          const SpeakerAnnotation& single_labeled) {
    if (single_labeled.empty()) {
        throw std::invalid_argument("assign_heuristic: empty single-speaker annotation");
    }
    OverlapAssignment out;
    for (const Segment& seg : overlap.segments()) {
        const auto ranked = detail::rank_by_distance(seg, single_labeled);
        OverlapAssignment::Entry entry;
        entry.segment = seg;
        entry.labels.push_back(ranked[0].label);
        entry.scores.push_back(-ranked[0].distance);
        if (ranked.size() >= 2) {
            entry.labels.push_back(ranked[1].label);
            entry.scores.push_back(-ranked[1].distance);
        } else {
            entry.degenerate = true;  // one speaker in session; never assign it twice
        }
        out.entries.push_back(std::move(entry));
    }
    return out;
}

// Separation-based assignment: run the separator on each overlap chunk,
// embed both tracks, and give each track its best-matching centroid by
// cosine similarity. When both tracks pick the same centroid, the weaker
// track takes its second-best. All-zero separated tracks fall back to the
// heuristic for that chunk.
inline OverlapAssignment assign_by_separation(const Timeline& overlap, const Separator& separator,
                                              const EmbeddingProvider& provider,
                                              const std::map<std::string, Eigen::VectorXd>& cents,
                                              const SpeakerAnnotation& single_labeled = {}) {
    if (cents.size() < 2) {
        throw std::invalid_argument("assign_by_separation: need at least two centroids");
    }
    std::vector<std::string> labels;
    for (const auto& [label, c] : cents) labels.push_back(label);

    OverlapAssignment out;
    for (const Segment& seg : overlap.segments()) {
        for (const Segment& chunk : chunk_overlap_segment(seg)) {
            const auto tracks = separator.separate(chunk);
            bool dead_track = false;
            for (const auto& t : tracks) {
                if (t.size() == 0 || t.cwiseAbs().maxCoeff() < 1e-9) dead_track = true;
            }
            if (dead_track) {
                if (single_labeled.empty()) {
                    throw std::runtime_error(
                        "assign_by_separation: all-zero separated track and no "
                        "single-speaker annotation for fallback");
                }
                auto fallback = assign_heuristic(Timeline({chunk}), single_labeled);
                fallback.entries[0].heuristic_fallback = true;
                out.entries.push_back(std::move(fallback.entries[0]));
                continue;
            }

            // Similarity of each track to each centroid.
            Eigen::MatrixXd sim(2, static_cast<Eigen::Index>(labels.size()));
            for (int t = 0; t < 2; ++t) {
                const Eigen::VectorXd emb = l2_normalized(provider.embed_clip(tracks[t], chunk, t));
                for (size_t c = 0; c < labels.size(); ++c) {
                    sim(t, static_cast<Eigen::Index>(c)) = cosine(emb, cents.at(labels[c]));
                }
            }
            auto argmax = [&](int t, int exclude) {
                int best = -1;
                for (int c = 0; c < static_cast<int>(labels.size()); ++c) {
                    if (c == exclude) continue;
                    if (best < 0 || sim(t, c) > sim(t, best) + 1e-12) best = c;
                }
                return best;
            };
            int pick0 = argmax(0, -1);
            int pick1 = argmax(1, -1);
            if (pick0 == pick1) {
                // Collision: the lower-similarity track takes its second-best.
                if (sim(0, pick0) >= sim(1, pick1)) {
                    pick1 = argmax(1, pick1);
                } else {
                    pick0 = argmax(0, pick0);
                }
            }
            OverlapAssignment::Entry entry;
            entry.segment = chunk;
            entry.labels = {labels[pick0], labels[pick1]};
            entry.scores = {sim(0, pick0), sim(1, pick1)};
            out.entries.push_back(std::move(entry));
        }
    }
    return out;
}

// Puts single-speaker labels and overlap assignments together as the system
// output: single entries unchanged plus one entry per assigned speaker
// spanning each overlap segment, normalized per speaker.
inline SpeakerAnnotation merge_results(const SpeakerAnnotation& single_labeled,
                                       const OverlapAssignment& assignment) {
    std::vector<SpeakerAnnotation::Entry> entries(single_labeled.entries());
    for (const auto& a : assignment.entries) {
        for (const std::string& label : a.labels) {
            entries.push_back({a.segment, label});
        }
    }
    return SpeakerAnnotation(single_labeled.session_id(), std::move(entries));
}

}  // namespace diarkit
