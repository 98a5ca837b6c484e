#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/timeline.hpp"

namespace diarkit {

// Speaker-labeled segments for one session. Construction normalizes per
// speaker: entries of the same speaker are merged when they overlap or abut;
// entries of different speakers may overlap (overlapped speech).
class SpeakerAnnotation {
  public:
    struct Entry {
        Segment segment;
        std::string speaker;
    };

    SpeakerAnnotation() = default;

    explicit SpeakerAnnotation(std::string session_id, std::vector<Entry> entries = {})
        : session_id_(std::move(session_id)) {
        std::map<std::string, std::vector<Segment>> by_speaker;
        for (Entry& e : entries) {
            if (e.speaker.empty()) {
                throw std::invalid_argument("SpeakerAnnotation: empty speaker label");
            }
            by_speaker[e.speaker].push_back(e.segment);
        }
        for (auto& [speaker, segs] : by_speaker) {
            Timeline merged(std::move(segs));
            for (const Segment& s : merged.segments()) entries_.push_back({s, speaker});
        }
        sort_entries();
    }

    const std::string& session_id() const { return session_id_; }
    const std::vector<Entry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    std::vector<std::string> speakers() const {
        std::set<std::string> s;
        for (const Entry& e : entries_) s.insert(e.speaker);
        return {s.begin(), s.end()};
    }

    Timeline speaker_timeline(const std::string& speaker) const {
        std::vector<Segment> segs;
        for (const Entry& e : entries_) {
            if (e.speaker == speaker) segs.push_back(e.segment);
        }
        return Timeline(std::move(segs));
    }

    // Union of all speaker activity (the annotation's VAD).
    Timeline support() const {
        std::vector<Segment> segs;
        segs.reserve(entries_.size());
        for (const Entry& e : entries_) segs.push_back(e.segment);
        return Timeline(std::move(segs));
    }

    // Regions where two or more speakers are active simultaneously.
    Timeline overlap_regions() const {
        std::vector<Segment> overlaps;
        for (size_t i = 0; i < entries_.size(); ++i) {
            for (size_t j = i + 1; j < entries_.size(); ++j) {
                if (entries_[j].segment.onset >= entries_[i].segment.end()) break;
                if (entries_[i].speaker == entries_[j].speaker) continue;
                const double len =
                    Segment::intersection_length(entries_[i].segment, entries_[j].segment);
                if (len >= kTimeEps) {
                    overlaps.emplace_back(std::max(entries_[i].segment.onset,
                                                   entries_[j].segment.onset),
                                          len);
                }
            }
        }
        return Timeline(std::move(overlaps));
    }

    double total_speaker_time() const {
        double t = 0.0;
        for (const Entry& e : entries_) t += e.segment.duration;
        return t;
    }

    double extent_end() const {
        double e = 0.0;
        for (const Entry& en : entries_) e = std::max(e, en.segment.end());
        return e;
    }

    SpeakerAnnotation relabeled(const std::map<std::string, std::string>& mapping) const {
        std::vector<Entry> out;
        out.reserve(entries_.size());
        for (const Entry& e : entries_) {
            auto it = mapping.find(e.speaker);
            out.push_back({e.segment, it == mapping.end() ? e.speaker : it->second});
        }
        return SpeakerAnnotation(session_id_, std::move(out));
    }

    bool operator==(const SpeakerAnnotation& o) const {
        if (session_id_ != o.session_id_ || entries_.size() != o.entries_.size()) return false;
        for (size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].speaker != o.entries_[i].speaker ||
                !(entries_[i].segment == o.entries_[i].segment)) {
                return false;
            }
        }
        return true;
    }

  private:
    void sort_entries() {
        std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            if (a.segment.onset != b.segment.onset) return a.segment.onset < b.segment.onset;
            if (a.speaker != b.speaker) return a.speaker < b.speaker;
            return a.segment.duration < b.segment.duration;
        });
    }

    std::string session_id_;
    std::vector<Entry> entries_;
};

// Per-frame active-speaker sets. Frame i covers [i*shift, (i+1)*shift); a
// speaker is active in a frame iff its segments overlap that interval by
// more than shift/2 in total.
inline std::vector<std::set<std::string>> rasterize(const SpeakerAnnotation& ann,
                                                    double frame_shift, double horizon) {
    if (!(frame_shift > 0.0)) {
        throw std::invalid_argument("rasterize: frame_shift must be positive");
    }
    const int num_frames = frame_count(horizon, frame_shift);
    const long long half_shift_us = to_micros(frame_shift) / 2;
    std::vector<std::set<std::string>> frames(std::max(num_frames, 0));
    std::vector<double> covered(frames.size());
    for (const std::string& spk : ann.speakers()) {
        std::fill(covered.begin(), covered.end(), 0.0);
        const Timeline tl = ann.speaker_timeline(spk);
        for (const Segment& s : tl.segments()) {
            const int first = std::max(0, static_cast<int>(std::floor(s.onset / frame_shift)));
            const int last = std::min<int>(num_frames - 1,
                                           static_cast<int>(std::ceil(s.end() / frame_shift)));
            for (int i = first; i <= last; ++i) {
                covered[i] += Segment::intersection_length(s, Segment(i * frame_shift, frame_shift));
            }
        }
        for (int i = 0; i < num_frames; ++i) {
            if (to_micros(covered[i]) > half_shift_us) frames[i].insert(spk);
        }
    }
    return frames;
}

}  // namespace diarkit
