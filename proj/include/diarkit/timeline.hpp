#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace diarkit {

// Time comparisons use a 1e-6 s epsilon throughout; RTTM carries millisecond
// precision, so anything finer than this is noise.
inline constexpr double kTimeEps = 1e-6;

// Microsecond quantization for threshold comparisons that must not depend on
// floating-point summation order (frame activity rules).
inline long long to_micros(double seconds) { return std::llround(seconds * 1e6); }

// Number of frames of length `shift` needed to reach `horizon` (ceiling, on
// the microsecond grid).
inline int frame_count(double horizon, double shift) {
    const long long h = to_micros(horizon);
    const long long s = to_micros(shift);
    if (s <= 0) throw std::invalid_argument("frame_count: non-positive frame shift");
    return static_cast<int>(std::max<long long>(0, (h + s - 1) / s));
}

struct Segment {
    double onset = 0.0;     // seconds, >= 0
    double duration = 0.0;  // seconds, > 0

    Segment() = default;
    Segment(double onset_s, double duration_s) : onset(onset_s), duration(duration_s) {
        if (!(onset >= 0.0) || !std::isfinite(onset)) {
            throw std::invalid_argument("Segment: onset must be finite and non-negative");
        }
        if (!(duration > 0.0) || !std::isfinite(duration)) {
            throw std::invalid_argument("Segment: duration must be finite and positive");
        }
    }

    double end() const { return onset + duration; }

    bool operator==(const Segment& o) const {
        return std::abs(onset - o.onset) <= kTimeEps && std::abs(duration - o.duration) <= kTimeEps;
    }

    // Gap between two segments; 0 when they touch or overlap.
    static double gap(const Segment& a, const Segment& b) {
        const double g = std::max(a.onset, b.onset) - std::min(a.end(), b.end());
        return std::max(0.0, g);
    }

    static double intersection_length(const Segment& a, const Segment& b) {
        return std::max(0.0, std::min(a.end(), b.end()) - std::max(a.onset, b.onset));
    }
};

// Immutable set of non-overlapping, non-abutting segments, sorted by onset.
// Construction normalizes: sorts, merges overlapping or abutting segments
// (within kTimeEps), and drops segments shorter than kTimeEps.
class Timeline {
  public:
    Timeline() = default;

    explicit Timeline(std::vector<Segment> segments) {
        std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
            if (a.onset != b.onset) return a.onset < b.onset;
            return a.duration < b.duration;
        });
        for (const Segment& s : segments) {
            if (s.duration < kTimeEps) continue;
            if (!segments_.empty() && s.onset <= segments_.back().end() + kTimeEps) {
                Segment& last = segments_.back();
                const double new_end = std::max(last.end(), s.end());
                last.duration = new_end - last.onset;
            } else {
                segments_.push_back(s);
            }
        }
    }

    const std::vector<Segment>& segments() const { return segments_; }
    bool empty() const { return segments_.empty(); }
    size_t size() const { return segments_.size(); }

    double total_duration() const {
        double t = 0.0;
        for (const Segment& s : segments_) t += s.duration;
        return t;
    }

    // Extent of the last covered instant; 0 for an empty timeline.
    double extent_end() const { return segments_.empty() ? 0.0 : segments_.back().end(); }

    bool covers(double t) const {
        for (const Segment& s : segments_) {
            if (t < s.onset - kTimeEps) return false;
            if (t <= s.end() + kTimeEps && t >= s.onset - kTimeEps) return true;
        }
        return false;
    }

    bool operator==(const Timeline& o) const {
        if (segments_.size() != o.segments_.size()) return false;
        for (size_t i = 0; i < segments_.size(); ++i) {
            if (!(segments_[i] == o.segments_[i])) return false;
        }
        return true;
    }

  private:
    std::vector<Segment> segments_;
};

inline Timeline timeline_union(const Timeline& a, const Timeline& b) {
    std::vector<Segment> all = a.segments();
    all.insert(all.end(), b.segments().begin(), b.segments().end());
    return Timeline(std::move(all));
}

inline Timeline timeline_intersection(const Timeline& a, const Timeline& b) {
    std::vector<Segment> out;
    size_t i = 0, j = 0;
    const auto& sa = a.segments();
    const auto& sb = b.segments();
    while (i < sa.size() && j < sb.size()) {
        const double lo = std::max(sa[i].onset, sb[j].onset);
        const double hi = std::min(sa[i].end(), sb[j].end());
        if (hi - lo >= kTimeEps) out.emplace_back(lo, hi - lo);
        if (sa[i].end() < sb[j].end()) {
            ++i;
        } else {
            ++j;
        }
    }
    return Timeline(std::move(out));
}

inline Timeline timeline_difference(const Timeline& a, const Timeline& b) {
    std::vector<Segment> out;
    const auto& sb = b.segments();
    for (const Segment& s : a.segments()) {
        double cursor = s.onset;
        for (const Segment& t : sb) {
            if (t.end() <= cursor) continue;
            if (t.onset >= s.end()) break;
            if (t.onset - cursor >= kTimeEps) out.emplace_back(cursor, t.onset - cursor);
            cursor = std::max(cursor, t.end());
            if (cursor >= s.end()) break;
        }
        if (s.end() - cursor >= kTimeEps) out.emplace_back(cursor, s.end() - cursor);
    }
    return Timeline(std::move(out));
}

enum class TimelineOp { Union, Intersection, Difference };

inline Timeline timeline_ops(const Timeline& a, const Timeline& b, TimelineOp kind) {
    switch (kind) {
        case TimelineOp::Union: return timeline_union(a, b);
        case TimelineOp::Intersection: return timeline_intersection(a, b);
        case TimelineOp::Difference: return timeline_difference(a, b);
    }
    throw std::invalid_argument("timeline_ops: unknown kind");
}

}  // namespace diarkit
