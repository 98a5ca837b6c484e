#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/annotation.hpp"

namespace diarkit {

// RTTM exchange format. Only SPEAKER lines are interpreted:
//   SPEAKER <session> 1 <onset> <duration> <NA> <NA> <speaker> <NA> <NA>
// Lines starting with ";;" are comments. The channel field is always written
// as "1" and ignored on parse. Times are written with 3 decimals.

inline std::vector<SpeakerAnnotation> parse_rttm(std::istream& in) {
    std::vector<std::string> session_order;
    std::map<std::string, std::vector<SpeakerAnnotation::Entry>> sessions;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind(";;", 0) == 0) continue;

        std::istringstream ls(line);
        std::vector<std::string> fields;
        std::string f;
        while (ls >> f) fields.push_back(f);
        if (fields.empty()) continue;
        if (fields[0] != "SPEAKER") continue;  // other record types ignored
        if (fields.size() < 9) {
            throw std::runtime_error("rttm parse error at line " + std::to_string(line_no) +
                                     ": expected at least 9 fields, got " +
                                     std::to_string(fields.size()));
        }
        double onset = 0.0, duration = 0.0;
        try {
            size_t pos = 0;
            onset = std::stod(fields[3], &pos);
            if (pos != fields[3].size()) throw std::invalid_argument("trailing");
            duration = std::stod(fields[4], &pos);
            if (pos != fields[4].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw std::runtime_error("rttm parse error at line " + std::to_string(line_no) +
                                     ": non-numeric onset/duration");
        }
        if (duration < 0.0) {
            throw std::runtime_error("rttm parse error at line " + std::to_string(line_no) +
                                     ": negative duration");
        }
        if (onset < 0.0) {
            throw std::runtime_error("rttm parse error at line " + std::to_string(line_no) +
                                     ": negative onset");
        }
        if (duration < kTimeEps) continue;  // zero-length lines carry no speech
        const std::string& session = fields[1];
        if (sessions.find(session) == sessions.end()) session_order.push_back(session);
        sessions[session].push_back({Segment(onset, duration), fields[7]});
    }

    std::vector<SpeakerAnnotation> out;
    out.reserve(session_order.size());
    for (const std::string& sid : session_order) {
        out.emplace_back(sid, std::move(sessions[sid]));
    }
    return out;
}

inline std::vector<SpeakerAnnotation> parse_rttm_string(const std::string& text) {
    std::istringstream in(text);
    return parse_rttm(in);
}

inline std::vector<SpeakerAnnotation> load_rttm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rttm file: " + path);
    return parse_rttm(in);
}

inline std::string format_rttm(const SpeakerAnnotation& ann) {
    // Entries are already sorted by onset then speaker (annotation invariant).
    std::string out;
    char buf[512];
    for (const auto& e : ann.entries()) {
        std::snprintf(buf, sizeof(buf), "SPEAKER %s 1 %.3f %.3f <NA> <NA> %s <NA> <NA>\n",
                      ann.session_id().c_str(), e.segment.onset, e.segment.duration,
                      e.speaker.c_str());
        out += buf;
    }
    return out;
}

inline void save_rttm(const SpeakerAnnotation& ann, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write rttm file: " + path);
    out << format_rttm(ann);
}

// Timelines travel as RTTM with a fixed placeholder label.
inline std::string format_timeline_rttm(const Timeline& tl, const std::string& session_id,
                                        const std::string& label) {
    std::vector<SpeakerAnnotation::Entry> entries;
    for (const Segment& s : tl.segments()) entries.push_back({s, label});
    return format_rttm(SpeakerAnnotation(session_id, std::move(entries)));
}

}  // namespace diarkit
