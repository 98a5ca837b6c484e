#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/timeline.hpp"

namespace diarkit {

struct SubSegmentPlan {
    double window = 1.5;  // seconds
    double shift = 0.25;

    void validate() const {
        if (!(shift > 0.0 && shift <= window)) {
            throw std::invalid_argument("subsegment plan: need 0 < shift <= window");
        }
    }
};

// Uniform sub-segmentation of single-speaker regions. A source segment no
// longer than the window yields itself; otherwise windows start every shift
// seconds and a final right-aligned window covers the tail.
inline std::vector<Segment> plan_subsegments(const Timeline& single_speaker,
                                             const SubSegmentPlan& plan = {}) {
    plan.validate();
    std::vector<Segment> out;
    for (const Segment& src : single_speaker.segments()) {
        if (src.duration <= plan.window + kTimeEps) {
            out.push_back(src);
            continue;
        }
        double start = 0.0;
        for (; start + plan.window <= src.duration + kTimeEps; start += plan.shift) {
            out.emplace_back(src.onset + start, plan.window);
        }
        const double last_end = out.back().end();
        if (last_end < src.end() - kTimeEps) {
            out.emplace_back(src.end() - plan.window, plan.window);
        }
    }
    return out;
}

// Unit-norm embedding vectors aligned one-to-one with sub-segments.
struct EmbeddingSet {
    Eigen::MatrixXd vectors;  // n x d, rows L2-normalized
    std::vector<Segment> segments;

    Eigen::Index size() const { return vectors.rows(); }
    int dim() const { return static_cast<int>(vectors.cols()); }
};

// Maps a session-positioned segment (and, for separated overlap tracks, a
// raw audio clip) to a fixed-dimension speaker vector. Implementations own
// whatever session context they need.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd embed(const Segment& segment) const = 0;
    // Embedding of a standalone clip (a separated track) cut at `where`;
    // `channel` distinguishes the two separator outputs.
    virtual Eigen::VectorXd embed_clip(const Eigen::VectorXd& clip, const Segment& where,
                                       int channel) const = 0;
    virtual bool thread_safe() const { return true; }
};

inline Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v) {
    const double n = v.norm();
    if (n < 1e-12) throw std::invalid_argument("embedding: zero vector cannot be normalized");
    if (std::abs(n - 1.0) < 1e-9) return v;  // keeps unit rows bit-stable
    return v / n;
}

inline EmbeddingSet extract_embeddings(const EmbeddingProvider& provider,
                                       const std::vector<Segment>& segments) {
    EmbeddingSet set;
    set.segments = segments;
    set.vectors.resize(static_cast<Eigen::Index>(segments.size()), provider.dim());
    for (size_t i = 0; i < segments.size(); ++i) {
        const Eigen::VectorXd v = provider.embed(segments[i]);
        if (v.size() != provider.dim()) {
            throw std::runtime_error("embedding provider returned dimension " +
                                     std::to_string(v.size()) + ", expected " +
                                     std::to_string(provider.dim()));
        }
        set.vectors.row(i) = l2_normalized(v);
    }
    return set;
}

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) {
        throw std::invalid_argument("cosine: zero vector");
    }
    return a.dot(b) / (na * nb);
}

// Per-cluster arithmetic mean of member rows, L2-normalized.
inline std::map<int, Eigen::VectorXd> centroids(const EmbeddingSet& emb,
                                                const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != emb.size()) {
        throw std::invalid_argument("centroids: label count does not match embedding count");
    }
    std::map<int, Eigen::VectorXd> sums;
    std::map<int, int> counts;
    for (Eigen::Index i = 0; i < emb.size(); ++i) {
        auto [it, fresh] = sums.try_emplace(labels[i], Eigen::VectorXd::Zero(emb.dim()));
        it->second += emb.vectors.row(i).transpose();
        counts[labels[i]] += 1;
    }
    std::map<int, Eigen::VectorXd> out;
    for (auto& [label, sum] : sums) {
        const Eigen::VectorXd mean = sum / counts[label];
        if (mean.norm() < 1e-6) {
            throw std::runtime_error("centroids: degenerate centroid for cluster " +
                                     std::to_string(label));
        }
        out[label] = mean / mean.norm();
    }
    return out;
}

// EMBED text format: header "EMBED <session_id> <n> <d>", then one line per
// row: "start_sec end_sec v1 ... vd". The loader L2-normalizes rows.
inline void save_embeddings(const EmbeddingSet& set, const std::string& session_id,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("embed: cannot write " + path);
    char buf[64];
    out << "EMBED " << session_id << ' ' << set.size() << ' ' << set.dim() << '\n';
    for (Eigen::Index i = 0; i < set.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f", set.segments[i].onset,
                      set.segments[i].end());
        out << buf;
        for (int d = 0; d < set.dim(); ++d) {
            std::snprintf(buf, sizeof(buf), " %.17g", set.vectors(i, d));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("embed: write failed: " + path);
}

struct LoadedEmbeddings {
    EmbeddingSet set;
    std::string session_id;
};

inline LoadedEmbeddings load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("embed: cannot open " + path);
    std::string magic;
    long long n = 0, d = 0;
    LoadedEmbeddings result;
    in >> magic >> result.session_id >> n >> d;
    if (!in || magic != "EMBED" || n < 0 || d <= 0) {
        throw std::runtime_error("embed: bad header in " + path);
    }
    result.set.vectors.resize(n, d);
    result.set.segments.reserve(n);
    for (long long i = 0; i < n; ++i) {
        double start = 0.0, end = 0.0;
        if (!(in >> start >> end)) {
            throw std::runtime_error("embed: truncated at row " + std::to_string(i) + " in " +
                                     path);
        }
        result.set.segments.emplace_back(start, end - start);
        Eigen::VectorXd v(d);
        for (long long k = 0; k < d; ++k) {
            if (!(in >> v(k))) {
                throw std::runtime_error("embed: truncated at row " + std::to_string(i) + " in " +
                                         path);
            }
        }
        result.set.vectors.row(i) = l2_normalized(v);
    }
    return result;
}

// Validates that loaded rows line up one-to-one with an expected segment
// list (tolerance 1e-3 s on both endpoints).
inline void validate_embedding_alignment(const EmbeddingSet& set,
                                         const std::vector<Segment>& expected) {
    if (set.segments.size() != expected.size()) {
        throw std::runtime_error("embed: row count " + std::to_string(set.segments.size()) +
                                 " does not match expected segment count " +
                                 std::to_string(expected.size()));
    }
    for (size_t i = 0; i < expected.size(); ++i) {
        if (std::abs(set.segments[i].onset - expected[i].onset) > 1e-3 ||
            std::abs(set.segments[i].end() - expected[i].end()) > 1e-3) {
            throw std::runtime_error("embed: row " + std::to_string(i) +
                                     " is not aligned with the expected segment list");
        }
    }
}

// File-backed provider. Positioned lookups match rows by segment times
// (1e-3 s tolerance). Separated-track lookups use the convention that each
// overlap chunk appears twice in the file, channel 0 first.
class FileEmbeddingProvider final : public EmbeddingProvider {
  public:
    explicit FileEmbeddingProvider(EmbeddingSet set, EmbeddingSet track_set = {})
        : set_(std::move(set)), tracks_(std::move(track_set)) {}

    int dim() const override { return set_.dim(); }

    Eigen::VectorXd embed(const Segment& segment) const override {
        const Eigen::Index i = find(set_, segment, 0);
        return set_.vectors.row(i);
    }

    Eigen::VectorXd embed_clip(const Eigen::VectorXd&, const Segment& where,
                               int channel) const override {
        if (tracks_.size() == 0) {
            throw std::runtime_error("embed: no track embeddings loaded for separated audio");
        }
        const Eigen::Index i = find(tracks_, where, channel);
        return tracks_.vectors.row(i);
    }

  private:
    static Eigen::Index find(const EmbeddingSet& set, const Segment& segment, int occurrence) {
        int seen = 0;
        for (Eigen::Index i = 0; i < set.size(); ++i) {
            if (std::abs(set.segments[i].onset - segment.onset) <= 1e-3 &&
                std::abs(set.segments[i].end() - segment.end()) <= 1e-3) {
                if (seen == occurrence) return i;
                ++seen;
            }
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "embed: no row for segment [%.3f, %.3f)", segment.onset,
                      segment.end());
        throw std::runtime_error(buf);
    }

    EmbeddingSet set_;
    EmbeddingSet tracks_;
};

}  // namespace diarkit
