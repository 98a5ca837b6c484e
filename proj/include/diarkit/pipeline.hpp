#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/beamform.hpp"
#include "diarkit/config.hpp"
#include "diarkit/embedding.hpp"
#include "diarkit/nmesc.hpp"
#include "diarkit/osd.hpp"
#include "diarkit/overlap.hpp"
#include "diarkit/rttm.hpp"
#include "diarkit/stft.hpp"
#include "diarkit/wav.hpp"
#include "diarkit/wpe.hpp"

namespace diarkit {

// A runtime failure inside one pipeline stage, tagged with the stage name
// and session id.
class StageError : public std::runtime_error {
  public:
    StageError(const std::string& stage, const std::string& session, const std::string& what)
        : std::runtime_error("stage " + stage + " failed for session " + session + ": " + what),
          stage_name(stage) {}
    std::string stage_name;
};

struct PipelineInputs {
    MultiChannelAudio audio;
    Timeline vad;
    std::string session_id;
    std::vector<const PosteriorProvider*> posterior_providers;
    const EmbeddingProvider* embedding_provider = nullptr;
    const Separator* separator = nullptr;  // required in separation mode
};

struct PipelineResult {
    SpeakerAnnotation hypothesis;
    MultiChannelAudio enhanced;  // single channel, PCM16-quantized
    Timeline overlap;
    Timeline single;
    double overlap_ratio = 0.0;
    int nmesc_k = 0;
    int final_k = 0;
    OverlapAssignment assignment;
};

// Maps labeled sub-segments (which overlap each other) back onto the single
// timeline: each region is tiled into shift-sized steps and every step takes
// the label of the sub-segment whose center lies closest. Adjacent same-label
// steps merge.
inline SpeakerAnnotation reconcile_subsegment_labels(const Timeline& single,
                                                     const std::vector<Segment>& subsegments,
                                                     const std::vector<int>& labels,
                                                     const std::string& session_id,
                                                     double step = 0.25) {
    if (subsegments.size() != labels.size()) {
        throw std::invalid_argument("reconcile: label count mismatch");
    }
    std::vector<SpeakerAnnotation::Entry> entries;
    size_t cursor = 0;
    for (const Segment& region : single.segments()) {
        // Sub-segments all live inside one region and are ordered.
        std::vector<size_t> members;
        while (cursor < subsegments.size() &&
               subsegments[cursor].end() <= region.end() + kTimeEps) {
            if (subsegments[cursor].onset >= region.onset - kTimeEps) members.push_back(cursor);
            ++cursor;
        }
        if (members.empty()) continue;
        double t = region.onset;
        int open_label = -1;
        double open_start = region.onset;
        while (t < region.end() - kTimeEps) {
            const double t_end = std::min(t + step, region.end());
            const double center = 0.5 * (t + t_end);
            size_t best = members[0];
            double best_d = 1e300;
            for (size_t m : members) {
                const double sub_center =
                    subsegments[m].onset + 0.5 * subsegments[m].duration;
                const double d = std::abs(sub_center - center);
                if (d < best_d - 1e-12) {
                    best_d = d;
                    best = m;
                }
            }
            const int label = labels[best];
            if (label != open_label) {
                if (open_label >= 0) {
                    entries.push_back({Segment(open_start, t - open_start),
                                       "spk" + std::to_string(open_label)});
                }
                open_label = label;
                open_start = t;
            }
            t = t_end;
        }
        if (open_label >= 0) {
            entries.push_back(
                {Segment(open_start, region.end() - open_start), "spk" + std::to_string(open_label)});
        }
    }
    return SpeakerAnnotation(session_id, std::move(entries));
}

// Full sub-system: enhancement, OSD on the raw multi-channel input,
// sub-segmentation of single-speaker regions, embedding extraction, NMESC
// clustering with the overlap-ratio speaker-count rule, overlap assignment,
// and the merged hypothesis.
inline PipelineResult run_diarize(const PipelineInputs& inputs, const PipelineConfig& cfg) {
    const std::string& sid = inputs.session_id;
    auto stage = [&](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, sid, e.what());
        }
    };

    PipelineResult result;

    // Enhancement feeds clustering and separation; OSD always sees the raw
    // multi-channel audio. The enhanced signal goes through the same PCM16
    // quantization as the WAV writer so on-disk stage chaining is identical.
    result.enhanced = stage("enhance", [&] {
        MultiChannelAudio working = inputs.audio;
        if (cfg.wpe.iterations > 0 && working.num_samples() >= 400) {
            const Spectrogram spec = stft(working);
            const Spectrogram clean = wpe_dereverberate(spec, cfg.wpe);
            working = istft(clean, working.num_samples(), working.sample_rate);
        }
        MultiChannelAudio mono = das_beamform(working, cfg.das).audio;
        mono.samples = pcm16_roundtrip(mono.samples);
        return mono;
    });

    const FramePosteriors posteriors = stage("osd", [&] {
        if (inputs.posterior_providers.empty()) {
            throw std::invalid_argument("no posterior providers");
        }
        std::vector<FramePosteriors> streams;
        for (const PosteriorProvider* provider : inputs.posterior_providers) {
            streams.push_back(aggregate_windows(*provider, cfg.osd));
        }
        return fuse_posteriors(streams);
    });

    const OverlapDecision decision = stage("osd", [&] {
        return decide_overlap(posteriors, inputs.vad, cfg.osd);
    });
    result.overlap = decision.overlap;
    result.single = decision.single;
    result.overlap_ratio = overlap_ratio(decision.overlap, inputs.vad);

    const std::vector<Segment> subsegments = stage("segment", [&] {
        return plan_subsegments(decision.single, cfg.plan);
    });

    const EmbeddingSet embeddings = stage("embed", [&] {
        if (!inputs.embedding_provider) throw std::invalid_argument("no embedding provider");
        return extract_embeddings(*inputs.embedding_provider, subsegments);
    });

    std::vector<int> labels;
    stage("cluster", [&] {
        if (embeddings.size() == 0) {
            result.nmesc_k = 0;
            result.final_k = 0;
            return 0;
        }
        ClusterResult clusters = nmesc_cluster(embeddings, cfg.clustering);
        result.nmesc_k = clusters.estimated_k;
        result.final_k =
            decide_speaker_count(clusters.estimated_k, result.overlap_ratio, cfg.clustering);
        if (result.final_k != clusters.estimated_k) {
            NmescConfig forced = cfg.clustering;
            forced.fixed_speakers = result.final_k;
            clusters = nmesc_cluster(embeddings, forced);
            result.final_k = clusters.estimated_k;
        }
        labels = std::move(clusters.labels);
        return 0;
    });

    const SpeakerAnnotation single_labeled = stage("cluster", [&] {
        return reconcile_subsegment_labels(decision.single, subsegments, labels, sid,
                                           cfg.plan.shift);
    });

    const OverlapAssignment assignment = stage("assign-overlap", [&] {
        if (decision.overlap.empty()) return OverlapAssignment{};
        if (cfg.overlap_mode == OverlapMode::Heuristic) {
            return assign_heuristic(decision.overlap, single_labeled);
        }
        if (!inputs.separator) throw std::invalid_argument("no separator configured");
        const auto cents = centroids(embeddings, labels);
        std::map<std::string, Eigen::VectorXd> named;
        for (const auto& [id, v] : cents) named["spk" + std::to_string(id)] = v;
        return assign_by_separation(decision.overlap, *inputs.separator,
                                    *inputs.embedding_provider, named, single_labeled);
    });
    result.assignment = assignment;

    result.hypothesis = stage("merge", [&] { return merge_results(single_labeled, assignment); });
    return result;
}

// File-backed provider bundle built from a validated configuration.
struct SessionProviders {
    std::vector<std::unique_ptr<PosteriorProvider>> posteriors;
    std::unique_ptr<EmbeddingProvider> embeddings;
    std::unique_ptr<Separator> separator;

    std::vector<const PosteriorProvider*> posterior_pointers() const {
        std::vector<const PosteriorProvider*> out;
        for (const auto& p : posteriors) out.push_back(p.get());
        return out;
    }
};

inline SessionProviders build_providers(const PipelineConfig& cfg, const Timeline& vad) {
    SessionProviders providers;
    for (const auto& descriptor : cfg.posterior_sources) {
        const ProviderSource src = parse_provider_source(descriptor);
        if (src.kind == "file") {
            providers.posteriors.push_back(
                std::make_unique<MatrixPosteriorProvider>(load_posteriors(src.path).posteriors));
        } else {
            const auto refs = load_rttm(src.path);
            if (refs.empty()) throw ConfigError("oracle posterior rttm is empty: " + src.path);
            providers.posteriors.push_back(std::make_unique<OraclePosteriorProvider>(
                refs[0], src.noise, src.seed, std::max(refs[0].extent_end(), vad.extent_end())));
        }
    }
    const ProviderSource emb = parse_provider_source(cfg.embedding_source);
    EmbeddingSet tracks;
    if (!cfg.track_embedding_source.empty()) {
        const ProviderSource trk = parse_provider_source(cfg.track_embedding_source);
        tracks = load_embeddings(trk.path).set;
    }
    providers.embeddings = std::make_unique<FileEmbeddingProvider>(
        load_embeddings(emb.path).set, std::move(tracks));
    if (cfg.overlap_mode == OverlapMode::Separation) {
        providers.separator = std::make_unique<FileSeparator>(cfg.separator_dir);
    }
    return providers;
}

}  // namespace diarkit
