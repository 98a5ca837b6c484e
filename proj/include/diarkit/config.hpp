#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diarkit/beamform.hpp"
#include "diarkit/embedding.hpp"
#include "diarkit/nmesc.hpp"
#include "diarkit/osd.hpp"
#include "diarkit/scoring.hpp"
#include "diarkit/wpe.hpp"

namespace diarkit {

// Thrown for configuration problems; the CLI maps it to exit code 1 while
// runtime stage failures exit with 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class OverlapMode { Heuristic, Separation };

struct PipelineConfig {
    WpeConfig wpe;
    DasConfig das;
    OsdConfig osd;
    std::vector<std::string> posterior_sources;  // file:<path> or oracle:<rttm>[,noise=..][,seed=..]
    SubSegmentPlan plan;
    std::string embedding_source;        // file:<path>
    std::string track_embedding_source;  // file:<path>, separation mode
    NmescConfig clustering;
    OverlapMode overlap_mode = OverlapMode::Heuristic;
    std::string separator_dir;
    bool fusion_uniform_weights = false;
    double fusion_rank_exponent = 1.0;
    ScoringConfig scoring;
    uint64_t seed = 1;
    int jobs = 1;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

}  // namespace config_detail

// Applies one "section.key = value" setting.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& section,
                               const std::string& key, const std::string& value) {
    using namespace config_detail;
    const std::string full = section + "." + key;
    if (section == "dsp") {
        if (key == "wpe_taps") cfg.wpe.taps = static_cast<int>(parse_int(full, value));
        else if (key == "wpe_delay") cfg.wpe.delay = static_cast<int>(parse_int(full, value));
        else if (key == "wpe_iterations") cfg.wpe.iterations = static_cast<int>(parse_int(full, value));
        else if (key == "das_reference_channel") cfg.das.reference_channel = static_cast<int>(parse_int(full, value));
        else if (key == "das_max_delay") cfg.das.max_delay = static_cast<int>(parse_int(full, value));
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "osd") {
        if (key == "window") cfg.osd.window = static_cast<int>(parse_int(full, value));
        else if (key == "stride") cfg.osd.stride = static_cast<int>(parse_int(full, value));
        else if (key == "threshold") cfg.osd.threshold = parse_double(full, value);
        else if (key == "min_overlap_duration") cfg.osd.min_overlap_duration = parse_double(full, value);
        else if (key == "providers") cfg.posterior_sources = split(value, ',');
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "embedding") {
        if (key == "window") cfg.plan.window = parse_double(full, value);
        else if (key == "shift") cfg.plan.shift = parse_double(full, value);
        else if (key == "provider") cfg.embedding_source = value;
        else if (key == "track_provider") cfg.track_embedding_source = value;
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "clustering") {
        if (key == "max_speakers") cfg.clustering.max_speakers = static_cast<int>(parse_int(full, value));
        else if (key == "max_neighbor_fraction") cfg.clustering.max_neighbor_fraction = parse_double(full, value);
        else if (key == "overlap_ratio_rule_threshold") cfg.clustering.overlap_ratio_rule_threshold = parse_double(full, value);
        else if (key == "kmeans_seed") cfg.clustering.kmeans_seed = static_cast<uint64_t>(parse_int(full, value));
        else if (key == "fixed_speakers") {
            if (value.empty() || value == "auto") cfg.clustering.fixed_speakers.reset();
            else cfg.clustering.fixed_speakers = static_cast<int>(parse_int(full, value));
        } else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "overlap") {
        if (key == "mode") {
            if (value == "heuristic") cfg.overlap_mode = OverlapMode::Heuristic;
            else if (value == "separation") cfg.overlap_mode = OverlapMode::Separation;
            else throw ConfigError("config: overlap.mode must be 'heuristic' or 'separation'");
        } else if (key == "separator_dir") cfg.separator_dir = value;
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "fusion") {
        if (key == "weights") {
            if (value == "rank") cfg.fusion_uniform_weights = false;
            else if (value == "uniform") cfg.fusion_uniform_weights = true;
            else throw ConfigError("config: fusion.weights must be 'rank' or 'uniform'");
        } else if (key == "rank_exponent") cfg.fusion_rank_exponent = parse_double(full, value);
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "scoring") {
        if (key == "collar") cfg.scoring.collar = parse_double(full, value);
        else if (key == "score_overlap") cfg.scoring.score_overlap = parse_bool(full, value);
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "general") {
        if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(full, value));
        else if (key == "jobs") cfg.jobs = static_cast<int>(parse_int(full, value));
        else throw ConfigError("config: unknown key '" + full + "'");
    } else {
        throw ConfigError("config: unknown section '" + section + "'");
    }
}

// Sectioned key=value text; '#' starts a comment.
inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = config_detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config: bad section header at line " + std::to_string(line_no));
            }
            section = config_detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected key=value at line " + std::to_string(line_no));
        }
        const std::string key = config_detail::trim(line.substr(0, eq));
        const std::string value = config_detail::trim(line.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("config: key '" + key + "' outside any section at line " +
                              std::to_string(line_no));
        }
        apply_config_entry(cfg, section, key, value);
    }
    return cfg;
}

// Environment overrides: DIARPIPE_<SECTION>_<KEY>=value, e.g.
// DIARPIPE_OSD_THRESHOLD=0.6. The section never contains underscores.
inline void apply_env_overrides(PipelineConfig& cfg, char** envp = nullptr) {
    extern char** environ;
    char** env = envp ? envp : environ;
    const std::string prefix = "DIARPIPE_";
    for (char** e = env; *e; ++e) {
        const std::string entry(*e);
        if (entry.rfind(prefix, 0) != 0) continue;
        const size_t eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = entry.substr(prefix.size(), eq - prefix.size());
        const std::string value = entry.substr(eq + 1);
        const size_t us = name.find('_');
        if (us == std::string::npos) {
            throw ConfigError("config: malformed environment override " + entry.substr(0, eq));
        }
        std::string section = name.substr(0, us);
        std::string key = name.substr(us + 1);
        std::transform(section.begin(), section.end(), section.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        apply_config_entry(cfg, section, key, value);
    }
}

inline PipelineConfig load_config(const std::string& path, bool with_env = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    PipelineConfig cfg = parse_config(in);
    if (with_env) apply_env_overrides(cfg);
    return cfg;
}

inline std::string print_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "[dsp]\n";
    out << "wpe_taps = " << cfg.wpe.taps << "\n";
    out << "wpe_delay = " << cfg.wpe.delay << "\n";
    out << "wpe_iterations = " << cfg.wpe.iterations << "\n";
    out << "das_reference_channel = " << cfg.das.reference_channel << "\n";
    out << "das_max_delay = " << cfg.das.max_delay << "\n";
    out << "\n[osd]\n";
    out << "window = " << cfg.osd.window << "\n";
    out << "stride = " << cfg.osd.stride << "\n";
    out << "threshold = " << cfg.osd.threshold << "\n";
    out << "min_overlap_duration = " << cfg.osd.min_overlap_duration << "\n";
    out << "providers = ";
    for (size_t i = 0; i < cfg.posterior_sources.size(); ++i) {
        out << (i ? "," : "") << cfg.posterior_sources[i];
    }
    out << "\n";
    out << "\n[embedding]\n";
    out << "window = " << cfg.plan.window << "\n";
    out << "shift = " << cfg.plan.shift << "\n";
    out << "provider = " << cfg.embedding_source << "\n";
    out << "track_provider = " << cfg.track_embedding_source << "\n";
    out << "\n[clustering]\n";
    out << "max_speakers = " << cfg.clustering.max_speakers << "\n";
    out << "max_neighbor_fraction = " << cfg.clustering.max_neighbor_fraction << "\n";
    out << "overlap_ratio_rule_threshold = " << cfg.clustering.overlap_ratio_rule_threshold
        << "\n";
    out << "fixed_speakers = "
        << (cfg.clustering.fixed_speakers ? std::to_string(*cfg.clustering.fixed_speakers)
                                          : std::string("auto"))
        << "\n";
    out << "kmeans_seed = " << cfg.clustering.kmeans_seed << "\n";
    out << "\n[overlap]\n";
    out << "mode = " << (cfg.overlap_mode == OverlapMode::Heuristic ? "heuristic" : "separation")
        << "\n";
    out << "separator_dir = " << cfg.separator_dir << "\n";
    out << "\n[fusion]\n";
    out << "weights = " << (cfg.fusion_uniform_weights ? "uniform" : "rank") << "\n";
    out << "rank_exponent = " << cfg.fusion_rank_exponent << "\n";
    out << "\n[scoring]\n";
    out << "collar = " << cfg.scoring.collar << "\n";
    out << "score_overlap = " << (cfg.scoring.score_overlap ? "true" : "false") << "\n";
    out << "\n[general]\n";
    out << "seed = " << cfg.seed << "\n";
    out << "jobs = " << cfg.jobs << "\n";
    return out.str();
}

// Source descriptors: "file:<path>" or "oracle:<rttm>[,noise=<x>][,seed=<n>]".
struct ProviderSource {
    std::string kind;  // "file" or "oracle"
    std::string path;
    double noise = 0.0;
    uint64_t seed = 1;
};

inline ProviderSource parse_provider_source(const std::string& descriptor) {
    const size_t colon = descriptor.find(':');
    if (colon == std::string::npos) {
        throw ConfigError("config: provider source '" + descriptor +
                          "' must look like file:<path> or oracle:<rttm>[,noise=..,seed=..]");
    }
    ProviderSource src;
    src.kind = descriptor.substr(0, colon);
    const auto parts = config_detail::split(descriptor.substr(colon + 1), ',');
    if (parts.empty()) throw ConfigError("config: provider source '" + descriptor + "' has no path");
    src.path = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) {
        const size_t eq = parts[i].find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: bad provider option '" + parts[i] + "'");
        }
        const std::string key = parts[i].substr(0, eq);
        const std::string value = parts[i].substr(eq + 1);
        if (key == "noise") src.noise = config_detail::parse_double(key, value);
        else if (key == "seed") src.seed = static_cast<uint64_t>(config_detail::parse_int(key, value));
        else throw ConfigError("config: unknown provider option '" + key + "'");
    }
    if (src.kind != "file" && src.kind != "oracle") {
        throw ConfigError("config: provider kind '" + src.kind + "' must be file or oracle");
    }
    return src;
}

// Fail-fast validation: rejects any configuration the pipeline would later
// fail on (missing provider files, inconsistent modes, bad parameter ranges).
inline void validate_config(const PipelineConfig& cfg) {
    if (cfg.wpe.taps < 1 || cfg.wpe.delay < 1 || cfg.wpe.iterations < 0) {
        throw ConfigError("config: bad dsp.wpe parameters");
    }
    if (cfg.das.max_delay < 1) throw ConfigError("config: dsp.das_max_delay must be >= 1");
    try {
        cfg.osd.validate();
        cfg.plan.validate();
        cfg.clustering.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.posterior_sources.empty()) {
        throw ConfigError("config: osd.providers must list at least one source");
    }
    for (const auto& descriptor : cfg.posterior_sources) {
        const auto src = parse_provider_source(descriptor);
        if (!std::filesystem::exists(src.path)) {
            throw ConfigError("config: provider file does not exist: " + src.path);
        }
    }
    if (cfg.embedding_source.empty()) {
        throw ConfigError("config: embedding.provider is required");
    }
    const auto emb = parse_provider_source(cfg.embedding_source);
    if (emb.kind != "file") {
        throw ConfigError("config: embedding.provider must be a file: source");
    }
    if (!std::filesystem::exists(emb.path)) {
        throw ConfigError("config: embedding file does not exist: " + emb.path);
    }
    if (cfg.overlap_mode == OverlapMode::Separation) {
        if (cfg.separator_dir.empty()) {
            throw ConfigError("config: overlap.separator_dir is required in separation mode");
        }
        if (!std::filesystem::is_directory(cfg.separator_dir)) {
            throw ConfigError("config: separator dir does not exist: " + cfg.separator_dir);
        }
        if (cfg.track_embedding_source.empty()) {
            throw ConfigError("config: embedding.track_provider is required in separation mode");
        }
        const auto trk = parse_provider_source(cfg.track_embedding_source);
        if (!std::filesystem::exists(trk.path)) {
            throw ConfigError("config: track embedding file does not exist: " + trk.path);
        }
    }
    if (cfg.scoring.collar < 0.0) throw ConfigError("config: scoring.collar must be >= 0");
    if (cfg.jobs < 1) throw ConfigError("config: general.jobs must be >= 1");
}

}  // namespace diarkit
