#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "diarkit/osd.hpp"
#include "diarkit/scoring.hpp"
#include "oracles.hpp"

using namespace diarkit;

namespace {

// Recording provider for aggregation checks: posterior row encodes the frame
// index so averaging mistakes are visible.
class RampProvider final : public PosteriorProvider {
  public:
    explicit RampProvider(Eigen::Index frames) : frames_(frames) {}
    Eigen::Index total_frames() const override { return frames_; }
    Eigen::MatrixXd infer_window(Eigen::Index begin, Eigen::Index count) const override {
        Eigen::MatrixXd out(count, 3);
        for (Eigen::Index i = 0; i < count; ++i) {
            const double p = static_cast<double>(begin + i) / static_cast<double>(frames_ * 2);
            out.row(i) = Eigen::RowVector3d(p, 1.0 - 2.0 * p, p);
        }
        return out;
    }
  private:
    Eigen::Index frames_;
};

// Provider whose output depends on the window position, exercising the
// averaging of overlapped windows.
class WindowTagProvider final : public PosteriorProvider {
  public:
    explicit WindowTagProvider(Eigen::Index frames) : frames_(frames) {}
    Eigen::Index total_frames() const override { return frames_; }
    Eigen::MatrixXd infer_window(Eigen::Index begin, Eigen::Index count) const override {
        calls.push_back({begin, count});
        Eigen::MatrixXd out(count, 3);
        const double tag = 1.0 / (2.0 + static_cast<double>(begin));
        for (Eigen::Index i = 0; i < count; ++i) {
            out.row(i) = Eigen::RowVector3d(tag, 1.0 - 2.0 * tag, tag);
        }
        return out;
    }
    mutable std::vector<std::pair<Eigen::Index, Eigen::Index>> calls;
  private:
    Eigen::Index frames_;
};

class BadShapeProvider final : public PosteriorProvider {
  public:
    Eigen::Index total_frames() const override { return 900; }
    Eigen::MatrixXd infer_window(Eigen::Index, Eigen::Index count) const override {
        return Eigen::MatrixXd::Zero(count - 1, 3);
    }
};

FramePosteriors constant_posteriors(Eigen::Index frames, double silence, double single,
                                    double overlap) {
    FramePosteriors p;
    p.values.resize(frames, 3);
    for (Eigen::Index f = 0; f < frames; ++f) {
        p.values.row(f) = Eigen::RowVector3d(silence, single, overlap);
    }
    return p;
}

}  // namespace

TEST_CASE("single-window input passes through the provider output") {
    RampProvider provider(300);
    OsdConfig cfg;  // window 400 > 300 frames
    const auto post = aggregate_windows(provider, cfg);
    const auto direct = provider.infer_window(0, 300);
    CHECK((post.values - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("overlapped windows average arithmetically") {
    WindowTagProvider provider(600);
    OsdConfig cfg;  // 400/200: frames 200..399 covered by windows at 0 and 200
    const auto post = aggregate_windows(provider, cfg);
    REQUIRE(provider.calls.size() == 2);
    const double tag0 = 1.0 / 2.0e0, tag200 = 1.0 / 202.0;
    (void)tag0;
    const double expect = (1.0 / 2.0 + 1.0 / 202.0) / 2.0;
    CHECK(post.values(250, 0) == Catch::Approx(expect).margin(1e-12));
    CHECK(post.values(100, 0) == Catch::Approx(0.5).margin(1e-12));
    CHECK(post.values(450, 0) == Catch::Approx(tag200).margin(1e-12));
}

TEST_CASE("aggregation matches brute-force coverage recomputation") {
    Rng trial_rng(51);
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Index frames = 401 + trial_rng.uniform_int(0, 1599);
        WindowTagProvider provider(frames);
        OsdConfig cfg;
        const auto post = aggregate_windows(provider, cfg);

        // Brute force: rebuild expected coverage from the window rule.
        std::vector<Eigen::Index> starts;
        if (frames <= cfg.window) {
            starts.push_back(0);
        } else {
            for (Eigen::Index s = 0; s + cfg.window <= frames; s += cfg.stride) starts.push_back(s);
            if (starts.back() + cfg.window < frames) starts.push_back(frames - cfg.window);
        }
        for (Eigen::Index f = 0; f < frames; f += 37) {
            double sum = 0.0;
            int cover = 0;
            for (Eigen::Index s : starts) {
                if (f >= s && f < s + cfg.window) {
                    sum += 1.0 / (2.0 + static_cast<double>(s));
                    ++cover;
                }
            }
            REQUIRE(cover > 0);
            const double mean = sum / cover;
            INFO("trial " << trial << " frame " << f);
            CHECK(post.values(f, 0) == Catch::Approx(mean).margin(1e-12));
        }
        // Tail frames are covered by the right-aligned final window.
        CHECK(post.values(frames - 1, 0) > 0.0);
    }
}

TEST_CASE("stride equal to window concatenates windows") {
    WindowTagProvider provider(1200);
    OsdConfig cfg;
    cfg.window = 400;
    cfg.stride = 400;
    const auto post = aggregate_windows(provider, cfg);
    CHECK(post.values(0, 0) == Catch::Approx(1.0 / 2.0));
    CHECK(post.values(401, 0) == Catch::Approx(1.0 / 402.0));
    CHECK(post.values(801, 0) == Catch::Approx(1.0 / 802.0));
}

TEST_CASE("provider shape errors name the window") {
    BadShapeProvider provider;
    CHECK_THROWS_WITH(aggregate_windows(provider, OsdConfig{}),
                      Catch::Matchers::ContainsSubstring("window 0"));
}

TEST_CASE("fuse_posteriors") {
    const auto p = constant_posteriors(50, 0.2, 0.3, 0.5);
    const auto q = constant_posteriors(50, 0.4, 0.3, 0.3);
    SECTION("single input is identity") {
        const auto f = fuse_posteriors({p});
        CHECK((f.values - p.values).norm() == 0.0);
    }
    SECTION("identical inputs are idempotent") {
        const auto f = fuse_posteriors({p, p});
        CHECK((f.values - p.values).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("two inputs average element-wise and stay row-stochastic") {
        const auto f = fuse_posteriors({p, q});
        CHECK(f.values(0, 0) == Catch::Approx(0.3));
        CHECK(f.values(0, 1) == Catch::Approx(0.3));
        CHECK(f.values(0, 2) == Catch::Approx(0.4));
        for (Eigen::Index i = 0; i < f.num_frames(); ++i) {
            CHECK(f.values.row(i).sum() == Catch::Approx(1.0).margin(1e-9));
        }
    }
    SECTION("shape mismatch") {
        CHECK_THROWS(fuse_posteriors({p, constant_posteriors(49, 0.2, 0.3, 0.5)}));
    }
}

TEST_CASE("decide_overlap with hot overlap column claims the whole vad") {
    const Timeline vad({{1.0, 4.0}, {6.0, 2.0}});
    const auto post = constant_posteriors(1000, 0.2, 0.2, 0.6);
    const auto decision = decide_overlap(post, vad, OsdConfig{});  // threshold 0.55
    CHECK(decision.overlap == vad);
    CHECK(decision.single.empty());
}

TEST_CASE("decide_overlap with cold overlap column yields single only") {
    const Timeline vad({{1.0, 4.0}});
    const auto post = constant_posteriors(1000, 0.5, 0.5, 0.0);
    const auto decision = decide_overlap(post, vad, OsdConfig{});
    CHECK(decision.overlap.empty());
    CHECK(decision.single == vad);
}

TEST_CASE("decide_overlap partition is exact against a frame oracle") {
    Rng rng(53);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index frames = 500 + rng.uniform_int(0, 700);
        FramePosteriors post;
        post.values.resize(frames, 3);
        for (Eigen::Index f = 0; f < frames; ++f) {
            const double ov = rng.uniform(0.0, 1.0);
            post.values.row(f) = Eigen::RowVector3d((1.0 - ov) / 2.0, (1.0 - ov) / 2.0, ov);
        }
        const Timeline vad = oracles::random_timeline(rng, 6, frames * 0.01);
        OsdConfig cfg;
        const auto decision = decide_overlap(post, vad, cfg);

        // Exact partition.
        CHECK(timeline_intersection(decision.overlap, decision.single).total_duration() <
              1e-9);
        CHECK(timeline_union(decision.overlap, decision.single) == vad);

        // Frame-grid agreement away from segment boundaries.
        const auto ov_mask = oracles::to_mask(decision.overlap, 0.01, frames * 0.01);
        for (Eigen::Index f = 0; f < frames; ++f) {
            const double mid = (f + 0.5) * 0.01;
            bool interior = false;
            for (const Segment& s : vad.segments()) {
                if (mid > s.onset + 0.011 && mid < s.end() - 0.011) interior = true;
            }
            if (!interior) continue;
            const bool want = post.values(f, 2) >= cfg.threshold;
            INFO("trial " << trial << " frame " << f);
            REQUIRE(ov_mask.mask[f] == want);
        }
    }
}

TEST_CASE("raising the threshold never grows the overlap") {
    Rng rng(54);
    FramePosteriors post;
    post.values.resize(800, 3);
    for (Eigen::Index f = 0; f < 800; ++f) {
        const double ov = rng.uniform(0.0, 1.0);
        post.values.row(f) = Eigen::RowVector3d((1.0 - ov) / 2.0, (1.0 - ov) / 2.0, ov);
    }
    const Timeline vad({{0.0, 8.0}});
    double prev = 1e300;
    for (double threshold : {0.2, 0.4, 0.55, 0.7, 0.9}) {
        OsdConfig cfg;
        cfg.threshold = threshold;
        const double dur = decide_overlap(post, vad, cfg).overlap.total_duration();
        CHECK(dur <= prev + 1e-9);
        prev = dur;
    }
}

TEST_CASE("min_overlap_duration returns short segments to single") {
    FramePosteriors post = constant_posteriors(300, 0.6, 0.3, 0.1);
    // One short hot run (3 frames) and one long one (60 frames).
    for (int f = 50; f < 53; ++f) post.values.row(f) = Eigen::RowVector3d(0.1, 0.1, 0.8);
    for (int f = 100; f < 160; ++f) post.values.row(f) = Eigen::RowVector3d(0.1, 0.1, 0.8);
    const Timeline vad({{0.0, 3.0}});
    OsdConfig cfg;
    cfg.min_overlap_duration = 0.2;
    const auto decision = decide_overlap(post, vad, cfg);
    REQUIRE(decision.overlap.size() == 1);
    CHECK(decision.overlap.segments()[0] == Segment(1.0, 0.6));
    CHECK(timeline_union(decision.overlap, decision.single) == vad);
}

TEST_CASE("overlap_ratio") {
    const Timeline vad({{0.0, 48.0}});
    CHECK(overlap_ratio(vad, vad) == Catch::Approx(1.0));
    CHECK(overlap_ratio(Timeline{}, vad) == 0.0);
    CHECK(overlap_ratio(Timeline({{0.0, 12.0}}), vad) == Catch::Approx(0.25));
    CHECK(overlap_ratio(Timeline{}, Timeline{}) == 0.0);
}

TEST_CASE("oracle posteriors, noise free, reproduce the reference classes") {
    SpeakerAnnotation ref("s", {{Segment(0.0, 4.0), "A"},
                                {Segment(3.0, 3.0), "B"},
                                {Segment(8.0, 2.0), "A"}});
    OraclePosteriorProvider provider(ref, 0.0, 1);
    const auto post = aggregate_windows(provider, OsdConfig{});
    const auto frames = rasterize(ref, kOsdFrameShift, ref.extent_end());
    for (size_t f = 0; f < frames.size(); ++f) {
        const int true_class = frames[f].size() == 0 ? 0 : (frames[f].size() == 1 ? 1 : 2);
        Eigen::Index argmax;
        post.values.row(f).maxCoeff(&argmax);
        REQUIRE(static_cast<int>(argmax) == true_class);
    }

    // Closure: through decide_overlap and frame scoring, F1 = 1.
    const auto decision = decide_overlap(post, ref.support(), OsdConfig{});
    const auto truth_frames = rasterize(ref, kOsdFrameShift, ref.extent_end());
    std::vector<bool> truth, predicted;
    const auto pred_ann = SpeakerAnnotation(
        "s", [&] {
            std::vector<SpeakerAnnotation::Entry> e;
            for (const Segment& s : decision.overlap.segments()) e.push_back({s, "ov"});
            return e;
        }());
    const auto pred_frames = rasterize(pred_ann, kOsdFrameShift, ref.extent_end());
    for (size_t f = 0; f < truth_frames.size(); ++f) {
        truth.push_back(truth_frames[f].size() >= 2);
        predicted.push_back(!pred_frames[f].empty());
    }
    const auto metrics = score_osd_frames(truth, predicted);
    CHECK(metrics.f1 == Catch::Approx(1.0));
}

TEST_CASE("oracle posterior noise degrades F1 monotonically") {
    std::map<double, double> mean_f1;
    for (double noise : {0.1, 0.2, 0.3}) {
        double total = 0.0;
        int sessions = 0;
        for (int s = 0; s < 25; ++s) {
            Rng rng(1000 + s);
            const auto ref = oracles::random_annotation(rng, "s", 3, 10, 40.0);
            const auto truth_frames = rasterize(ref, kOsdFrameShift, ref.extent_end());
            bool has_overlap = false;
            for (const auto& fr : truth_frames) has_overlap |= fr.size() >= 2;
            if (!has_overlap) continue;

            OraclePosteriorProvider provider(ref, noise, 555 + s);
            const auto post = aggregate_windows(provider, OsdConfig{});
            const auto decision = decide_overlap(post, ref.support(), OsdConfig{});
            const auto ov_mask =
                oracles::to_mask(decision.overlap, kOsdFrameShift, ref.extent_end());
            std::vector<bool> truth, predicted;
            for (size_t f = 0; f < truth_frames.size(); ++f) {
                truth.push_back(truth_frames[f].size() >= 2);
                predicted.push_back(f < ov_mask.mask.size() && ov_mask.mask[f]);
            }
            total += score_osd_frames(truth, predicted).f1;
            ++sessions;
        }
        mean_f1[noise] = total / sessions;
    }
    INFO("F1: 0.1->" << mean_f1[0.1] << " 0.2->" << mean_f1[0.2] << " 0.3->" << mean_f1[0.3]);
    CHECK(mean_f1[0.1] > mean_f1[0.2]);
    CHECK(mean_f1[0.2] > mean_f1[0.3]);
    CHECK(mean_f1[0.2] > 0.0);
    CHECK(mean_f1[0.2] < 1.0);
}

TEST_CASE("posterior file round trip is bit exact") {
    Rng rng(57);
    for (int trial = 0; trial < 20; ++trial) {
        FramePosteriors post;
        const Eigen::Index frames = 10 + rng.uniform_int(0, 200);
        post.values.resize(frames, 3);
        for (Eigen::Index f = 0; f < frames; ++f) {
            Eigen::RowVector3d row(rng.uniform(0.01, 1.0), rng.uniform(0.01, 1.0),
                                   rng.uniform(0.01, 1.0));
            post.values.row(f) = row / row.sum();
        }
        const std::string path =
            std::filesystem::temp_directory_path() / "diarkit_post_test.post";
        save_posteriors(post, "sess", path);
        const auto loaded = load_posteriors(path);
        CHECK(loaded.session_id == "sess");
        REQUIRE(loaded.posteriors.num_frames() == frames);
        CHECK((loaded.posteriors.values - post.values).cwiseAbs().maxCoeff() == 0.0);

        // Re-writing reproduces the identical byte stream.
        const std::string path2 =
            std::filesystem::temp_directory_path() / "diarkit_post_test2.post";
        save_posteriors(loaded.posteriors, loaded.session_id, path2);
        std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)),
                             std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)),
                             std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
        std::filesystem::remove(path);
        std::filesystem::remove(path2);
    }
}
