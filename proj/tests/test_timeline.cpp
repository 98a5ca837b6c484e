#include <catch2/catch_amalgamated.hpp>

#include "diarkit/annotation.hpp"
#include "diarkit/timeline.hpp"
#include "oracles.hpp"

using namespace diarkit;

TEST_CASE("segment validation") {
    CHECK_THROWS(Segment(-1.0, 1.0));
    CHECK_THROWS(Segment(0.0, 0.0));
    CHECK_THROWS(Segment(0.0, -2.0));
    CHECK(Segment(1.5, 2.0).end() == Catch::Approx(3.5));
}

TEST_CASE("timeline normalization merges overlaps and abutments") {
    Timeline t({{0.0, 1.0}, {0.5, 1.0}, {1.5, 0.5}, {3.0, 1.0}});
    REQUIRE(t.size() == 2);
    CHECK(t.segments()[0] == Segment(0.0, 2.0));
    CHECK(t.segments()[1] == Segment(3.0, 1.0));
}

TEST_CASE("normalization is idempotent") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const Timeline t = oracles::random_timeline(rng, 12, 30.0);
        const Timeline again(std::vector<Segment>(t.segments()));
        CHECK(t == again);
    }
}

TEST_CASE("union with empty timeline is identity") {
    const Timeline a({{0.0, 10.0}});
    const Timeline empty;
    CHECK(timeline_union(a, empty) == a);
    CHECK(timeline_union(empty, a) == a);
}

TEST_CASE("intersection of [0,5) and [3,8) is [3,5)") {
    const Timeline a({{0.0, 5.0}});
    const Timeline b({{3.0, 5.0}});
    const Timeline i = timeline_intersection(a, b);
    REQUIRE(i.size() == 1);
    CHECK(i.segments()[0] == Segment(3.0, 2.0));
}

TEST_CASE("timeline ops agree with a 1ms-grid mask oracle") {
    Rng rng(7);
    const double horizon = 40.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Timeline a = oracles::random_timeline(rng, 10, horizon);
        const Timeline b = oracles::random_timeline(rng, 10, horizon);

        const auto ma = oracles::to_mask(a, 0.001, horizon * 1.5);
        const auto mb = oracles::to_mask(b, 0.001, horizon * 1.5);

        const struct {
            TimelineOp op;
            char mask_op;
        } kinds[] = {{TimelineOp::Union, 'u'},
                     {TimelineOp::Intersection, 'i'},
                     {TimelineOp::Difference, 'd'}};
        for (const auto& kind : kinds) {
            const Timeline result = timeline_ops(a, b, kind.op);
            const auto expect = oracles::mask_op(ma, mb, kind.mask_op);
            const auto got = oracles::to_mask(result, 0.001, horizon * 1.5);
            REQUIRE(got.mask.size() == expect.mask.size());
            for (size_t i = 0; i < got.mask.size(); ++i) {
                INFO("trial " << trial << " cell " << i);
                REQUIRE(got.mask[i] == expect.mask[i]);
            }
        }

        // |union| = |a| + |b| - |intersection| to 1e-9 s.
        const double u = timeline_union(a, b).total_duration();
        const double i = timeline_intersection(a, b).total_duration();
        CHECK(u == Catch::Approx(a.total_duration() + b.total_duration() - i).margin(1e-9));
    }
}

TEST_CASE("union and intersection are commutative and associative") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const Timeline a = oracles::random_timeline(rng, 8, 20.0);
        const Timeline b = oracles::random_timeline(rng, 8, 20.0);
        const Timeline c = oracles::random_timeline(rng, 8, 20.0);
        CHECK(timeline_union(a, b).total_duration() ==
              Catch::Approx(timeline_union(b, a).total_duration()).margin(1e-9));
        CHECK(timeline_intersection(a, b).total_duration() ==
              Catch::Approx(timeline_intersection(b, a).total_duration()).margin(1e-9));
        CHECK(timeline_union(timeline_union(a, b), c).total_duration() ==
              Catch::Approx(timeline_union(a, timeline_union(b, c)).total_duration())
                  .margin(1e-9));
        CHECK(timeline_intersection(timeline_intersection(a, b), c).total_duration() ==
              Catch::Approx(
                  timeline_intersection(a, timeline_intersection(b, c)).total_duration())
                  .margin(1e-9));
    }
}

TEST_CASE("rasterize a full-second single-speaker annotation") {
    SpeakerAnnotation ann("s", {{Segment(0.0, 1.0), "A"}});
    const auto frames = rasterize(ann, 0.01, 1.0);
    REQUIRE(frames.size() == 100);
    for (const auto& f : frames) {
        REQUIRE(f.size() == 1);
        REQUIRE(f.count("A") == 1);
    }
}

TEST_CASE("rasterize empty annotation yields empty frames") {
    SpeakerAnnotation ann("s");
    const auto frames = rasterize(ann, 0.01, 0.5);
    REQUIRE(frames.size() == 50);
    for (const auto& f : frames) CHECK(f.empty());
}

TEST_CASE("rasterize duration consistency within one frame per boundary") {
    Rng rng(3);
    const double shift = 0.01;
    for (int trial = 0; trial < 30; ++trial) {
        const auto ann = oracles::random_annotation(rng, "s", 3, 8, 25.0);
        const auto frames = rasterize(ann, shift, ann.extent_end() + 0.1);
        std::map<std::string, double> framed;
        for (const auto& f : frames) {
            for (const auto& spk : f) framed[spk] += shift;
        }
        size_t total_boundaries = 0;
        for (const std::string& spk : ann.speakers()) {
            const Timeline tl = ann.speaker_timeline(spk);
            total_boundaries = 2 * tl.size();
            const double truth = tl.total_duration();
            CHECK(std::abs(framed[spk] - truth) <=
                  shift * static_cast<double>(total_boundaries) + 1e-9);
        }
    }
}

TEST_CASE("annotation merges same-speaker overlaps but keeps cross-speaker overlap") {
    SpeakerAnnotation ann("s", {{Segment(0.0, 2.0), "A"},
                                {Segment(1.0, 2.0), "A"},
                                {Segment(2.0, 2.0), "B"}});
    REQUIRE(ann.entries().size() == 2);
    CHECK(ann.speaker_timeline("A").total_duration() == Catch::Approx(3.0));
    CHECK(ann.overlap_regions().total_duration() == Catch::Approx(1.0));
}
