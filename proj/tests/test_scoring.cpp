#include <catch2/catch_amalgamated.hpp>

#include "diarkit/scoring.hpp"
#include "oracles.hpp"

using namespace diarkit;

static ScoringConfig no_collar() {
    ScoringConfig cfg;
    cfg.collar = 0.0;
    return cfg;
}

TEST_CASE("identical hypothesis scores zero DER") {
    SpeakerAnnotation ref("s", {{Segment(0.0, 5.0), "A"}, {Segment(4.0, 4.0), "B"}});
    const DerBreakdown d = score_der(ref, ref, no_collar());
    CHECK(d.der == Catch::Approx(0.0).margin(1e-12));
    CHECK(d.missed_speech == 0.0);
    CHECK(d.false_alarm == 0.0);
    CHECK(d.speaker_confusion == 0.0);
}

TEST_CASE("truncated hypothesis scores pure miss") {
    SpeakerAnnotation ref("s", {{Segment(0.0, 10.0), "A"}});
    SpeakerAnnotation hyp("s", {{Segment(0.0, 8.0), "X"}});
    const DerBreakdown d = score_der(ref, hyp, no_collar());
    CHECK(d.missed_speech == Catch::Approx(2.0).margin(1e-6));
    CHECK(d.false_alarm == Catch::Approx(0.0).margin(1e-9));
    CHECK(d.speaker_confusion == Catch::Approx(0.0).margin(1e-9));
    CHECK(d.total_reference == Catch::Approx(10.0).margin(1e-6));
    CHECK(d.der == Catch::Approx(0.20).margin(1e-6));
}

TEST_CASE("score_der error paths") {
    SpeakerAnnotation ref("s", {{Segment(0.0, 1.0), "A"}});
    CHECK_THROWS_WITH(score_der(SpeakerAnnotation("s"), ref, no_collar()),
                      Catch::Matchers::ContainsSubstring("no reference speech"));
    SpeakerAnnotation other("t", {{Segment(0.0, 1.0), "A"}});
    CHECK_THROWS_WITH(score_der(ref, other, no_collar()),
                      Catch::Matchers::ContainsSubstring("session id mismatch"));
}

TEST_CASE("DER matches the exhaustive-mapping oracle on random pairs") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const auto ref = oracles::random_annotation(rng, "s", 1 + trial % 4, 8, 30.0);
        const auto hyp = oracles::random_annotation(rng, "s", 1 + (trial / 4) % 4, 8, 30.0);
        const double collar = (trial % 3 == 0) ? 0.25 : 0.0;
        const bool overlap = trial % 2 == 0;
        ScoringConfig cfg;
        cfg.collar = collar;
        cfg.score_overlap = overlap;
        const auto fast = score_der(ref, hyp, cfg);
        const auto slow = oracles::der_by_enumeration(ref, hyp, collar, overlap);
        INFO("trial " << trial);
        REQUIRE(slow.total > 0.0);
        CHECK(fast.der == Catch::Approx(slow.der).margin(1e-6));
        CHECK(fast.total_reference == Catch::Approx(slow.total).margin(1e-6));
    }
}

TEST_CASE("DER is invariant under hypothesis relabeling") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ref = oracles::random_annotation(rng, "s", 3, 8, 25.0);
        const auto hyp = oracles::random_annotation(rng, "s", 3, 8, 25.0);
        const auto renamed = hyp.relabeled(
            {{"spk0", "zeta"}, {"spk1", "alpha"}, {"spk2", "omega"}});
        CHECK(score_der(ref, hyp, no_collar()).der ==
              Catch::Approx(score_der(ref, renamed, no_collar()).der).margin(1e-9));
    }
}

TEST_CASE("hypothesis speech inside reference silence adds only false alarm") {
    SpeakerAnnotation ref("s", {{Segment(0.0, 5.0), "A"}});
    SpeakerAnnotation hyp("s", {{Segment(0.0, 5.0), "A"}});
    SpeakerAnnotation hyp2("s", {{Segment(0.0, 5.0), "A"}, {Segment(8.0, 2.0), "A"}});
    const auto base = score_der(ref, hyp, no_collar());
    const auto extra = score_der(ref, hyp2, no_collar());
    CHECK(extra.false_alarm > base.false_alarm);
    CHECK(extra.missed_speech == Catch::Approx(base.missed_speech).margin(1e-9));
    CHECK(extra.speaker_confusion == Catch::Approx(base.speaker_confusion).margin(1e-9));
}

TEST_CASE("growing the collar never grows total_reference") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ref = oracles::random_annotation(rng, "s", 3, 8, 25.0);
        const auto hyp = oracles::random_annotation(rng, "s", 3, 8, 25.0);
        double prev = 1e300;
        for (double collar : {0.0, 0.1, 0.25, 0.5}) {
            ScoringConfig cfg;
            cfg.collar = collar;
            try {
                const auto d = score_der(ref, hyp, cfg);
                CHECK(d.total_reference <= prev + 1e-9);
                prev = d.total_reference;
            } catch (const std::invalid_argument&) {
                break;  // collar swallowed all reference speech
            }
        }
    }
}

TEST_CASE("OSD frame metrics") {
    SECTION("perfect prediction") {
        const std::vector<bool> ref = {true, false, true, true};
        const auto m = score_osd_frames(ref, ref);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    SECTION("all-negative prediction") {
        const std::vector<bool> ref = {true, false, true};
        const std::vector<bool> pred = {false, false, false};
        const auto m = score_osd_frames(ref, pred);
        CHECK(m.recall == 0.0);
        CHECK(m.f1 == 0.0);
    }
    SECTION("hand-counted half-right case") {
        const std::vector<bool> ref = {true, true, false, false};
        const std::vector<bool> pred = {true, false, true, false};
        const auto m = score_osd_frames(ref, pred);
        CHECK(m.tp == 1);
        CHECK(m.fp == 1);
        CHECK(m.fn == 1);
        CHECK(m.precision == Catch::Approx(0.5));
        CHECK(m.recall == Catch::Approx(0.5));
        CHECK(m.f1 == Catch::Approx(0.5));
    }
    SECTION("length mismatch") {
        CHECK_THROWS(score_osd_frames({true}, {true, false}));
    }
}

TEST_CASE("EER on pinned examples") {
    CHECK(compute_eer({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}) == Catch::Approx(0.0).margin(1e-12));
    CHECK(compute_eer({0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}) == Catch::Approx(0.5).margin(1e-9));
    CHECK(compute_eer({0.9, 0.7, 0.4}, {0.6, 0.3, 0.1}) == Catch::Approx(1.0 / 3.0).margin(1e-9));
    CHECK_THROWS(compute_eer({}, {0.1}));
    CHECK_THROWS(compute_eer({0.1}, {}));
}

TEST_CASE("EER is invariant under strictly monotone score transforms") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> targets, nontargets;
        for (int i = 0; i < 40; ++i) targets.push_back(rng.normal(1.0, 1.0));
        for (int i = 0; i < 55; ++i) nontargets.push_back(rng.normal(-1.0, 1.0));
        const double base = compute_eer(targets, nontargets);
        auto transform = [](std::vector<double> v) {
            for (double& x : v) x = std::tanh(0.7 * x) * 3.0 + 11.0;
            return v;
        };
        CHECK(compute_eer(transform(targets), transform(nontargets)) ==
              Catch::Approx(base).margin(1e-9));
        CHECK(base >= 0.0);
        CHECK(base <= 0.5 + 1e-9);
    }
}

TEST_CASE("EER against an exhaustive threshold sweep oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> targets, nontargets;
        for (int i = 0; i < 25; ++i) targets.push_back(rng.uniform(0.0, 1.0));
        for (int i = 0; i < 30; ++i) nontargets.push_back(rng.uniform(-0.3, 0.7));
        const double eer = compute_eer(targets, nontargets);
        // At the crossing the two error rates agree; verify the returned rate
        // is bracketed by the achievable (FA, FR) pairs around it.
        double best_gap = 1e300;
        double fa_at_best = 0.0, fr_at_best = 0.0;
        std::vector<double> pooled = targets;
        pooled.insert(pooled.end(), nontargets.begin(), nontargets.end());
        for (double thr : pooled) {
            double fa = 0.0, fr = 0.0;
            for (double t : targets) fr += t < thr ? 1.0 : 0.0;
            for (double n : nontargets) fa += n >= thr ? 1.0 : 0.0;
            fa /= nontargets.size();
            fr /= targets.size();
            if (std::abs(fa - fr) < best_gap) {
                best_gap = std::abs(fa - fr);
                fa_at_best = fa;
                fr_at_best = fr;
            }
        }
        const double lo = std::min(fa_at_best, fr_at_best) - 1e-9;
        const double hi = std::max(fa_at_best, fr_at_best) + 1e-9;
        INFO("trial " << trial << " eer " << eer << " bracket [" << lo << ", " << hi << "]");
        CHECK(eer >= lo);
        CHECK(eer <= hi);
    }
}
