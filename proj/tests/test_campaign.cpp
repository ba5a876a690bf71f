#include <gtest/gtest.h>

#include "gazescroll/campaign.hpp"

using namespace gazescroll;
using namespace gazescroll::campaign;

namespace {

SessionPlan clean_plan(Technique t, std::uint64_t seed) {
    SessionPlan p;
    p.technique = t;
    p.seed = seed;
    p.mobility = "sitting";
    p.noise = sim::NoiseModel::zero();
    p.latency = sim::LatencyModel::none();
    return p;
}

}  // namespace

TEST(Campaign, DerivedSeedsDiffer) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(Campaign, CleanSessionsTurnEveryPageByGesture) {
    for (Technique t : gesture_techniques()) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto rec = simulate_session(clean_plan(t, seed));
            const auto m = analytics::score_session(rec.events(), rec.annotations());
            EXPECT_EQ(m.attempts, 6u) << to_string(t);
            EXPECT_EQ(m.true_triggers, 6u) << to_string(t);
            EXPECT_EQ(m.false_triggers, 0u);
            EXPECT_EQ(m.aborts, 0u);
            const auto scrolls = rec.scrolls();
            ASSERT_EQ(scrolls.size(), 5u);
            for (const auto& s : scrolls) EXPECT_EQ(s.cause, t);
            EXPECT_NO_THROW(io::validate_order(rec));
        }
    }
}

TEST(Campaign, SessionsAreDeterministicPerSeed) {
    SessionPlan p;
    p.technique = Technique::MovingBar;
    p.mobility = "walking";
    p.seed = 11;
    EXPECT_EQ(io::to_string(simulate_session(p)), io::to_string(simulate_session(p)));
    SessionPlan q = p;
    q.seed = 12;
    EXPECT_NE(io::to_string(simulate_session(p)), io::to_string(simulate_session(q)));
}

TEST(Campaign, ReadingTimePerPageIsPlausible) {
    const auto rec = simulate_session(clean_plan(Technique::Hitbox, 4));
    const auto scrolls = rec.scrolls();
    const auto r = analytics::rtpp(*rec.start_ms(), scrolls, *rec.end_ms());
    EXPECT_TRUE(r.durations_s.size() == 5 || r.durations_s.size() == 6);
    for (double d : r.durations_s) {
        EXPECT_GE(d, 15.0);
        EXPECT_LE(d, 65.0);
    }
}

TEST(Campaign, AutoScrollSessionsSchedule) {
    auto p = clean_plan(Technique::AutoScroll, 2);
    const auto rec = simulate_session(p);
    std::size_t scheduled = 0;
    for (const auto& e : rec.events()) scheduled += e.is<techniques::Scheduled>();
    EXPECT_GT(scheduled, 0u);
    EXPECT_TRUE(rec.annotations().empty());
    EXPECT_EQ(rec.scrolls().size(), 5u);
}

TEST(Campaign, HeaderRecordsSeedAndModels) {
    SessionPlan p;
    p.technique = Technique::EyeSwipe;
    p.mobility = "walking";
    p.seed = 99;
    const auto rec = simulate_session(p);
    EXPECT_EQ(rec.header.seed, 99u);
    EXPECT_EQ(rec.header.noise, "walking");
    EXPECT_EQ(rec.header.latency, "phone");
    EXPECT_EQ(rec.header.source, "simulate");
    EXPECT_EQ(rec.header.document.build(rec.header.geometry).pages.size(), 6u);
}

TEST(Campaign, RunCampaignCoversEveryCombination) {
    const auto r = run_campaign(gesture_techniques(), {"sitting", "walking"}, 1, 2);
    EXPECT_EQ(r.sessions.size(), 12u);
    EXPECT_EQ(r.report.size(), 6u);
    EXPECT_THROW(run_campaign(gesture_techniques(), {"sitting"}, 1, 0), std::invalid_argument);
    SessionPlan bad;
    bad.mobility = "running";
    EXPECT_THROW(simulate_session(bad), std::invalid_argument);
}

TEST(CalibrationTrial, NoiseFreeAffineIsRecovered) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto t = run_calibration_trial(0.0, seed);
        EXPECT_LT(t.calibrated_cm, 0.02);
        EXPECT_GT(t.raw_cm, 0.3);
    }
}

TEST(CalibrationTrial, NoiseLabels) {
    EXPECT_DOUBLE_EQ(calibration_noise_cm("sitting"), 0.95);
    EXPECT_DOUBLE_EQ(calibration_noise_cm("walking"), 1.98);
    EXPECT_DOUBLE_EQ(calibration_noise_cm("zero"), 0.0);
    EXPECT_DOUBLE_EQ(calibration_noise_cm("1.25"), 1.25);
    EXPECT_THROW(calibration_noise_cm("jogging"), std::invalid_argument);
    EXPECT_THROW(calibration_noise_cm("-1"), std::invalid_argument);
}

TEST(CalibrationTrial, WalkingCalibratedErrorNearTarget) {
    double sum = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) sum += run_calibration_trial(1.98, seed).calibrated_cm;
    EXPECT_NEAR(sum / 20, 1.98, 0.198);
}
