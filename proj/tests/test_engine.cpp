#include <gtest/gtest.h>

#include "gazescroll/engine.hpp"

using namespace gazescroll;
using techniques::Progress;
using techniques::StateChange;
using techniques::Trigger;

namespace {

ScrollEngine make_engine(Technique t, techniques::TechniqueConfig c = {}, std::size_t pages = 6) {
    ScreenGeometry g;
    return ScrollEngine({g, c, {}, DocumentModel::with_pages(pages, g), t});
}

}  // namespace

TEST(Engine, HitboxDwellTurnsThePage) {
    auto engine = make_engine(Technique::Hitbox);
    const auto center = engine.layout().hitbox.center();
    std::vector<double> progress;
    std::vector<ScrollEvent> scrolls;
    for (double t = 0; t <= 1200; t += 40) {
        auto out = engine.push({t, center.x, center.y});
        for (auto& e : out.events)
            if (e.is<Progress>()) progress.push_back(std::get<Progress>(e.payload).fraction);
        scrolls.insert(scrolls.end(), out.scrolls.begin(), out.scrolls.end());
    }
    ASSERT_EQ(scrolls.size(), 1u);
    EXPECT_NEAR(scrolls[0].t_ms, 1000, 40);
    EXPECT_EQ(scrolls[0].from_page, 0u);
    EXPECT_EQ(scrolls[0].to_page, 1u);
    EXPECT_EQ(scrolls[0].cause, Technique::Hitbox);
    EXPECT_EQ(engine.current_page().index, 1u);
    ASSERT_FALSE(progress.empty());
    EXPECT_TRUE(std::is_sorted(progress.begin(), progress.end()));
    EXPECT_DOUBLE_EQ(progress.back(), 1.0);
}

TEST(Engine, HitboxIgnoresGazeOutsideBottomBar) {
    auto engine = make_engine(Technique::Hitbox);
    for (double t = 0; t <= 3000; t += 40) {
        auto out = engine.push({t, 214, 700});
        EXPECT_TRUE(out.events.empty());
    }
}

TEST(Engine, EyeSwipeScrollAndUiPrimedFlag) {
    auto engine = make_engine(Technique::EyeSwipe);
    bool saw_primed = false;
    std::size_t scrolls = 0;
    double t = 0;
    for (; t <= 600; t += 40) saw_primed |= engine.push({t, 214, 720}).ui.primed;
    for (double y : {586.0, 452.0, 318.0, 184.0, 50.0}) {
        auto out = engine.push({t, 214, y});
        scrolls += out.scrolls.size();
        t += 40;
    }
    EXPECT_TRUE(saw_primed);
    EXPECT_EQ(scrolls, 1u);
    EXPECT_FALSE(engine.ui().primed);
    EXPECT_EQ(engine.ui().page, 1u);
}

TEST(Engine, MovingBarReportsBarPosition) {
    auto engine = make_engine(Technique::MovingBar);
    const auto& l = engine.layout();
    double t = 0;
    for (; t <= 320; t += 40) engine.push({t, l.bar_start_x_px, l.bar_y_px});
    auto mid = engine.push({t + 480, l.bar_start_x_px + l.bar_travel_px * 0.52, l.bar_y_px});
    EXPECT_NEAR(mid.ui.bar_x_px, l.bar_start_x_px + l.bar_travel_px * 0.52, 1e-9);
}

TEST(Engine, LastPageReportsEndOfDocument) {
    auto engine = make_engine(Technique::Touch, {}, 2);
    auto first = engine.touch(10);
    EXPECT_EQ(first.scrolls.size(), 1u);
    auto second = engine.touch(20);
    EXPECT_TRUE(second.scrolls.empty());
    EXPECT_TRUE(second.end_of_document);
    EXPECT_TRUE(engine.finished());
}

TEST(Engine, ReconfigureResetsAndAnnouncesInitialState) {
    auto engine = make_engine(Technique::EyeSwipe);
    for (double t = 0; t <= 600; t += 40) engine.push({t, 214, 720});
    EXPECT_TRUE(engine.ui().primed);
    techniques::TechniqueConfig c;
    c.hitbox_dwell_ms = 800;
    auto out = engine.reconfigure(Technique::Hitbox, c, 640);
    ASSERT_EQ(out.events.size(), 1u);
    EXPECT_EQ(std::get<StateChange>(out.events[0].payload), (StateChange{"reset", "idle"}));
    EXPECT_FALSE(engine.ui().primed);
    auto again = engine.push({680, 214, 50});  // a swipe sweep no longer matters
    EXPECT_TRUE(again.scrolls.empty());
}

TEST(Engine, RejectsInvalidConfigAndTimeReversal) {
    techniques::TechniqueConfig bad;
    bad.bar_duration_ms = 100;
    EXPECT_THROW(make_engine(Technique::MovingBar, bad), std::invalid_argument);
    auto engine = make_engine(Technique::Touch);
    engine.push({100, 1, 1});
    EXPECT_THROW(engine.push({100, 1, 1}), NonMonotonicTimestamp);
}

TEST(Engine, AutoScrollTurnsForSteadyReaderAndNeverForStaticGaze) {
    ScreenGeometry g;
    auto doc = DocumentModel::with_pages(3, g);
    ScrollEngine moving({g, {}, {}, doc, Technique::AutoScroll});
    ScrollEngine frozen({g, {}, {}, doc, Technique::AutoScroll});
    // One line every 1.2 s, four fixations per line.
    std::optional<double> turned;
    for (double t = 0; t < 40000; t += 40) {
        const int line = static_cast<int>(t / 1200);
        const double y = 152.5 + 43 * std::min(line, 14);
        const double x = 40 + 90 * (static_cast<int>(t / 300) % 4);
        auto out = moving.push({t, x, y});
        if (!out.scrolls.empty() && !turned) turned = t;
        auto still = frozen.push({t, x, 400});
        EXPECT_TRUE(still.scrolls.empty());
    }
    ASSERT_TRUE(turned);
    EXPECT_NEAR(*turned, 18000, 1800);
}
