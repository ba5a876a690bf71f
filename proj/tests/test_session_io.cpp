#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gazescroll/campaign.hpp"
#include "gazescroll/session_io.hpp"

using namespace gazescroll;
using namespace gazescroll::io;
using techniques::DetectorEvent;

namespace {

SessionHeader hitbox_header() {
    SessionHeader h;
    h.technique = Technique::Hitbox;
    h.seed = 42;
    h.mobility = "sitting";
    return h;
}

// A session with every record kind, time-ordered.
SessionRecording mixed_session(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-50, 950), frac(0, 1);
    SessionRecording rec;
    rec.header = hitbox_header();
    double t = 0;
    for (std::size_t i = 0; rec.records.size() < n; ++i) {
        t += 40 + frac(rng);
        rec.records.push_back(GazeSample{t, coord(rng), coord(rng), frac(rng) > 0.1,
                                         i % 5 ? SampleKind::Raw : SampleKind::Calibrated});
        switch (i % 9) {
        case 1: rec.records.push_back(DetectorEvent{t, Technique::Hitbox, techniques::Progress{frac(rng)}}); break;
        case 2: rec.records.push_back(DetectorEvent{t, Technique::EyeSwipe, techniques::StateChange{"reading", "priming"}}); break;
        case 3: rec.records.push_back(DetectorEvent{t, Technique::Hitbox, techniques::Abort{"fixation ended"}}); break;
        case 4: rec.records.push_back(DetectorEvent{t, Technique::AutoScroll, techniques::Scheduled{t + 1234.5}}); break;
        case 5:
            rec.records.push_back(DetectorEvent{t, Technique::Hitbox, techniques::Trigger{}});
            rec.records.push_back(ScrollEvent{t, 0, 1, Technique::Hitbox});
            rec.records.push_back(PageRecord{t, 1, true});
            break;
        case 6: rec.records.push_back(AnnotationRecord{t, {t, t + 1000, t + 1100, Technique::Hitbox}}); break;
        case 7: rec.records.push_back(TouchRecord{t}); break;
        case 8: {
            techniques::TechniqueConfig c;
            c.hitbox_dwell_ms = 700 + static_cast<double>(i);
            rec.records.push_back(ConfigRecord{t, Technique::Hitbox, c});
            break;
        }
        default: break;
        }
    }
    rec.records.resize(n);
    return rec;
}

std::vector<GazeSample> dwell(double t0, double t1, double x, double y) {
    std::vector<GazeSample> out;
    for (double t = t0; t <= t1; t += 40) out.push_back({t, x, y});
    return out;
}

}  // namespace

TEST(SessionFormat, EmptyBodyIsHeaderOnly) {
    SessionRecording rec;
    rec.header = hitbox_header();
    const std::string text = to_string(rec);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
    EXPECT_EQ(text.rfind("GAZESCROLL 1 {", 0), 0u);
    std::istringstream in(text);
    EXPECT_EQ(read(in).recording, rec);
}

TEST(SessionFormat, RoundTripIsByteIdentical) {
    const auto rec = mixed_session(1000, 3);
    const std::string first = to_string(rec);
    std::istringstream in(first);
    const auto back = read(in);
    EXPECT_EQ(back.skipped_records, 0u);
    EXPECT_EQ(back.recording, rec);
    EXPECT_EQ(to_string(back.recording), first);
}

TEST(SessionFormat, RoundTripProperty) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto rec = mixed_session(50 + seed * 7, seed);
        std::istringstream in(to_string(rec));
        ASSERT_EQ(read(in).recording, rec) << seed;
    }
}

TEST(SessionFormat, HeaderCarriesCalibratorAndModels) {
    SessionRecording rec;
    rec.header = hitbox_header();
    rec.header.noise = "walking";
    rec.header.latency = "phone";
    rec.header.calibrator = calibration::CalibratorKind::PolynomialRidge;
    rec.header.calibrator_coefficients = {2, 0.1, -3.25, 1e-12};
    rec.header.config.hitbox_dwell_ms = 1500;
    rec.header.seed.reset();
    std::istringstream in(to_string(rec));
    EXPECT_EQ(read(in).recording.header, rec.header);
}

TEST(SessionFormat, WriteRefusesOutOfOrderRecords) {
    SessionRecording rec;
    rec.header = hitbox_header();
    rec.records = {GazeSample{100, 1, 1}, TouchRecord{50}};
    std::ostringstream os;
    EXPECT_THROW(write(rec, os), std::invalid_argument);
    rec.records = {GazeSample{100, 1, 1}, GazeSample{100, 2, 2}};
    EXPECT_THROW(write(rec, os), NonMonotonicTimestamp);
    // Equal times across record kinds are fine.
    rec.records = {GazeSample{100, 1, 1}, DetectorEvent{100, Technique::Hitbox, techniques::Trigger{}}};
    EXPECT_NO_THROW(write(rec, os));
}

TEST(SessionFormat, ReadErrorsNameTheLine) {
    SessionRecording rec = mixed_session(20, 1);
    std::string text = to_string(rec);
    // Truncated last line: drop the final newline.
    {
        std::istringstream in(text.substr(0, text.size() - 1));
        try {
            read(in);
            FAIL() << "expected a format error";
        } catch (const SessionFormatError& e) {
            EXPECT_EQ(e.line(), 21u);
            EXPECT_NE(std::string(e.what()).find("line 21"), std::string::npos);
        }
    }
    // Malformed numeric field on line 3.
    {
        std::istringstream lines(text);
        std::string out, line;
        for (int i = 1; std::getline(lines, line); ++i) {
            if (i == 3) line = "S\t12x\t1\t1\t1\traw";
            out += line + '\n';
        }
        std::istringstream in(out);
        try {
            read(in);
            FAIL();
        } catch (const SessionFormatError& e) {
            EXPECT_EQ(e.line(), 3u);
        }
    }
}

TEST(SessionFormat, FutureVersionIsRejected) {
    SessionRecording rec;
    rec.header = hitbox_header();
    std::string text = to_string(rec);
    text.replace(0, 12, "GAZESCROLL 2");
    std::istringstream in(text);
    EXPECT_THROW(read(in), UnsupportedVersion);
    std::istringstream junk("hello world\n");
    EXPECT_THROW(read(junk), SessionFormatError);
}

TEST(SessionFormat, UnknownRecordKindsAreCounted) {
    SessionRecording rec = mixed_session(10, 2);
    std::string text = to_string(rec);
    text += "Z\t1e9\tfuture\n";
    text += "Q\n";
    std::istringstream in(text);
    const auto r = read(in);
    EXPECT_EQ(r.skipped_records, 2u);
    EXPECT_EQ(r.recording, rec);
}

TEST(SessionFormat, NonMonotoneSamplesRejectedOnRead) {
    SessionRecording rec;
    rec.header = hitbox_header();
    std::string text = to_string(rec) + "S\t80\t1\t1\t1\traw\nS\t40\t1\t1\t1\traw\n";
    std::istringstream in(text);
    EXPECT_THROW(read(in), SessionFormatError);
}

TEST(SessionFormat, FileErrorsCarryThePath) {
    EXPECT_THROW(
        {
            try {
                read_file("/nonexistent/dir/x.gzs");
            } catch (const IoError& e) {
                EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.gzs"), std::string::npos);
                throw;
            }
        },
        IoError);
    SessionRecording rec;
    rec.header = hitbox_header();
    EXPECT_THROW(write_file(rec, "/nonexistent/dir/x.gzs"), IoError);
    const auto path = std::filesystem::temp_directory_path() / "gazescroll_io_test.gzs";
    write_file(mixed_session(100, 5), path.string());
    EXPECT_EQ(read_file(path.string()).recording, mixed_session(100, 5));
    std::filesystem::remove(path);
}

TEST(Recording, CapturesInputsAndOutputs) {
    RecordingEngine engine(hitbox_header());
    for (const auto& s : dwell(0, 1400, 214, 851)) engine.push(s);
    const auto& rec = engine.recording();
    ASSERT_FALSE(rec.records.empty());
    EXPECT_TRUE(std::holds_alternative<GazeSample>(rec.records[0]));
    ASSERT_TRUE(std::holds_alternative<PageRecord>(rec.records[1]));
    EXPECT_EQ(std::get<PageRecord>(rec.records[1]).index, 0u);
    ASSERT_EQ(rec.scrolls().size(), 1u);
    EXPECT_EQ(rec.scrolls()[0].to_page, 1u);
    const auto log = event_log(rec);
    EXPECT_NE(std::find(log.begin(), log.end(), "P\t" + detail::fmt(rec.scrolls()[0].t_ms) + "\t1\t1"), log.end());
    EXPECT_NO_THROW(validate_order(rec));
}

TEST(Replay, SpeedZeroReproducesTheEventLog) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        campaign::SessionPlan plan;
        plan.technique = campaign::gesture_techniques()[seed % 3];
        plan.mobility = seed % 2 ? "walking" : "sitting";
        plan.seed = seed;
        const auto live = campaign::simulate_session(plan);
        const auto again = rerun(live);
        EXPECT_TRUE(diff_logs(event_log(live), event_log(again)).empty()) << seed;
        EXPECT_EQ(serialize_log(event_log(live)), serialize_log(event_log(again)));
        // Through the file format too.
        std::istringstream in(to_string(live));
        EXPECT_EQ(event_log(rerun(read(in).recording)), event_log(live));
    }
}

TEST(Replay, SpeedTwoTakesHalfTheWallTime) {
    SessionRecording rec;
    rec.header = hitbox_header();
    for (const auto& s : dwell(0, 400, 10, 10)) rec.records.push_back(s);
    std::size_t n = 0;
    const auto start = std::chrono::steady_clock::now();
    replay(rec, 2.0, [&](const Record&) { ++n; });
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    EXPECT_EQ(n, 11u);
    EXPECT_GE(ms, 195.0);
    EXPECT_LT(ms, 300.0);
    EXPECT_THROW(replay(rec, -1.0, [](const Record&) {}), std::invalid_argument);
}

TEST(Replay, AlteredDwellDivergesAndIsReported) {
    RecordingEngine engine(hitbox_header());
    for (const auto& s : dwell(0, 1400, 214, 851)) engine.push(s);
    const auto live = engine.take();
    SessionHeader altered = live.header;
    altered.config.hitbox_dwell_ms = 1200;
    const auto diffs = diff_logs(event_log(live), event_log(rerun(live, altered)));
    ASSERT_FALSE(diffs.empty());
    // Progress fractions differ from the first progress event on.
    ASSERT_TRUE(diffs.front().left && diffs.front().right);
    EXPECT_NE(diffs.front().left->find("progress"), std::string::npos);
}

TEST(Import, ColumnMapAndScaling) {
    std::istringstream csv(
        "time_s;gx;gy;valid\n"
        "0.00;0.5;0.5;1\n"
        "0.04;0.25;0.75;1\n"
        "0.08;1.5;0.5;0\n");
    ColumnMap map;
    map.delimiter = ';';
    map.time_scale = 1000;
    map.x_scale = 428;
    map.y_scale = 926;
    map.on_screen_column = 3;
    const auto s = import_samples(csv, map, ScreenGeometry{});
    ASSERT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(s[1].t_ms, 40);
    EXPECT_DOUBLE_EQ(s[1].x_px, 107);
    EXPECT_DOUBLE_EQ(s[1].y_px, 694.5);
    EXPECT_TRUE(s[0].on_screen);
    EXPECT_FALSE(s[2].on_screen);

    std::istringstream bad("t,x,y\n0,1,1\n0,2,2\n");
    EXPECT_THROW(import_samples(bad, ColumnMap{}, ScreenGeometry{}), SessionFormatError);
    std::istringstream short_row("t,x,y\n0,1\n");
    EXPECT_THROW(import_samples(short_row, ColumnMap{}, ScreenGeometry{}), SessionFormatError);
}
