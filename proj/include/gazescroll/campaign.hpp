#pragma once

// Closed-loop simulated reading sessions: a synthetic reader works through a
// document page by page, performs the activation gesture at each page end,
// and the engine sees the noisy, delayed stream. A page turn cuts the rest
// of the segment short, so the next page starts when the engine says so.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gazescroll/analytics.hpp"
#include "gazescroll/calibration.hpp"
#include "gazescroll/core.hpp"
#include "gazescroll/session_io.hpp"
#include "gazescroll/simulate.hpp"
#include "gazescroll/techniques.hpp"

namespace gazescroll::campaign {

/// Independent sub-seed for stream `k` of a session seed (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (k + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline constexpr double kTailMs = 1000.0;
// Auto-scroll has no gesture; the reader keeps looking at the last line
// for this long before the touch fallback turns the page.
inline constexpr double kAutoScrollWaitMs = 20000.0;

struct SessionPlan {
    Technique technique = Technique::Hitbox;
    std::string mobility = "sitting";
    std::uint64_t seed = 0;
    std::size_t pages = 6;
    ScreenGeometry geometry;
    techniques::TechniqueConfig config;
    stream::StreamConfig stream;
    sim::ReaderProfile reader;
    sim::LatencyModel latency = sim::LatencyModel::phone();
    std::optional<sim::NoiseModel> noise;  // defaults to the mobility preset
    double page_mean_ms = 30000.0;
    double page_sd_ms = 8000.0;
    double page_min_ms = 15000.0;
    double page_max_ms = 60000.0;

    [[nodiscard]] sim::NoiseModel noise_model() const {
        if (noise) return *noise;
        if (auto preset = sim::NoiseModel::preset(mobility)) return *preset;
        throw std::invalid_argument("unknown mobility '" + mobility + "'");
    }
};

inline io::SessionHeader header_for(const SessionPlan& plan) {
    io::SessionHeader h;
    h.source = "simulate";
    h.geometry = plan.geometry;
    h.technique = plan.technique;
    h.config = plan.config;
    h.stream = plan.stream;
    h.document = io::DocumentSpec::of(DocumentModel::with_pages(plan.pages, plan.geometry));
    h.mobility = plan.mobility;
    h.noise = plan.noise_model().label;
    h.latency = plan.latency.label;
    h.seed = plan.seed;
    return h;
}

namespace detail {

inline void append(std::vector<GazeSample>& a, const std::vector<GazeSample>& b) {
    a.insert(a.end(), b.begin(), b.end());
}

inline double next_frame(const std::vector<GazeSample>& trace, double fallback) {
    return trace.empty() ? fallback : trace.back().t_ms + sim::kFrameMs;
}

}  // namespace detail

/// Runs one closed-loop session and returns its full recording.
inline io::SessionRecording simulate_session(const SessionPlan& plan) {
    plan.geometry.validate();
    const auto header = header_for(plan);
    io::RecordingEngine engine(header);
    const DocumentModel& doc = engine.engine().settings().document;
    const bool gesture = plan.technique == Technique::EyeSwipe || plan.technique == Technique::Hitbox ||
                         plan.technique == Technique::MovingBar;

    sim::NoiseProcess noise(plan.noise_model(), plan.geometry, derive_seed(plan.seed, 1));
    sim::Rng pace(derive_seed(plan.seed, 2));
    std::normal_distribution<double> page_ms(plan.page_mean_ms, plan.page_sd_ms);

    double t = 0.0;
    std::optional<double> last_pushed;
    for (std::size_t visit = 0; visit < plan.pages && !engine.engine().finished(); ++visit) {
        const Page page = engine.engine().current_page();
        const double duration = std::clamp(page_ms(pace), plan.page_min_ms, plan.page_max_ms);

        sim::ReaderProfile reader = plan.reader;
        reader.seed = derive_seed(plan.seed, 100 + visit);
        std::vector<GazeSample> truth =
            sim::gen_reading_trace(reader, page, plan.geometry, duration, t, doc.line_height_px);
        const Point last_fix{truth.back().x_px, truth.back().y_px};

        std::optional<sim::Annotation> annotation;
        const double at = detail::next_frame(truth, t);
        if (gesture) {
            const double length = sim::pattern_length_ms(plan.technique, plan.config);
            detail::append(truth, sim::gen_hold_trace(last_fix, at, length));
            auto inj = sim::inject_activation(truth, plan.technique, plan.geometry, plan.config, at);
            truth = std::move(inj.trace);
            annotation = inj.annotation;
            // After the gesture the reader looks for the first line of the next page.
            const std::size_t next = std::min(page.index + 1, doc.pages.size() - 1);
            const Point start{plan.reader.line_left_px,
                              line_gaze_y(doc, doc.pages[next].line_y_positions.front())};
            detail::append(truth, sim::gen_hold_trace(start, detail::next_frame(truth, at), kTailMs));
        } else {
            detail::append(truth, sim::gen_hold_trace(last_fix, at, kAutoScrollWaitMs));
        }

        std::vector<GazeSample> observed;
        observed.reserve(truth.size());
        for (const GazeSample& s : truth) observed.push_back(noise.apply(s).sample);
        auto delivered = sim::delay(observed, plan.latency, derive_seed(plan.seed, 1000 + visit));

        std::optional<double> turned_at;
        for (const GazeSample& s : delivered) {
            // Stragglers from before the last page turn were already cut.
            if (last_pushed && !(s.t_ms > *last_pushed)) continue;
            if (annotation && s.t_ms >= annotation->start_ms) {
                engine.annotate(*annotation);
                annotation.reset();
            }
            const auto out = engine.push(s);
            last_pushed = s.t_ms;
            if (!out.scrolls.empty() || out.end_of_document) {
                turned_at = s.t_ms;
                break;
            }
        }
        if (annotation) engine.annotate(*annotation);
        if (!turned_at) {
            turned_at = last_pushed.value_or(t);
            engine.touch(*turned_at);
        }
        t = *turned_at + sim::kFrameMs;
    }
    return engine.take();
}

inline analytics::LabeledSession label(const io::SessionRecording& rec) {
    return {std::string(to_string(rec.header.technique)), rec.header.mobility, rec.events(), rec.annotations()};
}

/// Techniques with an explicit activation gesture.
inline std::vector<Technique> gesture_techniques() {
    return {Technique::EyeSwipe, Technique::Hitbox, Technique::MovingBar};
}

struct CampaignResult {
    std::vector<io::SessionRecording> sessions;
    std::vector<analytics::ReportRow> report;
};

/// Every (seed, technique, mobility) combination, seeds first..first+count-1.
inline CampaignResult run_campaign(const std::vector<Technique>& techniques, const std::vector<std::string>& mobilities,
                                   std::uint64_t first_seed, std::size_t seed_count, const SessionPlan& base = {}) {
    if (seed_count == 0) throw std::invalid_argument("seed count must be at least 1");
    CampaignResult result;
    std::vector<analytics::LabeledSession> labeled;
    for (const std::string& mobility : mobilities) {
        for (Technique technique : techniques) {
            for (std::size_t i = 0; i < seed_count; ++i) {
                SessionPlan plan = base;
                plan.technique = technique;
                plan.mobility = mobility;
                plan.seed = first_seed + i;
                result.sessions.push_back(simulate_session(plan));
                labeled.push_back(label(result.sessions.back()));
            }
        }
    }
    result.report = analytics::robustness_report(labeled);
    return result;
}

// ---------------------------------------------------------------------------
// Calibration evaluation

/// Target mean error in cm for a noise label, or a plain number.
inline double calibration_noise_cm(std::string_view label) {
    if (label == "sitting") return 0.95;
    if (label == "walking") return 1.98;
    if (label == "zero" || label == "none") return 0.0;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
    if (ec != std::errc{} || ptr != label.data() + label.size() || !(v >= 0.0)) {
        throw std::invalid_argument("noise must be sitting, walking, zero or a mean error in cm, got '" +
                                    std::string(label) + "'");
    }
    return v;
}

struct CalibrationTrial {
    double raw_cm = 0.0;         // uncorrected error on a fresh pass of the dot path
    double calibrated_cm = 0.0;  // error after applying the fitted calibrator to that pass
    calibration::CalibratorKind kind = calibration::CalibratorKind::Identity;
};

/// One calibration round: the tracker distorts the screen by a random
/// affine map plus white noise of the given mean error. The calibrator is
/// fitted on one pass of the moving dot and scored on a second pass.
inline CalibrationTrial run_calibration_trial(double noise_mean_cm, std::uint64_t seed, const ScreenGeometry& g = {},
                                              calibration::FitOptions options = {}) {
    sim::Rng rng(derive_seed(seed, 7));
    // Systematic error of an uncalibrated tracker: a few percent of scale,
    // slight shear and an offset of up to a centimetre.
    std::uniform_real_distribution<double> stretch(0.04, 0.12), shear(-0.04, 0.04), shift(20.0, 60.0);
    std::bernoulli_distribution flip(0.5);
    auto sign = [&] { return flip(rng) ? 1.0 : -1.0; };
    const double ax = 1.0 + sign() * stretch(rng), ay = 1.0 + sign() * stretch(rng);
    const double bxy = shear(rng), byx = shear(rng);
    const double ox = sign() * shift(rng), oy = sign() * shift(rng);
    const double sigma = cm_to_px(g, sim::sigma_for_mean_error(noise_mean_cm));
    std::normal_distribution<double> noise(0.0, 1.0);

    const auto path = calibration::generate_dot_path(g);
    auto pass = [&](double t0) {
        std::vector<calibration::CalibrationPair> pairs;
        double t = t0;
        for (const Point& p : path.points) {
            const double x = ax * p.x + bxy * p.y + ox + sigma * noise(rng);
            const double y = byx * p.x + ay * p.y + oy + sigma * noise(rng);
            pairs.push_back({{t, x, y, g.contains(x, y), SampleKind::Raw}, p});
            t += 1000.0 / path.rate_hz;
        }
        return pairs;
    };
    const auto training = pass(0.0);
    const auto held_out = pass(path.duration_ms);
    const auto cal = calibration::fit_calibrator(training, g, options);
    return {calibration::evaluate_error(calibration::Calibrator::identity(g), held_out).mean_cm,
            calibration::evaluate_error(cal, held_out).mean_cm, cal.kind()};
}

}  // namespace gazescroll::campaign
