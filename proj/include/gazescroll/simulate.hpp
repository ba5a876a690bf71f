#pragma once

// Synthetic gaze: a reading scan-path model, sitting/walking noise, canonical
// activation gestures and the capture-to-server latency of the phone
// pipeline. Every generator is a pure function of its inputs and a seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazescroll/core.hpp"
#include "gazescroll/techniques.hpp"

namespace gazescroll::sim {

using Rng = std::mt19937_64;

/// Per-axis isotropic sigma whose expected Euclidean error is `mean_cm`.
inline double sigma_for_mean_error(double mean_cm) {
    return mean_cm / std::sqrt(std::numbers::pi / 2.0);
}

/// Generative gaze-error model. Each mechanism can be switched off by
/// zeroing its magnitude or rate.
struct NoiseModel {
    std::string label = "custom";
    // White per-sample jitter
    double sigma_x_cm = 0.0;
    double sigma_y_cm = 0.0;
    // Slow sinusoidal wander with a seed-dependent phase per axis
    double drift_x_cm = 0.0;
    double drift_y_cm = 0.0;
    double drift_period_ms = 10000.0;
    // Lateral bias: constant for the whole stream when skew_rate_per_min is
    // zero, otherwise Poisson-scheduled episodes of mean skew_episode_ms
    double skew_bias_cm = 0.0;
    double skew_rate_per_min = 0.0;
    double skew_episode_ms = 0.0;
    // Off-screen glances (path checking while walking)
    double offscreen_rate_per_min = 0.0;
    double excursion_ms = 0.0;

    void validate() const {
        for (double v : {sigma_x_cm, sigma_y_cm, drift_x_cm, drift_y_cm, skew_bias_cm,
                         skew_rate_per_min, skew_episode_ms, offscreen_rate_per_min, excursion_ms}) {
            if (!(v >= 0.0)) throw std::invalid_argument("noise model magnitudes must be >= 0");
        }
        if (!(drift_period_ms > 0.0)) throw std::invalid_argument("drift period must be positive");
    }

    [[nodiscard]] bool is_zero() const {
        return sigma_x_cm == 0.0 && sigma_y_cm == 0.0 && drift_x_cm == 0.0 && drift_y_cm == 0.0 &&
               skew_bias_cm == 0.0 && offscreen_rate_per_min == 0.0;
    }

    static NoiseModel zero() {
        NoiseModel m;
        m.label = "zero";
        return m;
    }

    /// Isotropic white noise with expected Euclidean error `mean_cm`.
    static NoiseModel matched_gaussian(double mean_cm, std::string label = "custom") {
        NoiseModel m;
        m.label = std::move(label);
        m.sigma_x_cm = m.sigma_y_cm = sigma_for_mean_error(mean_cm);
        return m;
    }

    /// Seated reader: small jitter around a persistent sideways offset, slow
    /// vertical wander, rare glances away.
    static NoiseModel sitting() {
        NoiseModel m;
        m.label = "sitting";
        m.sigma_x_cm = 0.07;
        m.sigma_y_cm = 0.07;
        m.drift_x_cm = 0.10;
        m.drift_y_cm = 0.20;
        m.drift_period_ms = 20000.0;
        m.skew_bias_cm = 0.94;
        m.offscreen_rate_per_min = 0.2;
        m.excursion_ms = 600.0;
        return m;
    }

    /// Walking reader: the gaze settles further to one side, wanders
    /// sideways with the gait and leaves the phone to check the path.
    static NoiseModel walking() {
        NoiseModel m;
        m.label = "walking";
        m.sigma_x_cm = 0.12;
        m.sigma_y_cm = 0.08;
        m.drift_x_cm = 0.80;
        m.drift_y_cm = 0.15;
        m.drift_period_ms = 20000.0;
        m.skew_bias_cm = 1.97;
        m.offscreen_rate_per_min = 4.0;
        m.excursion_ms = 800.0;
        return m;
    }

    static std::optional<NoiseModel> preset(std::string_view label) {
        if (label == "sitting") return sitting();
        if (label == "walking") return walking();
        if (label == "zero" || label == "none") return zero();
        return std::nullopt;
    }
};

/// Streaming noise generator. State (episode schedules, phases, RNG)
/// carries across calls, so a session can be corrupted segment by segment
/// and still match a single-pass corruption of the whole stream.
class NoiseProcess {
public:
    struct Output {
        GazeSample sample;
        bool excursion = false;
    };

    NoiseProcess(NoiseModel model, const ScreenGeometry& g, std::uint64_t seed)
        : m_(std::move(model)), g_(g), rng_(seed) {
        m_.validate();
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        phase_x_ = phase(rng_);
        phase_y_ = phase(rng_);
        persistent_sign_ = std::bernoulli_distribution(0.5)(rng_) ? 1.0 : -1.0;
    }

    Output apply(const GazeSample& truth) {
        const double t = truth.t_ms;
        if (!started_) {
            started_ = true;
            schedule_from(t);
        }
        Output out{truth, false};
        if (m_.is_zero()) return out;

        // Excursion schedule
        while (m_.offscreen_rate_per_min > 0.0 && t >= next_excursion_ms_) {
            excursion_end_ms_ = next_excursion_ms_ + std::max(1.0, exponential(m_.excursion_ms));
            excursion_x_ = std::uniform_real_distribution<double>(0.0, g_.width_px)(rng_);
            next_excursion_ms_ = excursion_end_ms_ + exponential(60000.0 / m_.offscreen_rate_per_min);
        }
        // Skew episodes
        double bias = 0.0;
        if (m_.skew_bias_cm > 0.0) {
            if (m_.skew_rate_per_min == 0.0) {
                bias = persistent_sign_ * m_.skew_bias_cm;
            } else {
                while (t >= next_skew_ms_) {
                    skew_end_ms_ = next_skew_ms_ + exponential(m_.skew_episode_ms);
                    skew_sign_ = std::bernoulli_distribution(0.5)(rng_) ? 1.0 : -1.0;
                    next_skew_ms_ = skew_end_ms_ + exponential(60000.0 / m_.skew_rate_per_min);
                }
                if (t < skew_end_ms_) bias = skew_sign_ * m_.skew_bias_cm;
            }
        }

        const double w = 2.0 * std::numbers::pi * t / m_.drift_period_ms;
        const double dx = m_.drift_x_cm * std::sin(w + phase_x_) + bias + m_.sigma_x_cm * normal_(rng_);
        const double dy = m_.drift_y_cm * std::sin(w + phase_y_) + m_.sigma_y_cm * normal_(rng_);

        if (t < excursion_end_ms_) {
            // The reader looks past the top edge of the phone.
            out.excursion = true;
            out.sample.x_px = excursion_x_;
            out.sample.y_px = -cm_to_px(g_, 4.0);
            out.sample.on_screen = false;
            return out;
        }
        out.sample.x_px = truth.x_px + dx * g_.px_per_cm;
        out.sample.y_px = truth.y_px + dy * g_.px_per_cm;
        out.sample.on_screen = truth.on_screen && g_.contains(out.sample.x_px, out.sample.y_px);
        return out;
    }

    [[nodiscard]] const NoiseModel& model() const { return m_; }

private:
    double exponential(double mean) {
        if (!(mean > 0.0)) return 0.0;
        return std::exponential_distribution<double>(1.0 / mean)(rng_);
    }

    void schedule_from(double t0) {
        if (m_.offscreen_rate_per_min > 0.0) {
            next_excursion_ms_ = t0 + exponential(60000.0 / m_.offscreen_rate_per_min);
        }
        if (m_.skew_rate_per_min > 0.0) {
            next_skew_ms_ = t0 + exponential(60000.0 / m_.skew_rate_per_min);
        }
    }

    NoiseModel m_;
    ScreenGeometry g_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    bool started_ = false;
    double phase_x_ = 0.0, phase_y_ = 0.0, persistent_sign_ = 1.0;
    double next_excursion_ms_ = INFINITY, excursion_end_ms_ = -INFINITY, excursion_x_ = 0.0;
    double next_skew_ms_ = INFINITY, skew_end_ms_ = -INFINITY, skew_sign_ = 1.0;
};

struct NoisyTrace {
    std::vector<GazeSample> samples;
    std::vector<bool> excursion;  // parallel to samples
};

inline NoisyTrace apply_noise_detailed(std::span<const GazeSample> truth, const NoiseModel& model,
                                       std::uint64_t seed, const ScreenGeometry& g = {}) {
    require_time_ordered(truth);
    NoiseProcess process(model, g, seed);
    NoisyTrace out;
    out.samples.reserve(truth.size());
    out.excursion.reserve(truth.size());
    for (const GazeSample& s : truth) {
        auto r = process.apply(s);
        out.samples.push_back(r.sample);
        out.excursion.push_back(r.excursion);
    }
    return out;
}

inline std::vector<GazeSample> apply_noise(std::span<const GazeSample> truth, const NoiseModel& model,
                                           std::uint64_t seed, const ScreenGeometry& g = {}) {
    return apply_noise_detailed(truth, model, seed, g).samples;
}

/// Mean Euclidean displacement in cm between observed and true positions,
/// ignoring samples taken during off-screen glances.
inline double mean_displacement_cm(std::span<const GazeSample> truth, const NoisyTrace& observed,
                                   const ScreenGeometry& g = {}) {
    if (truth.size() != observed.samples.size()) {
        throw std::invalid_argument("truth and observed traces differ in length");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (observed.excursion[i]) continue;
        sum += distance({truth[i].x_px, truth[i].y_px}, {observed.samples[i].x_px, observed.samples[i].y_px});
        ++n;
    }
    return n == 0 ? 0.0 : px_to_cm(g, sum / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Latency

struct LatencyRange {
    double lo_ms = 0.0;
    double hi_ms = 0.0;
    [[nodiscard]] double mean() const { return 0.5 * (lo_ms + hi_ms); }
};

/// Per-sample delay from capture to detector: on-device detection, network
/// transport and server-side inference, each uniform within its range.
struct LatencyModel {
    std::string label = "phone";
    LatencyRange detect{10.0, 25.0};
    LatencyRange transport{7.0, 50.0};
    LatencyRange inference{60.0, 75.0};

    void validate() const {
        for (const LatencyRange& r : {detect, transport, inference}) {
            if (r.lo_ms < 0.0 || r.hi_ms < r.lo_ms) {
                throw std::invalid_argument("latency ranges need 0 <= lo <= hi");
            }
        }
    }

    [[nodiscard]] double mean_ms() const { return detect.mean() + transport.mean() + inference.mean(); }

    static LatencyModel none() { return {"none", {0, 0}, {0, 0}, {0, 0}}; }
    static LatencyModel phone() { return {}; }
};

/// Draws one end-to-end delay.
inline double sample_delay(const LatencyModel& m, Rng& rng) {
    auto draw = [&](const LatencyRange& r) {
        if (r.hi_ms == r.lo_ms) return r.lo_ms;
        return std::uniform_real_distribution<double>(r.lo_ms, r.hi_ms)(rng);
    };
    const double d = draw(m.detect);
    const double tr = draw(m.transport);
    return d + tr + draw(m.inference);
}

/// Restores strict ordering after per-sample delays: sorts by delivery time
/// and separates exact ties by a negligible step.
inline void sort_deliveries(std::vector<GazeSample>& samples) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const GazeSample& a, const GazeSample& b) { return a.t_ms < b.t_ms; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].t_ms > samples[i - 1].t_ms)) {
            samples[i].t_ms = samples[i - 1].t_ms + 1e-6;
        }
    }
}

/// Replaces each timestamp with its delivery time and re-sorts.
inline std::vector<GazeSample> delay(std::span<const GazeSample> trace, const LatencyModel& model,
                                     std::uint64_t seed) {
    model.validate();
    require_time_ordered(trace);
    Rng rng(seed);
    std::vector<GazeSample> out(trace.begin(), trace.end());
    for (GazeSample& s : out) s.t_ms += sample_delay(model, rng);
    sort_deliveries(out);
    return out;
}

// ---------------------------------------------------------------------------
// Reading scan-path

struct ReaderProfile {
    double fixation_mean_ms = 230.0;
    double fixation_sd_ms = 70.0;
    double fixation_min_ms = 80.0;
    double fixation_max_ms = 600.0;
    double saccade_advance_px = 70.0;
    double regression_prob = 0.12;
    // Horizontal extent of a text line
    double line_left_px = 24.0;
    double line_right_px = 404.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(regression_prob >= 0.0 && regression_prob <= 1.0)) {
            throw std::invalid_argument("regression_prob must be within [0, 1]");
        }
        if (!(fixation_mean_ms > 0.0) || fixation_sd_ms < 0.0 || !(fixation_min_ms > 0.0) ||
            fixation_max_ms < fixation_min_ms || !(saccade_advance_px > 0.0) ||
            !(line_right_px > line_left_px)) {
            throw std::invalid_argument("reader profile durations and distances must be positive");
        }
    }

    /// Expected time to read one line at this reader's natural pace.
    [[nodiscard]] double natural_line_ms() const {
        const double fixations = (line_right_px - line_left_px) / saccade_advance_px + 1.0;
        return fixations * fixation_mean_ms / (1.0 - 0.5 * regression_prob);
    }
};

inline constexpr double kFrameMs = 40.0;

struct PlannedFixation {
    double start_ms = 0.0;
    double end_ms = 0.0;
    Point at;
};

/// Fixation plan for one page, paced so the reader leaves the last line at
/// `start_ms + duration_ms`. Each new line gets an equal share of the time.
inline std::vector<PlannedFixation> plan_reading(const ReaderProfile& p, const Page& page,
                                                 double duration_ms, double start_ms = 0.0,
                                                 double line_height_px = DocumentModel::kDefaultLineHeightPx) {
    p.validate();
    if (page.line_y_positions.empty()) throw std::invalid_argument("page has no lines");
    Rng rng(p.seed);
    std::normal_distribution<double> fix_dur(p.fixation_mean_ms, p.fixation_sd_ms);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t first = page.carried_line ? 1 : 0;
    std::vector<double> lines(page.line_y_positions.begin() + static_cast<std::ptrdiff_t>(first),
                              page.line_y_positions.end());
    if (lines.empty()) lines.push_back(page.line_y_positions.back());

    auto draw_duration = [&] {
        return std::clamp(fix_dur(rng), p.fixation_min_ms, p.fixation_max_ms);
    };

    std::vector<PlannedFixation> plan;
    if (duration_ms < p.fixation_min_ms) {
        const double y = lines.front() - line_height_px / 2.0;
        plan.push_back({start_ms, start_ms + p.fixation_min_ms, {p.line_left_px, y}});
        return plan;
    }

    const double budget = duration_ms / static_cast<double>(lines.size());
    double t = start_ms;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const double y = lines[li] - line_height_px / 2.0;
        std::vector<double> xs, ds;
        double x = p.line_left_px + 10.0 * unit(rng);
        double frontier = x;
        xs.push_back(x);
        ds.push_back(draw_duration());
        while (true) {
            if (p.regression_prob > 0.0 && xs.size() > 1 && unit(rng) < p.regression_prob) {
                x = std::max(p.line_left_px, frontier - p.saccade_advance_px * (0.3 + 0.7 * unit(rng)));
            } else {
                x = frontier + p.saccade_advance_px * (0.7 + 0.6 * unit(rng));
                if (x > p.line_right_px) break;
                frontier = x;
            }
            xs.push_back(x);
            ds.push_back(draw_duration());
        }
        double total = 0.0;
        for (double d : ds) total += d;
        const double scale = budget / total;
        const double line_end = start_ms + budget * static_cast<double>(li + 1);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const double end = k + 1 == xs.size() ? line_end : t + ds[k] * scale;
            plan.push_back({t, end, {xs[k], y}});
            t = end;
        }
    }
    return plan;
}

/// Samples a fixation plan on the 25 Hz grid starting at the plan start.
inline std::vector<GazeSample> sample_plan(const std::vector<PlannedFixation>& plan,
                                           double frame_ms = kFrameMs) {
    std::vector<GazeSample> out;
    if (plan.empty()) return out;
    const double t0 = plan.front().start_ms, t1 = plan.back().end_ms;
    std::size_t k = 0;
    for (std::size_t i = 0;; ++i) {
        const double t = t0 + static_cast<double>(i) * frame_ms;
        if (t >= t1 && !out.empty()) break;
        while (k + 1 < plan.size() && t >= plan[k].end_ms) ++k;
        out.push_back({t, plan[k].at.x, plan[k].at.y, true, SampleKind::Raw});
    }
    return out;
}

/// Ground-truth gaze of a reader working through `page` in `duration_ms`.
inline std::vector<GazeSample> gen_reading_trace(const ReaderProfile& p, const Page& page,
                                                 const ScreenGeometry& g, double duration_ms,
                                                 double start_ms = 0.0,
                                                 double line_height_px = DocumentModel::kDefaultLineHeightPx) {
    g.validate();
    auto trace = sample_plan(plan_reading(p, page, duration_ms, start_ms, line_height_px));
    for (GazeSample& s : trace) s.on_screen = g.contains(s.x_px, s.y_px);
    return trace;
}

/// Reader holding their gaze on one point, e.g. waiting at the page end.
inline std::vector<GazeSample> gen_hold_trace(Point at, double start_ms, double duration_ms,
                                              double frame_ms = kFrameMs) {
    std::vector<GazeSample> out;
    for (double t = start_ms; t < start_ms + duration_ms; t += frame_ms) {
        out.push_back({t, at.x, at.y, true, SampleKind::Raw});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Activation gestures

/// Labels one injected gesture: when it started, when the gesture was
/// complete from the reader's side, and when the spliced pattern ends.
struct Annotation {
    double start_ms = 0.0;
    double completion_ms = 0.0;
    double end_ms = 0.0;
    Technique technique = Technique::Touch;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Injection {
    std::vector<GazeSample> trace;
    Annotation annotation;
};

inline constexpr double kSwipeHoldMs = 600.0;
inline constexpr double kSwipeSweepMs = 200.0;
inline constexpr double kSwipeHoldY = 720.0;
inline constexpr double kSwipeTopY = 50.0;
inline constexpr double kBarEndHoldMs = 200.0;

/// Length of the canonical gesture for a technique.
inline double pattern_length_ms(Technique t, const techniques::TechniqueConfig& c) {
    switch (t) {
    case Technique::EyeSwipe: return kSwipeHoldMs + kSwipeSweepMs;
    case Technique::Hitbox: return c.hitbox_dwell_ms + 100.0;
    case Technique::MovingBar:
        return c.bar_activation_ms + kFrameMs + c.bar_duration_ms + kBarEndHoldMs;
    default: throw std::invalid_argument(std::string(to_string(t)) + " has no activation gesture");
    }
}

/// Overwrites the samples in [at_ms, at_ms + pattern length) with the
/// canonical gesture, keeping their timestamps.
inline Injection inject_activation(std::span<const GazeSample> trace, Technique technique,
                                   const ScreenGeometry& g, const techniques::TechniqueConfig& c,
                                   double at_ms) {
    require_time_ordered(trace);
    const double length = pattern_length_ms(technique, c);
    if (trace.empty() || at_ms < trace.front().t_ms ||
        trace.back().t_ms + kFrameMs < at_ms + length) {
        throw std::out_of_range("activation pattern does not fit inside the trace");
    }
    const auto layout = techniques::ControlLayout::for_screen(g, c);
    Injection inj{{trace.begin(), trace.end()}, {at_ms, at_ms, at_ms + length, technique}};
    std::optional<double> completion;

    // The bar starts moving at the first sample that completes the dwell.
    double pursuit_from = at_ms + c.bar_activation_ms;
    for (const GazeSample& s : trace) {
        if (s.t_ms >= pursuit_from) {
            pursuit_from = s.t_ms;
            break;
        }
    }

    for (GazeSample& s : inj.trace) {
        // Offsets that sit within rounding error of a frame are snapped to it.
        double tau = s.t_ms - at_ms;
        if (const double frame = std::round(tau / kFrameMs) * kFrameMs; std::abs(tau - frame) < 1e-6) tau = frame;
        if (tau < 0.0 || tau >= length) continue;
        s.on_screen = true;
        switch (technique) {
        case Technique::EyeSwipe: {
            s.x_px = g.width_px / 2.0;
            if (tau < kSwipeHoldMs) {
                s.y_px = kSwipeHoldY;
            } else {
                const double step = std::floor((tau - kSwipeHoldMs) / kFrameMs) + 1.0;
                const double steps = kSwipeSweepMs / kFrameMs;
                s.y_px = kSwipeHoldY + (kSwipeTopY - kSwipeHoldY) * std::min(1.0, step / steps);
                if (!completion && s.y_px < g.top_bar_px) completion = s.t_ms;
            }
            break;
        }
        case Technique::Hitbox: {
            const Point c0 = layout.hitbox.center();
            s.x_px = c0.x;
            s.y_px = c0.y;
            break;
        }
        case Technique::MovingBar: {
            s.y_px = layout.bar_y_px;
            const double frac = s.t_ms < pursuit_from
                                    ? 0.0
                                    : std::min(1.0, (s.t_ms - pursuit_from) / c.bar_duration_ms);
            s.x_px = layout.bar_start_x_px + layout.bar_travel_px * frac;
            break;
        }
        default: break;
        }
    }
    switch (technique) {
    case Technique::EyeSwipe:
        inj.annotation.completion_ms = completion.value_or(at_ms + length);
        break;
    case Technique::Hitbox: inj.annotation.completion_ms = at_ms + c.hitbox_dwell_ms; break;
    case Technique::MovingBar: inj.annotation.completion_ms = pursuit_from + c.bar_duration_ms; break;
    default: break;
    }
    return inj;
}

}  // namespace gazescroll::sim
