#pragma once

// The four gaze scrolling techniques as deterministic state machines.
//
// Every detector is a pure step function over an explicit state value, so a
// stream replayed through the same configuration yields the same events.
// Timing is measured between samples that satisfy a condition: a dwell that
// starts at sample t0 has lasted t - t0 when sample t arrives.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gazescroll/core.hpp"
#include "gazescroll/stream.hpp"

namespace gazescroll::techniques {

struct SampleWindow {
    double offset_ms = 0.0;
    double length_ms = 0.0;

    friend bool operator==(const SampleWindow&, const SampleWindow&) = default;
};

struct TechniqueConfig {
    // Eye-Swipe
    double eyeswipe_prime_line_px = 690.0;
    double eyeswipe_prime_ms = 500.0;
    double eyeswipe_deprime_ms = 300.0;
    double eyeswipe_prime_timeout_ms = 3000.0;
    // Hitbox; dwell is chosen by the reader within 500..2000 ms
    double hitbox_dwell_ms = 1000.0;
    double hitbox_min_fixation_ms = 300.0;
    // Moving bar; travel duration is chosen by the reader within 500..1700 ms
    double bar_activation_ms = 300.0;
    double bar_travel_cm = 2.7;
    double bar_duration_ms = 1000.0;
    double bar_grace_ms = 100.0;
    double bar_tolerance_px = 80.0;
    // Auto-scroll
    double auto_min_page_ms = 5000.0;
    std::vector<SampleWindow> auto_sample_windows{{0.0, 3000.0}, {8000.0, 3000.0}};

    friend bool operator==(const TechniqueConfig&, const TechniqueConfig&) = default;
};

inline constexpr double kHitboxDwellMin = 500.0;
inline constexpr double kHitboxDwellMax = 2000.0;
inline constexpr double kBarDurationMin = 500.0;
inline constexpr double kBarDurationMax = 1700.0;

/// Checks every range at once; an empty result means the config is usable.
inline std::vector<std::string> validate_config(const TechniqueConfig& c) {
    std::vector<std::string> errors;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0)) errors.push_back(std::string(name) + " must be positive");
    };
    positive(c.eyeswipe_prime_line_px, "eyeswipe_prime_line_px");
    positive(c.eyeswipe_prime_ms, "eyeswipe_prime_ms");
    positive(c.eyeswipe_deprime_ms, "eyeswipe_deprime_ms");
    positive(c.eyeswipe_prime_timeout_ms, "eyeswipe_prime_timeout_ms");
    positive(c.hitbox_min_fixation_ms, "hitbox_min_fixation_ms");
    positive(c.bar_activation_ms, "bar_activation_ms");
    positive(c.bar_travel_cm, "bar_travel_cm");
    positive(c.bar_grace_ms, "bar_grace_ms");
    positive(c.bar_tolerance_px, "bar_tolerance_px");
    positive(c.auto_min_page_ms, "auto_min_page_ms");

    if (!(c.hitbox_dwell_ms >= kHitboxDwellMin && c.hitbox_dwell_ms <= kHitboxDwellMax)) {
        errors.push_back("hitbox_dwell_ms " + std::to_string(static_cast<long>(c.hitbox_dwell_ms)) +
                         " outside 500-2000");
    }
    if (!(c.hitbox_dwell_ms > c.hitbox_min_fixation_ms)) {
        errors.push_back("hitbox_dwell_ms must exceed hitbox_min_fixation_ms");
    }
    if (!(c.bar_duration_ms >= kBarDurationMin && c.bar_duration_ms <= kBarDurationMax)) {
        errors.push_back("bar_duration_ms " + std::to_string(static_cast<long>(c.bar_duration_ms)) +
                         " outside 500-1700");
    }
    if (c.auto_sample_windows.empty()) errors.push_back("auto_sample_windows must not be empty");
    double prev_end = -1.0;
    for (const SampleWindow& w : c.auto_sample_windows) {
        if (w.offset_ms < 0.0 || !(w.length_ms > 0.0)) {
            errors.push_back("auto_sample_windows entries need offset >= 0 and length > 0");
        } else if (w.offset_ms < prev_end) {
            errors.push_back("auto_sample_windows must be ordered and disjoint");
        }
        prev_end = w.offset_ms + w.length_ms;
    }
    return errors;
}

inline std::string format_windows(const std::vector<SampleWindow>& windows) {
    std::ostringstream os;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (i) os << ',';
        os << windows[i].offset_ms << ':' << windows[i].length_ms;
    }
    return os.str();
}

inline std::vector<SampleWindow> parse_windows(const std::string& text) {
    std::vector<SampleWindow> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("window must be offset:length");
        out.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    }
    return out;
}

namespace detail {
using Field = double TechniqueConfig::*;
inline const std::map<std::string, Field, std::less<>>& numeric_fields() {
    static const std::map<std::string, Field, std::less<>> fields{
        {"eyeswipe_prime_line_px", &TechniqueConfig::eyeswipe_prime_line_px},
        {"eyeswipe_prime_ms", &TechniqueConfig::eyeswipe_prime_ms},
        {"eyeswipe_deprime_ms", &TechniqueConfig::eyeswipe_deprime_ms},
        {"eyeswipe_prime_timeout_ms", &TechniqueConfig::eyeswipe_prime_timeout_ms},
        {"hitbox_dwell_ms", &TechniqueConfig::hitbox_dwell_ms},
        {"hitbox_min_fixation_ms", &TechniqueConfig::hitbox_min_fixation_ms},
        {"bar_activation_ms", &TechniqueConfig::bar_activation_ms},
        {"bar_travel_cm", &TechniqueConfig::bar_travel_cm},
        {"bar_duration_ms", &TechniqueConfig::bar_duration_ms},
        {"bar_grace_ms", &TechniqueConfig::bar_grace_ms},
        {"bar_tolerance_px", &TechniqueConfig::bar_tolerance_px},
        {"auto_min_page_ms", &TechniqueConfig::auto_min_page_ms},
    };
    return fields;
}
}  // namespace detail

/// Sets a field by its name, as used by `--set key=value` and the wire
/// protocol. Throws std::invalid_argument for unknown names or bad numbers.
inline void set_config_field(TechniqueConfig& c, const std::string& key, const std::string& value) {
    if (key == "auto_sample_windows") {
        c.auto_sample_windows = parse_windows(value);
        return;
    }
    const auto& fields = detail::numeric_fields();
    auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument("unknown config field '" + key + "'");
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) {
        throw std::invalid_argument("config field '" + key + "' needs a number, got '" + value + "'");
    }
    c.*(it->second) = v;
}

inline std::vector<std::pair<std::string, std::string>> config_fields(const TechniqueConfig& c) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, field] : detail::numeric_fields()) {
        std::ostringstream os;
        os.precision(17);
        os << c.*field;
        out.emplace_back(name, os.str());
    }
    out.emplace_back("auto_sample_windows", format_windows(c.auto_sample_windows));
    return out;
}

// ---------------------------------------------------------------------------
// Events

struct StateChange {
    std::string from;
    std::string to;
    friend bool operator==(const StateChange&, const StateChange&) = default;
};
struct Progress {
    double fraction = 0.0;
    friend bool operator==(const Progress&, const Progress&) = default;
};
struct Trigger {
    friend bool operator==(const Trigger&, const Trigger&) = default;
};
struct Abort {
    std::string reason;
    friend bool operator==(const Abort&, const Abort&) = default;
};
struct Scheduled {
    double eta_ms = 0.0;
    friend bool operator==(const Scheduled&, const Scheduled&) = default;
};

using EventPayload = std::variant<StateChange, Progress, Trigger, Abort, Scheduled>;

struct DetectorEvent {
    double t_ms = 0.0;
    Technique technique = Technique::Touch;
    EventPayload payload;

    template <typename T>
    [[nodiscard]] bool is() const {
        return std::holds_alternative<T>(payload);
    }

    friend bool operator==(const DetectorEvent&, const DetectorEvent&) = default;
};

template <typename State>
struct StepResult {
    State state;
    std::vector<DetectorEvent> events;
};

// ---------------------------------------------------------------------------
// Control layout derived from the screen

struct Rect {
    double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;
    [[nodiscard]] bool contains(double x, double y) const {
        return x >= left && x <= right && y >= top && y <= bottom;
    }
    [[nodiscard]] Point center() const { return {(left + right) / 2.0, (top + bottom) / 2.0}; }
};

/// Where the bottom-bar controls sit on a given screen.
struct ControlLayout {
    Rect hitbox;
    double bar_y_px = 0.0;
    double bar_start_x_px = 0.0;
    double bar_travel_px = 0.0;

    [[nodiscard]] double bar_end_x_px() const { return bar_start_x_px + bar_travel_px; }

    static ControlLayout for_screen(const ScreenGeometry& g, const TechniqueConfig& c) {
        ControlLayout l;
        const double bar_top = g.height_px - g.bottom_bar_px;
        const double inset_y = std::min(10.0, g.bottom_bar_px / 4.0);
        const double inset_x = g.width_px * 0.15;
        l.hitbox = {inset_x, bar_top + inset_y, g.width_px - inset_x, g.height_px - inset_y};
        l.bar_y_px = bar_top + g.bottom_bar_px / 2.0;
        l.bar_travel_px = cm_to_px(g, c.bar_travel_cm);
        l.bar_start_x_px = (g.width_px - l.bar_travel_px) / 2.0;
        return l;
    }
};

namespace detail {
inline void check_time(const std::optional<double>& last, double t) {
    if (last && !(t > *last)) throw NonMonotonicTimestamp(*last, t);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Eye-Swipe: dwell below the prime line, then sweep to the top bar.

struct EyeSwipeState {
    enum class Phase { Reading, Priming, Primed, Triggered };
    Phase phase = Phase::Reading;
    double priming_since_ms = 0.0;
    double last_band_ms = 0.0;  // latest sample below the prime line while primed
    std::optional<double> text_since_ms;
    std::optional<double> last_t_ms;

    friend bool operator==(const EyeSwipeState&, const EyeSwipeState&) = default;
};

inline std::string_view to_string(EyeSwipeState::Phase p) {
    switch (p) {
    case EyeSwipeState::Phase::Reading: return "reading";
    case EyeSwipeState::Phase::Priming: return "priming";
    case EyeSwipeState::Phase::Primed: return "primed";
    case EyeSwipeState::Phase::Triggered: return "triggered";
    }
    return "reading";
}

inline StepResult<EyeSwipeState> eyeswipe_step(const EyeSwipeState& state, const GazeSample& s,
                                               const ScreenGeometry& g, const TechniqueConfig& c) {
    using Phase = EyeSwipeState::Phase;
    detail::check_time(state.last_t_ms, s.t_ms);

    StepResult<EyeSwipeState> r{state, {}};
    EyeSwipeState& st = r.state;
    st.last_t_ms = s.t_ms;
    if (st.phase == Phase::Triggered) st.phase = Phase::Reading;

    const Region region = classify_region(g, s);
    const bool in_band = region != Region::OffScreen && s.y_px > c.eyeswipe_prime_line_px;
    const bool in_text = region == Region::Reading && !in_band;
    auto emit = [&](EventPayload p) {
        r.events.push_back({s.t_ms, Technique::EyeSwipe, std::move(p)});
    };

    switch (st.phase) {
    case Phase::Reading:
        if (in_band) {
            st.phase = Phase::Priming;
            st.priming_since_ms = s.t_ms;
        }
        break;
    case Phase::Priming:
        if (!in_band) {
            st.phase = Phase::Reading;
        } else if (s.t_ms - st.priming_since_ms >= c.eyeswipe_prime_ms) {
            st.phase = Phase::Primed;
            st.last_band_ms = s.t_ms;
            st.text_since_ms.reset();
            emit(StateChange{"priming", "primed"});
        }
        break;
    case Phase::Primed:
    case Phase::Triggered:
        if (region == Region::Top) {
            emit(Trigger{});
            st.phase = Phase::Reading;
            st.text_since_ms.reset();
            break;
        }
        if (in_band) {
            st.last_band_ms = s.t_ms;
            st.text_since_ms.reset();
            break;
        }
        if (in_text) {
            if (!st.text_since_ms) st.text_since_ms = s.t_ms;
        } else {
            st.text_since_ms.reset();
        }
        if (st.text_since_ms && s.t_ms - *st.text_since_ms >= c.eyeswipe_deprime_ms) {
            emit(Abort{"returned to text"});
            st.phase = Phase::Reading;
            st.text_since_ms.reset();
        } else if (s.t_ms - st.last_band_ms > c.eyeswipe_prime_timeout_ms) {
            emit(Abort{"prime timeout"});
            st.phase = Phase::Reading;
            st.text_since_ms.reset();
        }
        break;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Hitbox: dwell-time activation on the bottom box.

/// What the fixation tracker currently reports for the bottom region.
struct FixationObservation {
    double t_ms = 0.0;
    std::optional<stream::Fixation> open;
};

struct HitboxState {
    std::optional<double> fixation_start_ms;  // fixation under evaluation
    std::optional<double> consumed_start_ms;  // fixation that already triggered
    double progress = 0.0;
    bool progressing = false;
    std::optional<double> last_t_ms;

    friend bool operator==(const HitboxState&, const HitboxState&) = default;
};

inline StepResult<HitboxState> hitbox_step(const HitboxState& state, const FixationObservation& obs,
                                           const Rect& hitbox, const TechniqueConfig& c) {
    detail::check_time(state.last_t_ms, obs.t_ms);
    StepResult<HitboxState> r{state, {}};
    HitboxState& st = r.state;
    st.last_t_ms = obs.t_ms;
    auto emit = [&](EventPayload p) {
        r.events.push_back({obs.t_ms, Technique::Hitbox, std::move(p)});
    };
    auto end_attempt = [&] {
        if (st.progressing) emit(Abort{"fixation ended"});
        st.progressing = false;
        st.progress = 0.0;
        st.fixation_start_ms.reset();
    };

    const bool inside = obs.open && hitbox.contains(obs.open->centroid_x_px, obs.open->centroid_y_px);
    if (!inside) {
        end_attempt();
        st.consumed_start_ms.reset();
        return r;
    }
    const double start = obs.open->start_ms;
    if (st.consumed_start_ms && *st.consumed_start_ms == start) return r;
    if (st.fixation_start_ms && *st.fixation_start_ms != start) end_attempt();
    st.fixation_start_ms = start;

    const double age = obs.t_ms - start;
    if (age >= c.hitbox_dwell_ms) {
        st.progress = 1.0;
        emit(Progress{1.0});
        emit(Trigger{});
        st.consumed_start_ms = start;
        st.fixation_start_ms.reset();
        st.progressing = false;
        st.progress = 0.0;
    } else if (age >= c.hitbox_min_fixation_ms) {
        double p = (age - c.hitbox_min_fixation_ms) / (c.hitbox_dwell_ms - c.hitbox_min_fixation_ms);
        p = std::clamp(p, 0.0, 1.0);
        st.progress = std::max(st.progress, p);
        st.progressing = true;
        emit(Progress{st.progress});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Moving bar: dwell on the bar start, then follow it across the bottom bar.

struct MovingBarState {
    enum class Phase { Idle, Active };
    Phase phase = Phase::Idle;
    std::optional<double> dwell_since_ms;
    double active_since_ms = 0.0;
    std::optional<double> off_bar_since_ms;
    std::optional<double> last_t_ms;

    friend bool operator==(const MovingBarState&, const MovingBarState&) = default;
};

struct MovingBarStep {
    MovingBarState state;
    std::vector<DetectorEvent> events;
    double bar_x_px = 0.0;
};

inline MovingBarStep movingbar_step(const MovingBarState& state, const GazeSample& s,
                                    const ScreenGeometry& g, const ControlLayout& layout,
                                    const TechniqueConfig& c) {
    using Phase = MovingBarState::Phase;
    detail::check_time(state.last_t_ms, s.t_ms);
    MovingBarStep r{state, {}, layout.bar_start_x_px};
    MovingBarState& st = r.state;
    st.last_t_ms = s.t_ms;
    auto emit = [&](EventPayload p) {
        r.events.push_back({s.t_ms, Technique::MovingBar, std::move(p)});
    };
    const bool valid = classify_region(g, s) != Region::OffScreen;
    auto near = [&](double bar_x) {
        return valid && std::abs(s.x_px - bar_x) <= c.bar_tolerance_px &&
               std::abs(s.y_px - layout.bar_y_px) <= c.bar_tolerance_px;
    };

    if (st.phase == Phase::Idle) {
        if (near(layout.bar_start_x_px)) {
            if (!st.dwell_since_ms) st.dwell_since_ms = s.t_ms;
            if (s.t_ms - *st.dwell_since_ms >= c.bar_activation_ms) {
                st.phase = Phase::Active;
                st.active_since_ms = s.t_ms;
                st.off_bar_since_ms.reset();
                st.dwell_since_ms.reset();
                emit(StateChange{"idle", "active"});
            }
        } else {
            st.dwell_since_ms.reset();
        }
        return r;
    }

    const double frac = std::min(1.0, (s.t_ms - st.active_since_ms) / c.bar_duration_ms);
    r.bar_x_px = layout.bar_start_x_px + layout.bar_travel_px * frac;
    auto reset = [&] {
        st.phase = Phase::Idle;
        st.off_bar_since_ms.reset();
        st.dwell_since_ms.reset();
    };
    if (near(r.bar_x_px)) {
        st.off_bar_since_ms.reset();
        if (frac >= 1.0) {
            emit(Trigger{});
            reset();
        }
    } else {
        if (!st.off_bar_since_ms) st.off_bar_since_ms = s.t_ms;
        if (s.t_ms - *st.off_bar_since_ms > c.bar_grace_ms) {
            emit(Abort{"lost the bar"});
            reset();
            r.bar_x_px = layout.bar_start_x_px;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Auto-scroll: reading-speed regression over sampled windows.

struct TimedY {
    double t_ms = 0.0;
    double y_px = 0.0;
};

struct ReadingSpeedEstimate {
    double v_px_per_s = 0.0;
    double intercept_y_px = 0.0;  // predicted y at t = 0 ms
    double r2 = 0.0;
    std::size_t n_fixations = 0;
    bool valid = false;

    [[nodiscard]] double predict_y(double t_ms) const {
        return intercept_y_px + v_px_per_s * t_ms / 1000.0;
    }
};

inline constexpr std::size_t kMinSpeedFixations = 4;
inline constexpr double kMinSpeedR2 = 0.3;

/// Ordinary least squares of y against time (seconds).
inline ReadingSpeedEstimate fit_reading_speed(std::span<const TimedY> points) {
    ReadingSpeedEstimate e;
    e.n_fixations = points.size();
    if (points.empty()) return e;
    const double n = static_cast<double>(points.size());
    double mt = 0.0, my = 0.0;
    for (const TimedY& p : points) {
        mt += p.t_ms / 1000.0;
        my += p.y_px;
    }
    mt /= n;
    my /= n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (const TimedY& p : points) {
        const double dt = p.t_ms / 1000.0 - mt, dy = p.y_px - my;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if (stt > 0.0) {
        e.v_px_per_s = sty / stt;
        e.intercept_y_px = my - e.v_px_per_s * mt;
        e.r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 0.0;
    } else {
        e.intercept_y_px = my;
    }
    e.valid = e.n_fixations >= kMinSpeedFixations && e.v_px_per_s > 0.0 && e.r2 >= kMinSpeedR2;
    return e;
}

/// Estimates reading speed from samples collected inside the sampling
/// windows. Samples outside the top and reading regions are ignored; gaps
/// longer than three frames split the input into independent runs.
inline ReadingSpeedEstimate autoscroll_update(std::span<const GazeSample> window_samples,
                                              const ScreenGeometry& g,
                                              const stream::StreamConfig& scfg = {}) {
    std::vector<TimedY> points;
    std::vector<GazeSample> run;
    auto flush = [&] {
        if (run.empty()) return;
        auto smoothed = stream::smooth(run, scfg);
        for (const stream::Fixation& f : stream::detect_fixations(smoothed, scfg)) {
            points.push_back({f.mid_ms(), f.centroid_y_px});
        }
        run.clear();
    };
    for (const GazeSample& s : window_samples) {
        const Region region = classify_region(g, s);
        if (region != Region::Top && region != Region::Reading) continue;
        if (!run.empty() && s.t_ms - run.back().t_ms > 3.0 * scfg.frame_ms()) flush();
        if (!run.empty() && !(s.t_ms > run.back().t_ms)) {
            throw NonMonotonicTimestamp(run.back().t_ms, s.t_ms);
        }
        run.push_back(s);
    }
    flush();
    return fit_reading_speed(points);
}

/// Predicts when the reader reaches the last line and schedules the turn.
/// Invalid estimates never schedule anything.
inline std::optional<DetectorEvent> autoscroll_schedule(const ReadingSpeedEstimate& estimate,
                                                        const Page& page, double page_start_ms,
                                                        double now_ms, const TechniqueConfig& c) {
    if (!estimate.valid || page.line_y_positions.empty()) return std::nullopt;
    const double last_line_y = page.line_y_positions.back();
    const double remaining_px = last_line_y - estimate.predict_y(now_ms);
    double eta = now_ms + std::max(0.0, remaining_px / estimate.v_px_per_s * 1000.0);
    eta = std::max(eta, page_start_ms + c.auto_min_page_ms);
    return DetectorEvent{now_ms, Technique::AutoScroll, Scheduled{eta}};
}

}  // namespace gazescroll::techniques
