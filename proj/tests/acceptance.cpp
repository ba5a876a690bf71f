// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "gazescroll/gazescroll.hpp"

using namespace gazescroll;
using techniques::DetectorEvent;
using techniques::Trigger;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string num(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const ScreenGeometry kScreen{};

std::size_t trigger_count(const std::vector<DetectorEvent>& ev) {
    return static_cast<std::size_t>(
        std::count_if(ev.begin(), ev.end(), [](const DetectorEvent& e) { return e.is<Trigger>(); }));
}

std::optional<double> first_trigger(const std::vector<DetectorEvent>& ev) {
    for (const auto& e : ev)
        if (e.is<Trigger>()) return e.t_ms;
    return std::nullopt;
}

// --- FSM threshold fidelity -------------------------------------------------

std::vector<DetectorEvent> run_eyeswipe(double hold_ms, double step_ms) {
    techniques::EyeSwipeState st;
    std::vector<DetectorEvent> ev;
    auto push = [&](const GazeSample& s) {
        auto r = techniques::eyeswipe_step(st, s, kScreen, {});
        st = r.state;
        ev.insert(ev.end(), r.events.begin(), r.events.end());
    };
    double t = 0;
    for (; t <= 2000; t += step_ms) push({t, 214, 400});
    const double band_from = t;
    // In the band through the first frame at or after hold_ms.
    for (; t < band_from + hold_ms + step_ms - 1e-9; t += step_ms) push({t, 214, 720});
    push({t, 214, 50});
    return ev;
}

Verdict fsm_fidelity() {
    Verdict v;
    for (double step : {40.0, 20.0, 10.0}) {
        const auto yes = run_eyeswipe(500, step);
        v.require(trigger_count(yes) == 1, "eyeswipe 500 ms @" + num(step, 0) + " ms did not trigger");
        const auto no = run_eyeswipe(400, step);
        v.require(trigger_count(no) == 0, "eyeswipe 400 ms @" + num(step, 0) + " ms triggered");
    }
    // Band edge: holding at y = 690 is not below the line.
    {
        techniques::EyeSwipeState st;
        std::size_t n = 0;
        double t = 0;
        for (; t <= 1000; t += 40) {
            auto r = techniques::eyeswipe_step(st, {t, 214, 690}, kScreen, {});
            st = r.state;
            n += trigger_count(r.events);
        }
        auto r = techniques::eyeswipe_step(st, {t, 214, 50}, kScreen, {});
        n += trigger_count(r.events);
        v.require(n == 0, "eyeswipe triggered from y = 690");
    }

    double worst_hitbox = 0;
    for (double dwell : {500.0, 750.0, 1000.0, 1500.0, 2000.0}) {
        techniques::TechniqueConfig c;
        c.hitbox_dwell_ms = dwell;
        ScrollEngine e({kScreen, c, {}, DocumentModel::with_pages(3, kScreen), Technique::Hitbox});
        const auto centre = e.layout().hitbox.center();
        std::vector<DetectorEvent> ev;
        for (double t = 0; t <= dwell + 500; t += 40) {
            auto out = e.push({t, centre.x, centre.y});
            ev.insert(ev.end(), out.events.begin(), out.events.end());
        }
        const auto at = first_trigger(ev);
        if (!at) {
            v.require(false, "hitbox dwell " + num(dwell, 0) + " never triggered");
            continue;
        }
        worst_hitbox = std::max(worst_hitbox, std::abs(*at - dwell));
        v.require(std::abs(*at - dwell) <= 40.0, "hitbox dwell " + num(dwell, 0) + " fired at " + num(*at, 0));
        v.require(trigger_count(ev) == 1, "hitbox retriggered");
    }

    const auto layout = techniques::ControlLayout::for_screen(kScreen, {});
    v.require(std::abs(layout.bar_travel_px - 162.27) < 0.01, "bar travel " + num(layout.bar_travel_px, 2) + " px");
    // pursuit_until: fraction of travel the gaze follows before stopping.
    auto run_bar = [&](double dwell_ms, double pursuit_until, double bar_duration) {
        techniques::TechniqueConfig c;
        c.bar_duration_ms = bar_duration;
        techniques::MovingBarState st;
        std::vector<DetectorEvent> ev;
        std::optional<double> active_at;
        double bar_at_trigger = 0;
        for (double t = 0; t <= dwell_ms + bar_duration + 1000; t += 20) {
            double x = layout.bar_start_x_px;
            double y = layout.bar_y_px;
            if (t > dwell_ms && !active_at) y = 400;  // looked away before activating
            if (active_at) {
                const double frac = std::min((t - *active_at) / bar_duration, pursuit_until);
                x = layout.bar_start_x_px + layout.bar_travel_px * frac;
            }
            auto r = techniques::movingbar_step(st, {t, x, y}, kScreen, layout, c);
            st = r.state;
            for (const auto& e : r.events) {
                if (std::holds_alternative<techniques::StateChange>(e.payload)) active_at = e.t_ms;
                if (e.is<Trigger>()) bar_at_trigger = r.bar_x_px;
            }
            ev.insert(ev.end(), r.events.begin(), r.events.end());
            if (trigger_count(ev)) break;
        }
        return std::tuple{ev, active_at, bar_at_trigger};
    };
    for (double duration : {500.0, 1000.0, 1700.0}) {
        auto [ev, active_at, bar_x] = run_bar(2000, 1.0, duration);
        const auto at = first_trigger(ev);
        v.require(active_at && std::abs(*active_at - 300) < 1e-9, "bar activation not at 300 ms");
        v.require(at && active_at && std::abs(*at - (*active_at + duration)) < 1e-9,
                  "bar trigger not at activation + " + num(duration, 0));
        v.require(std::abs(bar_x - layout.bar_end_x_px()) < 1e-9, "bar not at end of travel on trigger");
        auto [short_ev, short_active, _] = run_bar(280, 1.0, duration);
        v.require(!short_active && trigger_count(short_ev) == 0, "bar activated after 280 ms dwell");
        auto [partial_ev, partial_active, __] = run_bar(2000, 0.4, duration);
        v.require(partial_active && trigger_count(partial_ev) == 0, "bar triggered on partial travel");
    }
    if (v.pass) v.detail = "eyeswipe 500/400 ms at 25/50/100 Hz; hitbox worst |t-dwell| " + num(worst_hitbox, 0) +
                           " ms; bar 300 ms + full 162.27 px";
    return v;
}

// --- Replay determinism -------------------------------------------------------

Verdict replay_determinism() {
    Verdict v;
    std::mt19937_64 rng(20240607);
    const std::vector<Technique> techs{Technique::EyeSwipe, Technique::Hitbox, Technique::MovingBar,
                                       Technique::AutoScroll, Technique::Touch};
    std::size_t sessions = 0, lines = 0;
    for (int i = 0; i < 24; ++i) {
        campaign::SessionPlan p;
        p.technique = techs[rng() % techs.size()];
        p.mobility = rng() % 2 ? "walking" : "sitting";
        p.seed = rng();
        p.pages = 3 + rng() % 4;
        const auto live = campaign::simulate_session(p);
        const auto live_log = io::serialize_log(io::event_log(live));
        std::istringstream file(io::to_string(live));
        const auto reread = io::read(file).recording;
        const auto replayed = io::serialize_log(io::event_log(io::rerun(reread)));
        v.require(live_log == replayed, "session " + std::to_string(i) + " (" + std::string(to_string(p.technique)) +
                                            ", seed " + std::to_string(p.seed) + ") diverged");
        ++sessions;
        lines += io::event_log(live).size();
    }
    if (v.pass) v.detail = std::to_string(sessions) + " sessions, " + std::to_string(lines) + " event lines identical";
    return v;
}

// --- Noise calibration ----------------------------------------------------------

Verdict noise_calibration() {
    Verdict v;
    // 10^4 samples per condition, fixating across the reading area.
    std::vector<GazeSample> truth;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> x(40, 388), y(150, 780);
    for (int i = 0; i < 10000; ++i) truth.push_back({i * 40.0, x(rng), y(rng)});
    for (auto [label, target] : {std::pair{"sitting", 0.95}, std::pair{"walking", 1.98}}) {
        double worst = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto noisy = sim::apply_noise_detailed(truth, *sim::NoiseModel::preset(label), seed);
            const double d = sim::mean_displacement_cm(truth, noisy);
            worst = std::max(worst, std::abs(d - target) / target);
            v.require(std::abs(d - target) <= 0.05 * target,
                      std::string(label) + " seed " + std::to_string(seed) + " gave " + num(d) + " cm");
        }
        v.detail += (v.detail.empty() ? "" : ", ") + std::string(label) + " worst deviation " + num(100 * worst, 1) + "%";
    }
    return v;
}

// --- Calibrator recovery ------------------------------------------------------------

Verdict calibrator_recovery() {
    Verdict v;
    double clean_sum = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) clean_sum += campaign::run_calibration_trial(0.0, seed).calibrated_cm;
    const double clean_mean = clean_sum / 20;
    v.require(clean_mean < 0.02, "noise-free mean error " + num(clean_mean, 4) + " cm");
    std::size_t improved = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto t = campaign::run_calibration_trial(0.95, 1000 + seed);
        improved += t.calibrated_cm <= t.raw_cm;
    }
    v.require(improved == 20, "calibrated <= raw in " + std::to_string(improved) + "/20 noisy trials");
    if (v.pass) v.detail = "noise-free mean " + num(clean_mean, 4) + " cm; 20/20 noisy trials improved";
    return v;
}

// --- Robustness ordering ---------------------------------------------------------------

Verdict robustness_ordering() {
    Verdict v;
    const auto result = campaign::run_campaign(campaign::gesture_techniques(), {"sitting", "walking"}, 1, 100);
    auto row = [&](const std::string& tech, const std::string& mob) -> const analytics::ReportRow* {
        for (const auto& r : result.report)
            if (r.technique == tech && r.mobility == mob) return &r;
        return nullptr;
    };
    const auto* bar = row("movingbar", "walking");
    const auto* swipe = row("eyeswipe", "walking");
    const auto* hitbox = row("hitbox", "walking");
    if (!bar || !swipe || !hitbox) {
        v.require(false, "missing walking rows");
        return v;
    }
    const double fb = bar->metrics.failure_rate(), fs = swipe->metrics.failure_rate(),
                 fh = hitbox->metrics.failure_rate();
    v.require(fb > fs && fb > fh, "walking failure rates bar " + num(fb) + ", swipe " + num(fs) + ", hitbox " + num(fh));
    std::string sitting;
    for (const char* t : {"eyeswipe", "hitbox", "movingbar"}) {
        const auto* r = row(t, "sitting");
        const double s = r ? r->metrics.success_rate() : 0.0;
        v.require(s >= 0.95, std::string(t) + " sitting success " + num(s));
        sitting += std::string(sitting.empty() ? "" : ", ") + t + " " + num(s);
    }
    v.detail += (v.detail.empty() ? "" : "; ") + std::string("walking failure bar ") + num(fb) + " > swipe " + num(fs) +
                ", hitbox " + num(fh) + "; sitting success " + sitting;
    return v;
}

// --- Auto-scroll prediction ---------------------------------------------------------------

Verdict autoscroll_prediction() {
    Verdict v;
    const auto doc = DocumentModel::with_pages(2, kScreen);
    const auto& lines = doc.pages[0].line_y_positions;
    const double n = static_cast<double>(lines.size());
    double worst = 0;
    for (double line_ms : {900.0, 1200.0, 1500.0, 2000.0}) {
        ScrollEngine e({kScreen, {}, {}, doc, Technique::AutoScroll});
        const double truth = n * line_ms;
        std::optional<double> turned;
        for (double t = 0; t < 3 * truth && !turned; t += 40) {
            const auto line = std::min(static_cast<std::size_t>(t / line_ms), lines.size() - 1);
            const double x = 40 + 90 * (static_cast<int>(t / (line_ms / 4)) % 4);
            auto out = e.push({t, x, lines[line]});
            if (!out.scrolls.empty()) turned = out.scrolls[0].t_ms;
        }
        if (!turned) {
            v.require(false, "no turn for " + num(line_ms, 0) + " ms/line");
            continue;
        }
        const double err = std::abs(*turned - truth) / truth;
        worst = std::max(worst, err);
        v.require(err <= 0.10, num(line_ms, 0) + " ms/line turned at " + num(*turned, 0) + " vs " + num(truth, 0));
    }
    // Zero slope: gaze sweeps along one line and never progresses.
    std::size_t flat_turns = 0;
    for (double y : {lines.front(), lines[lines.size() / 2], lines.back()}) {
        ScrollEngine e({kScreen, {}, {}, doc, Technique::AutoScroll});
        for (double t = 0; t < 120000; t += 40) {
            const double x = 40 + 90 * (static_cast<int>(t / 300) % 4);
            flat_turns += e.push({t, x, y}).scrolls.size();
        }
    }
    v.require(flat_turns == 0, std::to_string(flat_turns) + " turns on zero-slope traces");
    if (v.pass) v.detail = "worst finish-time error " + num(100 * worst, 1) + "%; 0 turns on zero-slope traces";
    return v;
}

// --- Analytics oracles ----------------------------------------------------------------------

Verdict analytics_oracles() {
    Verdict v;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> x(-30, 460), y(-30, 960);
    std::vector<GazeSample> samples;
    for (int i = 0; i < 4000; ++i) samples.push_back({i * 40.0, x(rng), y(rng), rng() % 20 != 0});
    std::size_t mismatched = 0;
    double total = 0;
    for (double cell : {10.0, 13.0, 40.0}) {
        const auto h = analytics::heatmap(samples, kScreen, cell);
        std::size_t on = 0;
        for (const auto& s : samples) on += s.on_screen && kScreen.contains(s.x_px, s.y_px);
        for (std::size_t r = 0; r < h.rows; ++r) {
            for (std::size_t c = 0; c < h.cols; ++c) {
                std::size_t k = 0;
                for (const auto& s : samples) {
                    if (!s.on_screen || !kScreen.contains(s.x_px, s.y_px)) continue;
                    k += s.x_px >= c * cell && s.x_px < (c + 1) * cell && s.y_px >= r * cell && s.y_px < (r + 1) * cell;
                }
                mismatched += h.at(r, c) != static_cast<double>(k) / static_cast<double>(on);
            }
        }
        total = h.total();
        v.require(std::abs(total - 1.0) <= 1e-9, "heatmap sum " + num(total, 12));
    }
    v.require(mismatched == 0, std::to_string(mismatched) + " heatmap cells differ from brute force");

    const std::vector<ScrollEvent> turns{{12000, 0, 1}, {40500, 1, 2}, {71250, 2, 3}};
    const auto r = analytics::rtpp(2000.0, turns, 95000.0);
    v.require(r.durations_s == std::vector<double>{10.0, 28.5, 30.75, 23.75}, "rtpp durations differ");
    v.require(r.mean_s == 23.25, "rtpp mean " + num(r.mean_s));
    if (v.pass) v.detail = "3 grids cell-for-cell, sum " + num(total, 12) + "; rtpp [10, 28.5, 30.75, 23.75] s";
    return v;
}

// --- Latency model ------------------------------------------------------------------------------

Verdict latency_model() {
    Verdict v;
    const sim::LatencyModel m = sim::LatencyModel::phone();
    std::vector<GazeSample> trace;
    for (int i = 0; i < 10000; ++i) trace.push_back({i * 40.0, 214, 463});
    const auto delivered = sim::delay(trace, m, 7);
    double sum_in = 0, sum_out = 0;
    for (const auto& s : trace) sum_in += s.t_ms;
    for (const auto& s : delivered) sum_out += s.t_ms;
    const double mean = (sum_out - sum_in) / 10000.0;
    v.require(std::abs(mean - 113.5) <= 0.05 * 113.5, "mean delay " + num(mean, 2) + " ms");
    sim::Rng rng(8);
    double lo = 1e9, hi = 0;
    for (int i = 0; i < 10000; ++i) {
        const double d = sim::sample_delay(m, rng);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    v.require(m.detect.lo_ms == 10 && m.detect.hi_ms == 25, "detection range");
    v.require(m.transport.lo_ms == 7 && m.transport.hi_ms == 50, "transport range");
    v.require(m.inference.lo_ms == 60 && m.inference.hi_ms == 75, "inference range");
    v.require(lo >= 77 && hi <= 150, "delay outside [77, 150] ms");
    if (v.pass) v.detail = "mean " + num(mean, 2) + " ms over 10^4 samples, range [" + num(lo, 1) + ", " + num(hi, 1) + "] ms";
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"fsm-threshold-fidelity", fsm_fidelity},
        {"replay-determinism", replay_determinism},
        {"noise-model-calibration", noise_calibration},
        {"calibrator-recovery", calibrator_recovery},
        {"robustness-ordering", robustness_ordering},
        {"autoscroll-prediction", autoscroll_prediction},
        {"analytics-oracles", analytics_oracles},
        {"latency-model", latency_model},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("threw: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures == 0 ? 0 : 1;
}
