#pragma once

// Gaze analytics: heatmaps, scan-paths, reading time per page and the
// activation/robustness metrics used to compare techniques.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gazescroll/core.hpp"
#include "gazescroll/simulate.hpp"
#include "gazescroll/stream.hpp"
#include "gazescroll/techniques.hpp"

namespace gazescroll::analytics {

// ---------------------------------------------------------------------------
// Heatmap

struct Heatmap {
    double cell_px = 10.0;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::vector<double> weights;  // row-major, rows x cols
    std::size_t on_screen_samples = 0;
    std::size_t off_screen_samples = 0;

    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return weights[row * cols + col]; }
    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

/// Plain binning of on-screen samples into square cells, normalized to sum
/// to one. Off-screen samples are only counted.
inline Heatmap heatmap(std::span<const GazeSample> samples, const ScreenGeometry& g, double cell_px = 10.0) {
    if (!(cell_px > 0.0)) throw std::invalid_argument("cell_px must be positive");
    g.validate();
    Heatmap h;
    h.cell_px = cell_px;
    h.cols = static_cast<std::size_t>(std::ceil(g.width_px / cell_px));
    h.rows = static_cast<std::size_t>(std::ceil(g.height_px / cell_px));
    h.weights.assign(h.rows * h.cols, 0.0);
    for (const GazeSample& s : samples) {
        if (!s.on_screen || !g.contains(s.x_px, s.y_px)) {
            ++h.off_screen_samples;
            continue;
        }
        const auto col = std::min(h.cols - 1, static_cast<std::size_t>(s.x_px / cell_px));
        const auto row = std::min(h.rows - 1, static_cast<std::size_t>(s.y_px / cell_px));
        h.weights[row * h.cols + col] += 1.0;
        ++h.on_screen_samples;
    }
    if (h.on_screen_samples > 0) {
        const double n = static_cast<double>(h.on_screen_samples);
        for (double& w : h.weights) w /= n;
    }
    return h;
}

/// Portable graymap (plain P2); the densest cell is black.
inline void write_pgm(const Heatmap& h, std::ostream& os) {
    const double peak = h.weights.empty() ? 0.0 : *std::max_element(h.weights.begin(), h.weights.end());
    os << "P2\n" << h.cols << ' ' << h.rows << "\n255\n";
    for (std::size_t r = 0; r < h.rows; ++r) {
        for (std::size_t c = 0; c < h.cols; ++c) {
            const double v = peak > 0.0 ? h.at(r, c) / peak : 0.0;
            os << (c ? " " : "") << static_cast<int>(std::lround(255.0 * (1.0 - v)));
        }
        os << '\n';
    }
}

/// Numeric grid: a header line, then one tab-separated row per cell row.
inline void write_grid(const Heatmap& h, std::ostream& os) {
    os << "GAZESCROLL-GRID 1\tcell_px=" << h.cell_px << "\tcols=" << h.cols << "\trows=" << h.rows
       << "\ton_screen=" << h.on_screen_samples << "\toff_screen=" << h.off_screen_samples << '\n';
    char buf[64];
    for (std::size_t r = 0; r < h.rows; ++r) {
        for (std::size_t c = 0; c < h.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", h.at(r, c));
            os << (c ? "\t" : "") << buf;
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Scan-path

struct ScanVertex {
    double x_px = 0.0;
    double y_px = 0.0;
    double fraction = 0.0;  // 0 at the first fixation, 1 at the last
};

struct ScanPath {
    std::vector<ScanVertex> vertices;
};

inline ScanPath scanpath(std::span<const stream::Fixation> fixations) {
    ScanPath p;
    if (fixations.empty()) return p;
    const double first = fixations.front().start_ms, last = fixations.back().start_ms;
    for (std::size_t i = 0; i < fixations.size(); ++i) {
        if (i && fixations[i].start_ms < fixations[i - 1].start_ms) {
            throw std::invalid_argument("fixations must be time-ordered");
        }
        const double f = last > first ? (fixations[i].start_ms - first) / (last - first) : 0.0;
        p.vertices.push_back({fixations[i].centroid_x_px, fixations[i].centroid_y_px, f});
    }
    return p;
}

struct Rgb {
    int r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Linear red to green ramp over the time fraction.
inline Rgb ramp_color(double fraction) {
    const double f = std::clamp(fraction, 0.0, 1.0);
    return {static_cast<int>(std::lround(255.0 * (1.0 - f))), static_cast<int>(std::lround(255.0 * f)), 0};
}

inline std::string to_hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

/// SVG polyline, one segment per consecutive vertex pair, coloured by the
/// fraction of the segment's start vertex.
inline void write_svg(const ScanPath& p, const ScreenGeometry& g, std::ostream& os) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << g.width_px << "\" height=\"" << g.height_px
       << "\" viewBox=\"0 0 " << g.width_px << ' ' << g.height_px << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 1; i < p.vertices.size(); ++i) {
        const ScanVertex& a = p.vertices[i - 1];
        const ScanVertex& b = p.vertices[i];
        os << "<line x1=\"" << a.x_px << "\" y1=\"" << a.y_px << "\" x2=\"" << b.x_px << "\" y2=\"" << b.y_px
           << "\" stroke=\"" << to_hex(ramp_color(a.fraction)) << "\" stroke-width=\"2\"/>\n";
    }
    for (const ScanVertex& v : p.vertices) {
        os << "<circle cx=\"" << v.x_px << "\" cy=\"" << v.y_px << "\" r=\"4\" fill=\""
           << to_hex(ramp_color(v.fraction)) << "\"/>\n";
    }
    os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Reading time per page

struct RtppResult {
    std::vector<double> durations_s;
    double mean_s = 0.0;
    double sd_s = 0.0;  // population standard deviation
};

/// Durations between consecutive page boundaries (session start, each page
/// turn, session end), in seconds.
inline RtppResult rtpp(std::span<const double> boundaries_ms) {
    RtppResult r;
    for (std::size_t i = 1; i < boundaries_ms.size(); ++i) {
        if (boundaries_ms[i] < boundaries_ms[i - 1]) throw std::invalid_argument("page boundaries must be ordered");
        r.durations_s.push_back((boundaries_ms[i] - boundaries_ms[i - 1]) / 1000.0);
    }
    if (r.durations_s.empty()) return r;
    const double n = static_cast<double>(r.durations_s.size());
    for (double d : r.durations_s) r.mean_s += d;
    r.mean_s /= n;
    for (double d : r.durations_s) r.sd_s += (d - r.mean_s) * (d - r.mean_s);
    r.sd_s = std::sqrt(r.sd_s / n);
    return r;
}

/// Boundaries for a session: its start, every scroll, and its end when the
/// reader was still on a page.
inline RtppResult rtpp(double session_start_ms, std::span<const ScrollEvent> scrolls, double session_end_ms) {
    std::vector<double> b{session_start_ms};
    for (const ScrollEvent& s : scrolls) b.push_back(s.t_ms);
    if (session_end_ms > b.back()) b.push_back(session_end_ms);
    return rtpp(b);
}

// ---------------------------------------------------------------------------
// Activation metrics

inline constexpr double kFalseTriggerWindowMs = 1000.0;

struct ActivationMetrics {
    std::size_t attempts = 0;
    std::size_t triggers = 0;
    std::size_t true_triggers = 0;
    std::size_t false_triggers = 0;
    std::size_t aborts = 0;
    double latency_sum_ms = 0.0;

    [[nodiscard]] double mean_detection_latency_ms() const {
        return true_triggers ? latency_sum_ms / static_cast<double>(true_triggers) : 0.0;
    }
    [[nodiscard]] double failure_rate() const {
        return attempts ? static_cast<double>(false_triggers + aborts) / static_cast<double>(attempts) : 0.0;
    }
    [[nodiscard]] double success_rate() const {
        return attempts ? static_cast<double>(true_triggers) / static_cast<double>(attempts) : 0.0;
    }

    ActivationMetrics& operator+=(const ActivationMetrics& o) {
        attempts += o.attempts;
        triggers += o.triggers;
        true_triggers += o.true_triggers;
        false_triggers += o.false_triggers;
        aborts += o.aborts;
        latency_sum_ms += o.latency_sum_ms;
        return *this;
    }
};

/// Scores one session. A trigger is true when it falls within one second
/// of an injected gesture that has not been matched yet; every other
/// trigger is false.
inline ActivationMetrics score_session(std::span<const techniques::DetectorEvent> events,
                                       std::span<const sim::Annotation> annotations) {
    ActivationMetrics m;
    m.attempts = annotations.size();
    std::vector<bool> matched(annotations.size(), false);
    for (const auto& e : events) {
        if (e.is<techniques::Abort>()) {
            ++m.aborts;
            continue;
        }
        if (!e.is<techniques::Trigger>()) continue;
        ++m.triggers;
        bool hit = false;
        for (std::size_t i = 0; i < annotations.size(); ++i) {
            const auto& a = annotations[i];
            if (matched[i]) continue;
            if (e.t_ms >= a.start_ms - kFalseTriggerWindowMs && e.t_ms <= a.end_ms + kFalseTriggerWindowMs) {
                matched[i] = true;
                hit = true;
                ++m.true_triggers;
                m.latency_sum_ms += e.t_ms - a.completion_ms;
                break;
            }
        }
        if (!hit) ++m.false_triggers;
    }
    return m;
}

struct LabeledSession {
    std::string technique;
    std::string mobility;
    std::vector<techniques::DetectorEvent> events;
    std::vector<sim::Annotation> annotations;
};

struct ReportRow {
    std::string technique;
    std::string mobility;
    std::size_t sessions = 0;
    ActivationMetrics metrics;
};

/// Aggregates per (technique, mobility) and orders rows by failure rate,
/// lowest first; ties fall back to the labels so the order is total.
inline std::vector<ReportRow> robustness_report(std::span<const LabeledSession> sessions) {
    std::map<std::pair<std::string, std::string>, ReportRow> groups;
    for (const LabeledSession& s : sessions) {
        ReportRow& row = groups[{s.technique, s.mobility}];
        row.technique = s.technique;
        row.mobility = s.mobility;
        ++row.sessions;
        row.metrics += score_session(s.events, s.annotations);
    }
    std::vector<ReportRow> rows;
    for (auto& [key, row] : groups) rows.push_back(row);
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tuple(a.metrics.failure_rate(), a.technique, a.mobility) <
               std::tuple(b.metrics.failure_rate(), b.technique, b.mobility);
    });
    return rows;
}

inline void write_report(std::span<const ReportRow> rows, std::ostream& os) {
    os << "technique\tmobility\tsessions\tattempts\ttriggers\ttrue_triggers\tfalse_triggers\taborts"
          "\tfailure_rate\tsuccess_rate\tmean_latency_ms\n";
    char buf[256];
    for (const ReportRow& r : rows) {
        const auto& m = r.metrics;
        std::snprintf(buf, sizeof buf, "%zu\t%zu\t%zu\t%zu\t%zu\t%zu\t%.4f\t%.4f\t%.1f", r.sessions, m.attempts,
                      m.triggers, m.true_triggers, m.false_triggers, m.aborts, m.failure_rate(), m.success_rate(),
                      m.mean_detection_latency_ms());
        os << r.technique << '\t' << r.mobility << '\t' << buf << '\n';
    }
}

}  // namespace gazescroll::analytics
