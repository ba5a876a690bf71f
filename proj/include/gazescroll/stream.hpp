#pragma once

// Gaze stream conditioning: median smoothing and dispersion-threshold
// fixation identification, in batch and one-sample-at-a-time forms.

#include <algorithm>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gazescroll/core.hpp"

namespace gazescroll::stream {

struct StreamConfig {
    double sample_rate_hz = 25.0;
    double dispersion_px = 35.0;
    double min_fixation_ms = 100.0;
    int smoothing_window = 3;

    [[nodiscard]] double frame_ms() const { return 1000.0 / sample_rate_hz; }

    void validate() const {
        if (!(sample_rate_hz > 0.0) || !(dispersion_px > 0.0) || !(min_fixation_ms > 0.0)) {
            throw std::invalid_argument("stream config values must be positive");
        }
        if (smoothing_window < 1 || smoothing_window % 2 == 0) {
            throw std::invalid_argument("smoothing_window must be a positive odd count");
        }
    }

    friend bool operator==(const StreamConfig&, const StreamConfig&) = default;
};

struct Fixation {
    double start_ms = 0.0;
    double end_ms = 0.0;
    double centroid_x_px = 0.0;
    double centroid_y_px = 0.0;
    std::size_t sample_count = 0;

    [[nodiscard]] double duration_ms() const { return end_ms - start_ms; }
    [[nodiscard]] double mid_ms() const { return 0.5 * (start_ms + end_ms); }

    friend bool operator==(const Fixation&, const Fixation&) = default;
};

namespace detail {

inline double median(std::vector<double> v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

template <typename Range>
bool within_dispersion(const Range& window, const GazeSample* extra, double limit) {
    double min_x = extra ? extra->x_px : 0.0, max_x = min_x;
    double min_y = extra ? extra->y_px : 0.0, max_y = min_y;
    bool first = extra == nullptr;
    for (const GazeSample& s : window) {
        if (first) {
            min_x = max_x = s.x_px;
            min_y = max_y = s.y_px;
            first = false;
            continue;
        }
        min_x = std::min(min_x, s.x_px);
        max_x = std::max(max_x, s.x_px);
        min_y = std::min(min_y, s.y_px);
        max_y = std::max(max_y, s.y_px);
    }
    return (max_x - min_x) <= limit && (max_y - min_y) <= limit;
}

template <typename Range>
Fixation summarize(const Range& window) {
    Fixation f;
    f.start_ms = window.front().t_ms;
    f.end_ms = window.back().t_ms;
    double sx = 0.0, sy = 0.0;
    for (const GazeSample& s : window) {
        sx += s.x_px;
        sy += s.y_px;
    }
    f.sample_count = window.size();
    f.centroid_x_px = sx / static_cast<double>(f.sample_count);
    f.centroid_y_px = sy / static_cast<double>(f.sample_count);
    return f;
}

}  // namespace detail

/// Per-axis centered rolling median. Off-screen samples pass through
/// untouched and split the stream: a window never reaches across one, and
/// windows shrink symmetrically at run edges.
inline std::vector<GazeSample> smooth(std::span<const GazeSample> samples, const StreamConfig& cfg) {
    cfg.validate();
    require_time_ordered(samples);
    std::vector<GazeSample> out(samples.begin(), samples.end());
    const std::size_t half = static_cast<std::size_t>(cfg.smoothing_window / 2);
    const std::size_t n = samples.size();

    std::size_t run_begin = 0;
    while (run_begin < n) {
        if (!samples[run_begin].on_screen) {
            ++run_begin;
            continue;
        }
        std::size_t run_end = run_begin;
        while (run_end < n && samples[run_end].on_screen) ++run_end;

        for (std::size_t i = run_begin; i < run_end; ++i) {
            std::size_t h = std::min({half, i - run_begin, run_end - 1 - i});
            std::vector<double> xs, ys;
            for (std::size_t j = i - h; j <= i + h; ++j) {
                xs.push_back(samples[j].x_px);
                ys.push_back(samples[j].y_px);
            }
            out[i].x_px = detail::median(std::move(xs));
            out[i].y_px = detail::median(std::move(ys));
        }
        run_begin = run_end;
    }
    return out;
}

/// Trailing-window median for live streams. An off-screen sample clears the
/// window and is passed through.
class CausalSmoother {
public:
    explicit CausalSmoother(int window = 3) : window_(static_cast<std::size_t>(window)) {
        if (window < 1 || window % 2 == 0) {
            throw std::invalid_argument("smoothing window must be a positive odd count");
        }
    }

    GazeSample push(const GazeSample& s) {
        if (!s.on_screen) {
            recent_.clear();
            return s;
        }
        recent_.push_back(s);
        if (recent_.size() > window_) recent_.pop_front();
        std::vector<double> xs, ys;
        for (const GazeSample& r : recent_) {
            xs.push_back(r.x_px);
            ys.push_back(r.y_px);
        }
        GazeSample out = s;
        out.x_px = detail::median(std::move(xs));
        out.y_px = detail::median(std::move(ys));
        return out;
    }

    void reset() { recent_.clear(); }

private:
    std::size_t window_;
    std::deque<GazeSample> recent_;
};

/// Incremental dispersion-threshold fixation identification.
///
/// The tracker keeps the longest run of recent samples whose bounding box
/// stays within `dispersion_px` on both axes. Once that run spans
/// `min_fixation_ms` it is an open fixation; it grows until a sample breaks
/// the dispersion bound, at which point it closes and a new run starts at
/// the breaking sample. Off-screen samples close any open fixation.
class FixationTracker {
public:
    struct Update {
        std::optional<Fixation> closed;
        std::optional<Fixation> open;
    };

    explicit FixationTracker(StreamConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    Update push(const GazeSample& s) {
        if (last_t_ && !(s.t_ms > *last_t_)) throw NonMonotonicTimestamp(*last_t_, s.t_ms);
        last_t_ = s.t_ms;

        Update u;
        if (!s.on_screen) {
            u.closed = close();
            window_.clear();
            return u;
        }
        if (detail::within_dispersion(window_, &s, cfg_.dispersion_px)) {
            window_.push_back(s);
        } else if (is_open()) {
            u.closed = detail::summarize(window_);
            window_.clear();
            window_.push_back(s);
        } else {
            window_.push_back(s);
            while (!detail::within_dispersion(window_, nullptr, cfg_.dispersion_px)) {
                window_.pop_front();
            }
        }
        if (is_open()) u.open = detail::summarize(window_);
        return u;
    }

    /// Closes the open fixation at end of stream.
    std::optional<Fixation> flush() {
        auto f = close();
        window_.clear();
        return f;
    }

    void reset() {
        window_.clear();
        last_t_.reset();
    }

    [[nodiscard]] const StreamConfig& config() const { return cfg_; }

private:
    [[nodiscard]] bool is_open() const {
        return !window_.empty() &&
               window_.back().t_ms - window_.front().t_ms >= cfg_.min_fixation_ms;
    }

    std::optional<Fixation> close() {
        if (is_open()) return detail::summarize(window_);
        return std::nullopt;
    }

    StreamConfig cfg_;
    std::deque<GazeSample> window_;
    std::optional<double> last_t_;
};

inline std::vector<Fixation> detect_fixations(std::span<const GazeSample> samples,
                                              const StreamConfig& cfg) {
    require_time_ordered(samples);
    FixationTracker tracker(cfg);
    std::vector<Fixation> out;
    for (const GazeSample& s : samples) {
        if (auto u = tracker.push(s); u.closed) out.push_back(*u.closed);
    }
    if (auto f = tracker.flush()) out.push_back(*f);
    return out;
}

}  // namespace gazescroll::stream
