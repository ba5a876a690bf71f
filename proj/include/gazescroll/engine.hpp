#pragma once

// ScrollEngine runs one technique over a live sample stream and owns the
// page the reader is on. The service, the simulator and session replay all
// drive the same engine, which is what makes their event logs comparable.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazescroll/core.hpp"
#include "gazescroll/stream.hpp"
#include "gazescroll/techniques.hpp"

namespace gazescroll {

using techniques::DetectorEvent;
using techniques::TechniqueConfig;

/// Interface state mirrored to clients.
struct UiState {
    double bar_x_px = 0.0;
    double hitbox_progress = 0.0;
    bool primed = false;
    std::size_t page = 0;

    friend bool operator==(const UiState&, const UiState&) = default;
};

struct EngineOutput {
    std::vector<DetectorEvent> events;
    std::vector<ScrollEvent> scrolls;
    std::vector<Page> pages;  // pages entered during this step
    bool end_of_document = false;
    UiState ui;
    bool ui_changed = false;
};

/// Sampling-window bookkeeping for auto-scroll on the current page.
class AutoScrollTracker {
public:
    void reset(double page_start_ms) {
        page_start_ms_ = page_start_ms;
        next_window_ = 0;
        collected_.clear();
        eta_ms_.reset();
    }

    std::vector<DetectorEvent> step(const GazeSample& s, const ScreenGeometry& g, const Page& page,
                                    const TechniqueConfig& c, const stream::StreamConfig& scfg) {
        std::vector<DetectorEvent> events;
        const auto& windows = c.auto_sample_windows;
        while (next_window_ < windows.size() &&
               s.t_ms >= page_start_ms_ + windows[next_window_].offset_ms +
                             windows[next_window_].length_ms) {
            auto estimate = techniques::autoscroll_update(collected_, g, scfg);
            if (auto ev = techniques::autoscroll_schedule(estimate, page, page_start_ms_, s.t_ms, c)) {
                eta_ms_ = std::get<techniques::Scheduled>(ev->payload).eta_ms;
                events.push_back(*ev);
            }
            ++next_window_;
        }
        if (next_window_ < windows.size()) {
            const double begin = page_start_ms_ + windows[next_window_].offset_ms;
            if (s.t_ms >= begin) collected_.push_back(s);
        }
        if (eta_ms_ && s.t_ms >= *eta_ms_) {
            events.push_back({s.t_ms, Technique::AutoScroll, techniques::Trigger{}});
            eta_ms_.reset();
        }
        return events;
    }

    [[nodiscard]] std::optional<double> eta_ms() const { return eta_ms_; }

private:
    double page_start_ms_ = 0.0;
    std::size_t next_window_ = 0;
    std::vector<GazeSample> collected_;
    std::optional<double> eta_ms_;
};

inline std::string_view initial_state_name(Technique t) {
    switch (t) {
    case Technique::EyeSwipe: return "reading";
    case Technique::AutoScroll: return "sampling";
    default: return "idle";
    }
}

class ScrollEngine {
public:
    struct Settings {
        ScreenGeometry geometry;
        TechniqueConfig config;
        stream::StreamConfig stream;
        DocumentModel document;
        Technique technique = Technique::Touch;
    };

    explicit ScrollEngine(Settings settings)
        : s_(std::move(settings)),
          fixations_(s_.stream),
          smoother_(s_.stream.smoothing_window) {
        s_.geometry.validate();
        s_.stream.validate();
        if (auto errors = techniques::validate_config(s_.config); !errors.empty()) {
            throw std::invalid_argument("invalid technique config: " + errors.front());
        }
        if (s_.document.pages.empty()) throw std::invalid_argument("document has no pages");
        layout_ = techniques::ControlLayout::for_screen(s_.geometry, s_.config);
        page_ = s_.document.pages.front();
        ui_.bar_x_px = layout_.bar_start_x_px;
    }

    EngineOutput push(const GazeSample& sample) {
        if (last_t_ && !(sample.t_ms > *last_t_)) throw NonMonotonicTimestamp(*last_t_, sample.t_ms);
        last_t_ = sample.t_ms;
        if (!page_start_ms_) reset_detectors(sample.t_ms);

        EngineOutput out;
        const Region region = classify_region(s_.geometry, sample);
        double bar_x = layout_.bar_start_x_px;

        switch (s_.technique) {
        case Technique::EyeSwipe: {
            auto r = techniques::eyeswipe_step(eyeswipe_, sample, s_.geometry, s_.config);
            eyeswipe_ = r.state;
            out.events = std::move(r.events);
            break;
        }
        case Technique::Hitbox: {
            GazeSample gated = sample;
            if (region != Region::Bottom) gated.on_screen = false;
            auto update = fixations_.push(smoother_.push(gated));
            auto r = techniques::hitbox_step(hitbox_, {sample.t_ms, update.open}, layout_.hitbox,
                                             s_.config);
            hitbox_ = r.state;
            out.events = std::move(r.events);
            break;
        }
        case Technique::MovingBar: {
            auto r = techniques::movingbar_step(bar_, sample, s_.geometry, layout_, s_.config);
            bar_ = r.state;
            bar_x = r.bar_x_px;
            out.events = std::move(r.events);
            break;
        }
        case Technique::AutoScroll:
            out.events = autoscroll_.step(sample, s_.geometry, page_, s_.config, s_.stream);
            break;
        case Technique::Touch:
            break;
        }

        bool triggered = false;
        for (const DetectorEvent& e : out.events) triggered |= e.is<techniques::Trigger>();
        if (triggered) advance(sample.t_ms, s_.technique, out);

        UiState ui;
        ui.page = page_.index;
        ui.bar_x_px = triggered ? layout_.bar_start_x_px : bar_x;
        ui.primed = s_.technique == Technique::EyeSwipe &&
                    eyeswipe_.phase == techniques::EyeSwipeState::Phase::Primed;
        ui.hitbox_progress = s_.technique == Technique::Hitbox ? hitbox_.progress : 0.0;
        set_ui(ui, out);
        return out;
    }

    /// Manual page turn, e.g. the touch fallback button.
    EngineOutput touch(double t_ms) {
        if (last_t_ && t_ms < *last_t_) throw NonMonotonicTimestamp(*last_t_, t_ms);
        last_t_ = t_ms;
        EngineOutput out;
        advance(t_ms, Technique::Touch, out);
        UiState ui = ui_;
        ui.page = page_.index;
        ui.primed = false;
        ui.hitbox_progress = 0.0;
        ui.bar_x_px = layout_.bar_start_x_px;
        set_ui(ui, out);
        return out;
    }

    /// Switches technique and config; detector state restarts from scratch.
    EngineOutput reconfigure(Technique technique, const TechniqueConfig& config, double t_ms) {
        if (auto errors = techniques::validate_config(config); !errors.empty()) {
            throw std::invalid_argument("invalid technique config: " + errors.front());
        }
        s_.technique = technique;
        s_.config = config;
        layout_ = techniques::ControlLayout::for_screen(s_.geometry, s_.config);
        reset_detectors(t_ms);
        EngineOutput out;
        out.events.push_back({t_ms, technique,
                              techniques::StateChange{"reset", std::string(initial_state_name(technique))}});
        UiState ui;
        ui.page = page_.index;
        ui.bar_x_px = layout_.bar_start_x_px;
        set_ui(ui, out);
        return out;
    }

    [[nodiscard]] const Page& current_page() const { return page_; }
    [[nodiscard]] const UiState& ui() const { return ui_; }
    [[nodiscard]] const Settings& settings() const { return s_; }
    [[nodiscard]] const techniques::ControlLayout& layout() const { return layout_; }
    [[nodiscard]] bool finished() const { return finished_; }

private:
    void advance(double t_ms, Technique cause, EngineOutput& out) {
        if (page_.index + 1 < s_.document.pages.size()) {
            Page next = turn_page(s_.document, page_);
            out.scrolls.push_back({t_ms, page_.index, next.index, cause});
            page_ = std::move(next);
            out.pages.push_back(page_);
        } else {
            out.end_of_document = true;
            finished_ = true;
        }
        reset_detectors(t_ms);
    }

    void reset_detectors(double page_start_ms) {
        page_start_ms_ = page_start_ms;
        eyeswipe_ = {};
        hitbox_ = {};
        bar_ = {};
        fixations_.reset();
        smoother_.reset();
        autoscroll_.reset(page_start_ms);
    }

    void set_ui(const UiState& ui, EngineOutput& out) {
        out.ui = ui;
        out.ui_changed = !(ui == ui_);
        ui_ = ui;
    }

    Settings s_;
    techniques::ControlLayout layout_;
    Page page_;
    UiState ui_;
    std::optional<double> last_t_;
    std::optional<double> page_start_ms_;
    bool finished_ = false;

    techniques::EyeSwipeState eyeswipe_;
    techniques::HitboxState hitbox_;
    techniques::MovingBarState bar_;
    stream::FixationTracker fixations_;
    stream::CausalSmoother smoother_;
    AutoScrollTracker autoscroll_;
};

}  // namespace gazescroll
