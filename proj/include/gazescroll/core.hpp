#pragma once

// Domain types shared by every gazescroll module: gaze samples, the phone
// screen layout, region classification and the paginated document with
// carry-over page turning.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gazescroll {

enum class SampleKind { Raw, Calibrated };

/// One timestamped gaze estimate in screen pixels (origin top-left, y down).
struct GazeSample {
    double t_ms = 0.0;
    double x_px = 0.0;
    double y_px = 0.0;
    bool on_screen = true;
    SampleKind kind = SampleKind::Raw;

    friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

class NonMonotonicTimestamp : public std::invalid_argument {
public:
    NonMonotonicTimestamp(double previous, double current)
        : std::invalid_argument("timestamp " + std::to_string(current) +
                                " ms does not follow " + std::to_string(previous) + " ms") {}
};

/// Throws NonMonotonicTimestamp unless timestamps strictly increase.
inline void require_time_ordered(std::span<const GazeSample> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].t_ms > samples[i - 1].t_ms)) {
            throw NonMonotonicTimestamp(samples[i - 1].t_ms, samples[i].t_ms);
        }
    }
}

/// Screen layout of the study phone in logical pixels. The bars at the top
/// and bottom host the instruction area and the gaze controls.
struct ScreenGeometry {
    double width_px = 428.0;
    double height_px = 926.0;
    double top_bar_px = 100.0;
    double bottom_bar_px = 150.0;
    // 458 ppi panel at 3x logical scale: 458 / 3 / 2.54
    double px_per_cm = 60.1;

    [[nodiscard]] double reading_height_px() const {
        return height_px - top_bar_px - bottom_bar_px;
    }
    [[nodiscard]] double reading_bottom_px() const { return height_px - bottom_bar_px; }

    [[nodiscard]] bool contains(double x, double y) const {
        return x >= 0.0 && x < width_px && y >= 0.0 && y < height_px;
    }

    void validate() const {
        if (!(width_px > 0.0) || !(height_px > 0.0)) {
            throw std::invalid_argument("screen geometry must have positive area");
        }
        if (top_bar_px < 0.0 || bottom_bar_px < 0.0 ||
            !(top_bar_px + bottom_bar_px < height_px)) {
            throw std::invalid_argument("top and bottom bars must leave a reading area");
        }
        if (!(px_per_cm > 0.0)) {
            throw std::invalid_argument("px_per_cm must be positive");
        }
    }

    friend bool operator==(const ScreenGeometry&, const ScreenGeometry&) = default;
};

enum class Region { Top, Reading, Bottom, OffScreen };

inline std::string_view to_string(Region r) {
    switch (r) {
    case Region::Top: return "top";
    case Region::Reading: return "reading";
    case Region::Bottom: return "bottom";
    case Region::OffScreen: return "offscreen";
    }
    return "offscreen";
}

inline Region classify_region(const ScreenGeometry& g, double x_px, double y_px, bool on_screen) {
    if (!on_screen || !g.contains(x_px, y_px)) return Region::OffScreen;
    if (y_px < g.top_bar_px) return Region::Top;
    if (y_px >= g.height_px - g.bottom_bar_px) return Region::Bottom;
    return Region::Reading;
}

inline Region classify_region(const ScreenGeometry& g, const GazeSample& s) {
    return classify_region(g, s.x_px, s.y_px, s.on_screen);
}

inline double cm_to_px(const ScreenGeometry& g, double d_cm) {
    if (d_cm < 0.0 || std::isnan(d_cm)) {
        throw std::invalid_argument("distance in cm must be non-negative");
    }
    return d_cm * g.px_per_cm;
}

inline double px_to_cm(const ScreenGeometry& g, double d_px) { return d_px / g.px_per_cm; }

enum class Technique { EyeSwipe, Hitbox, MovingBar, AutoScroll, Touch };

inline constexpr Technique kAllTechniques[] = {Technique::EyeSwipe, Technique::Hitbox,
                                               Technique::MovingBar, Technique::AutoScroll,
                                               Technique::Touch};

inline std::string_view to_string(Technique t) {
    switch (t) {
    case Technique::EyeSwipe: return "eyeswipe";
    case Technique::Hitbox: return "hitbox";
    case Technique::MovingBar: return "movingbar";
    case Technique::AutoScroll: return "autoscroll";
    case Technique::Touch: return "touch";
    }
    return "touch";
}

inline std::optional<Technique> parse_technique(std::string_view name) {
    for (Technique t : kAllTechniques) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

/// The last line of the previous page, repeated at the top of the next one
/// with an arrow marker.
struct CarriedLine {
    std::size_t source_page = 0;
    std::size_t source_line = 0;  // document-wide line number
    double y_px = 0.0;
    bool arrow_marker = true;

    friend bool operator==(const CarriedLine&, const CarriedLine&) = default;
};

struct Page {
    std::size_t index = 0;
    // Baselines in screen pixels, ascending, inside the reading area. When a
    // carried line exists it occupies the first slot.
    std::vector<double> line_y_positions;
    std::optional<CarriedLine> carried_line;
    std::size_t first_line = 0;  // document-wide number of the first rendered line

    [[nodiscard]] std::size_t line_count() const { return line_y_positions.size(); }
    [[nodiscard]] std::size_t new_line_count() const {
        return line_count() - (carried_line ? 1 : 0);
    }

    friend bool operator==(const Page&, const Page&) = default;
};

class EndOfDocument : public std::out_of_range {
public:
    explicit EndOfDocument(std::size_t page)
        : std::out_of_range("page " + std::to_string(page) + " is the last page") {}
};

struct DocumentModel {
    std::vector<Page> pages;
    std::size_t lines_per_page = 15;
    double line_height_px = 43.0;

    static constexpr std::size_t kDefaultLinesPerPage = 15;
    static constexpr double kDefaultLineHeightPx = 43.0;

    /// Lays out `total_lines` lines. Slots are bottom-aligned so the last
    /// line's baseline sits on the reading-area edge; every page after the
    /// first spends its first slot on the carried line.
    static DocumentModel layout(std::size_t total_lines, const ScreenGeometry& g,
                                std::size_t lines_per_page = kDefaultLinesPerPage,
                                double line_height_px = kDefaultLineHeightPx) {
        g.validate();
        if (total_lines == 0) throw std::invalid_argument("document needs at least one line");
        if (lines_per_page < 2) throw std::invalid_argument("lines_per_page must be at least 2");
        if (!(line_height_px > 0.0) ||
            static_cast<double>(lines_per_page - 1) * line_height_px > g.reading_height_px()) {
            throw std::invalid_argument("page layout does not fit the reading area");
        }

        DocumentModel doc;
        doc.lines_per_page = lines_per_page;
        doc.line_height_px = line_height_px;

        auto slot_y = [&](std::size_t slot) {
            return g.reading_bottom_px() -
                   static_cast<double>(lines_per_page - 1 - slot) * line_height_px;
        };

        std::size_t next_line = 0;
        while (next_line < total_lines) {
            Page page;
            page.index = doc.pages.size();
            std::size_t slot = 0;
            if (!doc.pages.empty()) {
                const Page& prev = doc.pages.back();
                std::size_t last = prev.first_line + prev.line_count() - 1;
                page.carried_line = CarriedLine{prev.index, last, slot_y(0), true};
                page.first_line = last;
                page.line_y_positions.push_back(slot_y(0));
                slot = 1;
            } else {
                page.first_line = 0;
            }
            for (; slot < lines_per_page && next_line < total_lines; ++slot, ++next_line) {
                page.line_y_positions.push_back(slot_y(slot));
            }
            doc.pages.push_back(std::move(page));
        }
        return doc;
    }

    /// Document whose `page_count` pages are all full.
    static DocumentModel with_pages(std::size_t page_count, const ScreenGeometry& g,
                                    std::size_t lines_per_page = kDefaultLinesPerPage,
                                    double line_height_px = kDefaultLineHeightPx) {
        if (page_count == 0) throw std::invalid_argument("document needs at least one page");
        std::size_t total = lines_per_page + (page_count - 1) * (lines_per_page - 1);
        return layout(total, g, lines_per_page, line_height_px);
    }

    [[nodiscard]] std::size_t total_lines() const {
        if (pages.empty()) return 0;
        const Page& last = pages.back();
        return last.first_line + last.line_count();
    }
};

/// Advances to the next page; the returned page repeats the last line of
/// `current` at its top.
inline Page turn_page(const DocumentModel& doc, const Page& current) {
    if (current.index + 1 >= doc.pages.size()) throw EndOfDocument(current.index);
    const Page& next = doc.pages[current.index + 1];
    if (!next.carried_line ||
        next.carried_line->source_line != current.first_line + current.line_count() - 1) {
        throw std::logic_error("document layout lost its carried line");
    }
    return next;
}

/// Gaze target on a line: the middle of the text band above its baseline.
inline double line_gaze_y(const DocumentModel& doc, double baseline_y) {
    return baseline_y - doc.line_height_px / 2.0;
}

struct ScrollEvent {
    double t_ms = 0.0;
    std::size_t from_page = 0;
    std::size_t to_page = 0;
    Technique cause = Technique::Touch;

    friend bool operator==(const ScrollEvent&, const ScrollEvent&) = default;
};

}  // namespace gazescroll
