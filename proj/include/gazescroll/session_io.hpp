#pragma once

// Session files: a JSON header line followed by one tab-separated record
// per line. The same recorder wraps the engine for simulation, the live
// service and replay, so event logs from all three compare line for line.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "gazescroll/calibration.hpp"
#include "gazescroll/core.hpp"
#include "gazescroll/engine.hpp"
#include "gazescroll/simulate.hpp"
#include "gazescroll/techniques.hpp"

namespace gazescroll::io {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kMagic = "GAZESCROLL";
inline constexpr int kFormatVersion = 1;

class SessionFormatError : public std::runtime_error {
public:
    SessionFormatError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class UnsupportedVersion : public std::runtime_error {
public:
    explicit UnsupportedVersion(int found)
        : std::runtime_error("session format version " + std::to_string(found) + " is newer than supported version " +
                             std::to_string(kFormatVersion)) {}
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what) {}
};

// ---------------------------------------------------------------------------
// Records

struct PageRecord {
    double t_ms = 0.0;
    std::size_t index = 0;
    bool carried = false;
    friend bool operator==(const PageRecord&, const PageRecord&) = default;
};

struct AnnotationRecord {
    double t_ms = 0.0;
    sim::Annotation annotation;
    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct TouchRecord {
    double t_ms = 0.0;
    friend bool operator==(const TouchRecord&, const TouchRecord&) = default;
};

struct ConfigRecord {
    double t_ms = 0.0;
    Technique technique = Technique::Touch;
    techniques::TechniqueConfig config;
    friend bool operator==(const ConfigRecord&, const ConfigRecord&) = default;
};

using Record = std::variant<GazeSample, techniques::DetectorEvent, ScrollEvent, PageRecord, AnnotationRecord,
                            TouchRecord, ConfigRecord>;

inline double record_time(const Record& r) {
    return std::visit([](const auto& x) { return x.t_ms; }, r);
}

/// Records produced by the engine rather than fed to it.
inline bool is_output(const Record& r) {
    return std::holds_alternative<techniques::DetectorEvent>(r) || std::holds_alternative<ScrollEvent>(r) ||
           std::holds_alternative<PageRecord>(r);
}

struct DocumentSpec {
    std::size_t total_lines = 0;
    std::size_t lines_per_page = DocumentModel::kDefaultLinesPerPage;
    double line_height_px = DocumentModel::kDefaultLineHeightPx;
    friend bool operator==(const DocumentSpec&, const DocumentSpec&) = default;

    static DocumentSpec of(const DocumentModel& d) { return {d.total_lines(), d.lines_per_page, d.line_height_px}; }
    [[nodiscard]] DocumentModel build(const ScreenGeometry& g) const {
        return DocumentModel::layout(total_lines, g, lines_per_page, line_height_px);
    }
};

struct SessionHeader {
    int version = kFormatVersion;
    std::string source = "simulate";
    ScreenGeometry geometry;
    Technique technique = Technique::Touch;
    techniques::TechniqueConfig config;
    stream::StreamConfig stream;
    DocumentSpec document{DocumentModel::with_pages(6, ScreenGeometry{}).total_lines()};
    std::string mobility;
    std::string noise = "none";
    std::string latency = "none";
    std::optional<std::uint64_t> seed;
    calibration::CalibratorKind calibrator = calibration::CalibratorKind::Identity;
    std::vector<double> calibrator_coefficients;

    friend bool operator==(const SessionHeader&, const SessionHeader&) = default;

    [[nodiscard]] ScrollEngine::Settings engine_settings() const {
        return {geometry, config, stream, document.build(geometry), technique};
    }
};

struct SessionRecording {
    SessionHeader header;
    std::vector<Record> records;
    friend bool operator==(const SessionRecording&, const SessionRecording&) = default;

    [[nodiscard]] std::vector<GazeSample> samples() const {
        std::vector<GazeSample> out;
        for (const Record& r : records)
            if (auto* s = std::get_if<GazeSample>(&r)) out.push_back(*s);
        return out;
    }
    [[nodiscard]] std::vector<techniques::DetectorEvent> events() const {
        std::vector<techniques::DetectorEvent> out;
        for (const Record& r : records)
            if (auto* e = std::get_if<techniques::DetectorEvent>(&r)) out.push_back(*e);
        return out;
    }
    [[nodiscard]] std::vector<ScrollEvent> scrolls() const {
        std::vector<ScrollEvent> out;
        for (const Record& r : records)
            if (auto* e = std::get_if<ScrollEvent>(&r)) out.push_back(*e);
        return out;
    }
    [[nodiscard]] std::vector<sim::Annotation> annotations() const {
        std::vector<sim::Annotation> out;
        for (const Record& r : records)
            if (auto* a = std::get_if<AnnotationRecord>(&r)) out.push_back(a->annotation);
        return out;
    }
    [[nodiscard]] std::optional<double> start_ms() const {
        if (records.empty()) return std::nullopt;
        return record_time(records.front());
    }
    [[nodiscard]] std::optional<double> end_ms() const {
        if (records.empty()) return std::nullopt;
        return record_time(records.back());
    }
};

// ---------------------------------------------------------------------------
// Text encoding

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("cannot format number");
    return {buf, end};
}

inline double parse_double(std::string_view s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw SessionFormatError(line, "expected a number, got '" + std::string(s) + "'");
    }
    return v;
}

inline std::size_t parse_index(std::string_view s, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw SessionFormatError(line, "expected an index, got '" + std::string(s) + "'");
    }
    return v;
}

inline Technique parse_tech(std::string_view s, std::size_t line) {
    auto t = parse_technique(s);
    if (!t) throw SessionFormatError(line, "unknown technique '" + std::string(s) + "'");
    return *t;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto tab = line.find('\t', pos);
        out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
        if (tab == std::string_view::npos) break;
        pos = tab + 1;
    }
    return out;
}

inline void check_text(const std::string& s) {
    if (s.find_first_of("\t\n\r") != std::string::npos) {
        throw std::invalid_argument("record text may not contain tabs or newlines: '" + s + "'");
    }
}

}  // namespace detail

inline json config_to_json(const techniques::TechniqueConfig& c) {
    json j = json::object();
    for (const auto& [name, field] : techniques::detail::numeric_fields()) j[name] = c.*field;
    json windows = json::array();
    for (const auto& w : c.auto_sample_windows) windows.push_back({w.offset_ms, w.length_ms});
    j["auto_sample_windows"] = windows;
    return j;
}

/// Applies the fields present in `j`; absent fields keep their values.
inline techniques::TechniqueConfig config_from_json(const json& j, techniques::TechniqueConfig base = {}) {
    if (!j.is_object()) throw std::invalid_argument("technique config must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "auto_sample_windows") {
            if (value.is_string()) {
                base.auto_sample_windows = techniques::parse_windows(value.get<std::string>());
                continue;
            }
            base.auto_sample_windows.clear();
            for (const auto& w : value) {
                if (!w.is_array() || w.size() != 2) throw std::invalid_argument("window must be [offset, length]");
                base.auto_sample_windows.push_back({w[0].get<double>(), w[1].get<double>()});
            }
            continue;
        }
        auto it = techniques::detail::numeric_fields().find(key);
        if (it == techniques::detail::numeric_fields().end()) {
            throw std::invalid_argument("unknown config field '" + key + "'");
        }
        if (!value.is_number()) throw std::invalid_argument("config field '" + key + "' must be a number");
        base.*(it->second) = value.get<double>();
    }
    return base;
}

inline json header_to_json(const SessionHeader& h) {
    json j;
    j["source"] = h.source;
    j["geometry"] = {{"width_px", h.geometry.width_px},
                     {"height_px", h.geometry.height_px},
                     {"top_bar_px", h.geometry.top_bar_px},
                     {"bottom_bar_px", h.geometry.bottom_bar_px},
                     {"px_per_cm", h.geometry.px_per_cm}};
    j["technique"] = std::string(to_string(h.technique));
    j["config"] = config_to_json(h.config);
    j["stream"] = {{"sample_rate_hz", h.stream.sample_rate_hz},
                   {"dispersion_px", h.stream.dispersion_px},
                   {"min_fixation_ms", h.stream.min_fixation_ms},
                   {"smoothing_window", h.stream.smoothing_window}};
    j["document"] = {{"total_lines", h.document.total_lines},
                     {"lines_per_page", h.document.lines_per_page},
                     {"line_height_px", h.document.line_height_px}};
    j["mobility"] = h.mobility;
    j["noise"] = h.noise;
    j["latency"] = h.latency;
    j["seed"] = h.seed ? json(*h.seed) : json(nullptr);
    j["calibrator"] = {{"kind", std::string(calibration::to_string(h.calibrator))},
                       {"coefficients", h.calibrator_coefficients}};
    return j;
}

inline calibration::CalibratorKind parse_calibrator_kind(std::string_view s) {
    for (auto k : {calibration::CalibratorKind::Identity, calibration::CalibratorKind::PolynomialRidge,
                   calibration::CalibratorKind::Kernel}) {
        if (calibration::to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown calibrator kind '" + std::string(s) + "'");
}

inline SessionHeader header_from_json(const json& j) {
    SessionHeader h;
    h.source = j.value("source", h.source);
    const json& g = j.at("geometry");
    h.geometry = {g.at("width_px").get<double>(), g.at("height_px").get<double>(), g.at("top_bar_px").get<double>(),
                  g.at("bottom_bar_px").get<double>(), g.at("px_per_cm").get<double>()};
    h.geometry.validate();
    auto tech = parse_technique(j.at("technique").get<std::string>());
    if (!tech) throw std::invalid_argument("unknown technique in header");
    h.technique = *tech;
    h.config = config_from_json(j.at("config"));
    const json& s = j.at("stream");
    h.stream = {s.at("sample_rate_hz").get<double>(), s.at("dispersion_px").get<double>(),
                s.at("min_fixation_ms").get<double>(), s.at("smoothing_window").get<int>()};
    const json& d = j.at("document");
    h.document = {d.at("total_lines").get<std::size_t>(), d.at("lines_per_page").get<std::size_t>(),
                  d.at("line_height_px").get<double>()};
    h.mobility = j.value("mobility", std::string{});
    h.noise = j.value("noise", std::string{"none"});
    h.latency = j.value("latency", std::string{"none"});
    if (j.contains("seed") && !j.at("seed").is_null()) h.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("calibrator")) {
        h.calibrator = parse_calibrator_kind(j.at("calibrator").at("kind").get<std::string>());
        h.calibrator_coefficients = j.at("calibrator").at("coefficients").get<std::vector<double>>();
    }
    return h;
}

inline std::string format_event(const techniques::DetectorEvent& e) {
    using namespace techniques;
    std::string out = "E\t" + detail::fmt(e.t_ms) + '\t' + std::string(to_string(e.technique)) + '\t';
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, StateChange>) {
                detail::check_text(p.from);
                detail::check_text(p.to);
                out += "state\t" + p.from + '\t' + p.to;
            } else if constexpr (std::is_same_v<P, Progress>) {
                out += "progress\t" + detail::fmt(p.fraction);
            } else if constexpr (std::is_same_v<P, Trigger>) {
                out += "trigger";
            } else if constexpr (std::is_same_v<P, Abort>) {
                detail::check_text(p.reason);
                out += "abort\t" + p.reason;
            } else {
                out += "scheduled\t" + detail::fmt(p.eta_ms);
            }
        },
        e.payload);
    return out;
}

/// One record as a line of text, without the newline.
inline std::string format_record(const Record& r) {
    using detail::fmt;
    return std::visit(
        [](const auto& x) -> std::string {
            using X = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<X, GazeSample>) {
                return "S\t" + fmt(x.t_ms) + '\t' + fmt(x.x_px) + '\t' + fmt(x.y_px) + '\t' +
                       (x.on_screen ? "1" : "0") + '\t' + (x.kind == SampleKind::Raw ? "raw" : "calibrated");
            } else if constexpr (std::is_same_v<X, techniques::DetectorEvent>) {
                return format_event(x);
            } else if constexpr (std::is_same_v<X, ScrollEvent>) {
                return "C\t" + fmt(x.t_ms) + '\t' + std::to_string(x.from_page) + '\t' + std::to_string(x.to_page) +
                       '\t' + std::string(to_string(x.cause));
            } else if constexpr (std::is_same_v<X, PageRecord>) {
                return "P\t" + fmt(x.t_ms) + '\t' + std::to_string(x.index) + '\t' + (x.carried ? "1" : "0");
            } else if constexpr (std::is_same_v<X, AnnotationRecord>) {
                const auto& a = x.annotation;
                return "A\t" + fmt(x.t_ms) + '\t' + fmt(a.start_ms) + '\t' + fmt(a.completion_ms) + '\t' +
                       fmt(a.end_ms) + '\t' + std::string(to_string(a.technique));
            } else if constexpr (std::is_same_v<X, TouchRecord>) {
                return "T\t" + fmt(x.t_ms);
            } else {
                return "K\t" + fmt(x.t_ms) + '\t' + std::string(to_string(x.technique)) + '\t' +
                       config_to_json(x.config).dump();
            }
        },
        r);
}

/// Parses a record line. Returns nullopt for an unknown record kind.
inline std::optional<Record> parse_record(std::string_view text, std::size_t line) {
    using namespace techniques;
    const auto f = detail::split_tabs(text);
    auto need = [&](std::size_t n) {
        if (f.size() != n) {
            throw SessionFormatError(line, "record '" + std::string(f[0]) + "' needs " + std::to_string(n) +
                                               " fields, got " + std::to_string(f.size()));
        }
    };
    auto num = [&](std::size_t i) { return detail::parse_double(f[i], line); };
    const std::string_view kind = f[0];
    if (kind == "S") {
        need(6);
        if (f[4] != "0" && f[4] != "1") throw SessionFormatError(line, "on_screen flag must be 0 or 1");
        if (f[5] != "raw" && f[5] != "calibrated") throw SessionFormatError(line, "sample kind must be raw or calibrated");
        return GazeSample{num(1), num(2), num(3), f[4] == "1", f[5] == "raw" ? SampleKind::Raw : SampleKind::Calibrated};
    }
    if (kind == "E") {
        if (f.size() < 4) throw SessionFormatError(line, "event record is too short");
        DetectorEvent e{num(1), detail::parse_tech(f[2], line), Trigger{}};
        const std::string_view type = f[3];
        if (type == "state") {
            need(6);
            e.payload = StateChange{std::string(f[4]), std::string(f[5])};
        } else if (type == "progress") {
            need(5);
            e.payload = Progress{num(4)};
        } else if (type == "trigger") {
            need(4);
        } else if (type == "abort") {
            need(5);
            e.payload = Abort{std::string(f[4])};
        } else if (type == "scheduled") {
            need(5);
            e.payload = Scheduled{num(4)};
        } else {
            throw SessionFormatError(line, "unknown event type '" + std::string(type) + "'");
        }
        return e;
    }
    if (kind == "C") {
        need(5);
        return ScrollEvent{num(1), detail::parse_index(f[2], line), detail::parse_index(f[3], line),
                           detail::parse_tech(f[4], line)};
    }
    if (kind == "P") {
        need(4);
        return PageRecord{num(1), detail::parse_index(f[2], line), f[3] == "1"};
    }
    if (kind == "A") {
        need(6);
        return AnnotationRecord{num(1), {num(2), num(3), num(4), detail::parse_tech(f[5], line)}};
    }
    if (kind == "T") {
        need(2);
        return TouchRecord{num(1)};
    }
    if (kind == "K") {
        need(4);
        try {
            return ConfigRecord{num(1), detail::parse_tech(f[2], line), config_from_json(json::parse(f[3]))};
        } catch (const json::exception& e) {
            throw SessionFormatError(line, std::string("bad config: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw SessionFormatError(line, e.what());
        }
    }
    return std::nullopt;
}

/// Throws unless records are in non-decreasing time order and samples
/// strictly increase.
inline void validate_order(const SessionRecording& rec) {
    std::optional<double> last, last_sample;
    for (std::size_t i = 0; i < rec.records.size(); ++i) {
        const double t = record_time(rec.records[i]);
        if (last && t < *last) {
            throw std::invalid_argument("record " + std::to_string(i) + " at " + detail::fmt(t) +
                                        " ms precedes the previous record at " + detail::fmt(*last) + " ms");
        }
        last = t;
        if (std::holds_alternative<GazeSample>(rec.records[i])) {
            if (last_sample && !(t > *last_sample)) throw NonMonotonicTimestamp(*last_sample, t);
            last_sample = t;
        }
    }
}

inline void write(const SessionRecording& rec, std::ostream& os) {
    validate_order(rec);
    if (rec.header.version != kFormatVersion) throw UnsupportedVersion(rec.header.version);
    os << kMagic << ' ' << kFormatVersion << ' ' << header_to_json(rec.header).dump() << '\n';
    for (const Record& r : rec.records) os << format_record(r) << '\n';
}

inline std::string to_string(const SessionRecording& rec) {
    std::ostringstream os;
    write(rec, os);
    return os.str();
}

inline void write_file(const SessionRecording& rec, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path, "cannot open for writing");
    write(rec, os);
    os.flush();
    if (!os) throw IoError(path, "write failed");
}

struct ReadResult {
    SessionRecording recording;
    std::size_t skipped_records = 0;  // unknown record kinds
};

inline ReadResult read(std::istream& is) {
    ReadResult out;
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (content.empty()) throw SessionFormatError(1, "empty session file");

    std::size_t pos = 0, line_no = 0;
    bool header_seen = false;
    while (pos < content.size()) {
        ++line_no;
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) throw SessionFormatError(line_no, "truncated record (missing newline)");
        std::string_view line(content.data() + pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (!header_seen) {
            header_seen = true;
            if (line.substr(0, kMagic.size()) != kMagic || line.size() <= kMagic.size() + 1 ||
                line[kMagic.size()] != ' ') {
                throw SessionFormatError(line_no, "not a session file (missing GAZESCROLL header)");
            }
            std::string_view rest = line.substr(kMagic.size() + 1);
            const auto space = rest.find(' ');
            int version = 0;
            auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + std::min(space, rest.size()), version);
            if (ec != std::errc{}) throw SessionFormatError(line_no, "bad format version");
            if (version > kFormatVersion) throw UnsupportedVersion(version);
            if (version < 1) throw SessionFormatError(line_no, "bad format version");
            if (space == std::string_view::npos) throw SessionFormatError(line_no, "header has no metadata");
            try {
                out.recording.header = header_from_json(json::parse(rest.substr(space + 1)));
            } catch (const json::exception& e) {
                throw SessionFormatError(line_no, std::string("bad header: ") + e.what());
            } catch (const std::invalid_argument& e) {
                throw SessionFormatError(line_no, std::string("bad header: ") + e.what());
            }
            out.recording.header.version = version;
            continue;
        }
        if (line.empty()) continue;
        auto rec = parse_record(line, line_no);
        if (!rec) {
            ++out.skipped_records;
            continue;
        }
        out.recording.records.push_back(std::move(*rec));
    }
    try {
        validate_order(out.recording);
    } catch (const std::invalid_argument& e) {
        throw SessionFormatError(line_no, std::string("records out of order: ") + e.what());
    }
    return out;
}

inline ReadResult read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path, "cannot open for reading");
    try {
        return read(is);
    } catch (const SessionFormatError& e) {
        throw SessionFormatError(e.line(), path + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
    }
}

/// Samples grouped by the page on screen when they arrived, in visit order.
struct PageSamples {
    std::size_t page = 0;
    std::vector<GazeSample> samples;
};

inline std::vector<PageSamples> samples_by_page(const SessionRecording& rec) {
    std::vector<PageSamples> out;
    for (const Record& r : rec.records) {
        if (auto* p = std::get_if<PageRecord>(&r)) {
            out.push_back({p->index, {}});
        } else if (auto* s = std::get_if<GazeSample>(&r)) {
            if (out.empty()) out.push_back({0, {}});
            out.back().samples.push_back(*s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Recording and replay

/// Engine wrapper that appends every input and output to a recording.
class RecordingEngine {
public:
    explicit RecordingEngine(SessionHeader header) : engine_(header.engine_settings()) {
        rec_.header = std::move(header);
    }

    EngineOutput push(const GazeSample& s) {
        auto out = engine_.push(s);
        rec_.records.push_back(s);
        if (!started_) {
            started_ = true;
            rec_.records.push_back(PageRecord{s.t_ms, engine_.current_page().index - out.pages.size(), false});
        }
        append(out);
        return out;
    }

    EngineOutput touch(double t_ms) {
        auto out = engine_.touch(t_ms);
        rec_.records.push_back(TouchRecord{t_ms});
        append(out);
        return out;
    }

    EngineOutput reconfigure(Technique t, const techniques::TechniqueConfig& c, double t_ms) {
        auto out = engine_.reconfigure(t, c, t_ms);
        rec_.records.push_back(ConfigRecord{t_ms, t, c});
        append(out);
        return out;
    }

    /// Annotations are stamped no earlier than the latest record so the file
    /// stays in time order when delivery lags behind the pattern onset.
    void annotate(const sim::Annotation& a) {
        double t = a.start_ms;
        if (!rec_.records.empty()) t = std::max(t, record_time(rec_.records.back()));
        rec_.records.push_back(AnnotationRecord{t, a});
    }

    [[nodiscard]] const ScrollEngine& engine() const { return engine_; }
    [[nodiscard]] const SessionRecording& recording() const { return rec_; }
    SessionRecording take() { return std::move(rec_); }

private:
    void append(const EngineOutput& out) {
        for (const auto& e : out.events) rec_.records.push_back(e);
        for (std::size_t i = 0; i < out.scrolls.size(); ++i) {
            rec_.records.push_back(out.scrolls[i]);
            rec_.records.push_back(PageRecord{out.scrolls[i].t_ms, out.pages[i].index, out.pages[i].carried_line.has_value()});
        }
    }

    ScrollEngine engine_;
    SessionRecording rec_;
    bool started_ = false;
};

/// Records that are not engine output (samples, touches, reconfigurations,
/// annotations) in file order.
inline std::vector<Record> inputs(const SessionRecording& rec) {
    std::vector<Record> out;
    for (const Record& r : rec.records)
        if (!is_output(r)) out.push_back(r);
    return out;
}

/// Streams the recording's inputs to `sink`, sleeping between them to keep
/// the recorded gaps scaled by 1/speed_factor. A speed of 0 never sleeps.
inline void replay(const SessionRecording& rec, double speed_factor, const std::function<void(const Record&)>& sink) {
    if (speed_factor < 0.0 || std::isnan(speed_factor)) {
        throw std::invalid_argument("speed_factor must be >= 0");
    }
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    std::optional<double> first;
    for (const Record& r : inputs(rec)) {
        const double t = record_time(r);
        if (!first) first = t;
        if (speed_factor > 0.0) {
            const auto due = wall_start + std::chrono::duration_cast<clock::duration>(
                                              std::chrono::duration<double, std::milli>((t - *first) / speed_factor));
            std::this_thread::sleep_until(due);
        }
        sink(r);
    }
}

/// Text lines of the engine output (events, scrolls, pages).
using EventLog = std::vector<std::string>;

inline EventLog event_log(const SessionRecording& rec) {
    EventLog log;
    for (const Record& r : rec.records)
        if (is_output(r)) log.push_back(format_record(r));
    return log;
}

/// Feeds the recording's inputs through a fresh engine built from `header`
/// (by default the recording's own) and returns the regenerated session.
inline SessionRecording rerun(const SessionRecording& rec, std::optional<SessionHeader> header = std::nullopt,
                              double speed_factor = 0.0) {
    RecordingEngine engine(header.value_or(rec.header));
    replay(rec, speed_factor, [&](const Record& r) {
        if (auto* s = std::get_if<GazeSample>(&r)) {
            engine.push(*s);
        } else if (auto* t = std::get_if<TouchRecord>(&r)) {
            engine.touch(t->t_ms);
        } else if (auto* k = std::get_if<ConfigRecord>(&r)) {
            engine.reconfigure(k->technique, k->config, k->t_ms);
        } else if (auto* a = std::get_if<AnnotationRecord>(&r)) {
            engine.annotate(a->annotation);
        }
    });
    return engine.take();
}

struct LogDifference {
    std::size_t index = 0;  // first differing line
    std::optional<std::string> left;
    std::optional<std::string> right;
};

/// Line-by-line comparison; empty when the logs are identical.
inline std::vector<LogDifference> diff_logs(const EventLog& a, const EventLog& b) {
    std::vector<LogDifference> out;
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<std::string> l = i < a.size() ? std::optional(a[i]) : std::nullopt;
        std::optional<std::string> r = i < b.size() ? std::optional(b[i]) : std::nullopt;
        if (l != r) out.push_back({i, l, r});
    }
    return out;
}

inline std::string serialize_log(const EventLog& log) {
    std::string out;
    for (const auto& l : log) out += l + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Import of external gaze tables

/// Where each sample field lives in an external delimited table. Column
/// indices are zero-based; scales convert the file's units to ms and px.
struct ColumnMap {
    std::size_t t_column = 0;
    std::size_t x_column = 1;
    std::size_t y_column = 2;
    std::optional<std::size_t> on_screen_column;
    char delimiter = ',';
    std::size_t skip_rows = 1;
    double time_scale = 1.0;
    double x_scale = 1.0;
    double y_scale = 1.0;
};

/// Reads an external table into samples. Rows without an on-screen column
/// are classified against the geometry.
inline std::vector<GazeSample> import_samples(std::istream& is, const ColumnMap& map, const ScreenGeometry& g) {
    std::vector<GazeSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line_no <= map.skip_rows) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> cells;
        std::string_view rest(line);
        while (true) {
            auto d = rest.find(map.delimiter);
            cells.push_back(rest.substr(0, d));
            if (d == std::string_view::npos) break;
            rest.remove_prefix(d + 1);
        }
        auto cell = [&](std::size_t i) {
            if (i >= cells.size()) {
                throw SessionFormatError(line_no, "missing column " + std::to_string(i));
            }
            std::string_view c = cells[i];
            while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
            while (!c.empty() && c.back() == ' ') c.remove_suffix(1);
            return c;
        };
        GazeSample s;
        s.t_ms = detail::parse_double(cell(map.t_column), line_no) * map.time_scale;
        s.x_px = detail::parse_double(cell(map.x_column), line_no) * map.x_scale;
        s.y_px = detail::parse_double(cell(map.y_column), line_no) * map.y_scale;
        if (map.on_screen_column) {
            const auto v = cell(*map.on_screen_column);
            s.on_screen = !(v == "0" || v == "false" || v == "False");
        } else {
            s.on_screen = g.contains(s.x_px, s.y_px);
        }
        if (!out.empty() && !(s.t_ms > out.back().t_ms)) {
            throw SessionFormatError(line_no, "timestamps must strictly increase");
        }
        out.push_back(s);
    }
    return out;
}

}  // namespace gazescroll::io
