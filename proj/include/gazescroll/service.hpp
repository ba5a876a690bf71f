#pragma once

// Transport-independent half of the session service. A ProtocolSession
// consumes text frames (one JSON object each) and produces the frames to
// send back; the network server only moves frames and drives the clock.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazescroll/core.hpp"
#include "gazescroll/engine.hpp"
#include "gazescroll/session_io.hpp"
#include "gazescroll/techniques.hpp"

namespace gazescroll::service {

using json = nlohmann::ordered_json;

inline constexpr int kProtocolVersion = 1;

struct ServiceOptions {
    ScreenGeometry geometry;
    stream::StreamConfig stream;
    std::size_t default_pages = 6;
    double heartbeat_interval_ms = 1000.0;
    double heartbeat_timeout_ms = 2000.0;
    bool record = false;
    std::string server_name = "gazescroll";
};

/// Frames to send, in order, and whether to close the connection after.
struct Reply {
    std::vector<std::string> frames;
    bool close = false;

    void append(Reply other) {
        frames.insert(frames.end(), std::make_move_iterator(other.frames.begin()),
                      std::make_move_iterator(other.frames.end()));
        close = close || other.close;
    }
};

/// Malformed input: the connection is closed after reporting it.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline json event_body(const techniques::DetectorEvent& e) {
    using namespace techniques;
    json b;
    b["t_ms"] = e.t_ms;
    b["technique"] = std::string(to_string(e.technique));
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, StateChange>) {
                b["type"] = "state";
                b["from"] = p.from;
                b["to"] = p.to;
            } else if constexpr (std::is_same_v<P, Progress>) {
                b["type"] = "progress";
                b["fraction"] = p.fraction;
            } else if constexpr (std::is_same_v<P, Trigger>) {
                b["type"] = "trigger";
            } else if constexpr (std::is_same_v<P, Abort>) {
                b["type"] = "abort";
                b["reason"] = p.reason;
            } else {
                b["type"] = "scheduled";
                b["eta_ms"] = p.eta_ms;
            }
        },
        e.payload);
    return b;
}

class ProtocolSession {
public:
    ProtocolSession(std::string session_id, ServiceOptions options)
        : id_(std::move(session_id)), opt_(std::move(options)) {
        opt_.geometry.validate();
    }

    /// Handles one incoming frame received at server time `now_ms`.
    Reply on_frame(std::string_view text, double now_ms) {
        try {
            return dispatch(parse(text), now_ms);
        } catch (const ProtocolError& e) {
            Reply r;
            r.frames.push_back(error("malformed_frame", e.what()));
            r.close = true;
            return r;
        }
    }

    /// Drives the heartbeat: sends a ping when one is due and reports an
    /// unanswered ping once it is older than the timeout.
    Reply on_tick(double now_ms) {
        Reply r;
        if (!greeted_) return r;
        if (pending_ping_ && now_ms - pending_ping_->sent_ms >= opt_.heartbeat_timeout_ms) {
            heartbeat_ = "timeout";
            timeouts_++;
            pending_ping_.reset();
            r.frames.push_back(error("heartbeat_timeout", "no pong within " + fmt_ms(opt_.heartbeat_timeout_ms)));
            r.frames.push_back(ui_state_frame());
        }
        if (!pending_ping_ && (!last_ping_ms_ || now_ms - *last_ping_ms_ >= opt_.heartbeat_interval_ms)) {
            r.frames.push_back(ping(now_ms));
        }
        return r;
    }

    /// Starts a heartbeat round trip now.
    std::string ping(double now_ms) {
        pending_ping_ = PendingPing{++ping_id_, now_ms};
        last_ping_ms_ = now_ms;
        return message("ping", {{"id", pending_ping_->id}, {"sent_ms", now_ms}});
    }

    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] bool greeted() const { return greeted_; }
    [[nodiscard]] std::optional<double> last_rtt_ms() const { return rtt_ms_; }
    [[nodiscard]] std::size_t heartbeat_timeouts() const { return timeouts_; }
    [[nodiscard]] const io::RecordingEngine* engine() const { return engine_ ? &*engine_ : nullptr; }

    /// The session so far, when recording is enabled and a technique was set.
    [[nodiscard]] std::optional<io::SessionRecording> recording() const {
        if (!opt_.record || !engine_) return std::nullopt;
        return engine_->recording();
    }

private:
    struct PendingPing {
        std::uint64_t id = 0;
        double sent_ms = 0.0;
    };

    static std::string fmt_ms(double ms) { return io::detail::fmt(ms) + " ms"; }

    static json parse(std::string_view text) {
        json msg;
        try {
            msg = json::parse(text);
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("frame is not JSON: ") + e.what());
        }
        if (!msg.is_object()) throw ProtocolError("frame must be a JSON object");
        if (!msg.contains("kind") || !msg["kind"].is_string()) throw ProtocolError("frame has no kind");
        if (msg.contains("body") && !msg["body"].is_object()) throw ProtocolError("body must be an object");
        return msg;
    }

    std::string message(std::string_view kind, json body) const {
        json m;
        m["kind"] = kind;
        m["session_id"] = id_;
        m["body"] = std::move(body);
        return m.dump();
    }

    std::string error(std::string_view code, const std::string& text) const {
        return message("error", {{"code", code}, {"message", text}});
    }

    static Reply single(std::string frame) {
        Reply r;
        r.frames.push_back(std::move(frame));
        return r;
    }

    template <typename T>
    static T field(const json& body, const char* name) {
        if (!body.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
        try {
            return body.at(name).get<T>();
        } catch (const json::exception&) {
            throw ProtocolError(std::string("field '") + name + "' has the wrong type");
        }
    }

    Reply dispatch(const json& msg, double now_ms) {
        const std::string kind = msg["kind"].get<std::string>();
        const json body = msg.value("body", json::object());
        if (!greeted_) {
            if (kind != "hello") throw ProtocolError("first frame must be hello");
            return hello(body);
        }
        if (kind == "hello") throw ProtocolError("duplicate hello");
        if (kind == "configure") return configure(body);
        if (kind == "sample") return sample(body);
        if (kind == "page") return page(body);
        if (kind == "ping") {
            return single(message("pong", body));
        }
        if (kind == "pong") return pong(body, now_ms);
        throw ProtocolError("unknown message kind '" + kind + "'");
    }

    Reply hello(const json& body) {
        if (body.contains("protocol")) {
            if (!body["protocol"].is_number_integer()) throw ProtocolError("protocol must be an integer");
            if (body["protocol"].get<int>() != kProtocolVersion) {
                Reply r = single(error("unsupported_protocol",
                                       "server speaks protocol " + std::to_string(kProtocolVersion)));
                r.close = true;
                return r;
            }
        }
        greeted_ = true;
        return single(message("hello", {{"server", opt_.server_name}, {"protocol", kProtocolVersion}}));
    }

    Reply configure(const json& body) {
        const auto name = field<std::string>(body, "technique");
        const auto technique = parse_technique(name);
        if (!technique) return single(error("unknown_technique", "unknown technique '" + name + "'"));

        techniques::TechniqueConfig config;
        try {
            if (body.contains("config")) config = io::config_from_json(body["config"]);
        } catch (const std::exception& e) {
            return single(error("invalid_config", e.what()));
        }
        if (auto errors = techniques::validate_config(config); !errors.empty()) {
            std::string joined;
            for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
            return single(error("invalid_config", joined));
        }

        Reply r;
        if (!engine_) {
            std::size_t pages = opt_.default_pages;
            if (body.contains("pages")) {
                const auto n = field<long long>(body, "pages");
                if (n < 1) return single(error("invalid_config", "pages must be at least 1"));
                pages = static_cast<std::size_t>(n);
            }
            io::SessionHeader h;
            h.source = "service";
            h.geometry = opt_.geometry;
            h.technique = *technique;
            h.config = config;
            h.stream = opt_.stream;
            h.document = io::DocumentSpec::of(DocumentModel::with_pages(pages, opt_.geometry));
            engine_.emplace(h);
        } else {
            const double t = last_t_.value_or(0.0);
            auto out = engine_->reconfigure(*technique, config, t);
            emit(out, r);
            return r;
        }
        r.frames.push_back(ui_state_frame());
        return r;
    }

    Reply sample(const json& body) {
        const GazeSample s{field<double>(body, "t_ms"), field<double>(body, "x_px"), field<double>(body, "y_px"),
                           body.contains("on_screen") ? field<bool>(body, "on_screen") : true, SampleKind::Raw};
        if (!engine_) return single(error("no_active_technique", "no active technique"));
        if (engine_->engine().finished()) return single(error("end_of_document", "document already finished"));
        if (last_t_ && !(s.t_ms > *last_t_)) {
            return single(error("non_monotonic_timestamp", "sample at " + fmt_ms(s.t_ms) + " after " +
                                                              fmt_ms(*last_t_)));
        }
        last_t_ = s.t_ms;
        Reply r;
        emit(engine_->push(s), r);
        return r;
    }

    // Manual page turn from the client, the touch fallback.
    Reply page(const json& body) {
        if (!engine_) return single(error("no_active_technique", "no active technique"));
        const double t = body.contains("t_ms") ? field<double>(body, "t_ms") : last_t_.value_or(0.0);
        if (last_t_ && t < *last_t_) {
            return single(error("non_monotonic_timestamp", "page turn at " + fmt_ms(t) + " after " + fmt_ms(*last_t_)));
        }
        last_t_ = t;
        Reply r;
        emit(engine_->touch(t), r);
        return r;
    }

    Reply pong(const json& body, double now_ms) {
        const auto id = field<std::uint64_t>(body, "id");
        if (!pending_ping_ || pending_ping_->id != id) return {};  // late echo of a timed-out ping
        rtt_ms_ = now_ms - pending_ping_->sent_ms;
        heartbeat_ = "ok";
        pending_ping_.reset();
        return single(ui_state_frame());
    }

    void emit(const EngineOutput& out, Reply& r) {
        for (const auto& e : out.events) r.frames.push_back(message("event", event_body(e)));
        for (std::size_t i = 0; i < out.scrolls.size(); ++i) {
            const ScrollEvent& s = out.scrolls[i];
            json b{{"t_ms", s.t_ms},
                   {"from", s.from_page},
                   {"index", s.to_page},
                   {"cause", std::string(to_string(s.cause))},
                   {"end_of_document", false}};
            if (const auto& c = out.pages[i].carried_line) {
                b["carried_line"] = {{"source_line", c->source_line}, {"y_px", c->y_px}, {"arrow", c->arrow_marker}};
            }
            r.frames.push_back(message("page", b));
        }
        if (out.end_of_document) {
            const std::size_t index = engine_->engine().current_page().index;
            r.frames.push_back(message("page", {{"t_ms", last_t_.value_or(0.0)},
                                                {"from", index},
                                                {"index", index},
                                                {"end_of_document", true}}));
        }
        if (out.ui_changed) r.frames.push_back(ui_state_frame());
    }

    std::string ui_state_frame() const {
        json b;
        if (engine_) {
            const UiState& ui = engine_->engine().ui();
            b["technique"] = std::string(to_string(engine_->engine().settings().technique));
            b["page"] = ui.page;
            b["bar_x_px"] = ui.bar_x_px;
            b["hitbox_progress"] = ui.hitbox_progress;
            b["primed"] = ui.primed;
        }
        b["diagnostics"] = {{"rtt_ms", rtt_ms_ ? json(*rtt_ms_) : json(nullptr)}, {"heartbeat", heartbeat_}};
        return message("ui_state", b);
    }

    std::string id_;
    ServiceOptions opt_;
    bool greeted_ = false;
    std::optional<io::RecordingEngine> engine_;
    std::optional<double> last_t_;
    std::optional<PendingPing> pending_ping_;
    std::optional<double> last_ping_ms_;
    std::optional<double> rtt_ms_;
    std::string heartbeat_ = "pending";
    std::uint64_t ping_id_ = 0;
    std::size_t timeouts_ = 0;
};

}  // namespace gazescroll::service
