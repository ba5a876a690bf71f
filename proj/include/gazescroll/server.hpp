#pragma once

// Network front end for ProtocolSession. Each TCP connection is sniffed:
// an HTTP upgrade request ("GET ...") becomes a WebSocket session with one
// JSON object per text message, anything else is newline-delimited JSON.
// All connections share one io_context; a session's frames are handled in
// arrival order by its own coroutine.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "gazescroll/service.hpp"
#include "gazescroll/session_io.hpp"

namespace gazescroll::service {

namespace net = boost::asio;
namespace beast = boost::beast;
using tcp = net::ip::tcp;

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 8765;  // 0 picks a free port
    ServiceOptions service;
    std::optional<std::filesystem::path> record_dir;
    std::chrono::milliseconds tick{100};
};

class PortInUse : public std::runtime_error {
public:
    PortInUse(const std::string& host, unsigned short port)
        : std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": address already in use") {}
};

namespace detail {

using LineTransport = tcp::socket;
using WsTransport = beast::websocket::stream<beast::tcp_stream>;

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, std::string id, const ServerOptions& opt,
               std::function<double()> clock, std::function<void(const io::SessionRecording&, const std::string&)> on_record)
        : socket_(std::move(socket)),
          wake_(socket_.get_executor()),
          ticker_(socket_.get_executor()),
          session_(std::move(id), opt.service),
          opt_(opt),
          clock_(std::move(clock)),
          on_record_(std::move(on_record)) {
        wake_.expires_at(std::chrono::steady_clock::time_point::max());
    }

    void start() {
        auto self = shared_from_this();
        net::co_spawn(socket_.get_executor(), [self]() { return self->run(); }, net::detached);
    }

private:
    net::awaitable<void> run() {
        auto self = shared_from_this();
        std::string pending;
        try {
            // Sniff the first bytes to pick the framing.
            char buf[1024];
            while (pending.size() < 4 && pending.find('\n') == std::string::npos) {
                const std::size_t n = co_await socket_.async_read_some(net::buffer(buf), net::use_awaitable);
                pending.append(buf, n);
            }
            if (pending.rfind("GET ", 0) == 0) {
                auto& ws = transport_.emplace<WsTransport>(std::move(socket_));
                ws.text(true);
                co_await ws.async_accept(net::buffer(pending), net::use_awaitable);
                pending.clear();
            } else {
                transport_.emplace<LineTransport>(std::move(socket_));
            }
        } catch (const std::exception&) {
            co_return;
        }

        net::co_spawn(wake_.get_executor(), [self]() { return self->write_loop(); }, net::detached);
        net::co_spawn(wake_.get_executor(), [self]() { return self->tick_loop(); }, net::detached);

        try {
            while (!closing_) {
                std::string frame;
                if (auto* ws = std::get_if<WsTransport>(&transport_)) {
                    beast::flat_buffer b;
                    co_await ws->async_read(b, net::use_awaitable);
                    frame = beast::buffers_to_string(b.data());
                } else {
                    auto& sock = std::get<LineTransport>(transport_);
                    std::size_t nl = pending.find('\n');
                    if (nl == std::string::npos) {
                        nl = co_await net::async_read_until(sock, net::dynamic_buffer(pending), '\n',
                                                            net::use_awaitable) - 1;
                    }
                    frame = pending.substr(0, nl);
                    pending.erase(0, nl + 1);
                    if (!frame.empty() && frame.back() == '\r') frame.pop_back();
                    if (frame.empty()) continue;
                }
                enqueue(session_.on_frame(frame, clock_()));
            }
        } catch (const std::exception&) {
            // peer closed or transport failure
        }
        finish();
    }

    net::awaitable<void> tick_loop() {
        auto self = shared_from_this();
        while (!closed_) {
            ticker_.expires_after(opt_.tick);
            boost::system::error_code ec;
            co_await ticker_.async_wait(net::redirect_error(net::use_awaitable, ec));
            if (closed_) break;
            enqueue(session_.on_tick(clock_()));
        }
    }

    net::awaitable<void> write_loop() {
        auto self = shared_from_this();
        try {
            while (true) {
                while (!outbox_.empty()) {
                    std::string frame = std::move(outbox_.front());
                    outbox_.pop_front();
                    if (auto* ws = std::get_if<WsTransport>(&transport_)) {
                        co_await ws->async_write(net::buffer(frame), net::use_awaitable);
                    } else {
                        frame += '\n';
                        co_await net::async_write(std::get<LineTransport>(transport_), net::buffer(frame),
                                                  net::use_awaitable);
                    }
                }
                if (closing_ || closed_) break;
                boost::system::error_code ec;
                co_await wake_.async_wait(net::redirect_error(net::use_awaitable, ec));
            }
            if (closing_ && !closed_) {
                if (auto* ws = std::get_if<WsTransport>(&transport_)) {
                    boost::system::error_code ec;
                    co_await ws->async_close(beast::websocket::close_code::policy_error,
                                             net::redirect_error(net::use_awaitable, ec));
                }
            }
        } catch (const std::exception&) {
        }
        shutdown();
    }

    void enqueue(Reply r) {
        if (closed_) return;
        for (auto& f : r.frames) outbox_.push_back(std::move(f));
        if (r.close) closing_ = true;
        wake_.cancel();
    }

    void finish() {
        closing_ = true;
        wake_.cancel();
        ticker_.cancel();
        if (!recorded_) {
            recorded_ = true;
            if (auto rec = session_.recording()) on_record_(*rec, session_.id());
        }
    }

    void shutdown() {
        if (closed_) return;
        closed_ = true;
        ticker_.cancel();
        boost::system::error_code ec;
        if (auto* ws = std::get_if<WsTransport>(&transport_)) {
            beast::get_lowest_layer(*ws).socket().shutdown(tcp::socket::shutdown_both, ec);
            beast::get_lowest_layer(*ws).socket().close(ec);
        } else if (auto* s = std::get_if<LineTransport>(&transport_)) {
            s->shutdown(tcp::socket::shutdown_both, ec);
            s->close(ec);
        }
    }

    tcp::socket socket_;
    std::variant<std::monostate, LineTransport, WsTransport> transport_;
    net::steady_timer wake_;
    net::steady_timer ticker_;
    ProtocolSession session_;
    ServerOptions opt_;
    std::function<double()> clock_;
    std::function<void(const io::SessionRecording&, const std::string&)> on_record_;
    std::deque<std::string> outbox_;
    bool closing_ = false;
    bool closed_ = false;
    bool recorded_ = false;
};

}  // namespace detail

class Server {
public:
    Server(net::io_context& io, ServerOptions options) : io_(io), opt_(std::move(options)), acceptor_(io) {
        opt_.service.record = opt_.record_dir.has_value();
        if (opt_.record_dir) std::filesystem::create_directories(*opt_.record_dir);
        const tcp::endpoint ep(net::ip::make_address(opt_.host), opt_.port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(tcp::acceptor::reuse_address(true));
        boost::system::error_code ec;
        acceptor_.bind(ep, ec);
        if (ec == net::error::address_in_use) throw PortInUse(opt_.host, opt_.port);
        if (ec) throw std::runtime_error("cannot bind " + opt_.host + ":" + std::to_string(opt_.port) + ": " + ec.message());
        acceptor_.listen();
    }

    [[nodiscard]] unsigned short port() const { return acceptor_.local_endpoint().port(); }
    [[nodiscard]] std::size_t sessions_started() const { return next_id_; }
    [[nodiscard]] std::size_t sessions_recorded() const { return recorded_; }

    void start() {
        net::co_spawn(io_, [this]() { return accept_loop(); }, net::detached);
    }

    void stop() {
        boost::system::error_code ec;
        acceptor_.close(ec);
    }

private:
    net::awaitable<void> accept_loop() {
        while (acceptor_.is_open()) {
            boost::system::error_code ec;
            tcp::socket socket = co_await acceptor_.async_accept(net::redirect_error(net::use_awaitable, ec));
            if (ec) {
                if (ec == net::error::operation_aborted) break;
                continue;
            }
            socket.set_option(tcp::no_delay(true), ec);
            const std::string id = "s" + std::to_string(++next_id_);
            std::make_shared<detail::Connection>(
                std::move(socket), id, opt_, [this] { return now_ms(); },
                [this](const io::SessionRecording& rec, const std::string& sid) { record(rec, sid); })
                ->start();
        }
    }

    double now_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
    }

    void record(const io::SessionRecording& rec, const std::string& id) {
        if (!opt_.record_dir) return;
        try {
            io::write_file(rec, (*opt_.record_dir / ("session-" + run_tag_ + "-" + id + ".gzs")).string());
            ++recorded_;
        } catch (const std::exception&) {
            // A failed recording must not take the server down.
        }
    }

    net::io_context& io_;
    ServerOptions opt_;
    tcp::acceptor acceptor_;
    std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
    // Distinguishes recordings of successive server runs in one directory.
    std::string run_tag_ = std::to_string(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
    std::atomic<std::size_t> next_id_{0};
    std::atomic<std::size_t> recorded_{0};
};

}  // namespace gazescroll::service
