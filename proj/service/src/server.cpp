#include "afirl/server.hpp"

#include <deque>
#include <stdexcept>
#include <thread>
#include <vector>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace afirl::session {

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

// Slow clients are disconnected rather than buffering without bound.
constexpr std::size_t kMaxQueuedMessages = 4096;

Response jsonResponse(const Request& req, http::status status, const json& body) {
  Response res{status, req.version()};
  res.set(http::field::content_type, "application/json");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

Response errorResponse(const Request& req, http::status status, const std::string& reason) {
  return jsonResponse(req, status, errorMessage(reason));
}

// "/session/s1/ws?x" -> {"session", "s1", "ws"}
std::vector<std::string> pathSegments(beast::string_view target) {
  std::string path(target.substr(0, target.find('?')));
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < path.size()) {
    const auto next = path.find('/', pos);
    const auto end = next == std::string::npos ? path.size() : next;
    if (end > pos) out.push_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket&& socket, std::shared_ptr<Session> session)
      : ws_(std::move(socket)), session_(std::move(session)) {}

  ~WsConnection() {
    if (token_ >= 0) session_->unsubscribe(token_);
  }

  void run(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsConnection::onAccept, shared_from_this()));
  }

  void send(std::string message) {
    net::post(ws_.get_executor(), [self = shared_from_this(), message = std::move(message)]() mutable {
      if (self->closing_) return;
      if (self->queue_.size() >= kMaxQueuedMessages) {
        self->closing_ = true;
        self->ws_.async_close(websocket::close_reason(websocket::close_code::try_again_later, "client too slow"),
                              [self](beast::error_code) {});
        return;
      }
      self->queue_.push_back(std::move(message));
      if (self->queue_.size() == 1) self->write();
    });
  }

 private:
  void onAccept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WsConnection> weak = shared_from_this();
    token_ = session_->subscribe([weak](const std::string& message) {
      if (auto self = weak.lock()) self->send(message);
    });
    send(json{{"v", kWireVersion}, {"kind", "configUpdate"}, {"sessionId", session_->id()},
              {"config", session_->config().toJson()}}
             .dump());
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::onRead, shared_from_this()));
  }

  void onRead(beast::error_code ec, std::size_t) {
    if (ec) {
      if (token_ >= 0) session_->unsubscribe(token_);
      token_ = -1;
      return;
    }
    const auto text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    send(session_->handleMessage(text).dump());
    read();
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    beast::bind_front_handler(&WsConnection::onWrite, shared_from_this()));
  }

  void onWrite(beast::error_code ec, std::size_t) {
    if (ec) {
      closing_ = true;
      queue_.clear();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Session> session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  int token_ = -1;
  bool closing_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, std::shared_ptr<SessionManager> sessions)
      : stream_(std::move(socket)), sessions_(std::move(sessions)) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::read, shared_from_this()));
  }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::onRead, shared_from_this()));
  }

  void onRead(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) return shutdown();
    if (ec) return;

    const auto segments = pathSegments(req_.target());
    if (websocket::is_upgrade(req_)) {
      if (segments.size() == 3 && segments[0] == "session" && segments[2] == "ws") {
        if (auto session = sessions_->find(segments[1])) {
          stream_.expires_never();
          std::make_shared<WsConnection>(stream_.release_socket(), std::move(session))->run(std::move(req_));
          return;
        }
        return respond(errorResponse(req_, http::status::not_found, "unknown session '" + segments[1] + "'"));
      }
      return respond(errorResponse(req_, http::status::not_found, "no WebSocket endpoint here"));
    }
    respond(route(segments));
  }

  Response route(const std::vector<std::string>& segments) {
    if (segments.empty() || segments[0] != "session")
      return errorResponse(req_, http::status::not_found, "not found");

    if (segments.size() == 1) {
      if (req_.method() != http::verb::post)
        return errorResponse(req_, http::status::method_not_allowed, "use POST to create a session");
      try {
        const auto config = req_.body().empty() ? json::object() : json::parse(req_.body());
        const auto session = sessions_->create(config);
        return jsonResponse(req_, http::status::created,
                            {{"v", kWireVersion}, {"sessionId", session->id()}, {"config", session->config().toJson()}});
      } catch (const json::exception&) {
        return errorResponse(req_, http::status::bad_request, "body is not valid JSON");
      } catch (const std::invalid_argument& e) {
        return errorResponse(req_, http::status::bad_request, e.what());
      }
    }

    if (segments.size() == 2) {
      const auto& id = segments[1];
      if (req_.method() == http::verb::get) {
        if (const auto session = sessions_->find(id)) return jsonResponse(req_, http::status::ok, session->snapshot());
        return errorResponse(req_, http::status::not_found, "unknown session '" + id + "'");
      }
      if (req_.method() == http::verb::delete_) {
        if (sessions_->close(id)) return jsonResponse(req_, http::status::ok, {{"v", kWireVersion}, {"closed", id}});
        return errorResponse(req_, http::status::not_found, "unknown session '" + id + "'");
      }
      return errorResponse(req_, http::status::method_not_allowed, "use GET or DELETE");
    }

    if (segments.size() == 3 && segments[2] == "ws")
      return errorResponse(req_, http::status::upgrade_required, "this endpoint needs a WebSocket upgrade");
    return errorResponse(req_, http::status::not_found, "not found");
  }

  void respond(Response res) {
    auto shared = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *shared, [self = shared_from_this(), shared](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (shared->need_eof()) return self->shutdown();
      self->read();
    });
  }

  void shutdown() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  Request req_;
  std::shared_ptr<SessionManager> sessions_;
};

class Listener : public std::enable_shared_from_this<Listener> {
 public:
  Listener(net::io_context& ioc, const tcp::endpoint& endpoint, std::shared_ptr<SessionManager> sessions)
      : ioc_(ioc), acceptor_(net::make_strand(ioc)), sessions_(std::move(sessions)) {
    beast::error_code ec;
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec)
      throw std::runtime_error("cannot listen on " + endpoint.address().to_string() + ":" +
                               std::to_string(endpoint.port()) + ": " + ec.message());
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void run() { accept(); }

  void close() {
    net::post(acceptor_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      self->acceptor_.close(ec);
    });
  }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), beast::bind_front_handler(&Listener::onAccept, shared_from_this()));
  }

  void onAccept(beast::error_code ec, tcp::socket socket) {
    if (ec == net::error::operation_aborted) return;
    if (!ec) std::make_shared<HttpConnection>(std::move(socket), sessions_)->run();
    if (acceptor_.is_open()) accept();
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  std::shared_ptr<SessionManager> sessions_;
};

}  // namespace

struct Server::Impl {
  ServerOptions options;
  std::shared_ptr<SessionManager> sessions;
  net::io_context ioc;
  std::shared_ptr<Listener> listener;
  std::vector<std::thread> threads;
  std::uint16_t port = 0;

  Impl(ServerOptions o, std::shared_ptr<SessionManager> s)
      : options(std::move(o)), sessions(std::move(s)), ioc(std::max(1, options.threads)) {}
};

Server::Server(ServerOptions options, std::shared_ptr<SessionManager> sessions)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(sessions))) {
  if (!impl_->sessions) throw std::invalid_argument("server needs a session manager");
}

Server::~Server() {
  stop();
  wait();
}

void Server::start() {
  if (impl_->listener) return;
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->options.address, ec);
  if (ec) throw std::runtime_error("invalid listen address '" + impl_->options.address + "'");
  impl_->listener = std::make_shared<Listener>(impl_->ioc, tcp::endpoint{address, impl_->options.port}, impl_->sessions);
  impl_->port = impl_->listener->port();
  impl_->listener->run();
  for (int i = 0; i < std::max(1, impl_->options.threads); ++i)
    impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void Server::wait() {
  for (auto& t : impl_->threads)
    if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
}

void Server::stop() {
  if (impl_->listener) impl_->listener->close();
  impl_->ioc.stop();
}

std::uint16_t Server::port() const { return impl_->port; }

}  // namespace afirl::session
