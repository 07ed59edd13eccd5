#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "afirl/server.hpp"

using namespace afirl;
using namespace afirl::session;
using nlohmann::json;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

struct Fixture {
  ExperimentContext context;
  std::shared_ptr<SessionManager> sessions;
  Server server;

  Fixture()
      : sessions(std::make_shared<SessionManager>(withOracle(context))),
        server(ServerOptions{"127.0.0.1", 0, 2}, sessions) {
    server.start();
  }

  static const ExperimentContext& withOracle(ExperimentContext& c) {
    c.setFailurePredictor(std::make_shared<TransitionFailureOracle>());
    return c;
  }
};

struct Reply {
  http::status status;
  json body;
};

Reply request(std::uint16_t port, http::verb verb, const std::string& target, const std::string& body = {}) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result(), res.body().empty() ? json() : json::parse(res.body())};
}

class Client {
 public:
  Client(std::uint16_t port, const std::string& target) : ws_(ioc_) {
    beast::get_lowest_layer(ws_).connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    ws_.handshake("127.0.0.1", target);
  }

  void send(const json& message) { ws_.write(net::buffer(message.dump())); }

  json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }

  json receiveKind(const std::string& kind) {
    for (;;) {
      auto m = receive();
      if (m.at("kind") == kind) return m;
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

}  // namespace

TEST_CASE("REST endpoints") {
  Fixture f;
  const auto port = f.server.port();
  CHECK(port != 0);

  const auto created = request(port, http::verb::post, "/session", R"({"condition":"irl","paused":true})");
  CHECK(created.status == http::status::created);
  CHECK(created.body.at("v") == 1);
  const auto id = created.body.at("sessionId").get<std::string>();
  CHECK(created.body.at("config").at("condition") == "irl");

  const auto snap = request(port, http::verb::get, "/session/" + id);
  CHECK(snap.status == http::status::ok);
  CHECK(snap.body.at("sessionId") == id);
  CHECK(snap.body.at("status") == "paused");

  CHECK(request(port, http::verb::get, "/session/nope").status == http::status::not_found);
  CHECK(request(port, http::verb::post, "/session", "{oops").status == http::status::bad_request);
  const auto bad = request(port, http::verb::post, "/session", R"({"eta":7})");
  CHECK(bad.status == http::status::bad_request);
  CHECK(bad.body.at("kind") == "error");
  CHECK(request(port, http::verb::put, "/session/" + id).status == http::status::method_not_allowed);
  CHECK(request(port, http::verb::get, "/session/" + id + "/ws").status == http::status::upgrade_required);
  CHECK(request(port, http::verb::get, "/elsewhere").status == http::status::not_found);

  CHECK(request(port, http::verb::delete_, "/session/" + id).status == http::status::ok);
  CHECK(request(port, http::verb::get, "/session/" + id).status == http::status::not_found);
}

TEST_CASE("WebSocket upgrade to an unknown session is refused") {
  Fixture f;
  CHECK_THROWS(Client(f.server.port(), "/session/s99/ws"));
}

TEST_CASE("live loop: advice round trip and snapshot consistency") {
  Fixture f;
  const auto port = f.server.port();
  const auto created =
      request(port, http::verb::post, "/session", R"({"paused":true,"pace":50,"start":"left","epsilon":0})");
  const auto id = created.body.at("sessionId").get<std::string>();

  Client client(port, "/session/" + id + "/ws");
  const auto hello = client.receive();
  CHECK(hello.at("kind") == "configUpdate");
  CHECK(hello.at("config").at("paused") == true);

  client.send({{"v", 1}, {"kind", "adviceSubmit"}, {"id", "bad"}, {"label", "jump"}, {"confidence", 1}});
  const auto rejected = client.receiveKind("adviceAck");
  CHECK(rejected.at("id") == "bad");
  CHECK(rejected.at("accepted") == false);

  client.send({{"v", 1}, {"kind", "adviceSubmit"}, {"id", "a1"}, {"sentence", "go left"},
               {"gestures", {"go_left", "go_left", "go_left", "go_left", "go_left"}}});
  const auto ack = client.receiveKind("adviceAck");
  CHECK(ack.at("accepted") == true);
  CHECK(ack.at("label") == "go_left");
  CHECK(ack.at("confidence").get<double>() == doctest::Approx(1.0));

  client.send({{"v", 1}, {"kind", "configUpdate"}, {"paused", false}});
  json advised;
  json last;
  for (int i = 0; i < 200 && advised.is_null(); ++i) {
    const auto m = client.receive();
    if (m.at("kind") != "stateUpdate") continue;
    last = m;
    if (!m.at("advice").is_null() && m.at("advice").at("id") == "a1") advised = m;
  }
  REQUIRE_FALSE(advised.is_null());
  CHECK(advised.at("adviceUsed") == true);
  CHECK((advised.at("action") == "go_left" || advised.at("affordanceBypassed") == true));

  client.send({{"v", 1}, {"kind", "configUpdate"}, {"paused", true}});
  for (;;) {
    const auto m = client.receive();
    // The unpause reply can still be in flight behind the advised update.
    if (m.at("kind") == "configUpdate" && m.at("config").at("paused") == true) break;
    if (m.at("kind") == "stateUpdate") last = m;
  }

  const auto snap = request(port, http::verb::get, "/session/" + id).body;
  CHECK(snap.at("status") == "paused");
  CHECK(snap.at("episode") == last.at("episode"));
  if (snap.at("episodeActive") == true) {
    CHECK(snap.at("step") == last.at("step"));
    CHECK(snap.at("state").at("text") == last.at("next").at("text"));
  }

  client.send(json{{"v", 1}, {"kind", "hello"}});
  CHECK(client.receiveKind("error").at("reason").get<std::string>().find("hello") != std::string::npos);
  client.close();
}
