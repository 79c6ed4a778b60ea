// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <thread>

#include "rpp/env.hpp"
#include "rpp/error.hpp"
#include "rpp/http.hpp"
#include "rpp/state.hpp"

using namespace rpp;

namespace {

// Local server on an ephemeral port, stopped on destruction.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpEndpoint fast_endpoint(const std::string& url) {
  HttpEndpoint ep;
  ep.url = url;
  ep.model = "stub";
  ep.timeout_s = 2.0;
  ep.max_retries = 3;
  ep.backoff_base_s = 0.01;
  ep.backoff_max_s = 0.05;
  return ep;
}

std::string chat_reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

}  // namespace

TEST_CASE("url parsing") {
  const auto u = parse_url("http://localhost:8080/v1/chat/completions");
  CHECK(u.scheme_host_port == "http://localhost:8080");
  CHECK(u.path == "/v1/chat/completions");
  CHECK(parse_url("https://api.example.org").path == "/");
  CHECK_THROWS_AS(parse_url("localhost:8080/x"), Error);
}

TEST_CASE("backoff delays grow and cap") {
  HttpEndpoint ep;
  ep.backoff_base_s = 1;
  ep.backoff_factor = 2;
  ep.backoff_max_s = 5;
  CHECK(backoff_delay_s(ep, 0) == 1.0);
  CHECK(backoff_delay_s(ep, 1) == 2.0);
  CHECK(backoff_delay_s(ep, 2) == 4.0);
  CHECK(backoff_delay_s(ep, 3) == 5.0);
}

TEST_CASE("canned chat reply passes through the backend and parser") {
  StubServer stub;
  std::string seen_auth;
  nlohmann::json seen_body;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(chat_reply("1. Bravo\n2. Alpha"), "application/json");
  });
  auto ep = fast_endpoint(stub.url("/v1/chat/completions"));
  ep.api_key = "secret";
  HttpChatBackend backend(ep);
  const std::string reply = backend.complete("rank these", 0.2);
  CHECK(reply == "1. Bravo\n2. Alpha");
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_body["model"] == "stub");
  CHECK(seen_body["messages"][0]["content"] == "rank these");
  const std::vector<std::string> titles = {"Alpha", "Bravo", "Charlie"};
  CHECK(parse_reply(reply, titles).order == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("429 is retried and counted") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    res.set_content(chat_reply("ok"), "application/json");
  });
  HttpChatBackend backend(fast_endpoint(stub.url("/chat")));
  CHECK(backend.complete("p", 0.2) == "ok");
  CHECK(hits == 2);
  CHECK(backend.retries() == 1);
}

TEST_CASE("client errors are not retried") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  HttpJsonClient client(fast_endpoint(stub.url("/chat")));
  CHECK_THROWS_AS(client.post("{}"), Error);
  CHECK(hits == 1);
}

TEST_CASE("timeouts exhaust retries with an environment error") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(chat_reply("late"), "application/json");
  });
  auto ep = fast_endpoint(stub.url("/slow"));
  ep.timeout_s = 0.1;
  ep.max_retries = 2;
  HttpJsonClient client(ep);
  try {
    client.post("{}");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEnvironment);
  }
  CHECK(client.retries() == 2);
  CHECK(client.requests() == 3);
}

TEST_CASE("unreachable endpoint is an environment error") {
  auto ep = fast_endpoint("http://127.0.0.1:1/none");
  ep.max_retries = 1;
  HttpJsonClient client(ep);
  CHECK_THROWS_AS(client.post("{}"), Error);
}

TEST_CASE("embedding endpoint is normalized and dimension checked") {
  StubServer stub;
  stub.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string text = body["input"];
    res.set_content(nlohmann::json{{"embedding", {3.0, 4.0, static_cast<double>(text.size())}}}.dump(),
                    "application/json");
  });
  HttpTextEncoder enc(fast_endpoint(stub.url("/embed")), 3);
  const auto v = enc.encode("");
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
  CHECK(v[2] == 0.0);
  HttpTextEncoder wrong(fast_endpoint(stub.url("/embed")), 4);
  CHECK_THROWS_AS(wrong.encode("x"), Error);
}
