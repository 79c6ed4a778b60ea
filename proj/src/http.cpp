// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/http.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "rpp/error.hpp"

namespace rpp {

ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw usage_error("endpoint URL needs a scheme: '" + url + "'");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw usage_error("unsupported URL scheme '" + scheme + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = url;
    out.path = "/";
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  if (out.scheme_host_port.size() == scheme_end + 3) {
    throw usage_error("endpoint URL has no host: '" + url + "'");
  }
  return out;
}

double backoff_delay_s(const HttpEndpoint& ep, int retry) {
  const double d = ep.backoff_base_s * std::pow(ep.backoff_factor, retry);
  return std::min(d, ep.backoff_max_s);
}

HttpJsonClient::HttpJsonClient(HttpEndpoint endpoint)
    : endpoint_(std::move(endpoint)), url_(parse_url(endpoint_.url)) {
  if (endpoint_.max_in_flight == 0) endpoint_.max_in_flight = 1;
  if (endpoint_.max_retries < 0) endpoint_.max_retries = 0;
}

std::string HttpJsonClient::post_once(const std::string& body, int& status,
                                      bool& transport_error) {
  httplib::Client cli(url_.scheme_host_port);
  const auto secs = static_cast<time_t>(endpoint_.timeout_s);
  const auto usecs = static_cast<time_t>(
      (endpoint_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
  }
  ++requests_;
  auto res = cli.Post(url_.path, headers, body, "application/json");
  if (!res) {
    transport_error = true;
    status = 0;
    return httplib::to_string(res.error());
  }
  transport_error = false;
  status = res->status;
  return res->body;
}

std::string HttpJsonClient::post(const std::string& body) {
  {
    std::unique_lock lock(gate_mu_);
    gate_cv_.wait(lock, [&] { return in_flight_ < endpoint_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    HttpJsonClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->gate_mu_);
        --self->in_flight_;
      }
      self->gate_cv_.notify_one();
    }
  } release{this};

  std::string last_error;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      std::this_thread::sleep_for(
          std::chrono::duration<double>(backoff_delay_s(endpoint_, attempt - 1)));
    }
    int status = 0;
    bool transport_error = false;
    std::string reply = post_once(body, status, transport_error);
    if (!transport_error && status >= 200 && status < 300) return reply;
    const bool retryable = transport_error || status == 429 || status >= 500;
    last_error = transport_error ? "transport error: " + reply
                                 : "HTTP status " + std::to_string(status);
    if (!retryable) {
      throw environment_error("request to " + endpoint_.url + " failed: " + last_error);
    }
  }
  throw environment_error("request to " + endpoint_.url + " failed after " +
                          std::to_string(endpoint_.max_retries + 1) +
                          " attempts: " + last_error);
}

}  // namespace rpp
