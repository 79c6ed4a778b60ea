// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>

namespace rpp {

struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  double timeout_s = 30.0;
  int max_retries = 3;
  double backoff_base_s = 1.0;
  double backoff_factor = 2.0;
  double backoff_max_s = 30.0;
  std::size_t max_in_flight = 4;
};

struct ParsedUrl {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path;              // starts with '/'
};

ParsedUrl parse_url(const std::string& url);

/// Delay before retry number `retry` (0-based): base * factor^retry, capped.
double backoff_delay_s(const HttpEndpoint& ep, int retry);

/// JSON POST with bounded concurrency and exponential backoff. Transport
/// errors, 429 and 5xx are retried; other statuses fail immediately.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(HttpEndpoint endpoint);

  /// Returns the response body of the first 2xx reply. Throws an
  /// environment error once retries are exhausted.
  std::string post(const std::string& body);

  const HttpEndpoint& endpoint() const noexcept { return endpoint_; }
  std::size_t retries() const noexcept { return retries_.load(); }
  std::size_t requests() const noexcept { return requests_.load(); }

 private:
  std::string post_once(const std::string& body, int& status, bool& transport_error);

  HttpEndpoint endpoint_;
  ParsedUrl url_;
  std::mutex gate_mu_;
  std::condition_variable gate_cv_;
  std::size_t in_flight_ = 0;
  std::atomic<std::size_t> retries_{0};
  std::atomic<std::size_t> requests_{0};
};

}  // namespace rpp
