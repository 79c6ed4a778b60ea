// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>


namespace rpp {

// Ranking metrics for a single relevant item. `order` holds candidate
// indices best-first; the rank r is 1-based. k must lie in [1, |order|].

std::size_t ground_truth_rank(std::span<const std::size_t> order, std::size_t gt_pos);

/// 1/log2(r+1) if r <= k, else 0 (ideal DCG is 1).
double ndcg_at_k(std::span<const std::size_t> order, std::size_t gt_pos, std::size_t k);
/// 1/r if r <= k, else 0.
double mrr_at_k(std::span<const std::size_t> order, std::size_t gt_pos, std::size_t k);
/// 1 if r <= k, else 0.
double hit_at_k(std::span<const std::size_t> order, std::size_t gt_pos, std::size_t k);

inline constexpr std::array<std::size_t, 3> kReportCutoffs = {1, 5, 10};

struct MetricStat {
  double mean = 0.0;
  double std = 0.0;  // sample std across repeats; 0 for a single run
};

struct MetricReport {
  std::string label;
  std::size_t n_users = 0;
  std::size_t repeats = 0;
  bool single_run = false;
  std::size_t failed_users = 0;
  std::array<MetricStat, 3> ndcg{};
  std::array<MetricStat, 3> mrr{};
  std::array<MetricStat, 3> hit{};
  /// Per-repeat, per-user NDCG@10, users in input order.
  std::vector<std::vector<double>> user_ndcg10;
};

std::string format_report_table(const MetricReport& report);
std::string format_report_summary(const MetricReport& report);

/// Mean and sample (n-1) standard deviation.
MetricStat mean_and_std(std::span<const double> values);

}  // namespace rpp
