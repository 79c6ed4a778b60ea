// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#include "rpp/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "rpp/error.hpp"

namespace rpp {

namespace {

std::size_t checked_rank(std::span<const std::size_t> order, std::size_t gt_pos,
                         std::size_t k) {
  if (k < 1 || k > order.size()) {
    throw invalid_argument("cutoff k=" + std::to_string(k) + " outside [1, " +
                           std::to_string(order.size()) + "]");
  }
  return ground_truth_rank(order, gt_pos);
}

}  // namespace

std::size_t ground_truth_rank(std::span<const std::size_t> order, std::size_t gt_pos) {
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == gt_pos) return i + 1;
  }
  throw invalid_argument("ground truth is absent from the ranking");
}

double ndcg_at_k(std::span<const std::size_t> order, std::size_t gt_pos, std::size_t k) {
  const std::size_t r = checked_rank(order, gt_pos, k);
  return r <= k ? 1.0 / std::log2(static_cast<double>(r) + 1.0) : 0.0;
}

double mrr_at_k(std::span<const std::size_t> order, std::size_t gt_pos, std::size_t k) {
  const std::size_t r = checked_rank(order, gt_pos, k);
  return r <= k ? 1.0 / static_cast<double>(r) : 0.0;
}

double hit_at_k(std::span<const std::size_t> order, std::size_t gt_pos, std::size_t k) {
  return checked_rank(order, gt_pos, k) <= k ? 1.0 : 0.0;
}

MetricStat mean_and_std(std::span<const double> values) {
  MetricStat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string format_report_table(const MetricReport& r) {
  std::string out = "label\tmetric\tk\tmean\tstd\tn_users\trepeats\tfailed_users\n";
  char buf[256];
  auto emit = [&](const char* name, const std::array<MetricStat, 3>& stats) {
    for (std::size_t i = 0; i < kReportCutoffs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s\t%s\t%zu\t%.6f\t%.6f\t%zu\t%zu\t%zu\n",
                    r.label.c_str(), name, kReportCutoffs[i], stats[i].mean, stats[i].std,
                    r.n_users, r.repeats, r.failed_users);
      out += buf;
    }
  };
  emit("ndcg", r.ndcg);
  emit("mrr", r.mrr);
  emit("hit", r.hit);
  return out;
}

std::string format_report_summary(const MetricReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %zu users, %zu repeat%s%s, %zu failed\n",
                r.label.c_str(), r.n_users, r.repeats, r.repeats == 1 ? "" : "s",
                r.single_run ? " (single run)" : "", r.failed_users);
  out += buf;
  auto line = [&](const char* name, const std::array<MetricStat, 3>& stats) {
    out += "  ";
    out += name;
    for (std::size_t i = 0; i < kReportCutoffs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "  @%zu %.4f ± %.4f", kReportCutoffs[i], stats[i].mean,
                    stats[i].std);
      out += buf;
    }
    out += '\n';
  };
  line("NDCG", r.ndcg);
  line("MRR ", r.mrr);
  line("Hit ", r.hit);
  return out;
}

}  // namespace rpp
