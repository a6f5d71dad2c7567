#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/metrics.h"

namespace clustercal {

// Metric evaluated on each subsample. Lower is better for every metric except
// auc and acc.
enum class PairedMetric { kEce, kMce, kAdaEce, kCece, kAuc, kAcc, kCe, kBrier, kRmse };

std::string_view paired_metric_name(PairedMetric metric);
PairedMetric parse_paired_metric(std::string_view name);

struct PairedTestOptions {
  PairedMetric metric = PairedMetric::kEce;
  double fraction = 0.3;
  int iterations = 30;
  std::uint64_t seed = 0;
  std::size_t bins = 10;
  BinScheme scheme = BinScheme::kEqualWidth;
  CalibrationMetric cece_base = CalibrationMetric::kEce;
  double decision_threshold = 0.5;
  int max_resamples = 1000;
};

struct PairedTestResult {
  std::string name_a;
  std::string name_b;
  std::string metric;
  std::vector<double> differences;  // metric(A) - metric(B), one per iteration
  double mean_difference = 0.0;
  double sd_difference = 0.0;
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_one_sided_less = 1.0;  // H1: mean difference < 0
  double p_two_sided = 1.0;
  int resampled = 0;              // subsamples redrawn because the metric was undefined
  bool zero_variance = false;
};

// Metric value on the given subset, or nullopt when undefined there.
std::optional<double> paired_metric_value(PairedMetric metric, std::span<const double> p, std::span<const int> y,
                                          std::span<const int> cluster_labels, const PairedTestOptions& options);

// Each iteration i draws floor(fraction * N) indices without replacement from a
// generator seeded with seed + i and records metric(A) - metric(B) on them.
// The t statistic uses the sample standard deviation with n - 1 degrees of
// freedom. The subsamples overlap, so the p-values are optimistic.
PairedTestResult paired_resample_test(std::span<const double> a, std::span<const double> b, std::span<const int> y,
                                      const PairedTestOptions& options = {},
                                      std::span<const int> cluster_labels = {});

// Student t distribution helpers.
double student_t_cdf(double t, double df);

}  // namespace clustercal
