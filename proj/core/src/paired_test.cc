#include "clustercal/paired_test.h"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "clustercal/error.h"
#include "clustercal/random.h"

namespace clustercal {

std::string_view paired_metric_name(PairedMetric metric) {
  switch (metric) {
    case PairedMetric::kEce: return "ece";
    case PairedMetric::kMce: return "mce";
    case PairedMetric::kAdaEce: return "adaece";
    case PairedMetric::kCece: return "cece";
    case PairedMetric::kAuc: return "auc";
    case PairedMetric::kAcc: return "acc";
    case PairedMetric::kCe: return "ce";
    case PairedMetric::kBrier: return "mse_brier";
    case PairedMetric::kRmse: return "rmse";
  }
  return "unknown";
}

PairedMetric parse_paired_metric(std::string_view name) {
  for (auto m : {PairedMetric::kEce, PairedMetric::kMce, PairedMetric::kAdaEce, PairedMetric::kCece,
                 PairedMetric::kAuc, PairedMetric::kAcc, PairedMetric::kCe, PairedMetric::kBrier,
                 PairedMetric::kRmse}) {
    if (paired_metric_name(m) == name) return m;
  }
  throw ValidationError("unknown paired-test metric '" + std::string(name) + "'");
}

double student_t_cdf(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

std::optional<double> paired_metric_value(PairedMetric metric, std::span<const double> p, std::span<const int> y,
                                          std::span<const int> cluster_labels, const PairedTestOptions& options) {
  switch (metric) {
    case PairedMetric::kEce: return ece(p, y, options.bins, options.scheme).value;
    case PairedMetric::kMce: return mce(p, y, options.bins, options.scheme).value;
    case PairedMetric::kAdaEce:
      if (options.bins > p.size()) return std::nullopt;
      return ada_ece(p, y, options.bins).value;
    case PairedMetric::kCece: return cece(p, y, cluster_labels, options.cece_base).value;
    case PairedMetric::kAuc: {
      const auto pos = std::count(y.begin(), y.end(), 1);
      if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) return std::nullopt;
      return auc(p, y).value;
    }
    case PairedMetric::kAcc: return scalar_metrics(p, y, options.decision_threshold).acc;
    case PairedMetric::kCe: return scalar_metrics(p, y, options.decision_threshold).ce;
    case PairedMetric::kBrier: return scalar_metrics(p, y, options.decision_threshold).mse_brier;
    case PairedMetric::kRmse: return scalar_metrics(p, y, options.decision_threshold).rmse;
  }
  return std::nullopt;
}

PairedTestResult paired_resample_test(std::span<const double> a, std::span<const double> b, std::span<const int> y,
                                      const PairedTestOptions& options, std::span<const int> cluster_labels) {
  const std::size_t n = y.size();
  if (a.size() != n || b.size() != n) throw ValidationError("paired test: inputs differ in length");
  if (!(options.fraction > 0.0 && options.fraction <= 1.0)) {
    throw ValidationError("paired test: fraction must be in (0, 1]");
  }
  if (options.iterations < 2) throw ValidationError("paired test: iterations must be >= 2");
  if (options.metric == PairedMetric::kCece && cluster_labels.size() != n) {
    throw ValidationError("paired test: cece needs one cluster label per sample");
  }
  const auto m = static_cast<std::size_t>(std::floor(options.fraction * static_cast<double>(n)));
  if (m == 0) throw ValidationError("paired test: subsample would be empty");

  PairedTestResult result;
  result.metric = std::string(paired_metric_name(options.metric));
  std::vector<std::size_t> pool(n);
  std::vector<double> sa(m), sb(m);
  std::vector<int> sy(m), sc(cluster_labels.empty() ? 0 : m);
  for (int it = 0; it < options.iterations; ++it) {
    bool done = false;
    for (int attempt = 0; attempt <= options.max_resamples && !done; ++attempt) {
      const std::uint64_t base = options.seed + static_cast<std::uint64_t>(it);
      Rng rng(attempt == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(attempt)));
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      // Partial Fisher-Yates: the first m slots are the subsample.
      for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng.index(n - i)]);
      for (std::size_t i = 0; i < m; ++i) {
        sa[i] = a[pool[i]];
        sb[i] = b[pool[i]];
        sy[i] = y[pool[i]];
        if (!sc.empty()) sc[i] = cluster_labels[pool[i]];
      }
      const auto va = paired_metric_value(options.metric, sa, sy, sc, options);
      const auto vb = paired_metric_value(options.metric, sb, sy, sc, options);
      if (va && vb) {
        result.differences.push_back(*va - *vb);
        done = true;
      } else {
        ++result.resampled;
      }
    }
    if (!done) throw RuntimeError("paired test: metric undefined on every resample");
  }

  const auto k = static_cast<double>(result.differences.size());
  result.degrees_of_freedom = static_cast<int>(result.differences.size()) - 1;
  result.mean_difference = std::accumulate(result.differences.begin(), result.differences.end(), 0.0) / k;
  double ss = 0.0;
  for (double d : result.differences) ss += (d - result.mean_difference) * (d - result.mean_difference);
  result.sd_difference = std::sqrt(ss / (k - 1.0));

  if (result.sd_difference == 0.0) {
    result.zero_variance = true;
    if (result.mean_difference == 0.0) {
      result.t_statistic = 0.0;
      result.p_one_sided_less = 1.0;
      result.p_two_sided = 1.0;
      return result;
    }
    result.t_statistic = result.mean_difference > 0.0 ? std::numeric_limits<double>::infinity()
                                                      : -std::numeric_limits<double>::infinity();
  } else {
    result.t_statistic = result.mean_difference / (result.sd_difference / std::sqrt(k));
  }
  const double df = static_cast<double>(result.degrees_of_freedom);
  result.p_one_sided_less = student_t_cdf(result.t_statistic, df);
  result.p_two_sided = std::min(1.0, 2.0 * student_t_cdf(-std::abs(result.t_statistic), df));
  return result;
}

}  // namespace clustercal
