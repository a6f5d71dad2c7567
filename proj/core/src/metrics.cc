#include "clustercal/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "clustercal/error.h"

namespace clustercal {
namespace {

void check_inputs(std::span<const double> p, std::span<const int> y, const char* what) {
  if (p.size() != y.size()) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(p.size()) +
                          " predictions, " + std::to_string(y.size()) + " labels)");
  }
  if (p.empty()) throw ValidationError(std::string(what) + ": empty input");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw ValidationError(std::string(what) + ": prediction outside [0,1] at index " +
                            std::to_string(i));
    }
    if (y[i] != 0 && y[i] != 1) {
      throw ValidationError(std::string(what) + ": label not in {0,1} at index " + std::to_string(i));
    }
  }
}

void check_bins(std::size_t m, const char* what) {
  if (m == 0) throw ValidationError(std::string(what) + ": number of bins must be >= 1");
}

}  // namespace

std::string_view scheme_name(BinScheme scheme) {
  switch (scheme) {
    case BinScheme::kEqualWidth: return "equal_width";
    case BinScheme::kEqualMass: return "equal_mass";
    case BinScheme::kCluster: return "cluster";
  }
  return "unknown";
}

BinScheme parse_scheme(std::string_view name) {
  if (name == "equal_width") return BinScheme::kEqualWidth;
  if (name == "equal_mass") return BinScheme::kEqualMass;
  if (name == "cluster") return BinScheme::kCluster;
  throw ValidationError("unknown bin scheme '" + std::string(name) + "'");
}

std::string_view metric_name(CalibrationMetric metric) {
  switch (metric) {
    case CalibrationMetric::kEce: return "ece";
    case CalibrationMetric::kMce: return "mce";
    case CalibrationMetric::kAdaEce: return "adaece";
  }
  return "unknown";
}

CalibrationMetric parse_calibration_metric(std::string_view name) {
  if (name == "ece") return CalibrationMetric::kEce;
  if (name == "mce") return CalibrationMetric::kMce;
  if (name == "adaece") return CalibrationMetric::kAdaEce;
  throw ValidationError("unknown calibration metric '" + std::string(name) + "'");
}

std::size_t BinStats::total() const { return std::accumulate(count.begin(), count.end(), std::size_t{0}); }

std::vector<int> equal_width_bins(std::span<const double> p, std::size_t m) {
  check_bins(m, "equal_width_bins");
  const double md = static_cast<double>(m);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    auto b = static_cast<std::ptrdiff_t>(std::ceil(v * md)) - 1;
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(m) - 1);
    // Settle against the exact edges b/M so rounding in v*M cannot misplace v.
    while (b > 0 && v <= static_cast<double>(b) / md) --b;
    while (b + 1 < static_cast<std::ptrdiff_t>(m) && v > static_cast<double>(b + 1) / md) ++b;
    out[i] = static_cast<int>(b);
  }
  return out;
}

std::vector<int> equal_mass_bins(std::span<const double> p, std::size_t m) {
  check_bins(m, "equal_mass_bins");
  const std::size_t n = p.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<int> out(n);
  for (std::size_t b = 0; b < m; ++b) {
    const std::size_t lo = b * n / m;
    const std::size_t hi = (b + 1) * n / m;
    for (std::size_t r = lo; r < hi; ++r) out[order[r]] = static_cast<int>(b);
  }
  return out;
}

BinStats bin_stats(std::span<const double> p, std::span<const int> y, std::span<const int> bin_of,
                   std::size_t n_bins, BinScheme scheme) {
  check_inputs(p, y, "bin_stats");
  if (bin_of.size() != p.size()) throw ValidationError("bin_stats: bin id length mismatch");
  BinStats stats;
  stats.scheme = scheme;
  stats.count.assign(n_bins, 0);
  std::vector<double> pos(n_bins, 0.0), sum_p(n_bins, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int b = bin_of[i];
    if (b < 0 || static_cast<std::size_t>(b) >= n_bins) {
      throw ValidationError("bin_stats: bin id out of range at index " + std::to_string(i));
    }
    ++stats.count[b];
    pos[b] += y[i];
    sum_p[b] += p[i];
  }
  stats.observed_rate.assign(n_bins, 0.0);
  stats.mean_prediction.assign(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (stats.count[b] == 0) continue;
    const auto c = static_cast<double>(stats.count[b]);
    stats.observed_rate[b] = pos[b] / c;
    stats.mean_prediction[b] = sum_p[b] / c;
  }
  return stats;
}

BinStats bin_stats(std::span<const double> p, std::span<const int> y, std::size_t m,
                   BinScheme scheme) {
  check_bins(m, "bin_stats");
  switch (scheme) {
    case BinScheme::kEqualWidth: return bin_stats(p, y, equal_width_bins(p, m), m, scheme);
    case BinScheme::kEqualMass: return bin_stats(p, y, equal_mass_bins(p, m), m, scheme);
    case BinScheme::kCluster: break;
  }
  throw ValidationError("bin_stats: cluster bins need cluster labels");
}

double ece_from_bins(const BinStats& bins) {
  double total = 0.0;
  for (std::size_t b = 0; b < bins.num_bins(); ++b) {
    total += static_cast<double>(bins.count[b]) * std::abs(bins.observed_rate[b] - bins.mean_prediction[b]);
  }
  return total / static_cast<double>(bins.total());
}

double mce_from_bins(const BinStats& bins) {
  double worst = 0.0;
  for (std::size_t b = 0; b < bins.num_bins(); ++b) {
    if (bins.count[b] == 0) continue;
    worst = std::max(worst, std::abs(bins.observed_rate[b] - bins.mean_prediction[b]));
  }
  return worst;
}

double ada_ece_from_bins(const BinStats& bins) {
  double total = 0.0;
  for (std::size_t b = 0; b < bins.num_bins(); ++b) {
    const double gap = bins.observed_rate[b] - bins.mean_prediction[b];
    total += static_cast<double>(bins.count[b]) * gap * gap;
  }
  return std::sqrt(total / static_cast<double>(bins.total()));
}

MetricResult ece(std::span<const double> p, std::span<const int> y, std::size_t m, BinScheme scheme) {
  MetricResult r;
  r.bins = bin_stats(p, y, m, scheme);
  r.value = ece_from_bins(r.bins);
  return r;
}

MetricResult mce(std::span<const double> p, std::span<const int> y, std::size_t m, BinScheme scheme) {
  MetricResult r;
  r.bins = bin_stats(p, y, m, scheme);
  r.value = mce_from_bins(r.bins);
  return r;
}

MetricResult ada_ece(std::span<const double> p, std::span<const int> y, std::size_t m) {
  check_bins(m, "ada_ece");
  if (m > p.size()) throw ValidationError("ada_ece: more bins than samples");
  MetricResult r;
  r.bins = bin_stats(p, y, m, BinScheme::kEqualMass);
  r.value = ada_ece_from_bins(r.bins);
  return r;
}

MetricResult cece(std::span<const double> p, std::span<const int> y,
                  std::span<const int> cluster_labels, CalibrationMetric base, std::size_t n_clusters) {
  if (cluster_labels.size() != p.size()) throw ValidationError("cece: cluster label length mismatch");
  if (n_clusters == 0) {
    int top = -1;
    for (int c : cluster_labels) top = std::max(top, c);
    n_clusters = static_cast<std::size_t>(top + 1);
  }
  MetricResult r;
  r.bins = bin_stats(p, y, cluster_labels, n_clusters, BinScheme::kCluster);
  switch (base) {
    case CalibrationMetric::kEce: r.value = ece_from_bins(r.bins); break;
    case CalibrationMetric::kMce: r.value = mce_from_bins(r.bins); break;
    case CalibrationMetric::kAdaEce: r.value = ada_ece_from_bins(r.bins); break;
  }
  return r;
}

AucResult auc(std::span<const double> scores, std::span<const int> y) {
  if (scores.size() != y.size()) throw ValidationError("auc: length mismatch");
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw ValidationError("auc: label not in {0,1}");
    if (!std::isfinite(scores[i])) throw ValidationError("auc: non-finite score");
    n_pos += static_cast<std::uint64_t>(y[i]);
  }
  const std::uint64_t n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auc: both classes are required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Descending sweep over tie groups. twice_wins counts 2 per ordered pair and
  // 1 per tied pair, so it stays an exact integer.
  AucResult result;
  result.roc.fpr.push_back(0.0);
  result.roc.tpr.push_back(0.0);
  std::uint64_t tp = 0, fp = 0;
  __extension__ using Wide = unsigned __int128;
  Wide twice_wins = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (y[order[end]] == 1 ? group_pos : group_neg) += 1;
      ++end;
    }
    // Negatives in this group lose to every positive already seen.
    twice_wins += static_cast<Wide>(2) * group_neg * tp +
                  static_cast<Wide>(group_neg) * group_pos;
    tp += group_pos;
    fp += group_neg;
    result.roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
    result.roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    start = end;
  }
  result.value = static_cast<double>(static_cast<long double>(twice_wins) /
                                     (2.0L * static_cast<long double>(n_pos) * static_cast<long double>(n_neg)));
  return result;
}

ScalarMetrics scalar_metrics(std::span<const double> p, std::span<const int> y, double decision_threshold) {
  check_inputs(p, y, "scalar_metrics");
  constexpr double kEps = 1e-12;
  ScalarMetrics m;
  double correct = 0.0, ce = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int predicted = p[i] >= decision_threshold ? 1 : 0;
    correct += predicted == y[i] ? 1.0 : 0.0;
    const double q = std::clamp(p[i], kEps, 1.0 - kEps);
    ce -= y[i] == 1 ? std::log(q) : std::log1p(-q);
    const double diff = y[i] - p[i];
    sq += diff * diff;
  }
  const auto n = static_cast<double>(p.size());
  m.acc = correct / n;
  m.ce = ce / n;
  m.mse_brier = sq / n;
  m.rmse = std::sqrt(m.mse_brier);
  return m;
}

std::vector<ReliabilityRow> reliability_data(std::span<const double> p, std::span<const int> y,
                                             std::size_t m, BinScheme scheme) {
  check_inputs(p, y, "reliability_data");
  check_bins(m, "reliability_data");
  std::vector<int> bin_of;
  if (scheme == BinScheme::kEqualWidth) {
    bin_of = equal_width_bins(p, m);
  } else if (scheme == BinScheme::kEqualMass) {
    bin_of = equal_mass_bins(p, m);
  } else {
    throw ValidationError("reliability_data: scheme must be equal_width or equal_mass");
  }
  const BinStats stats = bin_stats(p, y, bin_of, m, scheme);
  std::vector<ReliabilityRow> rows(m);
  std::vector<double> lo(m, 1.0), hi(m, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    lo[bin_of[i]] = std::min(lo[bin_of[i]], p[i]);
    hi[bin_of[i]] = std::max(hi[bin_of[i]], p[i]);
  }
  for (std::size_t b = 0; b < m; ++b) {
    auto& row = rows[b];
    row.bin = static_cast<int>(b);
    if (scheme == BinScheme::kEqualWidth) {
      row.lower = static_cast<double>(b) / static_cast<double>(m);
      row.upper = static_cast<double>(b + 1) / static_cast<double>(m);
    } else if (stats.count[b] > 0) {
      row.lower = lo[b];
      row.upper = hi[b];
    }
    row.center = 0.5 * (row.lower + row.upper);
    row.count = stats.count[b];
    row.mean_prediction = stats.mean_prediction[b];
    row.observed_rate = stats.observed_rate[b];
  }
  return rows;
}

double rejection_uncertainty(double p) { return 2.0 * std::min(p, 1.0 - p); }

std::vector<double> default_rejection_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

RejectionCurve rejection_curve(std::span<const double> p, std::span<const int> y,
                               std::span<const double> thresholds, double decision_threshold) {
  check_inputs(p, y, "rejection_curve");
  std::vector<double> u(p.size());
  std::vector<int> wrong(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    u[i] = rejection_uncertainty(p[i]);
    wrong[i] = (p[i] >= decision_threshold ? 1 : 0) != y[i] ? 1 : 0;
  }
  RejectionCurve curve;
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("rejection_curve: threshold outside [0,1]");
    std::size_t accepted = 0, errors = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (u[i] <= t) {
        ++accepted;
        errors += static_cast<std::size_t>(wrong[i]);
      }
    }
    const auto n = static_cast<double>(p.size());
    curve.thresholds.push_back(t);
    curve.accepted.push_back(accepted);
    curve.rejected.push_back(p.size() - accepted);
    curve.error_rate.push_back(accepted == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(accepted));
    curve.rejection_rate.push_back(static_cast<double>(p.size() - accepted) / n);
    curve.empty.push_back(accepted == 0);
  }
  return curve;
}

}  // namespace clustercal
