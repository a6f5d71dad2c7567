#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace clustercal {

enum class BinScheme { kEqualWidth, kEqualMass, kCluster };
enum class CalibrationMetric { kEce, kMce, kAdaEce };

std::string_view scheme_name(BinScheme scheme);
BinScheme parse_scheme(std::string_view name);
std::string_view metric_name(CalibrationMetric metric);
CalibrationMetric parse_calibration_metric(std::string_view name);

struct BinStats {
  BinScheme scheme = BinScheme::kEqualWidth;
  std::vector<std::size_t> count;
  std::vector<double> observed_rate;    // A(B); 0 for empty bins
  std::vector<double> mean_prediction;  // P(B); 0 for empty bins

  std::size_t num_bins() const { return count.size(); }
  std::size_t total() const;
};

struct MetricResult {
  double value = 0.0;
  BinStats bins;
};

// Bin id per sample. Equal-width bin i (0-based) covers (i/M, (i+1)/M] with the
// first bin closed at 0. Equal-mass bins follow a stable sort of p and receive
// floor(N/M) or ceil(N/M) samples.
std::vector<int> equal_width_bins(std::span<const double> p, std::size_t m);
std::vector<int> equal_mass_bins(std::span<const double> p, std::size_t m);

BinStats bin_stats(std::span<const double> p, std::span<const int> y, std::span<const int> bin_of,
                   std::size_t n_bins, BinScheme scheme);
BinStats bin_stats(std::span<const double> p, std::span<const int> y, std::size_t m,
                   BinScheme scheme);

double ece_from_bins(const BinStats& bins);
double mce_from_bins(const BinStats& bins);
double ada_ece_from_bins(const BinStats& bins);

MetricResult ece(std::span<const double> p, std::span<const int> y, std::size_t m = 10,
                 BinScheme scheme = BinScheme::kEqualWidth);
MetricResult mce(std::span<const double> p, std::span<const int> y, std::size_t m = 10,
                 BinScheme scheme = BinScheme::kEqualWidth);
// Always equal-mass; requires m <= N.
MetricResult ada_ece(std::span<const double> p, std::span<const int> y, std::size_t m = 10);

// Base metric arithmetic over bins given by cluster ids. n_clusters = 0 means
// max(label) + 1.
MetricResult cece(std::span<const double> p, std::span<const int> y,
                  std::span<const int> cluster_labels, CalibrationMetric base = CalibrationMetric::kEce,
                  std::size_t n_clusters = 0);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
};

struct AucResult {
  double value = 0.0;
  RocCurve roc;  // one point per distinct score, tied scores move diagonally
};

// Mann-Whitney statistic, ties counted one half.
AucResult auc(std::span<const double> scores, std::span<const int> y);

struct ScalarMetrics {
  double acc = 0.0;
  double ce = 0.0;
  double mse_brier = 0.0;
  double rmse = 0.0;
};

ScalarMetrics scalar_metrics(std::span<const double> p, std::span<const int> y,
                             double decision_threshold = 0.5);

struct ReliabilityRow {
  int bin = 0;
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
  std::size_t count = 0;
  double mean_prediction = 0.0;
  double observed_rate = 0.0;
};

// Equal-width rows use the nominal bin range; equal-mass rows use the range of
// the member predictions.
std::vector<ReliabilityRow> reliability_data(std::span<const double> p, std::span<const int> y,
                                             std::size_t m = 10,
                                             BinScheme scheme = BinScheme::kEqualWidth);

struct RejectionCurve {
  std::vector<double> thresholds;
  std::vector<std::size_t> accepted;
  std::vector<std::size_t> rejected;
  std::vector<double> error_rate;      // 0 when nothing is accepted
  std::vector<double> rejection_rate;
  std::vector<bool> empty;             // accepted set empty at this threshold
};

// Uncertainty 2 * min(p, 1 - p); a sample is accepted when it is <= t.
double rejection_uncertainty(double p);
std::vector<double> default_rejection_grid();  // 0.0, 0.1, ..., 0.9
RejectionCurve rejection_curve(std::span<const double> p, std::span<const int> y,
                               std::span<const double> thresholds, double decision_threshold = 0.5);

}  // namespace clustercal
