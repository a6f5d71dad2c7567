#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/calibrators.h"
#include "clustercal/clustering.h"
#include "clustercal/matrix.h"
#include "clustercal/metrics.h"
#include "clustercal/model.h"

namespace clustercal {

enum class ConstantMode { kLaplace, kRawRate };

struct CclOptions {
  std::size_t min_fit_size = 30;
  ConstantMode constant_mode = ConstantMode::kLaplace;
  CalibratorOptions calibrator;
};

enum class Resolution { kFitted, kConstant, kFallback };
std::string_view resolution_name(Resolution r);

struct ClusterFit {
  std::size_t size = 0;
  std::size_t positives = 0;
  double positive_rate = 0.0;
  Resolution resolution = Resolution::kFallback;
};

// One calibrator per cluster plus the global fallback of the same method.
struct CclModel {
  ClusterModel cluster_model;
  CalibrationMethod method = CalibrationMethod::kPlatt;
  std::size_t min_fit_size = 30;
  Calibrator fallback;
  std::vector<Calibrator> calibrators;  // indexed by cluster id; meaningful unless kFallback
  std::vector<ClusterFit> clusters;

  std::size_t k() const { return clusters.size(); }
  const Calibrator& resolved(int cluster) const;
};

// Homogeneous clusters get a constant, clusters below min_fit_size use the
// fallback, all others are fitted on their own calibration samples.
CclModel train_ccl(const ScoreSet& scores, const Matrix& embedding, const ClusterModel& cluster_model,
                   CalibrationMethod method, std::span<const int> y, const CclOptions& options = {});
// Same, with cluster labels already computed by cluster_model.assign.
CclModel train_ccl_labels(const ScoreSet& scores, std::span<const int> cluster_labels,
                          const ClusterModel& cluster_model, CalibrationMethod method, std::span<const int> y,
                          const CclOptions& options = {});

struct CclOutput {
  std::vector<double> probabilities;
  std::vector<int> labels;
};

CclOutput infer_ccl(const CclModel& model, const ScoreSet& scores, const Matrix& embedding);
std::vector<double> infer_ccl_labels(const CclModel& model, const ScoreSet& scores,
                                     std::span<const int> cluster_labels);

// Fraction of samples in clusters whose within-cluster ECE is strictly lower
// under CCL than under the unified calibrator.
double improved_sample_fraction(std::span<const double> ccl_probabilities,
                                std::span<const double> unified_probabilities, std::span<const int> y,
                                std::span<const int> cluster_labels, std::size_t bins = 10,
                                BinScheme scheme = BinScheme::kEqualWidth);
double improved_sample_fraction(const CclModel& model, const Calibrator& unified, const ScoreSet& scores,
                                const Matrix& embedding, std::span<const int> y, std::size_t bins = 10,
                                BinScheme scheme = BinScheme::kEqualWidth);

std::string ccl_to_json(const CclModel& model);
CclModel ccl_from_json(std::string_view json);

}  // namespace clustercal
