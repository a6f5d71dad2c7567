#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/model.h"

namespace clustercal {

enum class CalibrationMethod {
  kPlatt,
  kTemperature,
  kBeta,
  kDirichlet2,
  kHistogram,
  kIsotonic,
  kPlattBin,
  kConstant,
};

std::string_view method_name(CalibrationMethod method);
CalibrationMethod parse_method(std::string_view name);
// platt, temperature, beta and dirichlet2.
bool is_parametric(CalibrationMethod method);

struct FitData {
  std::vector<double> margins;
  std::vector<double> probabilities;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  void validate() const;

  static FitData from_scores(const ScoreSet& scores, std::span<const int> labels);
  FitData subset(std::span<const std::size_t> indices) const;
};

struct CalibratorOptions {
  std::size_t bins = 10;            // histogram and platt_bin
  bool laplace = true;              // histogram bin outputs
  bool beta_constrained = true;     // a >= 0, b >= 0
  double epsilon = 1e-6;            // output clipping
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;
};

struct FitInfo {
  double objective = 0.0;  // mean NLL at the fitted parameters (unclipped)
  int iterations = 0;
  bool converged = true;

  bool operator==(const FitInfo&) const = default;
};

// Parameter layout by method:
//   platt        params {A, B}: p = 1 / (1 + exp(A m + B))
//   temperature  params {T}:    p = logistic(m / T)
//   beta,
//   dirichlet2   params {w_pos, w_neg, c}: logit p' = w_pos ln p + w_neg ln(1-p) + c
//                (beta: a = w_pos, b = -w_neg)
//   constant     params {p0}
//   histogram    edges (interior, ascending), values (one per bin)
//   isotonic     edges (knots), values (fitted value per knot), linear in between
//   platt_bin    edges (interior), params {A_0, B_0, A_1, B_1, ...}
struct Calibrator {
  CalibrationMethod method = CalibrationMethod::kConstant;
  std::vector<double> params;
  std::vector<double> edges;
  std::vector<double> values;
  double epsilon = 1e-6;
  FitInfo info;

  static Calibrator constant(double p0, double epsilon = 1e-6);

  // Unclipped calibrated probability.
  double raw(double margin, double probability) const;
  double calibrate(double margin, double probability) const;

  std::vector<double> apply(const ScoreSet& scores) const;
  // Either span may be empty when the method does not read it.
  std::vector<double> apply(std::span<const double> margins, std::span<const double> probabilities) const;

  // True when the fitted map is non-decreasing in its input.
  bool monotone() const;

  bool operator==(const Calibrator&) const = default;
};

// Single-class data yields a constant with rate (n+ + 1) / (n + 2).
Calibrator fit(CalibrationMethod method, const FitData& data, const CalibratorOptions& options = {});

// Mean negative log-likelihood of the clipped calibrated probabilities.
double nll(const Calibrator& calibrator, const FitData& data);

// Weighted pool-adjacent-violators: the non-decreasing sequence closest to y in
// weighted least squares.
std::vector<double> pool_adjacent_violators(std::span<const double> y, std::span<const double> weights);

// Isotonic fitted value for each sample (ties in probability pooled first).
std::vector<double> isotonic_fitted_values(std::span<const double> probabilities, std::span<const int> labels);

std::string calibrator_to_json(const Calibrator& calibrator);
Calibrator calibrator_from_json(std::string_view json);

}  // namespace clustercal
