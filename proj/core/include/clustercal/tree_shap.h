#pragma once

#include <span>

#include "clustercal/matrix.h"
#include "clustercal/model.h"

namespace clustercal {

struct ShapResult {
  Matrix values;  // N x n_features
  double base_value = 0.0;
};

// Path-dependent TreeSHAP: exact Shapley values of the margin where absent
// features are marginalised with the cover-weighted tree distribution.
// base_value + row sum equals the margin of each sample.
ShapResult tree_shap(const TreeEnsemble& ensemble, const Matrix& x);

// Adds one tree's attributions for x into phi (length n_features).
void tree_shap_accumulate(const Tree& tree, std::span<const double> x, std::span<double> phi);

// Cover-weighted mean leaf value.
double expected_value(const Tree& tree);

}  // namespace clustercal
