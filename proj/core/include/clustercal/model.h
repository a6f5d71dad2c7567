#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/data.h"
#include "clustercal/matrix.h"

namespace clustercal {

double logistic(double margin);
double logit(double probability);
// log(1 + exp(z)) without overflow.
double softplus(double z);

// A sample goes left when x[feature] <= threshold.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Logit contribution (learning rate applied). Meaningful at leaves; internal
  // nodes keep the value they would have had as a leaf.
  double value = 0.0;
  // Sum of training hessians reaching the node.
  double cover = 0.0;
  // Loss reduction of the split (0 at leaves).
  double gain = 0.0;

  bool is_leaf() const { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }
  std::size_t num_leaves() const;
  int depth() const;
  // Structural checks: children present in pairs, covers positive and additive.
  void validate(std::size_t n_features) const;

  bool operator==(const Tree&) const = default;
};

struct GbtParams {
  int n_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  double lambda_l2 = 1.0;

  void validate() const;
  bool operator==(const GbtParams&) const = default;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.0;
  std::size_t n_features = 0;
  GbtParams params;
  std::uint64_t seed = 0;
  // Mean training log-loss before the first tree and after every round.
  std::vector<double> round_loss;

  double margin(std::span<const double> x) const;
  // Total split gain per feature over all trees.
  std::vector<double> feature_gain() const;

  bool operator==(const TreeEnsemble&) const = default;
};

enum class ScoreSource { kBuiltin, kExternal };

struct ScoreSet {
  std::vector<double> margins;
  std::vector<double> probabilities;
  ScoreSource source = ScoreSource::kBuiltin;
  std::vector<std::string> sample_ids;  // optional; empty when not known

  std::size_t size() const { return probabilities.size(); }
  ScoreSet subset(std::span<const std::size_t> indices) const;
};

// probabilities = logistic(margins), kept strictly inside (0,1).
ScoreSet scores_from_margins(std::vector<double> margins, ScoreSource source);

// Second-order logistic boosting with exact greedy splits over sorted unique
// values and midpoint thresholds. Ties between candidate splits go to the
// lowest feature index, then the lowest threshold. A round whose tree would
// raise the training loss has its leaves halved until it does not.
TreeEnsemble fit_gbt(const Dataset& train, const GbtParams& params, std::uint64_t seed);

ScoreSet predict(const TreeEnsemble& ensemble, const Matrix& x);

// N x n_trees leaf node ids.
struct LeafMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> ids;

  int operator()(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
};

LeafMatrix leaf_indices(const TreeEnsemble& ensemble, const Matrix& x);

std::string ensemble_to_json(const TreeEnsemble& ensemble);
TreeEnsemble ensemble_from_json(std::string_view json);

// CSV with columns sample_id, probability and/or margin. When only
// probabilities are present they are clipped to [clip, 1 - clip] before the
// logit is taken.
ScoreSet load_external_scores(const std::filesystem::path& path, double clip = 1e-6);
ScoreSet parse_external_scores(const CsvTable& table, double clip = 1e-6);

// Reorders `scores` to follow `sample_ids`; every id must be present exactly once.
ScoreSet align_scores(const ScoreSet& scores, std::span<const std::string> sample_ids);

}  // namespace clustercal
