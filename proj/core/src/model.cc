#include "clustercal/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "clustercal/error.h"
#include "json_util.h"

namespace clustercal {
namespace {

constexpr double kProbabilityFloor = std::numeric_limits<double>::min();
constexpr double kProbabilityCeil = 1.0 - 0x1.0p-53;

}  // namespace

double logistic(double margin) {
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

double logit(double probability) { return std::log(probability) - std::log1p(-probability); }

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

int Tree::leaf_index(std::span<const double> x) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const auto& node = nodes[id];
    id = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return id;
}

std::size_t Tree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int Tree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[nodes[i].left] = level[i] + 1;
      level[nodes[i].right] = level[i] + 1;
    }
  }
  return deepest;
}

void Tree::validate(std::size_t n_features) const {
  if (nodes.empty()) throw ValidationError("tree: no nodes");
  const int n = static_cast<int>(nodes.size());
  std::vector<int> parents(nodes.size(), 0);
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes[i];
    if (!(node.cover > 0.0) || !std::isfinite(node.cover)) {
      throw ValidationError("tree: node " + std::to_string(i) + " has non-positive cover");
    }
    if (!std::isfinite(node.value) || !std::isfinite(node.threshold)) {
      throw ValidationError("tree: node " + std::to_string(i) + " has non-finite values");
    }
    if ((node.left < 0) != (node.right < 0)) {
      throw ValidationError("tree: node " + std::to_string(i) + " has a single child");
    }
    if (node.is_leaf()) continue;
    if (node.left <= i || node.right <= i || node.left >= n || node.right >= n) {
      throw ValidationError("tree: node " + std::to_string(i) + " has invalid children");
    }
    if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features) {
      throw ValidationError("tree: node " + std::to_string(i) + " splits on unknown feature");
    }
    ++parents[node.left];
    ++parents[node.right];
    const double child_cover = nodes[node.left].cover + nodes[node.right].cover;
    if (std::abs(child_cover - node.cover) > 1e-9 * std::max(1.0, node.cover)) {
      throw ValidationError("tree: node " + std::to_string(i) + " cover is not additive");
    }
  }
  for (int i = 1; i < n; ++i) {
    if (parents[i] != 1) throw ValidationError("tree: node " + std::to_string(i) + " is orphaned");
  }
}

void GbtParams::validate() const {
  if (n_trees < 0) throw ValidationError("gbt: n_trees must be >= 0");
  if (max_depth < 1) throw ValidationError("gbt: max_depth must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("gbt: learning_rate must be positive");
  if (!(min_child_weight > 0.0)) throw ValidationError("gbt: min_child_weight must be positive");
  if (!(lambda_l2 > 0.0)) throw ValidationError("gbt: lambda_l2 must be positive");
}

double TreeEnsemble::margin(std::span<const double> x) const {
  double m = base_score;
  for (const auto& tree : trees) m += tree.predict(x);
  return m;
}

std::vector<double> TreeEnsemble::feature_gain() const {
  std::vector<double> gain(n_features, 0.0);
  for (const auto& tree : trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) gain[node.feature] += node.gain;
    }
  }
  return gain;
}

ScoreSet ScoreSet::subset(std::span<const std::size_t> indices) const {
  ScoreSet out;
  out.source = source;
  out.margins.reserve(indices.size());
  out.probabilities.reserve(indices.size());
  for (auto i : indices) {
    out.margins.push_back(margins[i]);
    out.probabilities.push_back(probabilities[i]);
    if (!sample_ids.empty()) out.sample_ids.push_back(sample_ids[i]);
  }
  return out;
}

ScoreSet scores_from_margins(std::vector<double> margins, ScoreSource source) {
  ScoreSet out;
  out.source = source;
  out.probabilities.reserve(margins.size());
  for (double m : margins) {
    out.probabilities.push_back(std::clamp(logistic(m), kProbabilityFloor, kProbabilityCeil));
  }
  out.margins = std::move(margins);
  return out;
}

ScoreSet predict(const TreeEnsemble& ensemble, const Matrix& x) {
  if (x.cols() != ensemble.n_features) {
    throw ValidationError("predict: expected " + std::to_string(ensemble.n_features) +
                          " features, got " + std::to_string(x.cols()));
  }
  std::vector<double> margins(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) margins[i] = ensemble.margin(x.row(i));
  return scores_from_margins(std::move(margins), ScoreSource::kBuiltin);
}

LeafMatrix leaf_indices(const TreeEnsemble& ensemble, const Matrix& x) {
  if (x.cols() != ensemble.n_features) {
    throw ValidationError("leaf_indices: expected " + std::to_string(ensemble.n_features) +
                          " features, got " + std::to_string(x.cols()));
  }
  LeafMatrix out;
  out.rows = x.rows();
  out.cols = ensemble.trees.size();
  out.ids.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t t = 0; t < out.cols; ++t) out.ids[i * out.cols + t] = ensemble.trees[t].leaf_index(row);
  }
  return out;
}

std::string ensemble_to_json(const TreeEnsemble& ensemble) {
  detail::OrderedJson j;
  j["format"] = "clustercal.tree_ensemble.v1";
  j["n_features"] = ensemble.n_features;
  j["base_score"] = ensemble.base_score;
  j["seed"] = ensemble.seed;
  j["params"] = {{"n_trees", ensemble.params.n_trees},
                 {"max_depth", ensemble.params.max_depth},
                 {"learning_rate", ensemble.params.learning_rate},
                 {"min_child_weight", ensemble.params.min_child_weight},
                 {"lambda_l2", ensemble.params.lambda_l2}};
  j["round_loss"] = ensemble.round_loss;
  auto trees = detail::OrderedJson::array();
  for (const auto& tree : ensemble.trees) {
    detail::OrderedJson t;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value, cover, gain;
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
      cover.push_back(n.cover);
      gain.push_back(n.gain);
    }
    t["feature"] = feature;
    t["threshold"] = threshold;
    t["left"] = left;
    t["right"] = right;
    t["value"] = value;
    t["cover"] = cover;
    t["gain"] = gain;
    trees.push_back(std::move(t));
  }
  j["trees"] = std::move(trees);
  return detail::dump(j);
}

TreeEnsemble ensemble_from_json(std::string_view json) {
  const auto j = detail::parse_json(json, "tree ensemble");
  TreeEnsemble ens;
  try {
    ens.n_features = j.at("n_features").get<std::size_t>();
    ens.base_score = j.at("base_score").get<double>();
    ens.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("params")) {
      const auto& p = j.at("params");
      ens.params.n_trees = p.at("n_trees").get<int>();
      ens.params.max_depth = p.at("max_depth").get<int>();
      ens.params.learning_rate = p.at("learning_rate").get<double>();
      ens.params.min_child_weight = p.at("min_child_weight").get<double>();
      ens.params.lambda_l2 = p.at("lambda_l2").get<double>();
    }
    ens.round_loss = detail::get_or(j, "round_loss", std::vector<double>{});
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const auto cover = t.at("cover").get<std::vector<double>>();
      const auto gain = detail::get_or(t, "gain", std::vector<double>(feature.size(), 0.0));
      const std::size_t n = feature.size();
      if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n ||
          cover.size() != n || gain.size() != n) {
        throw ValidationError("tree ensemble: node arrays have different lengths");
      }
      Tree tree;
      tree.nodes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        tree.nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i], cover[i], gain[i]};
      }
      tree.validate(ens.n_features);
      ens.trees.push_back(std::move(tree));
    }
  } catch (const detail::Json::exception& e) {
    throw ValidationError(std::string("tree ensemble: ") + e.what());
  }
  return ens;
}

ScoreSet parse_external_scores(const CsvTable& table, double clip) {
  if (!(clip > 0.0 && clip < 0.5)) throw ValidationError("external scores: clip must be in (0, 0.5)");
  const int id_col = table.column("sample_id");
  const int prob_col = table.column("probability");
  const int margin_col = table.column("margin");
  if (id_col < 0) throw ValidationError("external scores: missing sample_id column");
  if (prob_col < 0 && margin_col < 0) {
    throw ValidationError("external scores: need a probability or margin column");
  }
  std::vector<double> margins;
  std::vector<std::string> ids;
  margins.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ids.emplace_back(trim(row[id_col]));
    double value = 0.0;
    if (margin_col >= 0) {
      if (!parse_double(row[margin_col], value) || !std::isfinite(value)) {
        throw ValidationError("external scores: row " + std::to_string(r + 1) + ": bad margin");
      }
      margins.push_back(value);
    } else {
      if (!parse_double(row[prob_col], value) || !(value >= 0.0 && value <= 1.0)) {
        throw ValidationError("external scores: row " + std::to_string(r + 1) +
                              ": probability outside [0,1]");
      }
      margins.push_back(logit(std::clamp(value, clip, 1.0 - clip)));
    }
  }
  auto out = scores_from_margins(std::move(margins), ScoreSource::kExternal);
  out.sample_ids = std::move(ids);
  return out;
}

ScoreSet load_external_scores(const std::filesystem::path& path, double clip) {
  return parse_external_scores(read_csv(path), clip);
}

ScoreSet align_scores(const ScoreSet& scores, std::span<const std::string> sample_ids) {
  if (scores.sample_ids.size() != scores.size()) {
    throw ValidationError("align_scores: scores carry no sample ids");
  }
  if (scores.size() != sample_ids.size()) {
    throw ValidationError("align_scores: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(sample_ids.size()) + " samples");
  }
  std::map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!position.emplace(scores.sample_ids[i], i).second) {
      throw ValidationError("align_scores: duplicate sample id '" + scores.sample_ids[i] + "'");
    }
  }
  std::vector<std::size_t> order;
  order.reserve(sample_ids.size());
  for (const auto& id : sample_ids) {
    auto it = position.find(id);
    if (it == position.end()) throw ValidationError("align_scores: no score for sample '" + id + "'");
    order.push_back(it->second);
  }
  return scores.subset(order);
}

}  // namespace clustercal
