#include "clustercal/tree_shap.h"

#include <algorithm>
#include <string>
#include <vector>

#include "clustercal/error.h"

namespace clustercal {
namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight += one_fraction * path[i].weight * (i + 1) / static_cast<double>(depth + 1);
    path[i].weight = zero_fraction * path[i].weight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next * (depth + 1) / ((i + 1) * one);
      next = tmp - path[i].weight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      path[i].weight = path[i].weight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total weight of the path with element `index` removed.
double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next = path[i].weight - tmp * zero * ((depth - i) / static_cast<double>(depth + 1));
    } else {
      total += (path[i].weight / zero) / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

void recurse(const Tree& tree, std::span<const double> x, std::span<double> phi, int node_id,
             int depth, PathElement* parent_path, double zero_fraction, double one_fraction,
             int feature) {
  PathElement* path = parent_path + depth + 1;
  std::copy(parent_path, parent_path + depth + 1, path);
  extend_path(path, depth, zero_fraction, one_fraction, feature);

  const TreeNode& node = tree.nodes[node_id];
  if (node.is_leaf()) {
    for (int i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      phi[path[i].feature] += w * (path[i].one_fraction - path[i].zero_fraction) * node.value;
    }
    return;
  }

  const int hot = x[node.feature] <= node.threshold ? node.left : node.right;
  const int cold = hot == node.left ? node.right : node.left;
  const double hot_zero = tree.nodes[hot].cover / node.cover;
  const double cold_zero = tree.nodes[cold].cover / node.cover;
  double incoming_zero = 1.0;
  double incoming_one = 1.0;

  // A feature seen higher up the path is unwound and re-extended here.
  int index = 0;
  while (index <= depth && path[index].feature != node.feature) ++index;
  if (index <= depth) {
    incoming_zero = path[index].zero_fraction;
    incoming_one = path[index].one_fraction;
    unwind_path(path, depth, index);
    --depth;
  }
  recurse(tree, x, phi, hot, depth + 1, path, hot_zero * incoming_zero, incoming_one,
          node.feature);
  recurse(tree, x, phi, cold, depth + 1, path, cold_zero * incoming_zero, 0.0, node.feature);
}

void check_covers(const Tree& tree) {
  if (tree.nodes.empty()) throw ValidationError("tree_shap: empty tree");
  for (const auto& node : tree.nodes) {
    if (!(node.cover > 0.0)) throw ValidationError("tree_shap: node with non-positive cover");
  }
}

}  // namespace

void tree_shap_accumulate(const Tree& tree, std::span<const double> x, std::span<double> phi) {
  check_covers(tree);
  const int max_depth = tree.depth();
  std::vector<PathElement> buffer(static_cast<std::size_t>((max_depth + 2) * (max_depth + 3) / 2));
  recurse(tree, x, phi, 0, 0, buffer.data(), 1.0, 1.0, -1);
}

double expected_value(const Tree& tree) {
  check_covers(tree);
  double total = 0.0;
  for (const auto& node : tree.nodes) {
    if (node.is_leaf()) total += node.cover * node.value;
  }
  return total / tree.nodes[0].cover;
}

ShapResult tree_shap(const TreeEnsemble& ensemble, const Matrix& x) {
  if (x.cols() != ensemble.n_features) {
    throw ValidationError("tree_shap: expected " + std::to_string(ensemble.n_features) +
                          " features, got " + std::to_string(x.cols()));
  }
  ShapResult result{Matrix(x.rows(), ensemble.n_features), ensemble.base_score};
  for (const auto& tree : ensemble.trees) {
    result.base_value += expected_value(tree);
    const int max_depth = tree.depth();
    std::vector<PathElement> buffer(static_cast<std::size_t>((max_depth + 2) * (max_depth + 3) / 2));
    for (std::size_t r = 0; r < x.rows(); ++r) {
      recurse(tree, x.row(r), result.values.row(r), 0, 0, buffer.data(), 1.0, 1.0, -1);
    }
  }
  return result;
}

}  // namespace clustercal
