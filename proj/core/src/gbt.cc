#include <algorithm>
#include <cmath>
#include <numeric>

#include "clustercal/error.h"
#include "clustercal/model.h"

namespace clustercal {
namespace {

struct NodeSums {
  double grad = 0.0;
  double hess = 0.0;
  std::size_t count = 0;
};

struct ScanState {
  double grad_left = 0.0;
  double hess_left = 0.0;
  double last_value = 0.0;
  bool seen = false;
};

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double mean_log_loss(std::span<const double> margins, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    total += softplus(margins[i]) - labels[i] * margins[i];
  }
  return total / static_cast<double>(margins.size());
}

double midpoint(double lo, double hi) {
  const double mid = lo + 0.5 * (hi - lo);
  // Adjacent doubles: keep lo <= threshold < hi.
  return mid < hi ? mid : lo;
}

class TreeGrower {
 public:
  TreeGrower(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted,
             const std::vector<std::size_t>& usable, const GbtParams& params)
      : x_(x), sorted_(sorted), usable_(usable), params_(params) {}

  // Grows one tree on (grad, hess); leaf_of receives each sample's leaf id.
  Tree grow(std::span<const double> grad, std::span<const double> hess, std::vector<int>& leaf_of) {
    const std::size_t n = x_.rows();
    Tree tree;
    std::vector<NodeSums> sums(1);
    for (std::size_t i = 0; i < n; ++i) {
      sums[0].grad += grad[i];
      sums[0].hess += hess[i];
    }
    sums[0].count = n;
    tree.nodes.emplace_back();
    leaf_of.assign(n, 0);

    std::vector<int> frontier{0};
    for (int depth = 0; depth < params_.max_depth && !frontier.empty(); ++depth) {
      std::vector<int> slot(tree.nodes.size(), -1);
      std::vector<int> active;
      for (int id : frontier) {
        if (sums[id].count >= 2 && sums[id].hess >= 2.0 * params_.min_child_weight) {
          slot[id] = static_cast<int>(active.size());
          active.push_back(id);
        }
      }
      if (active.empty()) break;

      std::vector<BestSplit> best(active.size());
      std::vector<ScanState> scan(active.size());
      for (std::size_t f : usable_) {
        std::fill(scan.begin(), scan.end(), ScanState{});
        for (std::size_t i : sorted_[f]) {
          const int s = slot[leaf_of[i]];
          if (s < 0) continue;
          auto& st = scan[s];
          const double v = x_(i, f);
          if (st.seen && v != st.last_value) {
            const auto& total = sums[active[s]];
            const double hess_right = total.hess - st.hess_left;
            if (st.hess_left >= params_.min_child_weight &&
                hess_right >= params_.min_child_weight) {
              const double grad_right = total.grad - st.grad_left;
              const double gain =
                  0.5 * (score(st.grad_left, st.hess_left) + score(grad_right, hess_right) -
                         score(total.grad, total.hess));
              if (gain > best[s].gain) {
                best[s] = {gain, static_cast<int>(f), midpoint(st.last_value, v)};
              }
            }
          }
          st.grad_left += grad[i];
          st.hess_left += hess[i];
          st.last_value = v;
          st.seen = true;
        }
      }

      std::vector<int> next;
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (best[s].feature < 0) continue;
        const int id = active[s];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        sums.resize(tree.nodes.size());
        auto& node = tree.nodes[id];
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.gain = best[s].gain;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      if (next.empty()) break;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree.nodes[leaf_of[i]];
        if (node.is_leaf()) continue;
        leaf_of[i] = x_(i, node.feature) <= node.threshold ? node.left : node.right;
        auto& child = sums[leaf_of[i]];
        child.grad += grad[i];
        child.hess += hess[i];
        ++child.count;
      }
      frontier = std::move(next);
    }

    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      tree.nodes[id].value = -sums[id].grad / (sums[id].hess + params_.lambda_l2) * params_.learning_rate;
    }
    // Children always follow their parent, so a reverse sweep is bottom-up.
    for (std::size_t id = tree.nodes.size(); id-- > 0;) {
      auto& node = tree.nodes[id];
      node.cover = node.is_leaf() ? sums[id].hess
                                  : tree.nodes[node.left].cover + tree.nodes[node.right].cover;
    }
    return tree;
  }

 private:
  double score(double g, double h) const { return g * g / (h + params_.lambda_l2); }

  const Matrix& x_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  const std::vector<std::size_t>& usable_;
  const GbtParams& params_;
};

}  // namespace

TreeEnsemble fit_gbt(const Dataset& train, const GbtParams& params, std::uint64_t seed) {
  params.validate();
  train.validate();
  const std::size_t n = train.size();
  const std::size_t d = train.n_features();
  const auto positives = static_cast<std::size_t>(std::count(train.labels.begin(), train.labels.end(), 1));
  if (positives == 0 || positives == n) {
    throw ValidationError("fit_gbt: training set contains a single class");
  }

  std::vector<std::size_t> usable;
  std::vector<std::vector<std::size_t>> sorted(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& order = sorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return train.features(a, f) < train.features(b, f);
    });
    if (train.features(order.front(), f) < train.features(order.back(), f)) usable.push_back(f);
  }
  if (usable.empty()) throw ValidationError("fit_gbt: no usable (non-constant) features");

  TreeEnsemble ens;
  ens.n_features = d;
  ens.params = params;
  ens.seed = seed;
  ens.base_score = logit(static_cast<double>(positives) / static_cast<double>(n));

  std::vector<double> margins(n, ens.base_score);
  std::vector<double> grad(n), hess(n), updated(n);
  std::vector<int> leaf_of;
  double loss = mean_log_loss(margins, train.labels);
  ens.round_loss.push_back(loss);

  TreeGrower grower(train.features, sorted, usable, params);
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(margins[i]);
      grad[i] = p - train.labels[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    Tree tree = grower.grow(grad, hess, leaf_of);

    double new_loss = 0.0;
    for (int halving = 0;; ++halving) {
      for (std::size_t i = 0; i < n; ++i) updated[i] = margins[i] + tree.nodes[leaf_of[i]].value;
      new_loss = mean_log_loss(updated, train.labels);
      if (new_loss <= loss + 1e-12) break;
      const double factor = halving < 60 ? 0.5 : 0.0;
      for (auto& node : tree.nodes) node.value *= factor;
    }
    margins.swap(updated);
    loss = new_loss;
    ens.round_loss.push_back(loss);
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

}  // namespace clustercal
