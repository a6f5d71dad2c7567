#include "clustercal/clustering.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "clustercal/error.h"
#include "clustercal/random.h"
#include "serialization.h"

namespace clustercal {
namespace {

constexpr std::uint64_t kKMeansStream = 0x6b6d65616e73ULL;
constexpr std::uint64_t kElbowStream = 0x656c626f77ULL;

void check_embedding(const Matrix& x, std::size_t k, const char* what) {
  if (x.empty() || x.cols() == 0) throw ValidationError(std::string(what) + ": empty embedding");
  if (k == 0) throw ValidationError(std::string(what) + ": k must be >= 1");
  if (k > x.rows()) {
    throw ValidationError(std::string(what) + ": k=" + std::to_string(k) + " exceeds the " +
                          std::to_string(x.rows()) + " samples");
  }
}

Matrix kmeans_plus_plus(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  std::size_t first = rng.index(n);
  std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centers.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        running += d2[i];
        if (running > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Rounding can leave the target unreached; take the last positive weight.
      if (running <= target) {
        while (pick > 0 && d2[pick] == 0.0) --pick;
      }
    } else {
      pick = rng.index(n);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(c)));
  }
  return centers;
}

// Labels and total squared distance for the given centroids.
double assign_all(const Matrix& x, const Matrix& centroids, std::vector<int>& labels) {
  labels.resize(x.rows());
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = squared_distance(x.row(i), centroids.row(0));
    for (std::size_t c = 1; c < centroids.rows(); ++c) {
      const double d = squared_distance(x.row(i), centroids.row(c));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[i] = best;
    inertia += best_d;
  }
  return inertia;
}

std::vector<std::size_t> sizes_of(std::span<const int> labels, std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

Matrix member_means(const Matrix& x, std::span<const int> labels, std::size_t k) {
  Matrix means(k, x.cols());
  const auto sizes = sizes_of(labels, k);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = means.row(static_cast<std::size_t>(labels[i]));
    const auto xi = x.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += xi[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] == 0) continue;
    for (double& v : means.row(c)) v /= static_cast<double>(sizes[c]);
  }
  return means;
}

double ward_cost(std::size_t na, std::size_t nb, std::span<const double> ca, std::span<const double> cb) {
  const auto a = static_cast<double>(na);
  const auto b = static_cast<double>(nb);
  return (a * b) / (a + b) * squared_distance(ca, cb);
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::string_view cluster_method_name(ClusterMethod method) {
  return method == ClusterMethod::kKMeans ? "kmeans" : "agglomerative";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "kmeans") return ClusterMethod::kKMeans;
  if (name == "agglomerative") return ClusterMethod::kAgglomerative;
  throw ValidationError("unknown clustering method '" + std::string(name) + "'");
}

int ClusterModel::assign_one(std::span<const double> x) const {
  if (x.size() != centroids.cols()) {
    throw ValidationError("assign: embedding has " + std::to_string(x.size()) + " dimensions, model expects " +
                          std::to_string(centroids.cols()));
  }
  int best = 0;
  double best_d = squared_distance(x, centroids.row(0));
  for (std::size_t c = 1; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<int> ClusterModel::assign(const Matrix& embedding) const {
  if (centroids.rows() == 0) throw ValidationError("assign: cluster model has no centroids");
  if (embedding.cols() != centroids.cols()) {
    throw ValidationError("assign: embedding has " + std::to_string(embedding.cols()) +
                          " dimensions, model expects " + std::to_string(centroids.cols()));
  }
  std::vector<int> labels;
  assign_all(embedding, centroids, labels);
  return labels;
}

void ClusterModel::set_calibration_stats(std::span<const int> labels, std::span<const int> y) {
  if (labels.size() != y.size()) throw ValidationError("set_calibration_stats: length mismatch");
  calibration_size.assign(k, 0);
  calibration_positives.assign(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (c >= k) throw ValidationError("set_calibration_stats: cluster id out of range");
    ++calibration_size[c];
    calibration_positives[c] += static_cast<std::size_t>(y[i]);
  }
}

ClusterModel fit_kmeans(const Matrix& embedding, std::size_t k, std::uint64_t seed, int max_iterations) {
  check_embedding(embedding, k, "fit_kmeans");
  if (max_iterations < 1) throw ValidationError("fit_kmeans: max_iterations must be >= 1");
  Rng rng(derive_seed(seed, kKMeansStream));
  ClusterModel model;
  model.method = ClusterMethod::kKMeans;
  model.k = k;
  model.seed = seed;
  model.centroids = kmeans_plus_plus(embedding, k, rng);

  std::vector<int> labels, previous;
  for (int it = 0; it < max_iterations; ++it) {
    model.inertia = assign_all(embedding, model.centroids, labels);
    model.inertia_history.push_back(model.inertia);
    model.iterations = it + 1;
    if (it > 0 && labels == previous) break;
    if (it + 1 == max_iterations) break;

    auto sizes = sizes_of(labels, k);
    Matrix means = member_means(embedding, labels, k);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) std::copy(means.row(c).begin(), means.row(c).end(), model.centroids.row(c).begin());
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = embedding.rows();
      double far_d = -1.0;
      for (std::size_t i = 0; i < embedding.rows(); ++i) {
        const auto owner = static_cast<std::size_t>(labels[i]);
        if (sizes[owner] < 2) continue;
        const double d = squared_distance(embedding.row(i), model.centroids.row(owner));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      std::copy(embedding.row(far).begin(), embedding.row(far).end(), model.centroids.row(c).begin());
      --sizes[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      sizes[c] = 1;
    }
    previous = labels;
  }
  model.fit_labels = std::move(labels);
  model.fit_sizes = sizes_of(model.fit_labels, k);
  return model;
}

ClusterModel fit_agglomerative(const Matrix& embedding, std::size_t k) {
  check_embedding(embedding, k, "fit_agglomerative");
  const std::size_t n = embedding.rows();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Merge {
    double cost;
    std::size_t a;
    std::size_t b;
  };
  Matrix centers = embedding;
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  std::vector<std::size_t> chain;
  std::size_t remaining = n;
  std::size_t lowest_active = 0;

  while (remaining > 1) {
    if (chain.empty()) {
      while (!active[lowest_active]) ++lowest_active;
      chain.push_back(lowest_active);
    }
    const std::size_t a = chain.back();
    const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : kNone;
    std::size_t best = prev;
    double best_cost = prev == kNone ? std::numeric_limits<double>::infinity()
                                     : ward_cost(size[a], size[prev], centers.row(a), centers.row(prev));
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j] || j == a) continue;
      const double c = ward_cost(size[a], size[j], centers.row(a), centers.row(j));
      if (c < best_cost) {
        best_cost = c;
        best = j;
      }
    }
    if (best != prev) {
      chain.push_back(best);
      continue;
    }
    chain.pop_back();
    chain.pop_back();
    const std::size_t keep = std::min(a, prev);
    const std::size_t drop = std::max(a, prev);
    const auto wk = static_cast<double>(size[keep]);
    const auto wd = static_cast<double>(size[drop]);
    auto ck = centers.row(keep);
    const auto cd = centers.row(drop);
    for (std::size_t c = 0; c < ck.size(); ++c) ck[c] = (wk * ck[c] + wd * cd[c]) / (wk + wd);
    size[keep] += size[drop];
    active[drop] = false;
    --remaining;
    merges.push_back({best_cost, keep, drop});
  }

  std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.cost < y.cost; });
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t m = 0; m < n - k; ++m) {
    const std::size_t ra = find_root(parent, merges[m].a);
    const std::size_t rb = find_root(parent, merges[m].b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  ClusterModel model;
  model.method = ClusterMethod::kAgglomerative;
  model.k = k;
  model.fit_labels.assign(n, -1);
  std::map<std::size_t, int> id_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find_root(parent, i);
    auto [it, inserted] = id_of_root.emplace(r, static_cast<int>(id_of_root.size()));
    model.fit_labels[i] = it->second;
  }
  model.centroids = member_means(embedding, model.fit_labels, k);
  model.fit_sizes = sizes_of(model.fit_labels, k);
  for (std::size_t i = 0; i < n; ++i) {
    model.inertia += squared_distance(embedding.row(i), model.centroids.row(static_cast<std::size_t>(model.fit_labels[i])));
  }
  model.inertia_history = {model.inertia};
  model.iterations = static_cast<int>(merges.size());
  return model;
}

ElbowResult select_k_elbow(const Matrix& embedding, const ElbowOptions& options, std::uint64_t seed) {
  if (options.step == 0) throw ValidationError("elbow: step must be >= 1");
  if (options.k_min < 2) throw ValidationError("elbow: k_min must be >= 2");
  if (options.k_max < options.k_min) throw ValidationError("elbow: k_max must be >= k_min");
  ElbowResult result;
  for (std::size_t k = options.k_min; k <= options.k_max; k += options.step) result.ks.push_back(k);
  if (result.ks.size() < 3) throw ValidationError("elbow: at least 3 grid points are required");

  Matrix sample = embedding;
  if (options.max_samples > 0 && embedding.rows() > options.max_samples) {
    Rng rng(derive_seed(seed, kElbowStream));
    std::vector<std::size_t> idx(embedding.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(options.max_samples);
    std::sort(idx.begin(), idx.end());
    sample = embedding.select_rows(idx);
  }
  result.samples_used = sample.rows();
  if (options.k_max > sample.rows()) throw ValidationError("elbow: k_max exceeds the number of samples");

  std::vector<std::size_t> smallest;
  for (std::size_t k : result.ks) {
    const ClusterModel m = fit_kmeans(sample, k, seed);
    result.inertias.push_back(m.inertia);
    smallest.push_back(*std::min_element(m.fit_sizes.begin(), m.fit_sizes.end()));
  }
  result.curvature.assign(result.ks.size(), 0.0);
  for (std::size_t j = 1; j + 1 < result.ks.size(); ++j) {
    result.curvature[j] = result.inertias[j - 1] - 2.0 * result.inertias[j] + result.inertias[j + 1];
  }
  std::vector<std::size_t> order;
  for (std::size_t j = 1; j + 1 < result.ks.size(); ++j) order.push_back(j);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return result.curvature[a] > result.curvature[b]; });
  result.unconstrained_k = result.ks[order.front()];
  result.selected_k = result.unconstrained_k;
  if (options.min_cluster_size > 0) {
    result.constraint_satisfied = false;
    for (std::size_t j : order) {
      if (smallest[j] >= options.min_cluster_size) {
        result.selected_k = result.ks[j];
        result.constraint_satisfied = true;
        break;
      }
    }
  }
  return result;
}

ClusterDiagnostics diagnostics(std::size_t k, std::span<const int> labels, std::span<const int> y) {
  if (labels.size() != y.size()) throw ValidationError("diagnostics: length mismatch");
  if (k == 0) throw ValidationError("diagnostics: empty cluster set");
  ClusterDiagnostics d;
  d.clusters.resize(k);
  for (std::size_t c = 0; c < k; ++c) d.clusters[c].cluster = static_cast<int>(c);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ValidationError("diagnostics: cluster id out of range");
    }
    auto& row = d.clusters[static_cast<std::size_t>(labels[i])];
    ++row.size;
    row.positives += static_cast<std::size_t>(y[i]);
  }
  double mean_size = 0.0;
  for (const auto& row : d.clusters) mean_size += static_cast<double>(row.size);
  mean_size /= static_cast<double>(k);
  std::vector<double> rates;
  std::size_t homogeneous = 0;
  for (auto& row : d.clusters) {
    const double diff = static_cast<double>(row.size) - mean_size;
    d.size_variance += diff * diff;
    if (row.size == 0) continue;
    row.positive_rate = static_cast<double>(row.positives) / static_cast<double>(row.size);
    rates.push_back(row.positive_rate);
    if (row.positives == 0 || row.positives == row.size) ++homogeneous;
  }
  d.size_variance /= static_cast<double>(k);
  if (!rates.empty()) {
    const double mean_rate = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
    for (double r : rates) d.label_rate_variance += (r - mean_rate) * (r - mean_rate);
    d.label_rate_variance /= static_cast<double>(rates.size());
    d.homogeneity_fraction = static_cast<double>(homogeneous) / static_cast<double>(rates.size());
  }
  return d;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("adjusted_rand_index: length mismatch");
  const auto choose2 = [](double v) { return v * (v - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> row, col;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    row[a[i]] += 1.0;
    col[b[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, v] : joint) index += choose2(v);
  for (const auto& [key, v] : row) sum_a += choose2(v);
  for (const auto& [key, v] : col) sum_b += choose2(v);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

namespace detail {

OrderedJson matrix_json(const Matrix& m) {
  OrderedJson rows = OrderedJson::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + ": expected an array of rows");
  std::vector<std::vector<double>> rows;
  try {
    rows = j.get<std::vector<std::vector<double>>>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
  return Matrix::from_rows(rows);
}

OrderedJson cluster_model_json(const ClusterModel& m) {
  OrderedJson j;
  j["format"] = "clustercal.cluster_model.v1";
  j["method"] = std::string(cluster_method_name(m.method));
  j["k"] = m.k;
  j["seed"] = m.seed;
  j["centroids"] = matrix_json(m.centroids);
  j["fit_sizes"] = m.fit_sizes;
  j["inertia"] = m.inertia;
  j["inertia_history"] = m.inertia_history;
  j["iterations"] = m.iterations;
  j["calibration_size"] = m.calibration_size;
  j["calibration_positives"] = m.calibration_positives;
  return j;
}

ClusterModel cluster_model_from_json(const Json& j) {
  ClusterModel m;
  m.method = parse_cluster_method(get_required<std::string>(j, "method", "cluster model"));
  m.k = get_required<std::size_t>(j, "k", "cluster model");
  m.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (!j.contains("centroids")) throw ValidationError("cluster model: missing centroids");
  m.centroids = matrix_from_json(j.at("centroids"), "cluster model centroids");
  m.fit_sizes = get_or<std::vector<std::size_t>>(j, "fit_sizes", {});
  m.inertia = get_or<double>(j, "inertia", 0.0);
  m.inertia_history = get_or<std::vector<double>>(j, "inertia_history", {});
  m.iterations = get_or<int>(j, "iterations", 0);
  m.calibration_size = get_or<std::vector<std::size_t>>(j, "calibration_size", {});
  m.calibration_positives = get_or<std::vector<std::size_t>>(j, "calibration_positives", {});
  if (m.k == 0 || m.centroids.rows() != m.k) throw ValidationError("cluster model: k does not match centroids");
  return m;
}

}  // namespace detail

std::string cluster_model_to_json(const ClusterModel& model) { return detail::dump(detail::cluster_model_json(model)); }

ClusterModel cluster_model_from_json(std::string_view json) {
  return detail::cluster_model_from_json(detail::parse_json(json, "cluster model"));
}

}  // namespace clustercal
