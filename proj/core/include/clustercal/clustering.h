#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/matrix.h"

namespace clustercal {

enum class ClusterMethod { kKMeans, kAgglomerative };

std::string_view cluster_method_name(ClusterMethod method);
ClusterMethod parse_cluster_method(std::string_view name);

struct ClusterModel {
  ClusterMethod method = ClusterMethod::kKMeans;
  std::size_t k = 0;
  Matrix centroids;  // k x m
  std::uint64_t seed = 0;

  // Fit-time results.
  std::vector<int> fit_labels;
  std::vector<std::size_t> fit_sizes;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // k-means: after each assignment step
  int iterations = 0;

  // Calibration-split statistics, filled by the pipeline.
  std::vector<std::size_t> calibration_size;
  std::vector<std::size_t> calibration_positives;

  std::size_t dim() const { return centroids.cols(); }

  // Nearest centroid, ties to the lowest cluster id.
  std::vector<int> assign(const Matrix& embedding) const;
  int assign_one(std::span<const double> x) const;

  void set_calibration_stats(std::span<const int> labels, std::span<const int> y);
};

// Lloyd iterations from a k-means++ start, up to max_iterations or until the
// assignment stops changing. An emptied cluster is re-seeded at the point
// farthest from its centroid (lowest index on ties) among clusters with more
// than one member.
ClusterModel fit_kmeans(const Matrix& embedding, std::size_t k, std::uint64_t seed, int max_iterations = 300);

// Ward linkage via the nearest-neighbour chain. Cluster ids follow the smallest
// member index. Centroids are member means.
ClusterModel fit_agglomerative(const Matrix& embedding, std::size_t k);

struct ElbowOptions {
  std::size_t k_min = 5;
  std::size_t k_max = 100;
  std::size_t step = 5;
  std::size_t max_samples = 0;       // 0: use every row
  std::size_t min_cluster_size = 0;  // 0: unconstrained
};

struct ElbowResult {
  std::vector<std::size_t> ks;
  std::vector<double> inertias;
  std::vector<double> curvature;  // second difference; 0 at both ends
  std::size_t selected_k = 0;
  std::size_t unconstrained_k = 0;
  bool constraint_satisfied = true;
  std::size_t samples_used = 0;
};

// k at the largest second difference of the inertia curve (first one wins).
ElbowResult select_k_elbow(const Matrix& embedding, const ElbowOptions& options, std::uint64_t seed);

struct ClusterRow {
  int cluster = 0;
  std::size_t size = 0;
  std::size_t positives = 0;
  double positive_rate = 0.0;  // 0 for empty clusters
};

struct ClusterDiagnostics {
  double size_variance = 0.0;        // population variance over all k clusters
  double label_rate_variance = 0.0;  // over non-empty clusters
  double homogeneity_fraction = 0.0; // single-label clusters / non-empty clusters
  std::vector<ClusterRow> clusters;
};

ClusterDiagnostics diagnostics(std::size_t k, std::span<const int> labels, std::span<const int> y);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

std::string cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(std::string_view json);

}  // namespace clustercal
