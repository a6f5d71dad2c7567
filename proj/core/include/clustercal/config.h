#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clustercal/calibrators.h"
#include "clustercal/ccl.h"
#include "clustercal/clustering.h"
#include "clustercal/data.h"
#include "clustercal/embedding.h"
#include "clustercal/metrics.h"
#include "clustercal/model.h"
#include "clustercal/paired_test.h"

namespace clustercal {

enum class ScoreMode { kBuiltin, kExternal, kSynthetic };

std::string_view score_mode_name(ScoreMode mode);

struct ExperimentConfig {
  // Exactly one data source: a CSV file or the synthetic generator.
  std::string csv_path;
  IngestConfig ingest;
  std::optional<SyntheticSpec> synthetic;
  // When the synthetic spec has no explicit seed, the experiment seed is used.
  bool synthetic_seed_explicit = false;

  SplitRatios ratios;
  bool stratify = true;
  std::uint64_t seed = 0;

  ScoreMode scores = ScoreMode::kBuiltin;
  GbtParams gbt;
  std::string external_scores_path;
  double clip = 1e-6;

  EmbeddingKind embedding = EmbeddingKind::kShap;
  EmbeddingOptions embedding_options;
  std::string external_embedding_path;

  ClusterMethod clustering = ClusterMethod::kKMeans;
  std::size_t k = 0;  // 0: choose with the elbow method
  ElbowOptions elbow;
  int kmeans_max_iterations = 300;

  std::vector<CalibrationMethod> methods;
  std::vector<CalibrationMethod> ccl_methods;  // defaults to the parametric entries of methods
  CclOptions ccl;

  std::size_t metric_bins = 10;
  BinScheme metric_scheme = BinScheme::kEqualWidth;
  CalibrationMetric cece_base = CalibrationMetric::kEce;
  double decision_threshold = 0.5;

  std::vector<double> rejection_thresholds = default_rejection_grid();

  bool significance_enabled = true;
  PairedMetric significance_metric = PairedMetric::kEce;
  double significance_fraction = 0.3;
  int significance_iterations = 30;
  std::vector<std::pair<std::string, std::string>> significance_pairs;  // default: ccl-m vs unified-m

  std::string output_dir = "out";
  // Relative paths in the config are resolved against this directory.
  std::filesystem::path base_dir;

  static ExperimentConfig from_json(std::string_view json, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  std::filesystem::path resolve(const std::string& path) const;
  bool needs_ensemble() const;
  SyntheticSpec synthetic_spec() const;  // with the effective seed
  std::vector<std::string> variant_names() const;
  std::vector<std::pair<std::string, std::string>> effective_pairs() const;

  // Throws ValidationError with the offending field.
  void validate() const;

  // Fully resolved configuration with every default spelled out.
  std::string canonical_json() const;
  std::uint64_t hash() const;  // of canonical_json() without output_dir
};

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace clustercal
