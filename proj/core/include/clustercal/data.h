#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/csv.h"
#include "clustercal/matrix.h"

namespace clustercal {

// N x d features with binary labels. Immutable once built.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> sample_ids;

  std::size_t size() const { return labels.size(); }
  std::size_t n_features() const { return features.cols(); }

  // Throws ValidationError if any invariant is broken (N >= 1, labels in {0,1},
  // finite features, consistent sizes).
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<int> labels_at(std::span<const std::size_t> indices) const;
};

enum class ImputeMode { kReject, kMean };

struct IngestConfig {
  std::string label_column;
  std::optional<std::string> id_column;
  // Raw label text -> {0,1}. When empty, labels must parse as numbers 0 or 1.
  std::map<std::string, int> label_map;
  ImputeMode impute = ImputeMode::kReject;
  // Column -> (category text -> code). Columns listed here are integer coded.
  std::map<std::string, std::map<std::string, double>> categorical;

  // {"label_column","id_column","label_map","impute":"reject|mean","categorical"}
  static IngestConfig from_json(std::string_view json);
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;
  std::size_t cells_imputed = 0;
};

Dataset dataset_from_table(const CsvTable& table, const IngestConfig& config,
                           IngestStats* stats = nullptr);
Dataset load_csv(const std::filesystem::path& path, const IngestConfig& config,
                 IngestStats* stats = nullptr);

struct SplitRatios {
  double train = 0.6;
  double calibration = 0.2;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  // train followed by calibration, sorted.
  std::vector<std::size_t> train_and_calibration() const;
};

// Deterministic random split. With `stratify`, each split receives every label's
// share rounded so that both per-label and total counts stay within one sample
// of the requested ratios.
SplitIndices split(std::span<const int> labels, const SplitRatios& ratios, std::uint64_t seed,
                   bool stratify = true);
inline SplitIndices split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed,
                          bool stratify = true) {
  return split(ds.labels, ratios, seed, stratify);
}

// Heterogeneous-subpopulation generator used as a test and demo fixture.
//
// Subpopulation j occupies a Gaussian blob centred at
// separation * (1 + floor(j / d)) * e_(j mod d). Its true positive probability is
// rate_j + h_j * tanh(eps_0) with eps_0 the blob's first standard-normal noise
// coordinate and h_j = 0.8 * min(rate_j, 1 - rate_j), so the conditional rate
// of the subpopulation equals rate_j exactly. A deliberately miscalibrated
// score logit(p) + offset_j is produced alongside.
struct SyntheticSpec {
  std::size_t n_subpops = 2;
  std::size_t samples_per_subpop = 500;
  std::size_t d = 4;
  std::vector<double> positive_rates{0.3, 0.7};
  std::vector<double> logit_offsets{1.0, -1.0};
  double noise_scale = 1.0;
  double separation = 8.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<int> subpop;
  std::vector<double> true_probability;
  // logit(true_probability) + offset of the sample's subpopulation.
  std::vector<double> miscalibrated_margin;
};

SyntheticData gen_synthetic_full(const SyntheticSpec& spec);
Dataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace clustercal
