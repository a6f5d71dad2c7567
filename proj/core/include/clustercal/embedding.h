#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clustercal/data.h"
#include "clustercal/matrix.h"
#include "clustercal/model.h"

namespace clustercal {

enum class EmbeddingKind { kShap, kLeaf, kRaw, kTopk, kExternal };

std::string_view embedding_kind_name(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view name);

struct EmbeddingOptions {
  double topk_fraction = 0.15;
  // Unset: raw and topk are standardized, shap, leaf and external are not.
  std::optional<bool> standardize;
};

// Fitted feature map: everything needed to embed new samples the same way as
// the reference samples.
struct Embedder {
  EmbeddingKind kind = EmbeddingKind::kRaw;
  std::size_t input_dim = 0;                    // raw feature count (0 for external)
  std::vector<std::size_t> feature_columns;     // topk: selected raw columns, ascending
  std::vector<std::vector<int>> leaf_nodes;     // leaf: leaf node ids of each tree
  bool standardized = false;
  std::vector<double> mean;
  std::vector<double> scale;

  std::size_t output_dim() const;
};

struct EmbeddingMatrix {
  EmbeddingKind kind = EmbeddingKind::kRaw;
  Matrix vectors;
  std::vector<std::size_t> block_sizes;  // leaf: one-hot width per tree
  std::vector<double> mean;              // standardization parameters, if any
  std::vector<double> scale;

  std::size_t size() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
};

// Top ceil(fraction * d) features by total split gain (ties: lower index),
// returned in ascending column order.
std::vector<std::size_t> top_features(const TreeEnsemble& ensemble, double fraction);

// ensemble may be null for raw and external kinds. `reference` supplies the
// standardization statistics (raw features, or external vectors).
Embedder fit_embedder(EmbeddingKind kind, const TreeEnsemble* ensemble, const Matrix& reference,
                      const EmbeddingOptions& options = {});

// x holds raw features, or the external vectors for kind external.
EmbeddingMatrix embed(const Embedder& embedder, const TreeEnsemble* ensemble, const Matrix& x);

// Fits on ds and embeds ds.
EmbeddingMatrix build_embedding(EmbeddingKind kind, const TreeEnsemble* ensemble, const Dataset& ds,
                                const EmbeddingOptions& options = {});

// CSV: sample_id followed by one numeric column per dimension.
std::string embedding_to_csv(const Matrix& vectors, std::span<const std::string> sample_ids);
struct ExternalEmbedding {
  std::vector<std::string> sample_ids;
  Matrix vectors;
};
ExternalEmbedding parse_embedding_csv(const CsvTable& table);
ExternalEmbedding load_embedding_csv(const std::filesystem::path& path);

std::string embedder_to_json(const Embedder& embedder);
Embedder embedder_from_json(std::string_view json);

}  // namespace clustercal
