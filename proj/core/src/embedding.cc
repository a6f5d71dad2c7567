#include "clustercal/embedding.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clustercal/error.h"
#include "clustercal/tree_shap.h"
#include "json_util.h"

namespace clustercal {
namespace {

void require_ensemble(EmbeddingKind kind, const TreeEnsemble* ensemble) {
  if (ensemble == nullptr) {
    throw ValidationError("embedding '" + std::string(embedding_kind_name(kind)) + "' needs a fitted ensemble");
  }
}

bool default_standardize(EmbeddingKind kind) {
  return kind == EmbeddingKind::kRaw || kind == EmbeddingKind::kTopk;
}

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite value");
  }
}

// Pre-standardization vectors.
Matrix raw_vectors(const Embedder& e, const TreeEnsemble* ensemble, const Matrix& x) {
  if (e.kind != EmbeddingKind::kExternal && x.cols() != e.input_dim) {
    throw ValidationError("embed: expected " + std::to_string(e.input_dim) + " feature columns, got " +
                          std::to_string(x.cols()));
  }
  switch (e.kind) {
    case EmbeddingKind::kShap:
      require_ensemble(e.kind, ensemble);
      return tree_shap(*ensemble, x).values;
    case EmbeddingKind::kLeaf: {
      require_ensemble(e.kind, ensemble);
      if (ensemble->trees.size() != e.leaf_nodes.size()) {
        throw ValidationError("embed: ensemble does not match the fitted leaf layout");
      }
      Matrix out(x.rows(), e.output_dim());
      std::size_t offset = 0;
      for (std::size_t t = 0; t < e.leaf_nodes.size(); ++t) {
        const auto& leaves = e.leaf_nodes[t];
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const int leaf = ensemble->trees[t].leaf_index(x.row(r));
          const auto it = std::lower_bound(leaves.begin(), leaves.end(), leaf);
          if (it == leaves.end() || *it != leaf) throw ValidationError("embed: unknown leaf id");
          out(r, offset + static_cast<std::size_t>(it - leaves.begin())) = 1.0;
        }
        offset += leaves.size();
      }
      return out;
    }
    case EmbeddingKind::kRaw:
      return x;
    case EmbeddingKind::kTopk:
      return x.select_cols(e.feature_columns);
    case EmbeddingKind::kExternal:
      if (!e.mean.empty() && x.cols() != e.mean.size()) throw ValidationError("embed: external dimension mismatch");
      return x;
  }
  return x;
}

}  // namespace

std::string_view embedding_kind_name(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::kShap: return "shap";
    case EmbeddingKind::kLeaf: return "leaf";
    case EmbeddingKind::kRaw: return "raw";
    case EmbeddingKind::kTopk: return "topk";
    case EmbeddingKind::kExternal: return "external";
  }
  return "unknown";
}

EmbeddingKind parse_embedding_kind(std::string_view name) {
  for (auto k : {EmbeddingKind::kShap, EmbeddingKind::kLeaf, EmbeddingKind::kRaw, EmbeddingKind::kTopk,
                 EmbeddingKind::kExternal}) {
    if (embedding_kind_name(k) == name) return k;
  }
  throw ValidationError("unknown embedding kind '" + std::string(name) + "'");
}

std::size_t Embedder::output_dim() const {
  switch (kind) {
    case EmbeddingKind::kShap:
    case EmbeddingKind::kRaw: return input_dim;
    case EmbeddingKind::kTopk: return feature_columns.size();
    case EmbeddingKind::kLeaf: {
      std::size_t total = 0;
      for (const auto& leaves : leaf_nodes) total += leaves.size();
      return total;
    }
    case EmbeddingKind::kExternal: return mean.size();
  }
  return 0;
}

std::vector<std::size_t> top_features(const TreeEnsemble& ensemble, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("topk_fraction must be in (0, 1]");
  const std::vector<double> gain = ensemble.feature_gain();
  if (std::none_of(gain.begin(), gain.end(), [](double g) { return g > 0.0; })) {
    throw ValidationError("topk embedding: model has no split gain");
  }
  const auto d = static_cast<double>(gain.size());
  // The small slack keeps products such as 0.15 * 40 from rounding up past 6.
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * d - 1e-9)));
  std::vector<std::size_t> order(gain.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });
  order.resize(std::min(count, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

Embedder fit_embedder(EmbeddingKind kind, const TreeEnsemble* ensemble, const Matrix& reference,
                      const EmbeddingOptions& options) {
  if (reference.empty()) throw ValidationError("fit_embedder: empty reference matrix");
  Embedder e;
  e.kind = kind;
  e.input_dim = kind == EmbeddingKind::kExternal ? 0 : reference.cols();
  if (kind == EmbeddingKind::kShap || kind == EmbeddingKind::kLeaf || kind == EmbeddingKind::kTopk) {
    require_ensemble(kind, ensemble);
    if (ensemble->n_features != reference.cols()) throw ValidationError("fit_embedder: dimension mismatch");
  }
  if (kind == EmbeddingKind::kTopk) e.feature_columns = top_features(*ensemble, options.topk_fraction);
  if (kind == EmbeddingKind::kLeaf) {
    for (const auto& tree : ensemble->trees) {
      std::vector<int> leaves;
      for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        if (tree.nodes[id].is_leaf()) leaves.push_back(static_cast<int>(id));
      }
      e.leaf_nodes.push_back(std::move(leaves));
    }
  }

  const Matrix vectors = raw_vectors(e, ensemble, reference);
  check_finite(vectors, "fit_embedder");
  const std::size_t m = vectors.cols();
  e.standardized = options.standardize.value_or(default_standardize(kind));
  if (e.standardized || kind == EmbeddingKind::kExternal) {
    // External embeddings keep the statistics to record their dimension.
    e.mean.assign(m, 0.0);
    e.scale.assign(m, 1.0);
    if (e.standardized) {
      const auto n = static_cast<double>(vectors.rows());
      for (std::size_t c = 0; c < m; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < vectors.rows(); ++r) sum += vectors(r, c);
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < vectors.rows(); ++r) ss += (vectors(r, c) - mean) * (vectors(r, c) - mean);
        const double sd = std::sqrt(ss / n);
        e.mean[c] = mean;
        e.scale[c] = sd > 0.0 ? sd : 1.0;
      }
    }
  }
  return e;
}

EmbeddingMatrix embed(const Embedder& embedder, const TreeEnsemble* ensemble, const Matrix& x) {
  EmbeddingMatrix out;
  out.kind = embedder.kind;
  out.vectors = raw_vectors(embedder, ensemble, x);
  if (embedder.standardized) {
    for (std::size_t r = 0; r < out.vectors.rows(); ++r) {
      auto row = out.vectors.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - embedder.mean[c]) / embedder.scale[c];
    }
    out.mean = embedder.mean;
    out.scale = embedder.scale;
  }
  for (const auto& leaves : embedder.leaf_nodes) out.block_sizes.push_back(leaves.size());
  check_finite(out.vectors, "embed");
  return out;
}

EmbeddingMatrix build_embedding(EmbeddingKind kind, const TreeEnsemble* ensemble, const Dataset& ds,
                                const EmbeddingOptions& options) {
  if (kind == EmbeddingKind::kExternal) {
    throw ValidationError("build_embedding: external embeddings are loaded, not built");
  }
  const Embedder e = fit_embedder(kind, ensemble, ds.features, options);
  return embed(e, ensemble, ds.features);
}

std::string embedding_to_csv(const Matrix& vectors, std::span<const std::string> sample_ids) {
  if (sample_ids.size() != vectors.rows()) throw ValidationError("embedding_to_csv: id count mismatch");
  std::vector<std::string> header{"sample_id"};
  for (std::size_t c = 0; c < vectors.cols(); ++c) header.push_back("e" + std::to_string(c));
  CsvWriter w(header);
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    w.add(sample_ids[r]);
    for (double v : vectors.row(r)) w.add(v);
    w.end_row();
  }
  return w.str();
}

ExternalEmbedding parse_embedding_csv(const CsvTable& table) {
  const int id_col = table.column("sample_id");
  if (id_col < 0) throw ValidationError("embedding CSV: missing sample_id column");
  if (table.rows.empty()) throw ValidationError("embedding CSV: no rows");
  const std::size_t m = table.header.size() - 1;
  if (m == 0) throw ValidationError("embedding CSV: no embedding columns");
  ExternalEmbedding out;
  out.vectors = Matrix(table.rows.size(), m);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::size_t c_out = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (static_cast<int>(c) == id_col) {
        out.sample_ids.push_back(table.rows[r][c]);
        continue;
      }
      double v = 0.0;
      if (!parse_double(table.rows[r][c], v) || !std::isfinite(v)) {
        throw ValidationError("embedding CSV: bad value at row " + std::to_string(r + 2) + ", column '" +
                              table.header[c] + "'");
      }
      out.vectors(r, c_out++) = v;
    }
  }
  return out;
}

ExternalEmbedding load_embedding_csv(const std::filesystem::path& path) { return parse_embedding_csv(read_csv(path)); }

std::string embedder_to_json(const Embedder& e) {
  detail::OrderedJson j;
  j["format"] = "clustercal.embedder.v1";
  j["kind"] = std::string(embedding_kind_name(e.kind));
  j["input_dim"] = e.input_dim;
  j["feature_columns"] = e.feature_columns;
  j["leaf_nodes"] = e.leaf_nodes;
  j["standardized"] = e.standardized;
  j["mean"] = e.mean;
  j["scale"] = e.scale;
  return detail::dump(j);
}

Embedder embedder_from_json(std::string_view json) {
  using detail::get_or;
  const auto j = detail::parse_json(json, "embedder");
  Embedder e;
  e.kind = parse_embedding_kind(detail::get_required<std::string>(j, "kind", "embedder"));
  e.input_dim = get_or<std::size_t>(j, "input_dim", 0);
  e.feature_columns = get_or<std::vector<std::size_t>>(j, "feature_columns", {});
  e.leaf_nodes = get_or<std::vector<std::vector<int>>>(j, "leaf_nodes", {});
  e.standardized = get_or<bool>(j, "standardized", false);
  e.mean = get_or<std::vector<double>>(j, "mean", {});
  e.scale = get_or<std::vector<double>>(j, "scale", {});
  if (e.standardized && (e.mean.size() != e.scale.size() || e.mean.empty())) {
    throw ValidationError("embedder: inconsistent standardization parameters");
  }
  return e;
}

}  // namespace clustercal
