#include "clustercal/data.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "clustercal/error.h"
#include "clustercal/random.h"
#include "json_util.h"

namespace clustercal {
namespace {

bool is_missing_token(std::string_view text) {
  return text.empty() || text == "NA" || text == "?" || text == "null";
}

int parse_label(std::string_view raw, const IngestConfig& config, std::size_t row) {
  const auto text = trim(raw);
  if (!config.label_map.empty()) {
    auto it = config.label_map.find(std::string(text));
    if (it == config.label_map.end()) {
      throw ValidationError("row " + std::to_string(row + 1) + ": label '" + std::string(text) +
                            "' not present in label_map");
    }
    return it->second;
  }
  double value = 0.0;
  if (!parse_double(text, value) || (value != 0.0 && value != 1.0)) {
    throw ValidationError("row " + std::to_string(row + 1) + ": label '" + std::string(text) +
                          "' is not 0 or 1");
  }
  return static_cast<int>(value);
}

}  // namespace

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (n == 0) throw ValidationError("dataset: no samples");
  if (features.rows() != n) throw ValidationError("dataset: feature rows != label count");
  if (sample_ids.size() != n) throw ValidationError("dataset: sample id count != label count");
  if (feature_names.size() != features.cols()) {
    throw ValidationError("dataset: feature name count != feature columns");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("dataset: label outside {0,1}");
  }
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw ValidationError("dataset: non-finite feature value");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.feature_names = feature_names;
  out.labels.reserve(indices.size());
  out.sample_ids.reserve(indices.size());
  for (auto i : indices) {
    out.labels.push_back(labels[i]);
    out.sample_ids.push_back(sample_ids[i]);
  }
  return out;
}

std::vector<int> Dataset::labels_at(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels[i]);
  return out;
}

IngestConfig IngestConfig::from_json(std::string_view json) {
  const auto j = detail::parse_json(json, "ingest config");
  IngestConfig config;
  config.label_column = detail::get_required<std::string>(j, "label_column", "ingest config");
  if (j.contains("id_column") && !j.at("id_column").is_null()) {
    config.id_column = j.at("id_column").get<std::string>();
  }
  config.label_map = detail::get_or(j, "label_map", std::map<std::string, int>{});
  for (const auto& [text, value] : config.label_map) {
    if (value != 0 && value != 1) {
      throw ValidationError("label_map: '" + text + "' must map to 0 or 1");
    }
  }
  const auto impute = detail::get_or<std::string>(j, "impute", "reject");
  if (impute == "reject") {
    config.impute = ImputeMode::kReject;
  } else if (impute == "mean") {
    config.impute = ImputeMode::kMean;
  } else {
    throw ValidationError("ingest config: impute must be 'reject' or 'mean'");
  }
  config.categorical =
      detail::get_or(j, "categorical", std::map<std::string, std::map<std::string, double>>{});
  return config;
}

Dataset dataset_from_table(const CsvTable& table, const IngestConfig& config,
                           IngestStats* stats) {
  const int label_col = table.column(config.label_column);
  if (label_col < 0) {
    throw ValidationError("missing label column '" + config.label_column + "'");
  }
  int id_col = -1;
  if (config.id_column) {
    id_col = table.column(*config.id_column);
    if (id_col < 0) throw ValidationError("missing id column '" + *config.id_column + "'");
  }
  if (table.rows.empty()) throw ValidationError("csv has a header but no data rows");

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) != label_col && static_cast<int>(c) != id_col) feature_cols.push_back(c);
  }
  for (const auto& [name, unused] : config.categorical) {
    if (table.column(name) < 0) throw ValidationError("categorical column '" + name + "' not found");
  }

  const std::size_t n_rows = table.rows.size();
  const std::size_t d = feature_cols.size();
  Matrix raw(n_rows, d);
  std::vector<int> labels(n_rows);
  std::vector<std::string> ids(n_rows);
  std::vector<bool> row_ok(n_rows, true);

  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& cells = table.rows[r];
    labels[r] = parse_label(cells[label_col], config, r);
    ids[r] = id_col >= 0 ? std::string(trim(cells[id_col])) : std::to_string(r);
    for (std::size_t j = 0; j < d; ++j) {
      const auto& name = table.header[feature_cols[j]];
      const auto text = trim(cells[feature_cols[j]]);
      double value = std::numeric_limits<double>::quiet_NaN();
      if (auto cat = config.categorical.find(name); cat != config.categorical.end()) {
        auto code = cat->second.find(std::string(text));
        if (code != cat->second.end()) {
          value = code->second;
        } else if (!is_missing_token(text)) {
          throw ValidationError("row " + std::to_string(r + 1) + ", column '" + name +
                                "': category '" + std::string(text) + "' has no code");
        }
      } else if (!is_missing_token(text) && !parse_double(text, value)) {
        throw ValidationError("row " + std::to_string(r + 1) + ", column '" + name +
                              "': cannot parse '" + std::string(text) + "' as a number");
      }
      raw(r, j) = value;
      if (!std::isfinite(value)) row_ok[r] = false;
    }
  }

  IngestStats local;
  local.rows_read = n_rows;
  if (config.impute == ImputeMode::kMean) {
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < n_rows; ++r) {
        if (std::isfinite(raw(r, j))) {
          sum += raw(r, j);
          ++count;
        }
      }
      if (count == 0) {
        throw ValidationError("column '" + table.header[feature_cols[j]] +
                              "' has no finite values to impute from");
      }
      const double mean = sum / static_cast<double>(count);
      for (std::size_t r = 0; r < n_rows; ++r) {
        if (!std::isfinite(raw(r, j))) {
          raw(r, j) = mean;
          ++local.cells_imputed;
        }
      }
    }
    std::fill(row_ok.begin(), row_ok.end(), true);
  }

  std::vector<std::size_t> keep;
  keep.reserve(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (row_ok[r]) {
      keep.push_back(r);
    } else {
      ++local.rows_rejected;
    }
  }

  Dataset ds;
  ds.features = raw.select_rows(keep);
  ds.labels.reserve(keep.size());
  ds.sample_ids.reserve(keep.size());
  for (auto r : keep) {
    ds.labels.push_back(labels[r]);
    ds.sample_ids.push_back(std::move(ids[r]));
  }
  for (auto c : feature_cols) ds.feature_names.push_back(table.header[c]);
  if (ds.size() == 0) throw ValidationError("every row was rejected for non-finite values");
  ds.validate();
  if (stats) *stats = local;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const IngestConfig& config,
                 IngestStats* stats) {
  return dataset_from_table(read_csv(path), config, stats);
}

std::vector<std::size_t> SplitIndices::train_and_calibration() const {
  std::vector<std::size_t> out = train;
  out.insert(out.end(), calibration.begin(), calibration.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr std::size_t kSplits = 3;
using Counts = std::array<std::size_t, kSplits>;

// Rounds per-class quotas (rows: classes, cols: splits) so that each entry,
// each class total and each split total is the floor or ceiling of its real
// target. Such a rounding always exists for 2-D tables; the table is tiny, so
// enumerate all floor/ceil combinations and keep the closest one.
std::vector<Counts> round_table(const std::vector<std::size_t>& class_sizes,
                                const std::array<double, kSplits>& ratios) {
  const std::size_t n_classes = class_sizes.size();
  const std::size_t total = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  std::array<double, kSplits> split_target{};
  for (std::size_t s = 0; s < kSplits; ++s) split_target[s] = ratios[s] * static_cast<double>(total);

  const std::size_t cells = n_classes * kSplits;
  std::vector<Counts> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < (std::size_t{1} << cells); ++mask) {
    std::vector<Counts> table(n_classes);
    bool ok = true;
    double score = 0.0;
    for (std::size_t c = 0; c < n_classes && ok; ++c) {
      std::size_t row_sum = 0;
      for (std::size_t s = 0; s < kSplits; ++s) {
        const double q = ratios[s] * static_cast<double>(class_sizes[c]);
        const bool up = (mask >> (c * kSplits + s)) & 1U;
        const double rounded = up ? std::ceil(q) : std::floor(q);
        if (up && std::ceil(q) == std::floor(q)) ok = false;  // skip duplicate combinations
        table[c][s] = static_cast<std::size_t>(rounded);
        row_sum += table[c][s];
        score += (rounded - q) * (rounded - q);
      }
      if (row_sum != class_sizes[c]) ok = false;
    }
    if (!ok) continue;
    for (std::size_t s = 0; s < kSplits && ok; ++s) {
      std::size_t col_sum = 0;
      for (std::size_t c = 0; c < n_classes; ++c) col_sum += table[c][s];
      const double diff = static_cast<double>(col_sum) - split_target[s];
      if (std::abs(diff) >= 1.0) ok = false;
      score += diff * diff;
    }
    if (ok && score < best_score) {
      best_score = score;
      best = std::move(table);
    }
  }
  if (best.empty()) throw RuntimeError("split: no consistent rounding found");
  return best;
}

}  // namespace

SplitIndices split(std::span<const int> labels, const SplitRatios& ratios, std::uint64_t seed,
                   bool stratify) {
  const std::array<double, kSplits> r{ratios.train, ratios.calibration, ratios.test};
  for (double v : r) {
    if (!(v > 0.0)) throw ValidationError("split: ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw ValidationError("split: ratios must sum to 1");
  }
  if (labels.empty()) throw ValidationError("split: empty dataset");

  std::vector<std::vector<std::size_t>> groups;
  if (stratify) {
    groups.resize(2);
    for (std::size_t i = 0; i < labels.size(); ++i) groups.at(labels[i] == 1 ? 1 : 0).push_back(i);
  } else {
    groups.resize(1);
    groups[0].resize(labels.size());
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  const auto counts = round_table(sizes, r);

  if (stratify) {
    for (std::size_t c = 0; c < groups.size(); ++c) {
      for (std::size_t s = 0; s < kSplits; ++s) {
        if (counts[c][s] == 0) {
          throw ValidationError("split: a stratified split would receive no samples of class " +
                                std::to_string(c));
        }
      }
    }
  }

  Rng rng(seed);
  SplitIndices out;
  out.seed = seed;
  std::array<std::vector<std::size_t>*, kSplits> targets{&out.train, &out.calibration, &out.test};
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto members = groups[c];
    rng.shuffle(members);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < kSplits; ++s) {
      for (std::size_t k = 0; k < counts[c][s]; ++k) targets[s]->push_back(members[pos++]);
    }
  }
  for (auto* t : targets) std::sort(t->begin(), t->end());
  return out;
}

}  // namespace clustercal
