#include "clustercal/ccl.h"

#include <string>

#include "clustercal/error.h"
#include "serialization.h"

namespace clustercal {
namespace {

Resolution parse_resolution(std::string_view name) {
  if (name == "fitted") return Resolution::kFitted;
  if (name == "constant") return Resolution::kConstant;
  if (name == "fallback") return Resolution::kFallback;
  throw ValidationError("unknown cluster resolution '" + std::string(name) + "'");
}

}  // namespace

std::string_view resolution_name(Resolution r) {
  switch (r) {
    case Resolution::kFitted: return "fitted";
    case Resolution::kConstant: return "constant";
    case Resolution::kFallback: return "fallback";
  }
  return "unknown";
}

const Calibrator& CclModel::resolved(int cluster) const {
  if (cluster < 0 || static_cast<std::size_t>(cluster) >= clusters.size()) {
    throw ValidationError("ccl: cluster id " + std::to_string(cluster) + " out of range");
  }
  const auto c = static_cast<std::size_t>(cluster);
  return clusters[c].resolution == Resolution::kFallback ? fallback : calibrators[c];
}

CclModel train_ccl_labels(const ScoreSet& scores, std::span<const int> cluster_labels,
                          const ClusterModel& cluster_model, CalibrationMethod method, std::span<const int> y,
                          const CclOptions& options) {
  if (!is_parametric(method)) {
    throw ValidationError("ccl: method '" + std::string(method_name(method)) +
                          "' is not parametric; use platt, temperature, beta or dirichlet2");
  }
  if (y.empty()) throw ValidationError("ccl: empty calibration split");
  if (scores.size() != y.size() || cluster_labels.size() != y.size()) {
    throw ValidationError("ccl: scores, cluster labels and labels differ in length");
  }
  const FitData all = FitData::from_scores(scores, y);

  CclModel model;
  model.cluster_model = cluster_model;
  model.method = method;
  model.min_fit_size = options.min_fit_size;
  model.fallback = fit(method, all, options.calibrator);

  const std::size_t k = cluster_model.k;
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < cluster_labels.size(); ++i) {
    const int c = cluster_labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= k) throw ValidationError("ccl: cluster id out of range");
    members[static_cast<std::size_t>(c)].push_back(i);
  }

  // Clusters are independent; fitting order does not affect the result.
  model.calibrators.resize(k);
  model.clusters.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& info = model.clusters[c];
    info.size = members[c].size();
    for (std::size_t i : members[c]) info.positives += static_cast<std::size_t>(y[i]);
    if (info.size == 0) {
      info.resolution = Resolution::kFallback;
      continue;
    }
    info.positive_rate = static_cast<double>(info.positives) / static_cast<double>(info.size);
    if (info.positives == 0 || info.positives == info.size) {
      info.resolution = Resolution::kConstant;
      const double p0 = options.constant_mode == ConstantMode::kLaplace
                            ? (static_cast<double>(info.positives) + 1.0) / (static_cast<double>(info.size) + 2.0)
                            : info.positive_rate;
      model.calibrators[c] = Calibrator::constant(p0, options.calibrator.epsilon);
    } else if (info.size < options.min_fit_size) {
      info.resolution = Resolution::kFallback;
    } else {
      info.resolution = Resolution::kFitted;
      model.calibrators[c] = fit(method, all.subset(members[c]), options.calibrator);
    }
  }
  return model;
}

CclModel train_ccl(const ScoreSet& scores, const Matrix& embedding, const ClusterModel& cluster_model,
                   CalibrationMethod method, std::span<const int> y, const CclOptions& options) {
  if (embedding.rows() != y.size()) throw ValidationError("ccl: embedding rows do not match labels");
  const std::vector<int> labels = cluster_model.assign(embedding);
  return train_ccl_labels(scores, labels, cluster_model, method, y, options);
}

std::vector<double> infer_ccl_labels(const CclModel& model, const ScoreSet& scores,
                                     std::span<const int> cluster_labels) {
  if (cluster_labels.size() != scores.size()) throw ValidationError("ccl: labels and scores differ in length");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = scores.margins.empty() ? 0.0 : scores.margins[i];
    out[i] = model.resolved(cluster_labels[i]).calibrate(m, scores.probabilities[i]);
  }
  return out;
}

CclOutput infer_ccl(const CclModel& model, const ScoreSet& scores, const Matrix& embedding) {
  if (embedding.rows() != scores.size()) throw ValidationError("ccl: embedding rows do not match scores");
  CclOutput out;
  out.labels = model.cluster_model.assign(embedding);
  out.probabilities = infer_ccl_labels(model, scores, out.labels);
  return out;
}

double improved_sample_fraction(std::span<const double> ccl_probabilities,
                                std::span<const double> unified_probabilities, std::span<const int> y,
                                std::span<const int> cluster_labels, std::size_t bins, BinScheme scheme) {
  const std::size_t n = y.size();
  if (ccl_probabilities.size() != n || unified_probabilities.size() != n || cluster_labels.size() != n) {
    throw ValidationError("improved_sample_fraction: inputs differ in length");
  }
  if (n == 0) return 0.0;
  int top = -1;
  for (int c : cluster_labels) top = std::max(top, c);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(top + 1));
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(cluster_labels[i])].push_back(i);

  std::size_t improved = 0;
  std::vector<double> pc, pu;
  std::vector<int> yc;
  for (const auto& idx : members) {
    if (idx.empty()) continue;
    pc.clear();
    pu.clear();
    yc.clear();
    for (std::size_t i : idx) {
      pc.push_back(ccl_probabilities[i]);
      pu.push_back(unified_probabilities[i]);
      yc.push_back(y[i]);
    }
    if (ece(pc, yc, bins, scheme).value < ece(pu, yc, bins, scheme).value) improved += idx.size();
  }
  return static_cast<double>(improved) / static_cast<double>(n);
}

double improved_sample_fraction(const CclModel& model, const Calibrator& unified, const ScoreSet& scores,
                                const Matrix& embedding, std::span<const int> y, std::size_t bins,
                                BinScheme scheme) {
  const CclOutput out = infer_ccl(model, scores, embedding);
  return improved_sample_fraction(out.probabilities, unified.apply(scores), y, out.labels, bins, scheme);
}

std::string ccl_to_json(const CclModel& model) {
  detail::OrderedJson j;
  j["format"] = "clustercal.ccl.v1";
  j["method"] = std::string(method_name(model.method));
  j["min_fit_size"] = model.min_fit_size;
  j["cluster_model"] = detail::cluster_model_json(model.cluster_model);
  j["fallback"] = detail::calibrator_json(model.fallback);
  detail::OrderedJson clusters = detail::OrderedJson::array();
  for (std::size_t c = 0; c < model.clusters.size(); ++c) {
    const auto& info = model.clusters[c];
    detail::OrderedJson row;
    row["cluster"] = c;
    row["size"] = info.size;
    row["positives"] = info.positives;
    row["positive_rate"] = info.positive_rate;
    row["resolution"] = std::string(resolution_name(info.resolution));
    row["used_fallback"] = info.resolution == Resolution::kFallback;
    row["used_constant"] = info.resolution == Resolution::kConstant;
    if (info.resolution != Resolution::kFallback) row["calibrator"] = detail::calibrator_json(model.calibrators[c]);
    clusters.push_back(std::move(row));
  }
  j["clusters"] = std::move(clusters);
  return detail::dump(j);
}

CclModel ccl_from_json(std::string_view json) {
  using detail::get_or;
  using detail::get_required;
  const auto j = detail::parse_json(json, "ccl model");
  CclModel model;
  model.method = parse_method(get_required<std::string>(j, "method", "ccl model"));
  model.min_fit_size = get_or<std::size_t>(j, "min_fit_size", 30);
  if (!j.contains("cluster_model") || !j.contains("fallback") || !j.contains("clusters")) {
    throw ValidationError("ccl model: missing cluster_model, fallback or clusters");
  }
  model.cluster_model = detail::cluster_model_from_json(j.at("cluster_model"));
  model.fallback = detail::calibrator_from_json(j.at("fallback"));
  const auto& clusters = j.at("clusters");
  if (!clusters.is_array() || clusters.size() != model.cluster_model.k) {
    throw ValidationError("ccl model: cluster table does not match k");
  }
  model.calibrators.resize(clusters.size());
  model.clusters.resize(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& row = clusters[c];
    auto& info = model.clusters[c];
    info.size = get_or<std::size_t>(row, "size", 0);
    info.positives = get_or<std::size_t>(row, "positives", 0);
    info.positive_rate = get_or<double>(row, "positive_rate", 0.0);
    info.resolution = parse_resolution(get_required<std::string>(row, "resolution", "ccl cluster"));
    if (info.resolution != Resolution::kFallback) {
      if (!row.contains("calibrator")) throw ValidationError("ccl model: cluster without calibrator");
      model.calibrators[c] = detail::calibrator_from_json(row.at("calibrator"));
    }
  }
  return model;
}

}  // namespace clustercal
