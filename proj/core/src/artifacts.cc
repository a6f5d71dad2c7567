#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "clustercal/error.h"
#include "clustercal/harness.h"
#include "json_util.h"

namespace clustercal::artifacts {
namespace {

namespace fs = std::filesystem;
using detail::Json;
using detail::OrderedJson;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

fs::path existing(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw ValidationError("missing artifact '" + p.string() + "'; run the earlier stage first");
  return p;
}

double cell_double(const std::string& text, const char* what) {
  double v = 0.0;
  if (!parse_double(text, v)) throw ValidationError(std::string(what) + ": bad number '" + text + "'");
  return v;
}

int cell_int(const std::string& text, const char* what) {
  const double v = cell_double(text, what);
  if (v != static_cast<int>(v)) throw ValidationError(std::string(what) + ": expected an integer");
  return static_cast<int>(v);
}

int require_column(const CsvTable& t, const char* name, const char* what) {
  const int c = t.column(name);
  if (c < 0) throw ValidationError(std::string(what) + ": missing column '" + name + "'");
  return c;
}

void check_ids(const CsvTable& t, int id_col, const std::vector<std::string>& ids, const char* what) {
  if (t.rows.size() != ids.size()) throw ValidationError(std::string(what) + ": row count does not match the data");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (t.rows[i][id_col] != ids[i]) throw ValidationError(std::string(what) + ": sample order does not match");
  }
}

std::string split_name(char tag) {
  switch (tag) {
    case 't': return "train";
    case 'c': return "calibration";
    default: return "test";
  }
}

std::vector<char> split_tags(const PipelineState& s) {
  std::vector<char> tag(s.data.size(), 'x');
  for (std::size_t i : s.split.train) tag[i] = 't';
  for (std::size_t i : s.split.calibration) tag[i] = 'c';
  return tag;
}

std::string split_json(const SplitIndices& split) {
  OrderedJson j;
  j["seed"] = split.seed;
  j["train"] = split.train;
  j["calibration"] = split.calibration;
  j["test"] = split.test;
  return detail::dump(j);
}

// The stored split must equal the one recomputed from the configuration.
void check_split(const PipelineState& s, const fs::path& dir) {
  const fs::path p = dir / "split.json";
  if (!fs::exists(p)) return;
  const Json j = detail::parse_json(read_text_file(p), "split.json");
  try {
    if (j.at("train").get<std::vector<std::size_t>>() != s.split.train ||
        j.at("calibration").get<std::vector<std::size_t>>() != s.split.calibration ||
        j.at("test").get<std::vector<std::size_t>>() != s.split.test) {
      throw ValidationError("split.json does not match the configured split; was the config or seed changed?");
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("split.json: ") + e.what());
  }
}

std::vector<std::string> method_list(const std::vector<CalibrationMethod>& methods) {
  std::vector<std::string> out;
  for (auto m : methods) out.emplace_back(method_name(m));
  return out;
}

}  // namespace

// ---- Writers ----------------------------------------------------------------

void write_train(const PipelineState& s, const fs::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "config.resolved.json", s.config.canonical_json());
  write_text_file(dir / "split.json", split_json(s.split));
  if (s.ensemble) write_text_file(dir / "ensemble.json", ensemble_to_json(*s.ensemble));
  CsvWriter w({"sample_id", "margin", "probability"});
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    w.add(s.data.sample_ids[i]).add(s.scores.margins[i]).add(s.scores.probabilities[i]);
    w.end_row();
  }
  w.save(dir / "scores.csv");
}

void write_embed(const PipelineState& s, const fs::path& dir) {
  ensure_dir(dir);
  if (s.embedder) write_text_file(dir / "embedder.json", embedder_to_json(*s.embedder));
  write_text_file(dir / "embedding.csv", embedding_to_csv(s.embedding.vectors, s.data.sample_ids));
  OrderedJson j;
  j["kind"] = embedding_kind_name(s.embedding.kind);
  j["dim"] = s.embedding.dim();
  j["rows"] = s.embedding.size();
  j["shap_local_accuracy_max_error"] = s.shap_error;
  write_text_file(dir / "embedding_info.json", detail::dump(j));
}

std::string clusters_csv(const PipelineState& s) {
  CsvWriter w({"cluster_id", "size", "positive_rate", "centroid_norm"});
  const ClusterModel& m = s.cluster_model;
  for (std::size_t c = 0; c < m.k; ++c) {
    const std::size_t size = c < m.calibration_size.size() ? m.calibration_size[c] : 0;
    const std::size_t pos = c < m.calibration_positives.size() ? m.calibration_positives[c] : 0;
    double norm = 0.0;
    for (double v : m.centroids.row(c)) norm += v * v;
    w.add(c).add(size).add(size == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(size)).add(std::sqrt(norm));
    w.end_row();
  }
  return w.str();
}

void write_cluster(const PipelineState& s, const fs::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "clusters.json", cluster_model_to_json(s.cluster_model));
  write_text_file(dir / "clusters.csv", clusters_csv(s));

  const auto tag = split_tags(s);
  CsvWriter a({"sample_id", "split", "cluster"});
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    a.add(s.data.sample_ids[i]).add(split_name(tag[i])).add(s.cluster_labels[i]);
    a.end_row();
  }
  a.save(dir / "cluster_assignments.csv");

  const auto fit_rows = s.split.train_and_calibration();
  std::vector<int> fit_labels, fit_y;
  for (std::size_t i : fit_rows) {
    fit_labels.push_back(s.cluster_labels[i]);
    fit_y.push_back(s.data.labels[i]);
  }
  const ClusterDiagnostics d = diagnostics(s.cluster_model.k, fit_labels, fit_y);
  OrderedJson j;
  j["method"] = cluster_method_name(s.cluster_model.method);
  j["k"] = s.cluster_model.k;
  j["size_variance"] = d.size_variance;
  j["label_rate_variance"] = d.label_rate_variance;
  j["homogeneity_fraction"] = d.homogeneity_fraction;
  if (s.elbow) {
    OrderedJson e;
    e["ks"] = s.elbow->ks;
    e["inertias"] = s.elbow->inertias;
    e["curvature"] = s.elbow->curvature;
    e["selected_k"] = s.elbow->selected_k;
    e["unconstrained_k"] = s.elbow->unconstrained_k;
    e["constraint_satisfied"] = s.elbow->constraint_satisfied;
    e["samples_used"] = s.elbow->samples_used;
    j["elbow"] = e;
    CsvWriter ew({"k", "inertia", "curvature"});
    for (std::size_t i = 0; i < s.elbow->ks.size(); ++i) {
      ew.add(s.elbow->ks[i]).add(s.elbow->inertias[i]).add(s.elbow->curvature[i]);
      ew.end_row();
    }
    ew.save(dir / "elbow.csv");
  }
  write_text_file(dir / "cluster_info.json", detail::dump(j));
}

void write_calibrate(const PipelineState& s, const fs::path& dir) {
  ensure_dir(dir);
  for (const auto& [name, c] : s.unified) write_text_file(dir / ("unified_" + name + ".json"), calibrator_to_json(c));
  for (const auto& [name, m] : s.ccl) write_text_file(dir / ("ccl_" + name + ".json"), ccl_to_json(m));
}

std::string metrics_csv(const EvalReport& r) {
  CsvWriter w({"variant", "tag", "method", "CECE", "CECE_ECE", "CECE_MCE", "CECE_AdaECE", "ECE", "MCE", "AdaECE",
               "AUC", "ACC", "CE", "MSE_brier", "RMSE"});
  for (const auto& m : r.rows) {
    w.add(m.variant).add(std::string(variant_kind_name(m.kind))).add(m.method);
    w.add(m.cece).add(m.cece_ece).add(m.cece_mce).add(m.cece_adaece).add(m.ece).add(m.mce).add(m.adaece);
    w.add(m.auc).add(m.acc).add(m.ce).add(m.mse_brier).add(m.rmse);
    w.end_row();
  }
  return w.str();
}

std::string calibrated_scores_csv(const PipelineState& s, const Variant& v) {
  CsvWriter w({"sample_id", "label", "cluster", "margin", "probability", "calibrated"});
  const auto& test = s.split.test;
  if (v.test.size() != test.size()) throw RuntimeError("variant '" + v.name + "' does not cover the test split");
  for (std::size_t t = 0; t < test.size(); ++t) {
    const std::size_t i = test[t];
    w.add(s.data.sample_ids[i]).add(s.data.labels[i]).add(s.cluster_labels[i]);
    w.add(s.scores.margins[i]).add(s.scores.probabilities[i]).add(v.test[t]);
    w.end_row();
  }
  return w.str();
}

void write_evaluate(const PipelineState& s, const fs::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "eval_report.json", report_to_json(s.report));
  write_text_file(dir / "metrics.csv", metrics_csv(s.report));
  const std::vector<int> y = s.labels_of(s.split.test);
  for (const auto& v : s.variants) {
    CsvWriter w({"bin", "lower", "upper", "center", "count", "mean_prediction", "observed_rate"});
    for (const auto& r : reliability_data(v.test, y, s.config.metric_bins, s.config.metric_scheme)) {
      w.add(r.bin).add(r.lower).add(r.upper).add(r.center).add(r.count).add(r.mean_prediction).add(r.observed_rate);
      w.end_row();
    }
    w.save(dir / ("bins_" + v.name + ".csv"));
    write_text_file(dir / ("calibrated_scores_" + v.name + ".csv"), calibrated_scores_csv(s, v));
  }
}

std::string rejection_csv(const PipelineState& s) {
  const std::vector<int> y = s.labels_of(s.split.test);
  CsvWriter w({"variant", "threshold", "accepted", "rejected", "error_rate", "rejection_rate", "empty"});
  for (const auto& v : s.variants) {
    const RejectionCurve c = rejection_curve(v.test, y, s.config.rejection_thresholds, s.config.decision_threshold);
    for (std::size_t t = 0; t < c.thresholds.size(); ++t) {
      w.add(v.name).add(c.thresholds[t]).add(c.accepted[t]).add(c.rejected[t]).add(c.error_rate[t]);
      w.add(c.rejection_rate[t]).add(c.empty[t] ? 1 : 0);
      w.end_row();
    }
  }
  return w.str();
}

void write_rejection(const PipelineState& s, const fs::path& dir) {
  ensure_dir(dir);
  write_text_file(dir / "rejection.csv", rejection_csv(s));
  if (s.variants.size() >= 2) {
    std::vector<RejectionModel> models;
    for (const auto& v : s.variants) models.push_back({v.name, v.test});
    const std::vector<int> y = s.labels_of(s.split.test);
    write_text_file(dir / "rejection_selection.csv",
                    rejection_selection(models, y, s.config.rejection_thresholds, s.config.decision_threshold)
                        .to_csv());
  }
}

void write_all(const PipelineState& s, const fs::path& dir) {
  write_train(s, dir);
  write_embed(s, dir);
  write_cluster(s, dir);
  write_calibrate(s, dir);
  write_evaluate(s, dir);
  write_rejection(s, dir);
}

// ---- Readers ----------------------------------------------------------------

void read_train(PipelineState& s, const fs::path& dir) {
  check_split(s, dir);
  s.ensemble.reset();
  if (s.config.needs_ensemble()) s.ensemble = ensemble_from_json(read_text_file(existing(dir, "ensemble.json")));
  const CsvTable t = read_csv(existing(dir, "scores.csv"));
  const int id = require_column(t, "sample_id", "scores.csv");
  const int mc = require_column(t, "margin", "scores.csv");
  const int pc = require_column(t, "probability", "scores.csv");
  check_ids(t, id, s.data.sample_ids, "scores.csv");
  ScoreSet scores;
  scores.source = s.config.scores == ScoreMode::kBuiltin ? ScoreSource::kBuiltin : ScoreSource::kExternal;
  for (const auto& row : t.rows) {
    scores.margins.push_back(cell_double(row[mc], "scores.csv"));
    scores.probabilities.push_back(cell_double(row[pc], "scores.csv"));
  }
  scores.sample_ids = s.data.sample_ids;
  s.scores = std::move(scores);
}

void read_embed(PipelineState& s, const fs::path& dir) {
  const fs::path ej = dir / "embedder.json";
  if (fs::exists(ej)) s.embedder = embedder_from_json(read_text_file(ej));
  const ExternalEmbedding e = load_embedding_csv(existing(dir, "embedding.csv"));
  if (e.sample_ids != s.data.sample_ids) throw ValidationError("embedding.csv: samples do not match the data");
  s.embedding = EmbeddingMatrix{};
  s.embedding.kind = s.config.embedding;
  s.embedding.vectors = e.vectors;
  if (s.embedder) {
    s.embedding.mean = s.embedder->mean;
    s.embedding.scale = s.embedder->scale;
    for (const auto& leaves : s.embedder->leaf_nodes) s.embedding.block_sizes.push_back(leaves.size());
  }
  const fs::path info = dir / "embedding_info.json";
  if (fs::exists(info)) {
    s.shap_error = detail::get_or<double>(detail::parse_json(read_text_file(info), "embedding_info.json"),
                                          "shap_local_accuracy_max_error", 0.0);
  }
}

void read_cluster(PipelineState& s, const fs::path& dir) {
  s.cluster_model = cluster_model_from_json(read_text_file(existing(dir, "clusters.json")));
  if (s.cluster_model.dim() != s.embedding.dim()) {
    throw ValidationError("clusters.json: centroid dimension does not match the embedding");
  }
  const CsvTable t = read_csv(existing(dir, "cluster_assignments.csv"));
  const int id = require_column(t, "sample_id", "cluster_assignments.csv");
  const int cc = require_column(t, "cluster", "cluster_assignments.csv");
  check_ids(t, id, s.data.sample_ids, "cluster_assignments.csv");
  s.cluster_labels.clear();
  for (const auto& row : t.rows) {
    const int c = cell_int(row[cc], "cluster_assignments.csv");
    if (c < 0 || static_cast<std::size_t>(c) >= s.cluster_model.k) {
      throw ValidationError("cluster_assignments.csv: cluster id out of range");
    }
    s.cluster_labels.push_back(c);
  }
  s.elbow.reset();
  const fs::path info = dir / "cluster_info.json";
  if (fs::exists(info)) {
    const Json j = detail::parse_json(read_text_file(info), "cluster_info.json");
    if (j.contains("elbow")) {
      const Json& e = j.at("elbow");
      ElbowResult r;
      try {
        r.ks = e.at("ks").get<std::vector<std::size_t>>();
        r.inertias = e.at("inertias").get<std::vector<double>>();
        r.curvature = e.at("curvature").get<std::vector<double>>();
        r.selected_k = e.at("selected_k").get<std::size_t>();
        r.unconstrained_k = e.at("unconstrained_k").get<std::size_t>();
        r.constraint_satisfied = e.at("constraint_satisfied").get<bool>();
        r.samples_used = e.at("samples_used").get<std::size_t>();
      } catch (const Json::exception& ex) {
        throw ValidationError(std::string("cluster_info.json: ") + ex.what());
      }
      s.elbow = r;
    }
  }
}

void read_calibrate(PipelineState& s, const fs::path& dir) {
  s.unified.clear();
  s.ccl.clear();
  for (const auto& name : method_list(s.config.methods)) {
    s.unified.emplace(name, calibrator_from_json(read_text_file(existing(dir, "unified_" + name + ".json"))));
  }
  for (const auto& name : method_list(s.config.ccl_methods)) {
    CclModel m = ccl_from_json(read_text_file(existing(dir, "ccl_" + name + ".json")));
    if (m.k() != s.cluster_model.k) throw ValidationError("ccl_" + name + ".json: cluster count mismatch");
    s.ccl.emplace(name, std::move(m));
  }
}

CalibratedScores read_calibrated_scores(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const char* what = "calibrated scores";
  const int id = require_column(t, "sample_id", what);
  const int lc = require_column(t, "label", what);
  const int cc = require_column(t, "cluster", what);
  const int pc = require_column(t, "probability", what);
  const int kc = require_column(t, "calibrated", what);
  CalibratedScores out;
  for (const auto& row : t.rows) {
    out.sample_ids.push_back(row[id]);
    out.labels.push_back(cell_int(row[lc], what));
    out.clusters.push_back(cell_int(row[cc], what));
    out.input_probability.push_back(cell_double(row[pc], what));
    out.calibrated.push_back(cell_double(row[kc], what));
  }
  return out;
}

}  // namespace clustercal::artifacts
