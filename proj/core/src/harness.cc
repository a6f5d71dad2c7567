#include "clustercal/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "clustercal/error.h"
#include "clustercal/tree_shap.h"
#include "json_util.h"

namespace clustercal {
namespace {

using detail::get_or;
using detail::get_required;
using detail::Json;
using detail::OrderedJson;

constexpr const char* kReportFormat = "clustercal.eval_report.v1";

// Runs a stage body and prefixes any error with the stage name.
template <typename F>
void run_stage(const char* name, F&& body) {
  try {
    body();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  } catch (const RuntimeError& e) {
    throw RuntimeError(std::string(name) + ": " + e.what());
  }
}

std::vector<int> labels_at(std::span<const int> labels, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

double mean_nll(std::span<const double> p, std::span<const int> y) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total -= y[i] == 1 ? std::log(p[i]) : std::log1p(-p[i]);
  return total / static_cast<double>(p.size());
}

MetricRow metric_row(const Variant& v, std::span<const int> y, std::span<const int> clusters, std::size_t k,
                     const ExperimentConfig& c) {
  MetricRow row;
  row.variant = v.name;
  row.method = v.method;
  row.kind = v.kind;
  const auto& p = v.test;
  row.cece = cece(p, y, clusters, c.cece_base, k).value;
  row.cece_ece = cece(p, y, clusters, CalibrationMetric::kEce, k).value;
  row.cece_mce = cece(p, y, clusters, CalibrationMetric::kMce, k).value;
  row.cece_adaece = cece(p, y, clusters, CalibrationMetric::kAdaEce, k).value;
  row.ece = ece(p, y, c.metric_bins, c.metric_scheme).value;
  row.mce = mce(p, y, c.metric_bins, c.metric_scheme).value;
  row.adaece = ada_ece(p, y, std::min(c.metric_bins, p.size())).value;
  row.auc = auc(p, y).value;
  const ScalarMetrics s = scalar_metrics(p, y, c.decision_threshold);
  row.acc = s.acc;
  row.ce = s.ce;
  row.mse_brier = s.mse_brier;
  row.rmse = s.rmse;
  return row;
}

const Variant& find_variant(const std::vector<Variant>& variants, const std::string& name) {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  throw ValidationError("unknown variant '" + name + "'");
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// JSON has no infinities; they are written as strings.
OrderedJson number_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

double number_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("eval report: bad number '" + s + "'");
  }
  return j.get<double>();
}

VariantKind parse_variant_kind(std::string_view name) {
  for (auto k : {VariantKind::kBase, VariantKind::kUnified, VariantKind::kCcl}) {
    if (variant_kind_name(k) == name) return k;
  }
  throw ValidationError("eval report: unknown variant kind '" + std::string(name) + "'");
}

}  // namespace

std::string_view variant_kind_name(VariantKind kind) {
  switch (kind) {
    case VariantKind::kBase: return "base";
    case VariantKind::kUnified: return "unified";
    case VariantKind::kCcl: return "ccl";
  }
  return "unknown";
}

const MetricRow& EvalReport::row(std::string_view variant) const {
  for (const auto& r : rows) {
    if (r.variant == variant) return r;
  }
  throw ValidationError("eval report: no row for variant '" + std::string(variant) + "'");
}

std::vector<int> PipelineState::labels_of(std::span<const std::size_t> indices) const {
  return data.labels_at(indices);
}

// ---- Stages -----------------------------------------------------------------

void stage_load(PipelineState& state) {
  run_stage("load", [&] {
    const ExperimentConfig& c = state.config;
    c.validate();
    if (c.synthetic) {
      SyntheticData s = gen_synthetic_full(c.synthetic_spec());
      state.data = std::move(s.dataset);
      state.synthetic_margins = std::move(s.miscalibrated_margin);
      state.ingest_stats = {state.data.size(), 0, 0};
    } else {
      state.data = load_csv(c.resolve(c.csv_path), c.ingest, &state.ingest_stats);
    }
    state.data.validate();
    state.split = split(state.data, c.ratios, c.seed, c.stratify);
    if (state.split.calibration.empty() || state.split.test.empty()) {
      throw ValidationError("calibration and test splits must be non-empty");
    }
  });
}

void stage_train(PipelineState& state) {
  run_stage("train", [&] {
    const ExperimentConfig& c = state.config;
    state.ensemble.reset();
    if (c.needs_ensemble()) {
      state.ensemble = fit_gbt(state.data.subset(state.split.train), c.gbt, c.seed);
    }
    switch (c.scores) {
      case ScoreMode::kBuiltin:
        state.scores = predict(*state.ensemble, state.data.features);
        break;
      case ScoreMode::kExternal:
        state.scores = align_scores(load_external_scores(c.resolve(c.external_scores_path), c.clip),
                                    state.data.sample_ids);
        break;
      case ScoreMode::kSynthetic:
        state.scores = scores_from_margins(state.synthetic_margins, ScoreSource::kExternal);
        break;
    }
    if (state.scores.size() != state.data.size()) throw RuntimeError("score count does not match the data");
    state.scores.sample_ids = state.data.sample_ids;
  });
}

void stage_embed(PipelineState& state) {
  run_stage("embed", [&] {
    const ExperimentConfig& c = state.config;
    const TreeEnsemble* ens = state.ensemble ? &*state.ensemble : nullptr;
    const auto fit_rows = state.split.train_and_calibration();
    Matrix all;
    if (c.embedding == EmbeddingKind::kExternal) {
      const ExternalEmbedding ext = load_embedding_csv(c.resolve(c.external_embedding_path));
      std::map<std::string_view, std::size_t> position;
      for (std::size_t i = 0; i < ext.sample_ids.size(); ++i) {
        if (!position.emplace(ext.sample_ids[i], i).second) {
          throw ValidationError("duplicate embedding id '" + ext.sample_ids[i] + "'");
        }
      }
      std::vector<std::size_t> order;
      order.reserve(state.data.size());
      for (const auto& id : state.data.sample_ids) {
        auto it = position.find(id);
        if (it == position.end()) throw ValidationError("no embedding for sample '" + id + "'");
        order.push_back(it->second);
      }
      all = ext.vectors.select_rows(order);
    } else {
      all = state.data.features;
    }
    state.embedder = fit_embedder(c.embedding, ens, all.select_rows(fit_rows), c.embedding_options);
    state.embedding = embed(*state.embedder, ens, all);

    state.shap_error = 0.0;
    if (c.embedding == EmbeddingKind::kShap) {
      double base = ens->base_score;
      for (const auto& tree : ens->trees) base += expected_value(tree);
      const std::vector<double> margins = predict(*ens, state.data.features).margins;
      for (std::size_t r = 0; r < state.embedding.size(); ++r) {
        double total = base;
        const auto row = state.embedding.vectors.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) {
          total += state.embedder->standardized ? row[j] * state.embedder->scale[j] + state.embedder->mean[j]
                                                : row[j];
        }
        state.shap_error = std::max(state.shap_error, std::abs(total - margins[r]));
      }
    }
  });
}

void stage_cluster(PipelineState& state) {
  run_stage("cluster", [&] {
    const ExperimentConfig& c = state.config;
    const auto fit_rows = state.split.train_and_calibration();
    const Matrix fit_embedding = state.embedding.vectors.select_rows(fit_rows);
    std::size_t k = c.k;
    state.elbow.reset();
    if (k == 0) {
      state.elbow = select_k_elbow(fit_embedding, c.elbow, c.seed);
      k = state.elbow->selected_k;
    }
    if (k > fit_embedding.rows()) throw ValidationError("k exceeds the number of clustering samples");
    state.cluster_model = c.clustering == ClusterMethod::kKMeans
                              ? fit_kmeans(fit_embedding, k, c.seed, c.kmeans_max_iterations)
                              : fit_agglomerative(fit_embedding, k);
    state.cluster_labels = state.cluster_model.assign(state.embedding.vectors);
    state.cluster_model.set_calibration_stats(labels_at(state.cluster_labels, state.split.calibration),
                                              state.labels_of(state.split.calibration));
  });
}

void stage_calibrate(PipelineState& state) {
  run_stage("calibrate", [&] {
    const ExperimentConfig& c = state.config;
    const auto& cal = state.split.calibration;
    const ScoreSet cal_scores = state.scores.subset(cal);
    const std::vector<int> y = state.labels_of(cal);
    const FitData data = FitData::from_scores(cal_scores, y);
    state.unified.clear();
    for (auto m : c.methods) state.unified.emplace(std::string(method_name(m)), fit(m, data, c.ccl.calibrator));
    state.ccl.clear();
    const std::vector<int> cal_clusters = labels_at(state.cluster_labels, cal);
    for (auto m : c.ccl_methods) {
      state.ccl.emplace(std::string(method_name(m)),
                        train_ccl_labels(cal_scores, cal_clusters, state.cluster_model, m, y, c.ccl));
    }
  });
}

void stage_evaluate(PipelineState& state) {
  run_stage("evaluate", [&] {
    const ExperimentConfig& c = state.config;
    const auto& test = state.split.test;
    const auto& cal = state.split.calibration;
    const ScoreSet test_scores = state.scores.subset(test);
    const ScoreSet cal_scores = state.scores.subset(cal);
    const std::vector<int> y_test = state.labels_of(test);
    const std::vector<int> y_cal = state.labels_of(cal);
    const std::vector<int> test_clusters = labels_at(state.cluster_labels, test);
    const std::vector<int> cal_clusters = labels_at(state.cluster_labels, cal);
    const std::size_t k = state.cluster_model.k;

    const auto positives = std::count(y_test.begin(), y_test.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(y_test.size())) {
      throw ValidationError("the test split holds a single class");
    }

    state.variants.clear();
    state.variants.push_back({"base", "none", VariantKind::kBase, test_scores.probabilities,
                              cal_scores.probabilities});
    for (auto m : c.methods) {
      const std::string name(method_name(m));
      const Calibrator& cal_model = state.unified.at(name);
      state.variants.push_back(
          {"unified-" + name, name, VariantKind::kUnified, cal_model.apply(test_scores), cal_model.apply(cal_scores)});
    }
    for (auto m : c.ccl_methods) {
      const std::string name(method_name(m));
      const CclModel& model = state.ccl.at(name);
      state.variants.push_back({"ccl-" + name, name, VariantKind::kCcl,
                                infer_ccl_labels(model, test_scores, test_clusters),
                                infer_ccl_labels(model, cal_scores, cal_clusters)});
    }

    EvalReport& r = state.report;
    r = EvalReport{};
    r.config_hash = hex16(c.hash());
    r.seed = c.seed;
    r.n_samples = state.data.size();
    r.n_train = state.split.train.size();
    r.n_calibration = cal.size();
    r.n_test = test.size();
    r.embedding = std::string(embedding_kind_name(c.embedding));
    r.clustering = std::string(cluster_method_name(c.clustering));
    r.k = k;
    if (state.elbow) {
      r.elbow_ks = state.elbow->ks;
      r.elbow_inertias = state.elbow->inertias;
      r.elbow_constraint_satisfied = state.elbow->constraint_satisfied;
    }
    r.shap_local_accuracy_max_error = state.shap_error;
    const auto fit_rows = state.split.train_and_calibration();
    r.diagnostics = diagnostics(k, labels_at(state.cluster_labels, fit_rows), state.labels_of(fit_rows));

    for (const auto& v : state.variants) r.rows.push_back(metric_row(v, y_test, test_clusters, k, c));

    for (auto m : c.ccl_methods) {
      const std::string name(method_name(m));
      const CclModel& model = state.ccl.at(name);
      const Variant& v = find_variant(state.variants, "ccl-" + name);
      const std::vector<double> global = model.fallback.apply(cal_scores);
      CalibrationCheck check;
      check.method = name;
      check.cece_unified = cece(global, y_cal, cal_clusters, c.cece_base, k).value;
      check.cece_ccl = cece(v.calibration, y_cal, cal_clusters, c.cece_base, k).value;
      check.nll_unified = mean_nll(global, y_cal);
      check.nll_ccl = mean_nll(v.calibration, y_cal);
      for (const auto& cf : model.clusters) {
        switch (cf.resolution) {
          case Resolution::kFitted: ++check.fitted_clusters; break;
          case Resolution::kConstant: ++check.constant_clusters; break;
          case Resolution::kFallback: ++check.fallback_clusters; break;
        }
      }
      r.calibration_checks.push_back(check);

      const std::vector<double> unified_test = state.unified.count(name) != 0
                                                   ? find_variant(state.variants, "unified-" + name).test
                                                   : model.fallback.apply(test_scores);
      r.improved_fraction[name] =
          improved_sample_fraction(v.test, unified_test, y_test, test_clusters, c.metric_bins, c.metric_scheme);
    }

    if (c.significance_enabled) {
      PairedTestOptions opts;
      opts.metric = c.significance_metric;
      opts.fraction = c.significance_fraction;
      opts.iterations = c.significance_iterations;
      opts.seed = c.seed;
      opts.bins = c.metric_bins;
      opts.scheme = c.metric_scheme;
      opts.cece_base = c.cece_base;
      opts.decision_threshold = c.decision_threshold;
      for (const auto& [a, b] : c.effective_pairs()) {
        PairedTestResult t = paired_resample_test(find_variant(state.variants, a).test,
                                                  find_variant(state.variants, b).test, y_test, opts, test_clusters);
        t.name_a = a;
        t.name_b = b;
        r.significance.push_back(std::move(t));
      }
    }

    r.selection = select_model(r.rows, "CECE");
  });
}

PipelineState run_pipeline(const ExperimentConfig& config) {
  PipelineState state;
  state.config = config;
  stage_load(state);
  stage_train(state);
  stage_embed(state);
  stage_cluster(state);
  stage_calibrate(state);
  stage_evaluate(state);
  return state;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  PipelineState state = run_pipeline(config);
  artifacts::write_all(state, config.resolve(config.output_dir));
  return state.report;
}

// ---- Report JSON ------------------------------------------------------------

std::string report_to_json(const EvalReport& r) {
  OrderedJson j;
  j["format"] = kReportFormat;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["n_samples"] = r.n_samples;
  j["n_train"] = r.n_train;
  j["n_calibration"] = r.n_calibration;
  j["n_test"] = r.n_test;
  j["embedding"] = r.embedding;
  j["clustering"] = r.clustering;
  j["k"] = r.k;
  OrderedJson elbow;
  elbow["ks"] = r.elbow_ks;
  elbow["inertias"] = r.elbow_inertias;
  elbow["constraint_satisfied"] = r.elbow_constraint_satisfied;
  j["elbow"] = elbow;
  j["shap_local_accuracy_max_error"] = r.shap_local_accuracy_max_error;

  OrderedJson diag;
  diag["size_variance"] = r.diagnostics.size_variance;
  diag["label_rate_variance"] = r.diagnostics.label_rate_variance;
  diag["homogeneity_fraction"] = r.diagnostics.homogeneity_fraction;
  OrderedJson clusters = OrderedJson::array();
  for (const auto& c : r.diagnostics.clusters) {
    clusters.push_back(
        OrderedJson{{"cluster", c.cluster}, {"size", c.size}, {"positives", c.positives},
                    {"positive_rate", c.positive_rate}});
  }
  diag["clusters"] = clusters;
  j["diagnostics"] = diag;

  OrderedJson rows = OrderedJson::array();
  for (const auto& m : r.rows) {
    rows.push_back(OrderedJson{{"variant", m.variant},
                               {"kind", variant_kind_name(m.kind)},
                               {"method", m.method},
                               {"CECE", m.cece},
                               {"CECE_ECE", m.cece_ece},
                               {"CECE_MCE", m.cece_mce},
                               {"CECE_AdaECE", m.cece_adaece},
                               {"ECE", m.ece},
                               {"MCE", m.mce},
                               {"AdaECE", m.adaece},
                               {"AUC", m.auc},
                               {"ACC", m.acc},
                               {"CE", m.ce},
                               {"MSE_brier", m.mse_brier},
                               {"RMSE", m.rmse}});
  }
  j["metrics"] = rows;

  OrderedJson checks = OrderedJson::array();
  for (const auto& c : r.calibration_checks) {
    checks.push_back(OrderedJson{{"method", c.method},
                                 {"cece_unified", c.cece_unified},
                                 {"cece_ccl", c.cece_ccl},
                                 {"nll_unified", c.nll_unified},
                                 {"nll_ccl", c.nll_ccl},
                                 {"fitted_clusters", c.fitted_clusters},
                                 {"constant_clusters", c.constant_clusters},
                                 {"fallback_clusters", c.fallback_clusters}});
  }
  j["calibration_checks"] = checks;

  OrderedJson improved = OrderedJson::object();
  for (const auto& [m, f] : r.improved_fraction) improved[m] = f;
  j["improved_fraction"] = improved;

  OrderedJson sig = OrderedJson::array();
  for (const auto& t : r.significance) {
    sig.push_back(OrderedJson{{"a", t.name_a},
                              {"b", t.name_b},
                              {"metric", t.metric},
                              {"differences", t.differences},
                              {"mean_difference", t.mean_difference},
                              {"sd_difference", t.sd_difference},
                              {"t_statistic", number_json(t.t_statistic)},
                              {"degrees_of_freedom", t.degrees_of_freedom},
                              {"p_one_sided_less", t.p_one_sided_less},
                              {"p_two_sided", t.p_two_sided},
                              {"resampled", t.resampled},
                              {"zero_variance", t.zero_variance}});
  }
  j["significance"] = sig;

  OrderedJson sel;
  sel["criterion"] = r.selection.criterion;
  sel["selected"] = r.selection.selected;
  sel["ece_argmin"] = r.selection.ece_argmin;
  sel["note"] = r.selection.note;
  sel["theorem_violation"] = r.selection.theorem_violation;
  sel["higher_auc_variants"] = r.selection.higher_auc_variants;
  j["selection"] = sel;
  return detail::dump(j);
}

EvalReport report_from_json(std::string_view text) {
  const Json j = detail::parse_json(text, "eval report");
  try {
    if (get_required<std::string>(j, "format", "eval report") != kReportFormat) {
      throw ValidationError("eval report: unsupported format");
    }
    EvalReport r;
    r.config_hash = get_required<std::string>(j, "config_hash", "eval report");
    r.seed = get_required<std::uint64_t>(j, "seed", "eval report");
    r.n_samples = get_required<std::size_t>(j, "n_samples", "eval report");
    r.n_train = get_required<std::size_t>(j, "n_train", "eval report");
    r.n_calibration = get_required<std::size_t>(j, "n_calibration", "eval report");
    r.n_test = get_required<std::size_t>(j, "n_test", "eval report");
    r.embedding = get_required<std::string>(j, "embedding", "eval report");
    r.clustering = get_required<std::string>(j, "clustering", "eval report");
    r.k = get_required<std::size_t>(j, "k", "eval report");
    if (j.contains("elbow")) {
      const Json& e = j.at("elbow");
      r.elbow_ks = get_or<std::vector<std::size_t>>(e, "ks", {});
      r.elbow_inertias = get_or<std::vector<double>>(e, "inertias", {});
      r.elbow_constraint_satisfied = get_or<bool>(e, "constraint_satisfied", true);
    }
    r.shap_local_accuracy_max_error = get_or<double>(j, "shap_local_accuracy_max_error", 0.0);
    if (j.contains("diagnostics")) {
      const Json& d = j.at("diagnostics");
      r.diagnostics.size_variance = get_required<double>(d, "size_variance", "diagnostics");
      r.diagnostics.label_rate_variance = get_required<double>(d, "label_rate_variance", "diagnostics");
      r.diagnostics.homogeneity_fraction = get_required<double>(d, "homogeneity_fraction", "diagnostics");
      for (const auto& c : d.at("clusters")) {
        r.diagnostics.clusters.push_back({c.at("cluster").get<int>(), c.at("size").get<std::size_t>(),
                                          c.at("positives").get<std::size_t>(), c.at("positive_rate").get<double>()});
      }
    }
    for (const auto& m : j.at("metrics")) {
      MetricRow row;
      row.variant = m.at("variant").get<std::string>();
      row.kind = parse_variant_kind(m.at("kind").get<std::string>());
      row.method = m.at("method").get<std::string>();
      row.cece = m.at("CECE").get<double>();
      row.cece_ece = m.at("CECE_ECE").get<double>();
      row.cece_mce = m.at("CECE_MCE").get<double>();
      row.cece_adaece = m.at("CECE_AdaECE").get<double>();
      row.ece = m.at("ECE").get<double>();
      row.mce = m.at("MCE").get<double>();
      row.adaece = m.at("AdaECE").get<double>();
      row.auc = m.at("AUC").get<double>();
      row.acc = m.at("ACC").get<double>();
      row.ce = m.at("CE").get<double>();
      row.mse_brier = m.at("MSE_brier").get<double>();
      row.rmse = m.at("RMSE").get<double>();
      r.rows.push_back(std::move(row));
    }
    for (const auto& c : j.at("calibration_checks")) {
      CalibrationCheck check;
      check.method = c.at("method").get<std::string>();
      check.cece_unified = c.at("cece_unified").get<double>();
      check.cece_ccl = c.at("cece_ccl").get<double>();
      check.nll_unified = c.at("nll_unified").get<double>();
      check.nll_ccl = c.at("nll_ccl").get<double>();
      check.fitted_clusters = c.at("fitted_clusters").get<std::size_t>();
      check.constant_clusters = c.at("constant_clusters").get<std::size_t>();
      check.fallback_clusters = c.at("fallback_clusters").get<std::size_t>();
      r.calibration_checks.push_back(std::move(check));
    }
    for (const auto& [m, f] : j.at("improved_fraction").items()) r.improved_fraction[m] = f.get<double>();
    for (const auto& s : j.at("significance")) {
      PairedTestResult t;
      t.name_a = s.at("a").get<std::string>();
      t.name_b = s.at("b").get<std::string>();
      t.metric = s.at("metric").get<std::string>();
      t.differences = s.at("differences").get<std::vector<double>>();
      t.mean_difference = s.at("mean_difference").get<double>();
      t.sd_difference = s.at("sd_difference").get<double>();
      t.t_statistic = number_from_json(s.at("t_statistic"));
      t.degrees_of_freedom = s.at("degrees_of_freedom").get<int>();
      t.p_one_sided_less = s.at("p_one_sided_less").get<double>();
      t.p_two_sided = s.at("p_two_sided").get<double>();
      t.resampled = s.at("resampled").get<int>();
      t.zero_variance = s.at("zero_variance").get<bool>();
      r.significance.push_back(std::move(t));
    }
    const Json& sel = j.at("selection");
    r.selection.criterion = sel.at("criterion").get<std::string>();
    r.selection.selected = sel.at("selected").get<std::string>();
    r.selection.ece_argmin = sel.at("ece_argmin").get<std::string>();
    r.selection.note = sel.at("note").get<std::string>();
    r.selection.theorem_violation = sel.at("theorem_violation").get<bool>();
    r.selection.higher_auc_variants = sel.at("higher_auc_variants").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("eval report: ") + e.what());
  }
}

}  // namespace clustercal
