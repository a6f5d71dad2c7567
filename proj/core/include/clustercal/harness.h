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

#include "clustercal/calibrators.h"
#include "clustercal/ccl.h"
#include "clustercal/clustering.h"
#include "clustercal/config.h"
#include "clustercal/data.h"
#include "clustercal/embedding.h"
#include "clustercal/metrics.h"
#include "clustercal/model.h"
#include "clustercal/paired_test.h"

namespace clustercal {

enum class VariantKind { kBase, kUnified, kCcl };
std::string_view variant_kind_name(VariantKind kind);

struct MetricRow {
  std::string variant;  // "base", "unified-<method>", "ccl-<method>"
  std::string method;   // calibration method, "none" for base
  VariantKind kind = VariantKind::kBase;
  double cece = 0.0;  // configured base metric
  double cece_ece = 0.0;
  double cece_mce = 0.0;
  double cece_adaece = 0.0;
  double ece = 0.0;
  double mce = 0.0;
  double adaece = 0.0;
  double auc = 0.0;
  double acc = 0.0;
  double ce = 0.0;
  double mse_brier = 0.0;
  double rmse = 0.0;

  // Value of a column by report name (CECE, ECE, ..., RMSE).
  double column(std::string_view name) const;
};

// Calibration-split comparison of a CCL model against its unified counterpart.
struct CalibrationCheck {
  std::string method;
  double cece_unified = 0.0;
  double cece_ccl = 0.0;
  double nll_unified = 0.0;
  double nll_ccl = 0.0;
  std::size_t fitted_clusters = 0;
  std::size_t constant_clusters = 0;
  std::size_t fallback_clusters = 0;
};

struct Selection {
  std::string criterion;
  std::string selected;
  std::string ece_argmin;
  std::string note;                       // set when the ECE argmin differs
  bool theorem_violation = false;         // a row with strictly higher AUC exists
  std::vector<std::string> higher_auc_variants;
};

struct EvalReport {
  std::string config_hash;  // 16 hex digits
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  std::size_t n_train = 0;
  std::size_t n_calibration = 0;
  std::size_t n_test = 0;
  std::string embedding;
  std::string clustering;
  std::size_t k = 0;
  std::vector<std::size_t> elbow_ks;
  std::vector<double> elbow_inertias;
  bool elbow_constraint_satisfied = true;
  double shap_local_accuracy_max_error = 0.0;  // 0 when no SHAP embedding is built
  ClusterDiagnostics diagnostics;              // on train + calibration
  std::vector<MetricRow> rows;                 // test split
  std::vector<CalibrationCheck> calibration_checks;
  std::map<std::string, double> improved_fraction;  // by method, test split
  std::vector<PairedTestResult> significance;
  Selection selection;

  const MetricRow& row(std::string_view variant) const;
};

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view json);

// Argmin of the criterion column; ties go to higher AUC, then variant name.
Selection select_model(std::span<const MetricRow> rows, std::string_view criterion = "CECE");

struct RejectionModel {
  std::string name;
  std::vector<double> probabilities;
};

struct RejectionTable {
  std::vector<double> thresholds;
  std::vector<std::string> models;
  std::vector<std::vector<double>> error;  // [threshold][model]
  std::vector<std::vector<std::string>> winners;  // models at the minimum error
  std::string to_csv() const;
};

RejectionTable rejection_selection(std::span<const RejectionModel> models, std::span<const int> y,
                                   std::span<const double> thresholds, double decision_threshold = 0.5);

struct Variant {
  std::string name;
  std::string method;
  VariantKind kind = VariantKind::kBase;
  std::vector<double> test;         // calibrated test probabilities
  std::vector<double> calibration;  // calibrated calibration-split probabilities
};

// Everything the pipeline computes; stages fill it in order.
struct PipelineState {
  ExperimentConfig config;
  Dataset data;
  IngestStats ingest_stats;
  SplitIndices split;
  std::vector<double> synthetic_margins;  // synthetic data only
  std::optional<TreeEnsemble> ensemble;
  ScoreSet scores;  // every sample, in dataset order
  std::optional<Embedder> embedder;
  EmbeddingMatrix embedding;  // every sample
  double shap_error = 0.0;
  std::optional<ElbowResult> elbow;
  ClusterModel cluster_model;
  std::vector<int> cluster_labels;  // assign() on every sample
  std::map<std::string, Calibrator> unified;  // by method name
  std::map<std::string, CclModel> ccl;        // by method name
  std::vector<Variant> variants;
  EvalReport report;

  std::vector<int> labels_of(std::span<const std::size_t> indices) const;
};

// Stages. Each throws ValidationError or RuntimeError prefixed with its name.
void stage_load(PipelineState& state);       // data + split
void stage_train(PipelineState& state);      // ensemble (when needed) + scores
void stage_embed(PipelineState& state);
void stage_cluster(PipelineState& state);    // fit on train + calibration, assign all
void stage_calibrate(PipelineState& state);  // unified + CCL on the calibration split
void stage_evaluate(PipelineState& state);   // variants, metrics, significance

PipelineState run_pipeline(const ExperimentConfig& config);
// Runs the pipeline and writes every output into config.output_dir.
EvalReport run_experiment(const ExperimentConfig& config);

// ---- Artifact files -------------------------------------------------------
namespace artifacts {

// Writers for the stage outputs. All paths are inside `dir`.
void write_train(const PipelineState& state, const std::filesystem::path& dir);
void write_embed(const PipelineState& state, const std::filesystem::path& dir);
void write_cluster(const PipelineState& state, const std::filesystem::path& dir);
void write_calibrate(const PipelineState& state, const std::filesystem::path& dir);
void write_evaluate(const PipelineState& state, const std::filesystem::path& dir);
void write_rejection(const PipelineState& state, const std::filesystem::path& dir);
void write_all(const PipelineState& state, const std::filesystem::path& dir);

// Readers that restore the state a later subcommand needs. state must already
// hold the loaded data and split (stage_load).
void read_train(PipelineState& state, const std::filesystem::path& dir);
void read_embed(PipelineState& state, const std::filesystem::path& dir);
void read_cluster(PipelineState& state, const std::filesystem::path& dir);
void read_calibrate(PipelineState& state, const std::filesystem::path& dir);

std::string calibrated_scores_csv(const PipelineState& state, const Variant& variant);
std::string metrics_csv(const EvalReport& report);
std::string rejection_csv(const PipelineState& state);
std::string clusters_csv(const PipelineState& state);

struct CalibratedScores {
  std::vector<std::string> sample_ids;
  std::vector<int> labels;
  std::vector<int> clusters;
  std::vector<double> input_probability;
  std::vector<double> calibrated;
};
CalibratedScores read_calibrated_scores(const std::filesystem::path& path);

}  // namespace artifacts

}  // namespace clustercal
