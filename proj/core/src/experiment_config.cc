#include <algorithm>
#include <cmath>
#include <set>

#include "clustercal/config.h"
#include "clustercal/error.h"
#include "json_util.h"

namespace clustercal {
namespace {

using detail::get_or;
using detail::Json;
using detail::OrderedJson;

const Json& section(const Json& root, const char* name) {
  static const Json kEmpty = Json::object();
  if (!root.contains(name) || root.at(name).is_null()) return kEmpty;
  const Json& s = root.at(name);
  if (!s.is_object()) throw ValidationError(std::string("config: section '") + name + "' must be an object");
  return s;
}

// Rejects keys that are not part of the schema, so typos do not silently fall
// back to defaults.
void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const char* where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
      throw ValidationError(std::string("config: unknown key '") + it.key() + "' in " + where);
    }
  }
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "builtin") return ScoreMode::kBuiltin;
  if (name == "external") return ScoreMode::kExternal;
  if (name == "synthetic") return ScoreMode::kSynthetic;
  throw ValidationError("config: model.scores must be builtin, external or synthetic");
}

std::vector<CalibrationMethod> parse_methods(const Json& s, const char* key) {
  std::vector<CalibrationMethod> out;
  for (const auto& name : get_or<std::vector<std::string>>(s, key, {})) out.push_back(parse_method(name));
  return out;
}

std::vector<std::string> method_names(const std::vector<CalibrationMethod>& methods) {
  std::vector<std::string> out;
  for (auto m : methods) out.emplace_back(method_name(m));
  return out;
}

}  // namespace

std::string_view score_mode_name(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::kBuiltin: return "builtin";
    case ScoreMode::kExternal: return "external";
    case ScoreMode::kSynthetic: return "synthetic";
  }
  return "unknown";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_json(std::string_view json, const std::filesystem::path& base_dir) {
  const Json root = detail::parse_json(json, "config");
  if (!root.is_object()) throw ValidationError("config: top level must be an object");
  check_keys(root,
             {"seed", "output_dir", "data", "split", "model", "embedding", "clustering", "calibration", "metrics",
              "rejection", "significance"},
             "config");
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.seed = get_or<std::uint64_t>(root, "seed", 0);
  c.output_dir = get_or<std::string>(root, "output_dir", "out");

  const Json& data = section(root, "data");
  check_keys(data, {"csv", "ingest", "synthetic"}, "data");
  c.csv_path = get_or<std::string>(data, "csv", "");
  if (data.contains("ingest")) c.ingest = IngestConfig::from_json(data.at("ingest").dump());
  if (data.contains("synthetic") && !data.at("synthetic").is_null()) {
    const Json& s = data.at("synthetic");
    check_keys(s,
               {"n_subpops", "samples_per_subpop", "d", "positive_rates", "logit_offsets", "noise_scale",
                "separation", "seed"},
               "data.synthetic");
    SyntheticSpec spec;
    spec.n_subpops = get_or(s, "n_subpops", spec.n_subpops);
    spec.samples_per_subpop = get_or(s, "samples_per_subpop", spec.samples_per_subpop);
    spec.d = get_or(s, "d", spec.d);
    spec.positive_rates = get_or(s, "positive_rates", spec.positive_rates);
    spec.logit_offsets = get_or(s, "logit_offsets", spec.logit_offsets);
    spec.noise_scale = get_or(s, "noise_scale", spec.noise_scale);
    spec.separation = get_or(s, "separation", spec.separation);
    c.synthetic_seed_explicit = s.contains("seed") && !s.at("seed").is_null();
    spec.seed = get_or<std::uint64_t>(s, "seed", 0);
    c.synthetic = spec;
  }

  const Json& split = section(root, "split");
  check_keys(split, {"ratios", "stratify"}, "split");
  if (split.contains("ratios")) {
    const auto r = get_or<std::vector<double>>(split, "ratios", {});
    if (r.size() != 3) throw ValidationError("config: split.ratios needs three values");
    c.ratios = {r[0], r[1], r[2]};
  }
  c.stratify = get_or(split, "stratify", c.stratify);

  const Json& model = section(root, "model");
  check_keys(model, {"scores", "gbt", "external_scores", "clip"}, "model");
  c.scores = parse_score_mode(get_or<std::string>(model, "scores", "builtin"));
  c.external_scores_path = get_or<std::string>(model, "external_scores", "");
  c.clip = get_or(model, "clip", c.clip);
  const Json& gbt = section(model, "gbt");
  check_keys(gbt, {"n_trees", "max_depth", "learning_rate", "min_child_weight", "lambda_l2"}, "model.gbt");
  c.gbt.n_trees = get_or(gbt, "n_trees", c.gbt.n_trees);
  c.gbt.max_depth = get_or(gbt, "max_depth", c.gbt.max_depth);
  c.gbt.learning_rate = get_or(gbt, "learning_rate", c.gbt.learning_rate);
  c.gbt.min_child_weight = get_or(gbt, "min_child_weight", c.gbt.min_child_weight);
  c.gbt.lambda_l2 = get_or(gbt, "lambda_l2", c.gbt.lambda_l2);

  const Json& emb = section(root, "embedding");
  check_keys(emb, {"kind", "topk_fraction", "standardize", "external_path"}, "embedding");
  c.embedding = parse_embedding_kind(get_or<std::string>(emb, "kind", "shap"));
  c.embedding_options.topk_fraction = get_or(emb, "topk_fraction", c.embedding_options.topk_fraction);
  if (emb.contains("standardize") && !emb.at("standardize").is_null()) {
    c.embedding_options.standardize = get_or<bool>(emb, "standardize", false);
  }
  c.external_embedding_path = get_or<std::string>(emb, "external_path", "");

  const Json& cl = section(root, "clustering");
  check_keys(cl, {"method", "k", "max_iterations", "elbow"}, "clustering");
  c.clustering = parse_cluster_method(get_or<std::string>(cl, "method", "kmeans"));
  c.k = get_or<std::size_t>(cl, "k", 0);
  c.kmeans_max_iterations = get_or(cl, "max_iterations", c.kmeans_max_iterations);
  const Json& elbow = section(cl, "elbow");
  check_keys(elbow, {"k_min", "k_max", "step", "max_samples", "min_cluster_size"}, "clustering.elbow");
  c.elbow.k_min = get_or(elbow, "k_min", c.elbow.k_min);
  c.elbow.k_max = get_or(elbow, "k_max", c.elbow.k_max);
  c.elbow.step = get_or(elbow, "step", c.elbow.step);
  c.elbow.max_samples = get_or(elbow, "max_samples", c.elbow.max_samples);
  c.elbow.min_cluster_size = get_or(elbow, "min_cluster_size", c.elbow.min_cluster_size);

  const Json& cal = section(root, "calibration");
  check_keys(cal,
             {"methods", "ccl_methods", "bins", "laplace", "min_fit_size", "constant_mode", "beta_constrained",
              "epsilon"},
             "calibration");
  c.methods = cal.contains("methods")
                  ? parse_methods(cal, "methods")
                  : std::vector<CalibrationMethod>{CalibrationMethod::kPlatt, CalibrationMethod::kTemperature,
                                                   CalibrationMethod::kBeta, CalibrationMethod::kDirichlet2,
                                                   CalibrationMethod::kHistogram, CalibrationMethod::kIsotonic,
                                                   CalibrationMethod::kPlattBin};
  if (cal.contains("ccl_methods")) {
    c.ccl_methods = parse_methods(cal, "ccl_methods");
  } else {
    for (auto m : c.methods) {
      if (is_parametric(m)) c.ccl_methods.push_back(m);
    }
  }
  c.ccl.calibrator.bins = get_or(cal, "bins", c.ccl.calibrator.bins);
  c.ccl.calibrator.laplace = get_or(cal, "laplace", c.ccl.calibrator.laplace);
  c.ccl.calibrator.beta_constrained = get_or(cal, "beta_constrained", c.ccl.calibrator.beta_constrained);
  c.ccl.calibrator.epsilon = get_or(cal, "epsilon", c.ccl.calibrator.epsilon);
  c.ccl.min_fit_size = get_or(cal, "min_fit_size", c.ccl.min_fit_size);
  const auto mode = get_or<std::string>(cal, "constant_mode", "laplace");
  if (mode == "laplace") {
    c.ccl.constant_mode = ConstantMode::kLaplace;
  } else if (mode == "raw") {
    c.ccl.constant_mode = ConstantMode::kRawRate;
  } else {
    throw ValidationError("config: calibration.constant_mode must be laplace or raw");
  }

  const Json& met = section(root, "metrics");
  check_keys(met, {"bins", "scheme", "cece_base", "decision_threshold"}, "metrics");
  c.metric_bins = get_or(met, "bins", c.metric_bins);
  c.metric_scheme = parse_scheme(get_or<std::string>(met, "scheme", "equal_width"));
  c.cece_base = parse_calibration_metric(get_or<std::string>(met, "cece_base", "ece"));
  c.decision_threshold = get_or(met, "decision_threshold", c.decision_threshold);

  const Json& rej = section(root, "rejection");
  check_keys(rej, {"thresholds"}, "rejection");
  c.rejection_thresholds = get_or(rej, "thresholds", c.rejection_thresholds);

  const Json& sig = section(root, "significance");
  check_keys(sig, {"enabled", "metric", "fraction", "iterations", "pairs"}, "significance");
  c.significance_enabled = get_or(sig, "enabled", c.significance_enabled);
  c.significance_metric = parse_paired_metric(get_or<std::string>(sig, "metric", "ece"));
  c.significance_fraction = get_or(sig, "fraction", c.significance_fraction);
  c.significance_iterations = get_or(sig, "iterations", c.significance_iterations);
  for (const auto& pair : get_or<std::vector<std::vector<std::string>>>(sig, "pairs", {})) {
    if (pair.size() != 2) throw ValidationError("config: significance.pairs entries need two variant names");
    c.significance_pairs.emplace_back(pair[0], pair[1]);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path), path.parent_path());
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

bool ExperimentConfig::needs_ensemble() const {
  return scores == ScoreMode::kBuiltin || embedding == EmbeddingKind::kShap || embedding == EmbeddingKind::kLeaf ||
         embedding == EmbeddingKind::kTopk;
}

SyntheticSpec ExperimentConfig::synthetic_spec() const {
  SyntheticSpec spec = synthetic.value_or(SyntheticSpec{});
  if (!synthetic_seed_explicit) spec.seed = seed;
  return spec;
}

std::vector<std::string> ExperimentConfig::variant_names() const {
  std::vector<std::string> names{"base"};
  for (auto m : methods) names.push_back("unified-" + std::string(method_name(m)));
  for (auto m : ccl_methods) names.push_back("ccl-" + std::string(method_name(m)));
  return names;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::effective_pairs() const {
  if (!significance_pairs.empty()) return significance_pairs;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (auto m : ccl_methods) {
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) continue;
    const std::string name(method_name(m));
    pairs.emplace_back("ccl-" + name, "unified-" + name);
  }
  return pairs;
}

void ExperimentConfig::validate() const {
  const bool has_csv = !csv_path.empty();
  if (has_csv == synthetic.has_value()) {
    throw ValidationError("config: data needs exactly one of 'csv' or 'synthetic'");
  }
  if (has_csv) {
    if (!std::filesystem::exists(resolve(csv_path))) {
      throw ValidationError("config: data.csv '" + resolve(csv_path).string() + "' does not exist");
    }
    if (ingest.label_column.empty()) throw ValidationError("config: data.ingest.label_column is required");
  } else {
    synthetic_spec().validate();
  }
  const double sum = ratios.train + ratios.calibration + ratios.test;
  if (!(ratios.train > 0 && ratios.calibration > 0 && ratios.test > 0) || std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("config: split.ratios must be positive and sum to 1");
  }
  if (scores == ScoreMode::kExternal) {
    if (external_scores_path.empty()) throw ValidationError("config: model.external_scores is required");
    if (!std::filesystem::exists(resolve(external_scores_path))) {
      throw ValidationError("config: model.external_scores '" + external_scores_path + "' does not exist");
    }
  }
  if (scores == ScoreMode::kSynthetic && !synthetic) {
    throw ValidationError("config: model.scores 'synthetic' needs synthetic data");
  }
  if (!(clip > 0.0 && clip < 0.5)) throw ValidationError("config: model.clip must be in (0, 0.5)");
  if (needs_ensemble()) gbt.validate();
  if (embedding == EmbeddingKind::kExternal) {
    if (external_embedding_path.empty()) throw ValidationError("config: embedding.external_path is required");
    if (!std::filesystem::exists(resolve(external_embedding_path))) {
      throw ValidationError("config: embedding.external_path '" + external_embedding_path + "' does not exist");
    }
  }
  if (!(embedding_options.topk_fraction > 0.0 && embedding_options.topk_fraction <= 1.0)) {
    throw ValidationError("config: embedding.topk_fraction must be in (0, 1]");
  }
  if (k == 0) {
    if (elbow.step == 0 || elbow.k_min < 2 || elbow.k_max < elbow.k_min) {
      throw ValidationError("config: clustering.elbow grid is invalid");
    }
    if ((elbow.k_max - elbow.k_min) / elbow.step + 1 < 3) {
      throw ValidationError("config: clustering.elbow grid needs at least 3 points");
    }
  }
  if (kmeans_max_iterations < 1) throw ValidationError("config: clustering.max_iterations must be >= 1");
  if (methods.empty()) throw ValidationError("config: calibration.methods must not be empty");
  if (std::set<CalibrationMethod>(methods.begin(), methods.end()).size() != methods.size() ||
      std::set<CalibrationMethod>(ccl_methods.begin(), ccl_methods.end()).size() != ccl_methods.size()) {
    throw ValidationError("config: calibration methods must not repeat");
  }
  for (auto m : ccl_methods) {
    if (!is_parametric(m)) {
      throw ValidationError("config: CCL needs a parametric method, got '" + std::string(method_name(m)) + "'");
    }
  }
  if (ccl.calibrator.bins == 0) throw ValidationError("config: calibration.bins must be >= 1");
  if (!(ccl.calibrator.epsilon > 0.0 && ccl.calibrator.epsilon < 0.5)) {
    throw ValidationError("config: calibration.epsilon must be in (0, 0.5)");
  }
  if (metric_bins == 0) throw ValidationError("config: metrics.bins must be >= 1");
  if (metric_scheme == BinScheme::kCluster) throw ValidationError("config: metrics.scheme must be equal_width or equal_mass");
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0)) {
    throw ValidationError("config: metrics.decision_threshold must be in [0, 1]");
  }
  if (rejection_thresholds.empty()) throw ValidationError("config: rejection.thresholds must not be empty");
  for (double t : rejection_thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("config: rejection thresholds must be in [0, 1]");
  }
  if (significance_enabled) {
    if (!(significance_fraction > 0.0 && significance_fraction <= 1.0)) {
      throw ValidationError("config: significance.fraction must be in (0, 1]");
    }
    if (significance_iterations < 2) throw ValidationError("config: significance.iterations must be >= 2");
    const auto names = variant_names();
    for (const auto& [a, b] : effective_pairs()) {
      for (const auto& v : {a, b}) {
        if (std::find(names.begin(), names.end(), v) == names.end()) {
          throw ValidationError("config: significance pair names unknown variant '" + v + "'");
        }
      }
    }
  }
}

std::string ExperimentConfig::canonical_json() const {
  OrderedJson j;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  OrderedJson data;
  if (synthetic) {
    const SyntheticSpec s = synthetic_spec();
    OrderedJson sj;
    sj["n_subpops"] = s.n_subpops;
    sj["samples_per_subpop"] = s.samples_per_subpop;
    sj["d"] = s.d;
    sj["positive_rates"] = s.positive_rates;
    sj["logit_offsets"] = s.logit_offsets;
    sj["noise_scale"] = s.noise_scale;
    sj["separation"] = s.separation;
    sj["seed"] = s.seed;
    data["synthetic"] = sj;
  } else {
    data["csv"] = csv_path;
    OrderedJson ij;
    ij["label_column"] = ingest.label_column;
    ij["id_column"] = ingest.id_column ? OrderedJson(*ingest.id_column) : OrderedJson(nullptr);
    ij["label_map"] = ingest.label_map;
    ij["impute"] = ingest.impute == ImputeMode::kMean ? "mean" : "reject";
    ij["categorical"] = ingest.categorical;
    data["ingest"] = ij;
  }
  j["data"] = data;
  j["split"] = {{"ratios", {ratios.train, ratios.calibration, ratios.test}}, {"stratify", stratify}};
  OrderedJson model;
  model["scores"] = std::string(score_mode_name(scores));
  model["gbt"] = {{"n_trees", gbt.n_trees},
                  {"max_depth", gbt.max_depth},
                  {"learning_rate", gbt.learning_rate},
                  {"min_child_weight", gbt.min_child_weight},
                  {"lambda_l2", gbt.lambda_l2}};
  model["external_scores"] = external_scores_path;
  model["clip"] = clip;
  j["model"] = model;
  OrderedJson emb;
  emb["kind"] = std::string(embedding_kind_name(embedding));
  emb["topk_fraction"] = embedding_options.topk_fraction;
  emb["standardize"] =
      embedding_options.standardize ? OrderedJson(*embedding_options.standardize) : OrderedJson(nullptr);
  emb["external_path"] = external_embedding_path;
  j["embedding"] = emb;
  OrderedJson cl;
  cl["method"] = std::string(cluster_method_name(clustering));
  cl["k"] = k;
  cl["max_iterations"] = kmeans_max_iterations;
  cl["elbow"] = {{"k_min", elbow.k_min},
                 {"k_max", elbow.k_max},
                 {"step", elbow.step},
                 {"max_samples", elbow.max_samples},
                 {"min_cluster_size", elbow.min_cluster_size}};
  j["clustering"] = cl;
  OrderedJson cal;
  cal["methods"] = method_names(methods);
  cal["ccl_methods"] = method_names(ccl_methods);
  cal["bins"] = ccl.calibrator.bins;
  cal["laplace"] = ccl.calibrator.laplace;
  cal["min_fit_size"] = ccl.min_fit_size;
  cal["constant_mode"] = ccl.constant_mode == ConstantMode::kLaplace ? "laplace" : "raw";
  cal["beta_constrained"] = ccl.calibrator.beta_constrained;
  cal["epsilon"] = ccl.calibrator.epsilon;
  j["calibration"] = cal;
  j["metrics"] = {{"bins", metric_bins},
                  {"scheme", std::string(scheme_name(metric_scheme))},
                  {"cece_base", std::string(metric_name(cece_base))},
                  {"decision_threshold", decision_threshold}};
  j["rejection"] = {{"thresholds", rejection_thresholds}};
  OrderedJson sig;
  sig["enabled"] = significance_enabled;
  sig["metric"] = std::string(paired_metric_name(significance_metric));
  sig["fraction"] = significance_fraction;
  sig["iterations"] = significance_iterations;
  OrderedJson pairs = OrderedJson::array();
  for (const auto& [a, b] : effective_pairs()) pairs.push_back({a, b});
  sig["pairs"] = pairs;
  j["significance"] = sig;
  return detail::dump(j);
}

// The output location does not change any result, so it is left out.
std::uint64_t ExperimentConfig::hash() const {
  ExperimentConfig copy = *this;
  copy.output_dir.clear();
  return fnv1a64(copy.canonical_json());
}

}  // namespace clustercal
