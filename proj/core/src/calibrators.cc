#include "clustercal/calibrators.h"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "clustercal/error.h"
#include "json_util.h"
#include "serialization.h"

namespace clustercal {
namespace {

using detail::Json;
using detail::OrderedJson;

constexpr double kArmijo = 1e-4;

double laplace_rate(std::size_t positives, std::size_t n) {
  return (static_cast<double>(positives) + 1.0) / (static_cast<double>(n) + 2.0);
}

std::size_t count_positives(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

// Logistic-loss minimisation over a small linear model z = phi . theta.
class LogisticProblem {
 public:
  LogisticProblem(Eigen::MatrixXd features, std::span<const int> labels)
      : phi_(std::move(features)), y_(static_cast<Eigen::Index>(labels.size())) {
    for (std::size_t i = 0; i < labels.size(); ++i) y_[static_cast<Eigen::Index>(i)] = labels[i];
  }

  double objective(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd z = phi_ * theta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y_[i] * z[i];
    return total / static_cast<double>(z.size());
  }

  // Newton with Levenberg damping and Armijo backtracking. Coordinates with
  // free[j] == false stay at their initial value.
  FitInfo minimize(Eigen::VectorXd& theta, const std::vector<bool>& free, int max_iterations,
                   double tolerance) const {
    std::vector<Eigen::Index> active;
    for (std::size_t j = 0; j < free.size(); ++j) {
      if (free[j]) active.push_back(static_cast<Eigen::Index>(j));
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    const auto n = static_cast<double>(phi_.rows());
    FitInfo info;
    info.converged = false;
    double f = objective(theta);
    if (k == 0) {
      info.objective = f;
      info.converged = true;
      return info;
    }
    for (int it = 0; it < max_iterations; ++it) {
      const Eigen::VectorXd z = phi_ * theta;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
      for (Eigen::Index i = 0; i < phi_.rows(); ++i) {
        const double p = logistic(z[i]);
        const double r = p - y_[i];
        const double w = p * (1.0 - p);
        for (Eigen::Index a = 0; a < k; ++a) {
          const double fa = phi_(i, active[a]);
          g[a] += r * fa;
          for (Eigen::Index b = 0; b <= a; ++b) h(a, b) += w * fa * phi_(i, active[b]);
        }
      }
      g /= n;
      h /= n;
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < a; ++b) h(b, a) = h(a, b);
      }
      info.iterations = it;
      if (g.norm() <= tolerance) {
        info.converged = true;
        break;
      }

      Eigen::VectorXd step;
      double damping = 0.0;
      const double scale = 1e-10 * (1.0 + h.trace());
      bool found = false;
      for (int tries = 0; tries < 80; ++tries) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h + damping * Eigen::MatrixXd::Identity(k, k));
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
          step = ldlt.solve(-g);
          if (step.allFinite() && g.dot(step) < 0.0) {
            found = true;
            break;
          }
        }
        damping = damping == 0.0 ? scale : damping * 4.0;
      }
      if (!found) step = -g;

      const double slope = g.dot(step);
      double t = 1.0;
      bool accepted = false;
      Eigen::VectorXd candidate = theta;
      for (int ls = 0; ls < 60; ++ls) {
        for (Eigen::Index a = 0; a < k; ++a) candidate[active[a]] = theta[active[a]] + t * step[a];
        const double fc = objective(candidate);
        if (std::isfinite(fc) && fc <= f + kArmijo * t * slope) {
          accepted = true;
          theta = candidate;
          f = fc;
          break;
        }
        t *= 0.5;
      }
      info.iterations = it + 1;
      if (!accepted) break;  // no representable decrease left
    }
    if (!std::isfinite(f)) throw RuntimeError("calibrator fit: non-finite objective");
    info.objective = f;
    return info;
  }

 private:
  Eigen::MatrixXd phi_;
  Eigen::VectorXd y_;
};

double log_p(double margin) { return -softplus(-margin); }
double log_q(double margin) { return -softplus(margin); }

Eigen::MatrixXd platt_features(std::span<const double> margins) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(margins.size()), 2);
  for (std::size_t i = 0; i < margins.size(); ++i) {
    phi(static_cast<Eigen::Index>(i), 0) = -margins[i];
    phi(static_cast<Eigen::Index>(i), 1) = -1.0;
  }
  return phi;
}

Eigen::MatrixXd dirichlet_features(std::span<const double> margins) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(margins.size()), 3);
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    phi(r, 0) = log_p(margins[i]);
    phi(r, 1) = log_q(margins[i]);
    phi(r, 2) = 1.0;
  }
  return phi;
}

Calibrator fit_platt(std::span<const double> margins, std::span<const int> labels,
                     const CalibratorOptions& opt) {
  LogisticProblem problem(platt_features(margins), labels);
  Eigen::VectorXd theta(2);
  theta << -1.0, 0.0;
  Calibrator c;
  c.method = CalibrationMethod::kPlatt;
  c.epsilon = opt.epsilon;
  c.info = problem.minimize(theta, {true, true}, opt.max_iterations, opt.gradient_tolerance);
  c.params = {theta[0], theta[1]};
  return c;
}

Calibrator fit_dirichlet(const FitData& data, const CalibratorOptions& opt, CalibrationMethod method,
                         bool constrained) {
  LogisticProblem problem(dirichlet_features(data.margins), data.labels);
  Calibrator c;
  c.method = method;
  c.epsilon = opt.epsilon;

  Eigen::VectorXd theta(3);
  theta << 1.0, -1.0, 0.0;
  FitInfo info = problem.minimize(theta, {true, true, true}, opt.max_iterations, opt.gradient_tolerance);
  const auto feasible = [](const Eigen::VectorXd& t) { return t[0] >= 0.0 && t[1] <= 0.0; };
  if (!constrained || feasible(theta)) {
    c.params = {theta[0], theta[1], theta[2]};
    c.info = info;
    return c;
  }

  // Convex objective: the constrained optimum lies on a face where the
  // violated coefficients are pinned at zero. Try every face, keep the best.
  const std::array<std::array<bool, 2>, 3> faces{{{false, true}, {true, false}, {false, false}}};
  double best = std::numeric_limits<double>::infinity();
  int total_iterations = info.iterations;
  for (const auto& face : faces) {
    Eigen::VectorXd t(3);
    t << (face[0] ? 1.0 : 0.0), (face[1] ? -1.0 : 0.0), 0.0;
    FitInfo fi = problem.minimize(t, {face[0], face[1], true}, opt.max_iterations, opt.gradient_tolerance);
    total_iterations += fi.iterations;
    if (feasible(t) && fi.objective < best) {
      best = fi.objective;
      c.params = {t[0], t[1], t[2]};
      c.info = fi;
    }
  }
  c.info.iterations = total_iterations;
  return c;
}

double temperature_objective(std::span<const double> margins, std::span<const int> labels, double log_t) {
  const double inv_t = std::exp(-log_t);
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double z = margins[i] * inv_t;
    total += softplus(z) - labels[i] * z;
  }
  return total / static_cast<double>(margins.size());
}

Calibrator fit_temperature(std::span<const double> margins, std::span<const int> labels,
                           const CalibratorOptions& opt) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(0.01), b = std::log(100.0);
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = temperature_objective(margins, labels, x1);
  double f2 = temperature_objective(margins, labels, x2);
  int iterations = 0;
  while (b - a > 1e-11 && iterations < opt.max_iterations) {
    ++iterations;
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = temperature_objective(margins, labels, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = temperature_objective(margins, labels, x2);
    }
  }
  double best_x = f1 <= f2 ? x1 : x2;
  double best_f = std::min(f1, f2);
  // Keep the identity when the search cannot beat it.
  const double f_identity = temperature_objective(margins, labels, 0.0);
  if (f_identity <= best_f) {
    best_x = 0.0;
    best_f = f_identity;
  }
  Calibrator c;
  c.method = CalibrationMethod::kTemperature;
  c.epsilon = opt.epsilon;
  c.params = {best_x == 0.0 ? 1.0 : std::clamp(std::exp(best_x), 0.01, 100.0)};
  c.info = {best_f, iterations, true};
  return c;
}

// Equal-mass partition of the stable sort by probability: returns the order
// and the start offset of each non-empty bin (plus n at the end).
struct MassBins {
  std::vector<std::size_t> order;
  std::vector<std::size_t> starts;
  std::vector<double> edges;
};

MassBins mass_bins(std::span<const double> p, std::size_t bins) {
  const std::size_t n = p.size();
  const std::size_t m = std::min(bins, n);
  MassBins mb;
  mb.order.resize(n);
  std::iota(mb.order.begin(), mb.order.end(), std::size_t{0});
  std::stable_sort(mb.order.begin(), mb.order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  for (std::size_t b = 0; b <= m; ++b) mb.starts.push_back(b * n / m);
  for (std::size_t b = 1; b < m; ++b) {
    const double lo = p[mb.order[mb.starts[b] - 1]];
    const double hi = p[mb.order[mb.starts[b]]];
    mb.edges.push_back(lo + 0.5 * (hi - lo));
  }
  return mb;
}

std::size_t bin_of(const std::vector<double>& edges, double p) {
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), p) - edges.begin());
}

Calibrator fit_histogram(const FitData& data, const CalibratorOptions& opt) {
  if (opt.bins == 0) throw ValidationError("histogram: bins must be >= 1");
  const MassBins mb = mass_bins(data.probabilities, opt.bins);
  Calibrator c;
  c.method = CalibrationMethod::kHistogram;
  c.epsilon = opt.epsilon;
  c.edges = mb.edges;
  for (std::size_t b = 0; b + 1 < mb.starts.size(); ++b) {
    std::size_t pos = 0;
    const std::size_t cnt = mb.starts[b + 1] - mb.starts[b];
    for (std::size_t r = mb.starts[b]; r < mb.starts[b + 1]; ++r) pos += static_cast<std::size_t>(data.labels[mb.order[r]]);
    c.values.push_back(opt.laplace ? laplace_rate(pos, cnt) : static_cast<double>(pos) / static_cast<double>(cnt));
  }
  return c;
}

struct TieGroups {
  std::vector<double> x;
  std::vector<double> mean_y;
  std::vector<double> weight;
  std::vector<std::size_t> group_of;  // per sample
};

TieGroups pool_ties(std::span<const double> p, std::span<const int> labels) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  TieGroups g;
  g.group_of.resize(p.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    if (g.x.empty() || p[i] != g.x.back()) {
      g.x.push_back(p[i]);
      g.mean_y.push_back(0.0);
      g.weight.push_back(0.0);
    }
    g.mean_y.back() += labels[i];
    g.weight.back() += 1.0;
    g.group_of[i] = g.x.size() - 1;
  }
  for (std::size_t k = 0; k < g.x.size(); ++k) g.mean_y[k] /= g.weight[k];
  return g;
}

Calibrator fit_isotonic(const FitData& data, const CalibratorOptions& opt) {
  const TieGroups g = pool_ties(data.probabilities, data.labels);
  const std::vector<double> fitted = pool_adjacent_violators(g.mean_y, g.weight);
  Calibrator c;
  c.method = CalibrationMethod::kIsotonic;
  c.epsilon = opt.epsilon;
  // Block endpoints are enough: interpolation inside a block is constant.
  for (std::size_t k = 0; k < g.x.size(); ++k) {
    const bool first = k == 0 || fitted[k] != fitted[k - 1];
    const bool last = k + 1 == g.x.size() || fitted[k] != fitted[k + 1];
    if (first || last) {
      c.edges.push_back(g.x[k]);
      c.values.push_back(fitted[k]);
    }
  }
  return c;
}

Calibrator fit_platt_bin(const FitData& data, const CalibratorOptions& opt) {
  if (opt.bins == 0) throw ValidationError("platt_bin: bins must be >= 1");
  const MassBins mb = mass_bins(data.probabilities, opt.bins);
  Calibrator c;
  c.method = CalibrationMethod::kPlattBin;
  c.epsilon = opt.epsilon;
  c.edges = mb.edges;
  int iterations = 0;
  for (std::size_t b = 0; b + 1 < mb.starts.size(); ++b) {
    std::vector<double> m;
    std::vector<int> y;
    for (std::size_t r = mb.starts[b]; r < mb.starts[b + 1]; ++r) {
      m.push_back(data.margins[mb.order[r]]);
      y.push_back(data.labels[mb.order[r]]);
    }
    const std::size_t pos = count_positives(y);
    if (pos == 0 || pos == y.size()) {
      // Constant bin, written as a flat Platt map.
      c.params.push_back(0.0);
      c.params.push_back(-logit(laplace_rate(pos, y.size())));
    } else {
      const Calibrator bin_fit = fit_platt(m, y, opt);
      iterations += bin_fit.info.iterations;
      c.params.push_back(bin_fit.params[0]);
      c.params.push_back(bin_fit.params[1]);
    }
  }
  c.info.iterations = iterations;
  c.info.objective = nll(c, data);
  return c;
}

bool needs_margin(CalibrationMethod m) {
  return m == CalibrationMethod::kPlatt || m == CalibrationMethod::kTemperature || m == CalibrationMethod::kBeta ||
         m == CalibrationMethod::kDirichlet2 || m == CalibrationMethod::kPlattBin;
}

}  // namespace

std::string_view method_name(CalibrationMethod method) {
  switch (method) {
    case CalibrationMethod::kPlatt: return "platt";
    case CalibrationMethod::kTemperature: return "temperature";
    case CalibrationMethod::kBeta: return "beta";
    case CalibrationMethod::kDirichlet2: return "dirichlet2";
    case CalibrationMethod::kHistogram: return "histogram";
    case CalibrationMethod::kIsotonic: return "isotonic";
    case CalibrationMethod::kPlattBin: return "platt_bin";
    case CalibrationMethod::kConstant: return "constant";
  }
  return "unknown";
}

CalibrationMethod parse_method(std::string_view name) {
  for (auto m : {CalibrationMethod::kPlatt, CalibrationMethod::kTemperature, CalibrationMethod::kBeta,
                 CalibrationMethod::kDirichlet2, CalibrationMethod::kHistogram, CalibrationMethod::kIsotonic,
                 CalibrationMethod::kPlattBin, CalibrationMethod::kConstant}) {
    if (method_name(m) == name) return m;
  }
  throw ValidationError("unknown calibration method '" + std::string(name) + "'");
}

bool is_parametric(CalibrationMethod method) {
  return method == CalibrationMethod::kPlatt || method == CalibrationMethod::kTemperature ||
         method == CalibrationMethod::kBeta || method == CalibrationMethod::kDirichlet2;
}

void FitData::validate() const {
  if (labels.empty()) throw ValidationError("fit data: no samples");
  if (margins.size() != labels.size() || probabilities.size() != labels.size()) {
    throw ValidationError("fit data: margins, probabilities and labels differ in length");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("fit data: label not in {0,1}");
    if (!std::isfinite(margins[i])) throw ValidationError("fit data: non-finite margin");
    if (!(probabilities[i] >= 0.0 && probabilities[i] <= 1.0)) {
      throw ValidationError("fit data: probability outside [0,1]");
    }
  }
}

FitData FitData::from_scores(const ScoreSet& scores, std::span<const int> labels) {
  return {scores.margins, scores.probabilities, {labels.begin(), labels.end()}};
}

FitData FitData::subset(std::span<const std::size_t> indices) const {
  FitData out;
  out.margins.reserve(indices.size());
  out.probabilities.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.margins.push_back(margins[i]);
    out.probabilities.push_back(probabilities[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Calibrator Calibrator::constant(double p0, double epsilon) {
  Calibrator c;
  c.method = CalibrationMethod::kConstant;
  c.params = {p0};
  c.epsilon = epsilon;
  return c;
}

double Calibrator::raw(double margin, double probability) const {
  switch (method) {
    case CalibrationMethod::kPlatt:
      return logistic(-(params[0] * margin + params[1]));
    case CalibrationMethod::kTemperature:
      return params[0] == 1.0 ? probability : logistic(margin / params[0]);
    case CalibrationMethod::kBeta:
    case CalibrationMethod::kDirichlet2:
      return logistic(params[0] * log_p(margin) + params[1] * log_q(margin) + params[2]);
    case CalibrationMethod::kHistogram:
      return values[bin_of(edges, probability)];
    case CalibrationMethod::kIsotonic: {
      if (probability <= edges.front()) return values.front();
      if (probability >= edges.back()) return values.back();
      const auto hi = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), probability) - edges.begin());
      const std::size_t lo = hi - 1;
      if (probability == edges[lo]) return values[lo];
      const double w = (probability - edges[lo]) / (edges[hi] - edges[lo]);
      return values[lo] + w * (values[hi] - values[lo]);
    }
    case CalibrationMethod::kPlattBin: {
      const std::size_t b = bin_of(edges, probability);
      return logistic(-(params[2 * b] * margin + params[2 * b + 1]));
    }
    case CalibrationMethod::kConstant:
      return params[0];
  }
  return probability;
}

double Calibrator::calibrate(double margin, double probability) const {
  return std::clamp(raw(margin, probability), epsilon, 1.0 - epsilon);
}

std::vector<double> Calibrator::apply(const ScoreSet& scores) const {
  return apply(scores.margins, scores.probabilities);
}

std::vector<double> Calibrator::apply(std::span<const double> margins,
                                      std::span<const double> probabilities) const {
  if (needs_margin(method) && margins.empty() && !probabilities.empty()) {
    throw ValidationError(std::string("apply: method '") + std::string(method_name(method)) + "' needs margins");
  }
  if (!margins.empty() && !probabilities.empty() && margins.size() != probabilities.size()) {
    throw ValidationError("apply: margins and probabilities differ in length");
  }
  const std::size_t n = std::max(margins.size(), probabilities.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = margins.empty() ? 0.0 : margins[i];
    const double p = probabilities.empty() ? logistic(m) : probabilities[i];
    out[i] = calibrate(m, p);
  }
  return out;
}

bool Calibrator::monotone() const {
  switch (method) {
    case CalibrationMethod::kPlatt: return params[0] < 0.0;
    case CalibrationMethod::kTemperature: return true;
    case CalibrationMethod::kBeta:
    case CalibrationMethod::kDirichlet2: return params[0] >= 0.0 && params[1] <= 0.0;
    case CalibrationMethod::kHistogram: return std::is_sorted(values.begin(), values.end());
    case CalibrationMethod::kIsotonic:
    case CalibrationMethod::kConstant: return true;
    case CalibrationMethod::kPlattBin: return false;
  }
  return false;
}

Calibrator fit(CalibrationMethod method, const FitData& data, const CalibratorOptions& options) {
  data.validate();
  const std::size_t pos = count_positives(data.labels);
  if (pos == 0 || pos == data.size() || method == CalibrationMethod::kConstant) {
    Calibrator c = Calibrator::constant(laplace_rate(pos, data.size()), options.epsilon);
    c.info.objective = nll(c, data);
    return c;
  }
  switch (method) {
    case CalibrationMethod::kPlatt: return fit_platt(data.margins, data.labels, options);
    case CalibrationMethod::kTemperature: return fit_temperature(data.margins, data.labels, options);
    case CalibrationMethod::kBeta: return fit_dirichlet(data, options, method, options.beta_constrained);
    case CalibrationMethod::kDirichlet2: return fit_dirichlet(data, options, method, false);
    case CalibrationMethod::kHistogram: {
      Calibrator c = fit_histogram(data, options);
      c.info.objective = nll(c, data);
      return c;
    }
    case CalibrationMethod::kIsotonic: {
      Calibrator c = fit_isotonic(data, options);
      c.info.objective = nll(c, data);
      return c;
    }
    case CalibrationMethod::kPlattBin: return fit_platt_bin(data, options);
    case CalibrationMethod::kConstant: break;
  }
  throw ValidationError("fit: unsupported method");
}

double nll(const Calibrator& calibrator, const FitData& data) {
  data.validate();
  const std::vector<double> p = calibrator.apply(data.margins, data.probabilities);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    total -= data.labels[i] == 1 ? std::log(p[i]) : std::log1p(-p[i]);
  }
  return total / static_cast<double>(p.size());
}

std::vector<double> pool_adjacent_violators(std::span<const double> y, std::span<const double> weights) {
  if (y.size() != weights.size()) throw ValidationError("pav: length mismatch");
  struct Block {
    double value;
    double weight;
    std::size_t count;
  };
  std::vector<Block> stack;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(weights[i] > 0.0)) throw ValidationError("pav: weights must be positive");
    stack.push_back({y[i], weights[i], 1});
    while (stack.size() > 1 && stack[stack.size() - 2].value > stack.back().value) {
      const Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      const double w = prev.weight + top.weight;
      prev.value = (prev.value * prev.weight + top.value * top.weight) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : stack) out.insert(out.end(), b.count, b.value);
  return out;
}

std::vector<double> isotonic_fitted_values(std::span<const double> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) throw ValidationError("isotonic: length mismatch");
  const TieGroups g = pool_ties(probabilities, labels);
  const std::vector<double> fitted = pool_adjacent_violators(g.mean_y, g.weight);
  std::vector<double> out(probabilities.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fitted[g.group_of[i]];
  return out;
}

namespace detail {

OrderedJson calibrator_json(const Calibrator& c) {
  OrderedJson j;
  j["method"] = std::string(method_name(c.method));
  j["params"] = c.params;
  j["edges"] = c.edges;
  j["values"] = c.values;
  j["epsilon"] = c.epsilon;
  j["objective"] = c.info.objective;
  j["iterations"] = c.info.iterations;
  j["converged"] = c.info.converged;
  return j;
}

Calibrator calibrator_from_json(const Json& j) {
  Calibrator c;
  c.method = parse_method(get_required<std::string>(j, "method", "calibrator"));
  c.params = get_or<std::vector<double>>(j, "params", {});
  c.edges = get_or<std::vector<double>>(j, "edges", {});
  c.values = get_or<std::vector<double>>(j, "values", {});
  c.epsilon = get_or<double>(j, "epsilon", 1e-6);
  c.info.objective = get_or<double>(j, "objective", 0.0);
  c.info.iterations = get_or<int>(j, "iterations", 0);
  c.info.converged = get_or<bool>(j, "converged", true);

  const auto need = [&](bool ok) {
    if (!ok) throw ValidationError("calibrator: inconsistent parameters for method '" +
                                   std::string(method_name(c.method)) + "'");
  };
  switch (c.method) {
    case CalibrationMethod::kPlatt: need(c.params.size() == 2); break;
    case CalibrationMethod::kTemperature: need(c.params.size() == 1 && c.params[0] > 0.0); break;
    case CalibrationMethod::kBeta:
    case CalibrationMethod::kDirichlet2: need(c.params.size() == 3); break;
    case CalibrationMethod::kConstant: need(c.params.size() == 1); break;
    case CalibrationMethod::kHistogram: need(!c.values.empty() && c.edges.size() + 1 == c.values.size()); break;
    case CalibrationMethod::kIsotonic: need(!c.values.empty() && c.edges.size() == c.values.size()); break;
    case CalibrationMethod::kPlattBin: need(c.params.size() == 2 * (c.edges.size() + 1)); break;
  }
  return c;
}

}  // namespace detail

std::string calibrator_to_json(const Calibrator& calibrator) {
  return detail::dump(detail::calibrator_json(calibrator));
}

Calibrator calibrator_from_json(std::string_view json) {
  return detail::calibrator_from_json(detail::parse_json(json, "calibrator"));
}

}  // namespace clustercal
