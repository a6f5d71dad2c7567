#include <algorithm>
#include <cctype>
#include <string>

#include "clustercal/error.h"
#include "clustercal/harness.h"

namespace clustercal {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

constexpr const char* kColumns[] = {"CECE", "CECE_ECE", "CECE_MCE", "CECE_AdaECE", "ECE",       "MCE",
                                    "AdaECE", "AUC",    "ACC",      "CE",          "MSE_brier", "RMSE"};

std::string canonical_column(std::string_view name) {
  for (const char* c : kColumns) {
    if (iequals(name, c)) return c;
  }
  throw ValidationError("unknown metric column '" + std::string(name) + "'");
}

// Index of the best row under the criterion: lowest value, then higher AUC,
// then smaller variant name.
std::size_t argmin(std::span<const MetricRow> rows, const std::string& column) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = rows[i].column(column);
    const double b = rows[best].column(column);
    if (v < b || (v == b && (rows[i].auc > rows[best].auc ||
                             (rows[i].auc == rows[best].auc && rows[i].variant < rows[best].variant)))) {
      best = i;
    }
  }
  return best;
}

}  // namespace

double MetricRow::column(std::string_view name) const {
  const std::string c = canonical_column(name);
  if (c == "CECE") return cece;
  if (c == "CECE_ECE") return cece_ece;
  if (c == "CECE_MCE") return cece_mce;
  if (c == "CECE_AdaECE") return cece_adaece;
  if (c == "ECE") return ece;
  if (c == "MCE") return mce;
  if (c == "AdaECE") return adaece;
  if (c == "AUC") return auc;
  if (c == "ACC") return acc;
  if (c == "CE") return ce;
  if (c == "MSE_brier") return mse_brier;
  return rmse;
}

Selection select_model(std::span<const MetricRow> rows, std::string_view criterion) {
  if (rows.empty()) throw ValidationError("select_model: empty report");
  if (rows.size() < 2) throw ValidationError("select_model: need at least two rows");
  const std::string column = canonical_column(criterion);
  if (column == "AUC" || column == "ACC") {
    throw ValidationError("select_model: criterion must be a lower-is-better column");
  }
  Selection s;
  s.criterion = column;
  const std::size_t best = argmin(rows, column);
  s.selected = rows[best].variant;
  s.ece_argmin = rows[argmin(rows, "ECE")].variant;
  if (s.ece_argmin != s.selected) {
    s.note = "ECE selects " + s.ece_argmin + " while " + column + " selects " + s.selected;
  }
  for (const auto& r : rows) {
    if (r.auc > rows[best].auc) s.higher_auc_variants.push_back(r.variant);
  }
  s.theorem_violation = !s.higher_auc_variants.empty();
  return s;
}

RejectionTable rejection_selection(std::span<const RejectionModel> models, std::span<const int> y,
                                   std::span<const double> thresholds, double decision_threshold) {
  if (models.size() < 2) throw ValidationError("rejection_selection: need at least two models");
  if (thresholds.empty()) throw ValidationError("rejection_selection: empty threshold grid");
  RejectionTable table;
  table.thresholds.assign(thresholds.begin(), thresholds.end());
  std::vector<RejectionCurve> curves;
  for (const auto& m : models) {
    if (m.probabilities.size() != y.size()) {
      throw ValidationError("rejection_selection: model '" + m.name + "' has the wrong length");
    }
    table.models.push_back(m.name);
    curves.push_back(rejection_curve(m.probabilities, y, thresholds, decision_threshold));
  }
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::vector<double> row;
    for (const auto& c : curves) row.push_back(c.error_rate[t]);
    const double best = *std::min_element(row.begin(), row.end());
    std::vector<std::string> winners;
    for (std::size_t m = 0; m < row.size(); ++m) {
      if (row[m] == best) winners.push_back(table.models[m]);
    }
    table.error.push_back(std::move(row));
    table.winners.push_back(std::move(winners));
  }
  return table;
}

std::string RejectionTable::to_csv() const {
  std::vector<std::string> header{"threshold"};
  header.insert(header.end(), models.begin(), models.end());
  header.emplace_back("winner");
  header.emplace_back("tied");
  CsvWriter w(header);
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    w.add(thresholds[t]);
    for (double e : error[t]) w.add(e);
    std::string joined;
    for (const auto& name : winners[t]) joined += (joined.empty() ? "" : "|") + name;
    w.add(joined);
    w.add(winners[t].size() > 1 ? 1 : 0);
    w.end_row();
  }
  return w.str();
}

}  // namespace clustercal
