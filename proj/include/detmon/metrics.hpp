#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace detmon::metrics {

struct OrdinalErrors {
  double mae = 0;
  double rmse = 0;
  double zoe = 0;
};

OrdinalErrors ordinal_errors(std::span<const int> predictions, std::span<const int> labels);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  // Score cut producing this point (score >= threshold => positive).
  double threshold = std::numeric_limits<double>::infinity();
};

// One point per distinct score (ties grouped), from (0,0) to (1,1), sorted by
// fpr. `positive[i]` marks alert windows. Throws std::invalid_argument unless
// both classes are present.
std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& positive);

// Trapezoidal area under the curve.
double auroc(std::span<const RocPoint> roc);

// Max TPR over points with fpr <= cap (0 if none); no interpolation.
double tpr_at_fpr(std::span<const RocPoint> roc, double fpr_cap = 0.05);
// Min FPR over points with tpr >= floor (1 if none); no interpolation.
double fpr_at_tpr(std::span<const RocPoint> roc, double tpr_floor = 0.95);

struct RocSummary {
  std::vector<RocPoint> points;
  double auroc = 0;
  double tpr_at_fpr5 = 0;
  double fpr_at_tpr95 = 0;
};

struct EvalReport {
  std::string name;
  OrdinalErrors errors;                // absent for binary-only systems
  bool has_ordinal = false;
  std::optional<RocSummary> roc;       // absent when labels hold a single class
  std::size_t windows = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Ordinal predictions/labels may be empty for binary-only systems.
EvalReport evaluate(std::string name, std::span<const int> predictions, std::span<const int> labels,
                    std::span<const double> alert_scores, const std::vector<bool>& alert_labels);

// Side-by-side text table, one row per system.
void write_report_table(std::ostream& out, std::span<const EvalReport> reports);
// Comma-separated rows with a header line.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
void write_roc_csv(std::ostream& out, std::span<const RocPoint> roc);

}  // namespace detmon::metrics
