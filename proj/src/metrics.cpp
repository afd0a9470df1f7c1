#include "detmon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace detmon::metrics {

OrdinalErrors ordinal_errors(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("ordinal_errors: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw std::invalid_argument("ordinal_errors: no windows");
  double abs_sum = 0, sq_sum = 0, wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double d = predictions[i] - labels[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    wrong += predictions[i] != labels[i];
  }
  const double n = static_cast<double>(labels.size());
  return {abs_sum / n, std::sqrt(sq_sum / n), wrong / n};
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("roc_curve: scores/labels length mismatch");
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t neg = positive.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_curve: labels must contain both classes");
  for (double s : scores)
    if (std::isnan(s)) throw std::invalid_argument("roc_curve: NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> roc;
  roc.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  return roc;
}

double auroc(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) * 0.5;
  return area;
}

double tpr_at_fpr(std::span<const RocPoint> roc, double fpr_cap) {
  double best = 0.0;
  for (const auto& p : roc)
    if (p.fpr <= fpr_cap) best = std::max(best, p.tpr);
  return best;
}

double fpr_at_tpr(std::span<const RocPoint> roc, double tpr_floor) {
  double best = 1.0;
  for (const auto& p : roc)
    if (p.tpr >= tpr_floor) best = std::min(best, p.fpr);
  return best;
}

EvalReport evaluate(std::string name, std::span<const int> predictions, std::span<const int> labels,
                    std::span<const double> alert_scores, const std::vector<bool>& alert_labels) {
  EvalReport r;
  r.name = std::move(name);
  r.windows = alert_labels.size();
  r.positives = static_cast<std::size_t>(std::count(alert_labels.begin(), alert_labels.end(), true));
  r.negatives = r.windows - r.positives;
  if (!labels.empty()) {
    r.errors = ordinal_errors(predictions, labels);
    r.has_ordinal = true;
  }
  if (r.positives > 0 && r.negatives > 0) {
    RocSummary s;
    s.points = roc_curve(alert_scores, alert_labels);
    s.auroc = auroc(s.points);
    s.tpr_at_fpr5 = tpr_at_fpr(s.points, 0.05);
    s.fpr_at_tpr95 = fpr_at_tpr(s.points, 0.95);
    r.roc = std::move(s);
  }
  return r;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

}  // namespace

void write_report_table(std::ostream& out, std::span<const EvalReport> reports) {
  const char* cols[] = {"system", "MAE", "RMSE", "ZOE", "TPR@FPR5", "FPR@TPR95", "AUROC"};
  std::size_t name_w = 8;
  for (const auto& r : reports) name_w = std::max(name_w, r.name.size() + 2);
  out << std::left << std::setw(static_cast<int>(name_w)) << cols[0];
  for (int c = 1; c < 7; ++c) out << std::right << std::setw(11) << cols[c];
  out << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(name_w)) << r.name << std::right;
    const std::string na = "-";
    out << std::setw(11) << (r.has_ordinal ? fmt(r.errors.mae) : na) << std::setw(11)
        << (r.has_ordinal ? fmt(r.errors.rmse) : na) << std::setw(11) << (r.has_ordinal ? fmt(r.errors.zoe) : na)
        << std::setw(11) << (r.roc ? fmt(r.roc->tpr_at_fpr5) : na) << std::setw(11)
        << (r.roc ? fmt(r.roc->fpr_at_tpr95) : na) << std::setw(11) << (r.roc ? fmt(r.roc->auroc) : na) << '\n';
  }
  if (!reports.empty()) {
    const auto& r = reports.front();
    out << "windows=" << r.windows << " positives=" << r.positives << " negatives=" << r.negatives << '\n';
  }
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "system,mae,rmse,zoe,tpr_at_fpr5,fpr_at_tpr95,auroc,windows,positives,negatives\n";
  out << std::setprecision(17);
  for (const auto& r : reports) {
    out << r.name << ',';
    if (r.has_ordinal) out << r.errors.mae << ',' << r.errors.rmse << ',' << r.errors.zoe << ',';
    else out << ",,,";
    if (r.roc) out << r.roc->tpr_at_fpr5 << ',' << r.roc->fpr_at_tpr95 << ',' << r.roc->auroc << ',';
    else out << ",,,";
    out << r.windows << ',' << r.positives << ',' << r.negatives << '\n';
  }
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> roc) {
  out << "fpr,tpr,threshold\n" << std::setprecision(17);
  for (const auto& p : roc) out << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
}

}  // namespace detmon::metrics
