#pragma once

#include <span>

// Binary alert view of ordinal predictions at the critical class boundary.
namespace detmon::ordinal {

struct CriticalRule {
  int critical_class = 2;  // class < critical_class => alert
  int num_classes = 5;

  void check() const;
};

bool to_alert(int ordinal_class, const CriticalRule& rule);

// 1 - p_k with k = critical_class (rank probabilities are 1-indexed).
double alert_score(std::span<const double> rank_probs, const CriticalRule& rule);

// Alert decision for a score at decision threshold t. For rank-monotone
// probabilities this equals to_alert(count of p_k > t): the class falls below
// k exactly when p_k <= t, i.e. score >= 1 - t.
bool score_alerts(double score, double threshold);

}  // namespace detmon::ordinal
