#include "detmon/ordinal.hpp"

#include <stdexcept>
#include <string>

namespace detmon::ordinal {

void CriticalRule::check() const {
  if (num_classes < 2) throw std::invalid_argument("critical rule: num_classes must be >= 2");
  if (critical_class < 1 || critical_class > num_classes - 1)
    throw std::invalid_argument("critical class " + std::to_string(critical_class) + " outside [1, " +
                                std::to_string(num_classes - 1) + "]");
}

bool to_alert(int ordinal_class, const CriticalRule& rule) { return ordinal_class < rule.critical_class; }

double alert_score(std::span<const double> rank_probs, const CriticalRule& rule) {
  rule.check();
  if (rank_probs.size() != static_cast<std::size_t>(rule.num_classes - 1))
    throw std::invalid_argument("alert_score: expected " + std::to_string(rule.num_classes - 1) +
                                " rank probabilities");
  return 1.0 - rank_probs[static_cast<std::size_t>(rule.critical_class - 1)];
}

bool score_alerts(double score, double threshold) { return score >= 1.0 - threshold; }

}  // namespace detmon::ordinal
