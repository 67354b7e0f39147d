#pragma once

// Shared test utilities: independent oracles (direct-formula Cox loss,
// pairwise AUC and c-index) and small random-instance generators. These
// deliberately avoid the library's own computation paths.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pathflow/heads.hpp"
#include "pathflow/rng.hpp"

namespace testutil {

// Breslow negative log partial likelihood, evaluated term by term from the
// definition: for every event i, denominator = sum over {j: t_j >= t_i}.
inline double cox_loss_direct(const std::vector<double>& risks, const std::vector<double>& times,
                              const std::vector<int>& events) {
  double loss = 0.0;
  int n_events = 0;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    if (events[i] != 1) continue;
    ++n_events;
    double denom = 0.0;
    for (std::size_t j = 0; j < risks.size(); ++j)
      if (times[j] >= times[i]) denom += std::exp(risks[j]);
    loss -= risks[i] - std::log(denom);
  }
  return loss / n_events;
}

// Mann-Whitney statistic: fraction of (positive, negative) pairs where the
// positive scores higher, ties counting one half.
inline double mann_whitney_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

// All-pairs Harrell estimator over unordered index pairs.
inline double c_index_enumeration(const std::vector<double>& risks,
                                  const std::vector<double>& times,
                                  const std::vector<int>& events, bool* defined = nullptr) {
  double comparable = 0.0, score = 0.0;
  for (std::size_t i = 0; i < risks.size(); ++i)
    for (std::size_t j = i + 1; j < risks.size(); ++j) {
      if (times[i] == times[j]) continue;
      const std::size_t earlier = times[i] < times[j] ? i : j;
      const std::size_t later = earlier == i ? j : i;
      if (events[earlier] != 1) continue;
      comparable += 1.0;
      if (risks[earlier] > risks[later]) score += 1.0;
      else if (risks[earlier] == risks[later]) score += 0.5;
    }
  if (defined) *defined = comparable > 0.0;
  return comparable > 0.0 ? score / comparable : 0.0;
}

// random survival batch with ties and censoring; guarantees >= 1 event
inline pathflow::heads::SurvivalBatch random_survival_batch(pathflow::Rng& rng, int max_n = 12) {
  pathflow::heads::SurvivalBatch b;
  const int n = 2 + static_cast<int>(rng.below(max_n - 1));
  for (int i = 0; i < n; ++i) {
    b.risks.push_back(rng.uniform(-2.0, 2.0));
    // few distinct values force ties
    b.times.push_back(1.0 + static_cast<double>(rng.below(5)));
    b.events.push_back(rng.uniform() < 0.7 ? 1 : 0);
  }
  bool any = false;
  for (int e : b.events) any = any || e == 1;
  if (!any) b.events[static_cast<std::size_t>(rng.below(b.events.size()))] = 1;
  return b;
}

}  // namespace testutil
