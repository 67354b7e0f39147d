#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "pathflow/errors.hpp"

namespace pathflow::aggregate {

struct VoteResult {
  int label = 0;
  double positive_fraction = 0.0;
};

// Slide label by majority vote over per-patch probabilities; a patch is
// positive iff prob >= 0.5. Exact ties break by mean probability >= 0.5.
inline VoteResult majority_vote(const std::vector<double>& probs) {
  if (probs.empty()) throw DataError("majority_vote: empty prediction vector");
  std::size_t positives = 0;
  double mean = 0.0;
  for (double p : probs) {
    positives += p >= 0.5;
    mean += p;
  }
  mean /= static_cast<double>(probs.size());
  VoteResult r;
  r.positive_fraction = static_cast<double>(positives) / static_cast<double>(probs.size());
  const std::size_t negatives = probs.size() - positives;
  if (positives > negatives) r.label = 1;
  else if (positives < negatives) r.label = 0;
  else r.label = mean >= 0.5 ? 1 : 0;
  return r;
}

// Slide risk as the median patch risk; even counts take the midpoint of
// the central pair.
inline double median_risk(const std::vector<double>& risks) {
  if (risks.empty()) throw DataError("median_risk: empty prediction vector");
  std::vector<double> sorted = risks;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace pathflow::aggregate
