#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pathflow/errors.hpp"
#include "pathflow/tensor.hpp"

namespace pathflow::heads {

struct BinaryBatch {
  std::vector<double> logits;
  std::vector<int> labels;  // {0,1}
};

struct SurvivalBatch {
  std::vector<double> risks;   // log-hazard scores
  std::vector<double> times;   // positive, days
  std::vector<int> events;     // 1 = death observed, 0 = censored
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double predict_prob(double logit) { return sigmoid(logit); }
inline int predict_label(double logit) { return sigmoid(logit) >= 0.5 ? 1 : 0; }

// Mean binary cross-entropy in the overflow-safe form
//   l(z,y) = max(z,0) - z*y + log(1 + exp(-|z|))
inline LossResult bce_loss(const BinaryBatch& b) {
  if (b.logits.size() != b.labels.size() || b.logits.empty())
    throw DataError("bce_loss: logits/labels must be nonempty and aligned");
  if (!all_finite(b.logits)) throw NumericError("bce_loss: non-finite logit");
  const std::size_t n = b.logits.size();
  LossResult r;
  r.grad.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = b.logits[i];
    const double y = static_cast<double>(b.labels[i]);
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.grad[i] = (sigmoid(z) - y) / static_cast<double>(n);
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

// Negative log partial likelihood with Breslow tie handling, normalized by
// the event count:
//   L = -(1/D) sum_{i: event} [ r_i - log sum_{j: t_j >= t_i} exp(r_j) ]
inline LossResult cox_loss(const SurvivalBatch& s) {
  const std::size_t n = s.risks.size();
  if (s.times.size() != n || s.events.size() != n || n == 0)
    throw DataError("cox_loss: risks/times/events must be nonempty and aligned");
  std::size_t n_events = 0;
  for (int e : s.events) n_events += e == 1;
  if (n_events == 0)
    throw DataError("cox_loss: no events in batch, partial likelihood undefined");

  // ascending time with stable order; risk sets are suffixes over tie groups
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.times[a] < s.times[b]; });

  // tie groups share one risk set; log-sum-exp accumulated from the back
  struct Group {
    std::size_t begin, end;  // range in `order`
    double log_denom;        // log sum_{t_j >= t_group} exp(r_j)
    std::size_t deaths;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s.times[order[j]] == s.times[order[i]]) ++j;
    groups.push_back({i, j, 0.0, 0});
    i = j;
  }
  const double dcount = static_cast<double>(n_events);

  double max_risk = -std::numeric_limits<double>::infinity();
  for (double r : s.risks) max_risk = std::max(max_risk, r);
  if (!std::isfinite(max_risk)) throw NumericError("cox_loss: non-finite risk");

  double suffix_exp = 0.0;  // sum exp(r - max_risk) over processed suffix
  for (std::size_t g = groups.size(); g-- > 0;) {
    for (std::size_t t = groups[g].begin; t < groups[g].end; ++t) {
      suffix_exp += std::exp(s.risks[order[t]] - max_risk);
      groups[g].deaths += s.events[order[t]] == 1;
    }
    groups[g].log_denom = max_risk + std::log(suffix_exp);
  }

  double loss = 0.0;
  for (const auto& grp : groups)
    for (std::size_t t = grp.begin; t < grp.end; ++t) {
      const std::size_t i = order[t];
      if (s.events[i] == 1) loss -= s.risks[i] - grp.log_denom;
    }
  loss /= dcount;

  // dL/dr_k = (1/D) [ exp(r_k) * sum_{event groups g: t_g <= t_k} d_g / denom_g - delta_k ].
  // exp(r_k - log_denom_g) <= 1 whenever k is in the risk set of g, so the
  // sum is overflow-safe even for extreme risks.
  LossResult res;
  res.loss = loss;
  res.grad.assign(n, 0.0);
  std::vector<std::pair<double, double>> event_groups;  // (deaths, log_denom), ascending time
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].deaths > 0)
      event_groups.emplace_back(static_cast<double>(groups[g].deaths), groups[g].log_denom);
    // subjects in this group belong to the risk sets of all event groups so far
    for (std::size_t t = groups[g].begin; t < groups[g].end; ++t) {
      const std::size_t i = order[t];
      double hazard_sum = 0.0;
      for (const auto& [deaths, log_denom] : event_groups)
        hazard_sum += deaths * std::exp(s.risks[i] - log_denom);
      res.grad[i] = (hazard_sum - (s.events[i] == 1 ? 1.0 : 0.0)) / dcount;
    }
  }
  return res;
}

}  // namespace pathflow::heads
