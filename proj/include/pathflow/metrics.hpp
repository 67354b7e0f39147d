#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "pathflow/errors.hpp"
#include "pathflow/rng.hpp"

namespace pathflow::metrics {

struct ConfusionStats {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

inline ConfusionStats confusion_stats(const std::vector<int>& pred,
                                      const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw DataError("confusion_stats: pred/truth must be nonempty and aligned");
  long tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 1)
      pred[i] == 1 ? ++tp : ++fn;
    else
      pred[i] == 0 ? ++tn : ++fp;
  }
  if (tp + fn == 0) throw DataError("confusion_stats: no positive subjects in truth");
  if (tn + fp == 0) throw DataError("confusion_stats: no negative subjects in truth");
  ConfusionStats s;
  s.accuracy = static_cast<double>(tp + tn) / static_cast<double>(pred.size());
  s.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return s;
}

struct ScoredCohort {
  std::vector<double> scores;
  std::vector<int> labels;  // {0,1}
};

struct RocPoint {
  double threshold = 0.0;  // predicted positive iff score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocSummary {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
  double auc = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
};

namespace detail {

// Trapezoidal AUC over the threshold sweep, accumulated in integers so the
// result agrees bit-for-bit with the Mann-Whitney statistic (ties count 0.5).
// Returns the numerator of auc = num / (2 * P * N); fills points if asked.
inline std::int64_t roc_sweep(const std::vector<double>& scores, const std::vector<int>& labels,
                              long& pos_total, long& neg_total,
                              std::vector<RocPoint>* points) {
  pos_total = neg_total = 0;
  for (int y : labels) (y == 1 ? pos_total : neg_total)++;
  if (pos_total == 0 || neg_total == 0)
    throw DataError(std::string("roc_auc: cohort lacks ") +
                    (pos_total == 0 ? "positive" : "negative") + " subjects");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  if (points) {
    points->clear();
    points->push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  }
  std::int64_t num = 0;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    long dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i)
      (labels[order[i]] == 1 ? dtp : dfp)++;
    num += static_cast<std::int64_t>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    if (points)
      points->push_back({s, static_cast<double>(fp) / neg_total,
                         static_cast<double>(tp) / pos_total});
  }
  return num;
}

inline double auc_only(const std::vector<double>& scores, const std::vector<int>& labels) {
  long p = 0, n = 0;
  const std::int64_t num = roc_sweep(scores, labels, p, n, nullptr);
  return static_cast<double>(num) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

// type-7 quantile (linear interpolation) of a sorted vector
inline double quantile_sorted(const std::vector<double>& v, double q) {
  const double h = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

}  // namespace detail

inline RocSummary roc_auc(const ScoredCohort& c) {
  if (c.scores.size() != c.labels.size() || c.scores.empty())
    throw DataError("roc_auc: scores/labels must be nonempty and aligned");
  RocSummary r;
  long p = 0, n = 0;
  const std::int64_t num = detail::roc_sweep(c.scores, c.labels, p, n, &r.points);
  r.auc = static_cast<double>(num) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
  r.ci_low = r.auc;
  r.ci_high = r.auc;
  return r;
}

struct BootstrapResult {
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Stratified nonparametric bootstrap of the AUC: resample within each class,
// B times, percentile CI. Resample b draws from its own seed substream, so
// results are independent of any parallel execution order.
inline BootstrapResult bootstrap_auc(const ScoredCohort& c, int B, std::uint64_t seed) {
  if (B < 100) throw ConfigError("bootstrap_auc: B must be >= 100");
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < c.labels.size(); ++i)
    (c.labels[i] == 1 ? pos_idx : neg_idx).push_back(i);
  if (pos_idx.empty() || neg_idx.empty())
    throw DataError("bootstrap_auc: cohort must contain both classes");

  const double point = detail::auc_only(c.scores, c.labels);
  std::vector<double> aucs(B);
  std::vector<double> scores(c.scores.size());
  std::vector<int> labels(c.labels.size());
  for (int b = 0; b < B; ++b) {
    Rng rng(derive_seed(seed, "bootstrap", static_cast<std::uint64_t>(b)));
    std::size_t k = 0;
    for (std::size_t t = 0; t < pos_idx.size(); ++t, ++k) {
      const std::size_t j = pos_idx[rng.below(pos_idx.size())];
      scores[k] = c.scores[j];
      labels[k] = 1;
    }
    for (std::size_t t = 0; t < neg_idx.size(); ++t, ++k) {
      const std::size_t j = neg_idx[rng.below(neg_idx.size())];
      scores[k] = c.scores[j];
      labels[k] = 0;
    }
    aucs[b] = detail::auc_only(scores, labels);
  }

  double mean = 0.0;
  for (double a : aucs) mean += a;
  mean /= B;
  double var = 0.0;
  for (double a : aucs) var += (a - mean) * (a - mean);
  var /= (B - 1);

  std::sort(aucs.begin(), aucs.end());
  BootstrapResult r;
  r.se = std::sqrt(var);
  r.ci_low = detail::quantile_sorted(aucs, 0.025);
  r.ci_high = detail::quantile_sorted(aucs, 0.975);
  // the interval always covers the point estimate (RocSummary invariant)
  r.ci_low = std::min(r.ci_low, point);
  r.ci_high = std::max(r.ci_high, point);
  return r;
}

inline RocSummary roc_auc_with_ci(const ScoredCohort& c, int B, std::uint64_t seed) {
  RocSummary r = roc_auc(c);
  const BootstrapResult b = bootstrap_auc(c, B, seed);
  r.se = b.se;
  r.ci_low = b.ci_low;
  r.ci_high = b.ci_high;
  return r;
}

// Harrell's concordance index. A pair is comparable iff the earlier time is
// an observed event (equal times are never comparable); risk ties count 0.5.
inline double c_index(const std::vector<double>& risks, const std::vector<double>& times,
                      const std::vector<int>& events) {
  const std::size_t n = risks.size();
  if (times.size() != n || events.size() != n || n == 0)
    throw DataError("c_index: risks/times/events must be nonempty and aligned");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  double comparable = 0.0, score = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = order[a];
    if (events[i] != 1) continue;
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t j = order[b];
      if (times[j] == times[i]) continue;
      comparable += 1.0;
      if (risks[i] > risks[j]) score += 1.0;
      else if (risks[i] == risks[j]) score += 0.5;
    }
  }
  if (comparable == 0.0) throw DataError("c_index: no comparable pairs");
  return score / comparable;
}

struct CorrelationResult {
  double pearson = 0.0;
  double spearman = 0.0;
};

namespace detail {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DataError("correlations: zero variance, correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j - 1)) + 1.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

}  // namespace detail

inline CorrelationResult correlations(const std::vector<double>& pred,
                                      const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.size() < 3)
    throw DataError("correlations: need >= 3 aligned observations");
  CorrelationResult r;
  r.pearson = detail::pearson(pred, truth);
  r.spearman = detail::pearson(detail::average_ranks(pred), detail::average_ranks(truth));
  return r;
}

inline void write_roc_csv(const RocSummary& roc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ROC csv: " + path);
  out << "threshold,fpr,tpr\n";
  char buf[128];
  for (const auto& p : roc.points) {
    if (std::isinf(p.threshold))
      std::snprintf(buf, sizeof(buf), "inf,%.17g,%.17g\n", p.fpr, p.tpr);
    else
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    out << buf;
  }
  if (!out) throw DataError("ROC csv write failed: " + path);
}

}  // namespace pathflow::metrics
