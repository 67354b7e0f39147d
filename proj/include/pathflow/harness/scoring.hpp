#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include "pathflow/aggregate.hpp"
#include "pathflow/harness/dataset.hpp"
#include "pathflow/harness/report.hpp"
#include "pathflow/heads.hpp"
#include "pathflow/metrics.hpp"
#include "pathflow/nn/network.hpp"

namespace pathflow::harness {

namespace detail {

inline SlideScore score_one_slide(nn::Network& net, const SlidePatches& slide, bool cox_head,
                                  const ChannelNorm& norm) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> items;
  items.reserve(slide.n_patches);
  std::vector<SlidePatches> one{slide};
  for (int i = 0; i < slide.n_patches; ++i) items.emplace_back(0u, static_cast<std::uint32_t>(i));

  std::vector<double> outputs;
  outputs.reserve(slide.n_patches);
  constexpr std::size_t kChunk = 64;
  for (std::size_t at = 0; at < items.size(); at += kChunk) {
    const std::size_t end = std::min(items.size(), at + kChunk);
    Tensor4 batch = make_batch(one, items, at, end, norm);
    nn::NetOutput out = net.forward(batch, nn::Mode::Eval, false, /*keep_cache=*/false);
    for (int b = 0; b < batch.n; ++b) outputs.push_back(out.output.at(b, 0, 0, 0));
  }

  SlideScore s;
  s.slide_id = slide.slide_id;
  s.grade = slide.grade;
  s.os_days = slide.os_days;
  s.event = slide.event;
  if (cox_head) {
    s.risk = aggregate::median_risk(outputs);
  } else {
    std::vector<double> probs(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) probs[i] = heads::predict_prob(outputs[i]);
    const aggregate::VoteResult vote = aggregate::majority_vote(probs);
    s.true_label = slide.label;
    s.pred_label = vote.label;
    s.positive_fraction = vote.positive_fraction;
  }
  return s;
}

}  // namespace detail

// Slide-level inference. Eval-mode forward is pure per sample, and each
// worker runs on its own clone of the network, so any worker count yields
// identical scores.
inline std::vector<SlideScore> score_slides(const nn::Network& net,
                                            const std::vector<SlidePatches>& slides,
                                            const std::vector<std::size_t>& indices,
                                            bool cox_head, const ChannelNorm& norm,
                                            int workers = 1) {
  std::vector<SlideScore> out(indices.size());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(indices.size())));
  if (workers == 1) {
    nn::Network local = net;
    for (std::size_t k = 0; k < indices.size(); ++k)
      out[k] = detail::score_one_slide(local, slides[indices[k]], cox_head, norm);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(indices.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      nn::Network local = net;
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= indices.size()) return;
        try {
          out[k] = detail::score_one_slide(local, slides[indices[k]], cox_head, norm);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// Fill the metric fields of a report from its slide table.
inline void assemble_metrics(ExperimentReport& r, bool cox_head, int bootstrap_b,
                             std::uint64_t bootstrap_seed) {
  r.bootstrap_b = bootstrap_b;
  r.bootstrap_seed = bootstrap_seed;
  if (cox_head) {
    std::vector<double> risks, times, os;
    std::vector<int> events;
    for (const auto& s : r.slides) {
      risks.push_back(s.risk);
      times.push_back(s.os_days);
      events.push_back(s.event);
      os.push_back(s.os_days);
    }
    r.cindex = metrics::c_index(risks, times, events);
    const auto corr = metrics::correlations(risks, os);
    r.pearson = corr.pearson;
    r.spearman = corr.spearman;
  } else {
    std::vector<int> pred, truth;
    metrics::ScoredCohort cohort;
    for (const auto& s : r.slides) {
      pred.push_back(s.pred_label);
      truth.push_back(s.true_label);
      cohort.scores.push_back(s.positive_fraction);
      cohort.labels.push_back(s.true_label);
    }
    const auto cs = metrics::confusion_stats(pred, truth);
    r.accuracy = 100.0 * cs.accuracy;
    r.sensitivity = 100.0 * cs.sensitivity;
    r.specificity = 100.0 * cs.specificity;
    r.roc = metrics::roc_auc_with_ci(cohort, bootstrap_b, bootstrap_seed);
    r.has_roc = true;
  }
}

}  // namespace pathflow::harness
