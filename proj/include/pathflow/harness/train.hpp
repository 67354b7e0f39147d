#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "pathflow/harness/config.hpp"
#include "pathflow/harness/dataset.hpp"
#include "pathflow/harness/report.hpp"
#include "pathflow/harness/scoring.hpp"
#include "pathflow/harness/split.hpp"
#include "pathflow/heads.hpp"
#include "pathflow/nn/gradcheck.hpp"
#include "pathflow/nn/model_io.hpp"
#include "pathflow/nn/network.hpp"
#include "pathflow/nn/sgd.hpp"

namespace pathflow::harness {

namespace detail {

struct NetSnapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> stats;
};

inline NetSnapshot take_snapshot(nn::Network& net) {
  NetSnapshot s;
  for (const auto& p : net.params()) s.params.push_back(*p.data);
  for (const auto& st : net.stats()) s.stats.push_back(*st.data);
  return s;
}

inline void restore_snapshot(nn::Network& net, const NetSnapshot& s) {
  auto params = net.params();
  auto stats = net.stats();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].data = s.params[i];
  for (std::size_t i = 0; i < stats.size(); ++i) *stats[i].data = s.stats[i];
}

inline double validation_metric(const std::vector<SlideScore>& scores, bool cox_head) {
  if (cox_head) {
    std::vector<double> risks, times;
    std::vector<int> events;
    for (const auto& s : scores) {
      risks.push_back(s.risk);
      times.push_back(s.os_days);
      events.push_back(s.event);
    }
    try {
      return metrics::c_index(risks, times, events);
    } catch (const DataError&) {
      return 0.5;  // no comparable pairs in this fold
    }
  }
  metrics::ScoredCohort cohort;
  std::size_t correct = 0;
  for (const auto& s : scores) {
    cohort.scores.push_back(s.positive_fraction);
    cohort.labels.push_back(s.true_label);
    correct += s.pred_label == s.true_label;
  }
  try {
    return metrics::roc_auc(cohort).auc;
  } catch (const DataError&) {
    return static_cast<double>(correct) / static_cast<double>(scores.size());
  }
}

// the set of patients feeding training must never meet the test set
inline void assert_no_leakage(const std::vector<dataio::SlideRecord>& cohort,
                              const SplitAssignment& split) {
  std::set<std::string> train_patients, test_patients;
  for (const auto& r : cohort) {
    auto it = split.parts.find(r.slide_id);
    if (it == split.parts.end()) continue;
    if (it->second == SplitPart::Train) train_patients.insert(r.patient_id);
    if (it->second == SplitPart::Test) test_patients.insert(r.patient_id);
  }
  for (const auto& p : train_patients)
    if (test_patients.count(p))
      throw std::logic_error("split leaked patient '" + p + "' into both train and test");
}

}  // namespace detail

struct TrainOutput {
  std::vector<ExperimentReport> reports;
  std::vector<std::string> model_paths;
};

// Full experiment: per repeat, split the cohort, train with SGD, keep the
// epoch with the best validation metric (AUC or c-index), evaluate once on
// the test fold and emit the report files. Patch labels inherit their
// slide's label.
inline TrainOutput train_task(const ExperimentConfig& cfg, const std::string& manifest_path,
                              const std::string& out_dir) {
  cfg.validate();
  const auto manifest = dataio::load_manifest(manifest_path);
  const std::string manifest_dir =
      std::filesystem::path(manifest_path).parent_path().string();
  const auto cohort = select_cohort(manifest, cfg.task, cfg.grade);
  if (cohort.empty()) throw DataError("no slides carry the labels required by this task");

  const bool cox = cfg.task == Task::SurvivalCox;

  // patch extraction does not depend on the repeat; do it once
  std::vector<SlidePatches> slides = extract_cohort_patches(cohort, manifest_dir, cfg);

  TrainOutput result;
  for (int repeat = 0; repeat < cfg.repeats; ++repeat) {
    const SplitAssignment split = stratified_split(cohort, cfg, repeat);
    detail::assert_no_leakage(cohort, split);

    SurvivalClasses surv_classes;
    if (cfg.task == Task::SurvivalClass) surv_classes = derive_survival_classes(cohort, split);

    // per-repeat slide labels and fold membership
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const auto& rec = cohort[i];
      if (cfg.task == Task::SurvivalClass) {
        auto it = surv_classes.labels.find(rec.slide_id);
        if (it == surv_classes.labels.end()) continue;  // class unknowable
        slides[i].label = it->second;
      } else if (!cox) {
        slides[i].label = *strat_label(rec, cfg.task);
      }
      switch (split.parts.at(rec.slide_id)) {
        case SplitPart::Train: train_idx.push_back(i); break;
        case SplitPart::Val: val_idx.push_back(i); break;
        case SplitPart::Test: test_idx.push_back(i); break;
      }
    }
    if (train_idx.empty() || val_idx.empty() || test_idx.empty())
      throw DataError("a split fold is empty after label derivation");

    const ChannelNorm norm = compute_norm(slides, train_idx);

    nn::Network net(nn::default_network_spec(3, 1),
                    {3, cfg.patch_size, cfg.patch_size});
    net.init_params(derive_seed(cfg.seed, "init", static_cast<std::uint64_t>(repeat)));
    nn::Sgd sgd(cfg.lr, cfg.momentum, cfg.weight_decay);
    auto params = net.params();

    std::vector<std::pair<std::uint32_t, std::uint32_t>> items;
    for (std::size_t si : train_idx)
      for (int pi = 0; pi < slides[si].n_patches; ++pi)
        items.emplace_back(static_cast<std::uint32_t>(si), static_cast<std::uint32_t>(pi));

    double best_metric = -std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    detail::NetSnapshot best;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng shuffle_rng(derive_seed(cfg.seed, "shuffle",
                                  static_cast<std::uint64_t>(repeat) * 1000003ULL + epoch));
      shuffle_rng.shuffle(items);

      std::size_t batch_no = 0;
      for (std::size_t at = 0; at < items.size(); at += cfg.batch_size, ++batch_no) {
        const std::size_t end = std::min(items.size(), at + cfg.batch_size);
        if (end - at < 2) continue;  // batchnorm needs n >= 2
        if (cox) {
          bool any_event = false;
          for (std::size_t b = at; b < end && !any_event; ++b)
            any_event = slides[items[b].first].event == 1;
          if (!any_event) continue;  // partial likelihood undefined; resample next epoch
        }

        Tensor4 batch = make_batch(slides, items, at, end, norm);
        nn::NetOutput out = net.forward(batch, nn::Mode::Train);

        std::vector<double> outputs(batch.n);
        for (int b = 0; b < batch.n; ++b) outputs[b] = out.output.at(b, 0, 0, 0);

        heads::LossResult loss;
        if (cox) {
          heads::SurvivalBatch sb;
          sb.risks = outputs;
          for (std::size_t b = at; b < end; ++b) {
            sb.times.push_back(slides[items[b].first].os_days);
            sb.events.push_back(slides[items[b].first].event);
          }
          loss = heads::cox_loss(sb);
        } else {
          heads::BinaryBatch bb;
          bb.logits = outputs;
          for (std::size_t b = at; b < end; ++b)
            bb.labels.push_back(slides[items[b].first].label);
          loss = heads::bce_loss(bb);
        }
        if (!std::isfinite(loss.loss))
          throw NumericError("training diverged (non-finite loss) at repeat " +
                             std::to_string(repeat) + ", epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_no));

        Tensor4 dout(batch.n, 1, 1, 1);
        for (int b = 0; b < batch.n; ++b) dout.at(b, 0, 0, 0) = loss.grad[b];
        net.backward(dout);
        sgd.step(params);
      }

      const auto val_scores = score_slides(net, slides, val_idx, cox, norm, cfg.workers);
      const double metric = detail::validation_metric(val_scores, cox);
      if (metric > best_metric) {
        best_metric = metric;
        best_epoch = epoch;
        best = detail::take_snapshot(net);
      }
    }

    detail::restore_snapshot(net, best);

    // test fold is touched exactly once, after epoch selection
    ExperimentReport report;
    report.task = task_name(cfg.task);
    report.grade = grade_filter_name(cfg.grade);
    report.repeat = repeat;
    report.best_epoch = best_epoch;
    report.val_metric = best_metric;
    report.seed = cfg.seed;
    report.slides = score_slides(net, slides, test_idx, cox, norm, cfg.workers);
    assemble_metrics(report, cox, cfg.bootstrap_b,
                     derive_seed(cfg.seed, "bootstrap-metrics",
                                 static_cast<std::uint64_t>(repeat)));
    emit_report(report, out_dir);

    nn::ModelMeta meta;
    meta.task = task_name(cfg.task);
    meta.head = cox ? "cox" : "binary";
    meta.patch_size = cfg.patch_size;
    meta.patches_per_slide = cfg.patches_per_slide;
    meta.norm_mean = norm.mean;
    meta.norm_std = norm.stdev;
    if (cfg.task == Task::SurvivalClass) meta.survival_cutoff_days = surv_classes.cutoff_days;
    const std::string model_path =
        (std::filesystem::path(out_dir) / (report_basename(report) + ".model.pfnn")).string();
    nn::save_model(net, meta, model_path);

    result.reports.push_back(std::move(report));
    result.model_paths.push_back(model_path);
  }
  return result;
}

}  // namespace pathflow::harness
