#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pathflow/harness/config.hpp"
#include "pathflow/harness/dataset.hpp"
#include "pathflow/harness/report.hpp"
#include "pathflow/harness/scoring.hpp"
#include "pathflow/harness/split.hpp"
#include "pathflow/nn/model_io.hpp"

namespace pathflow::harness {

// Standalone evaluation of a saved model on a manifest. Never updates
// parameters or batchnorm running statistics. Patch geometry and input
// normalization come from the model file itself.
inline ExperimentReport evaluate_model(const std::string& model_path,
                                       const std::string& manifest_path, Task task,
                                       GradeFilter grade, const ExperimentConfig& cfg_in,
                                       int repeat_tag = 0) {
  nn::LoadedModel model = nn::load_model(model_path);
  const bool cox = task == Task::SurvivalCox;
  const std::string needed_head = cox ? "cox" : "binary";
  if (model.meta.head != needed_head)
    throw DataError("model/task mismatch: model head is '" + model.meta.head +
                    "' but task '" + task_name(task) + "' needs '" + needed_head + "'");
  if (task == Task::SurvivalClass && !model.meta.survival_cutoff_days)
    throw DataError("model lacks the survival cutoff required by survival_class");

  ExperimentConfig cfg = cfg_in;
  cfg.task = task;
  cfg.grade = grade;
  cfg.patch_size = model.meta.patch_size;
  cfg.patches_per_slide = model.meta.patches_per_slide;
  cfg.validate();

  const auto manifest = dataio::load_manifest(manifest_path);
  const std::string manifest_dir =
      std::filesystem::path(manifest_path).parent_path().string();
  auto cohort = select_cohort(manifest, task, grade);
  if (cohort.empty()) throw DataError("no slides carry the labels required by this task");

  ChannelNorm norm;
  norm.mean = model.meta.norm_mean;
  norm.stdev = model.meta.norm_std;

  std::vector<SlidePatches> slides = extract_cohort_patches(cohort, manifest_dir, cfg);
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& rec = cohort[i];
    if (task == Task::SurvivalClass) {
      const double cutoff = *model.meta.survival_cutoff_days;
      if (rec.event.value_or(0) == 0 && *rec.os_days < cutoff) continue;  // unknowable
      slides[i].label = *rec.os_days < cutoff ? 1 : 0;
    } else if (!cox) {
      slides[i].label = *strat_label(rec, task);
    }
    indices.push_back(i);
  }
  if (indices.empty()) throw DataError("no evaluable slides after label derivation");

  ExperimentReport report;
  report.task = task_name(task);
  report.grade = grade_filter_name(grade);
  report.repeat = repeat_tag;
  report.seed = cfg.seed;
  report.slides = score_slides(model.net, slides, indices, cox, norm, cfg.workers);
  assemble_metrics(report, cox, cfg.bootstrap_b,
                   derive_seed(cfg.seed, "bootstrap-metrics",
                               static_cast<std::uint64_t>(repeat_tag)));
  return report;
}

}  // namespace pathflow::harness
