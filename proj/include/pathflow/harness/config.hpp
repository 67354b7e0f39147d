#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "pathflow/errors.hpp"

namespace pathflow::harness {

enum class Task { Idh, Codel, SurvivalClass, SurvivalCox };
enum class GradeFilter { All, II, III, IV };

inline std::string task_name(Task t) {
  switch (t) {
    case Task::Idh: return "idh";
    case Task::Codel: return "codel";
    case Task::SurvivalClass: return "survival_class";
    default: return "survival_cox";
  }
}

inline Task task_from_name(const std::string& s) {
  if (s == "idh") return Task::Idh;
  if (s == "codel") return Task::Codel;
  if (s == "survival_class") return Task::SurvivalClass;
  if (s == "survival_cox") return Task::SurvivalCox;
  throw ConfigError("unknown task '" + s + "' (want idh|codel|survival_class|survival_cox)");
}

inline std::string grade_filter_name(GradeFilter g) {
  switch (g) {
    case GradeFilter::All: return "all";
    case GradeFilter::II: return "II";
    case GradeFilter::III: return "III";
    default: return "IV";
  }
}

inline GradeFilter grade_filter_from_name(const std::string& s) {
  if (s == "all") return GradeFilter::All;
  if (s == "II") return GradeFilter::II;
  if (s == "III") return GradeFilter::III;
  if (s == "IV") return GradeFilter::IV;
  throw ConfigError("unknown grade filter '" + s + "' (want all|II|III|IV)");
}

struct ExperimentConfig {
  Task task = Task::Idh;
  GradeFilter grade = GradeFilter::All;
  double train_ratio = 0.5;
  double val_ratio = 0.25;
  double test_ratio = 0.25;
  int repeats = 1;
  int patches_per_slide = 100;
  int patch_size = 64;
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1234;
  int workers = 1;
  int bootstrap_b = 1000;
  double white_thresh = 0.85;
  double var_thresh = 0.002;
  int mask_window = 16;

  void validate() const {
    if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0)
      throw ConfigError("split ratios must all be positive");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
      throw ConfigError("split ratios must sum to 1");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (repeats > 1 && std::abs(test_ratio - 1.0 / repeats) > 1e-9)
      throw ConfigError("disjoint test sets require test_ratio = 1/repeats");
    if (patches_per_slide < 1) throw ConfigError("patches_per_slide must be >= 1");
    if (patch_size < 8) throw ConfigError("patch_size must be >= 8");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (task == Task::SurvivalCox && batch_size < 32)
      throw ConfigError("survival_cox requires batch_size >= 32");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (bootstrap_b < 100) throw ConfigError("bootstrap_b must be >= 100");
    if (task == Task::Codel && grade == GradeFilter::IV)
      throw ConfigError(
          "1p/19q classification is undefined for grade IV: the cohort contains no "
          "grade-IV IDH-mutant codeleted slides");
  }
};

}  // namespace pathflow::harness
