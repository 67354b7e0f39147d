#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathflow/dataio/manifest.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/harness/config.hpp"
#include "pathflow/rng.hpp"

namespace pathflow::harness {

enum class SplitPart { Train, Val, Test };

inline std::string split_part_name(SplitPart p) {
  switch (p) {
    case SplitPart::Train: return "train";
    case SplitPart::Val: return "val";
    default: return "test";
  }
}

struct SplitAssignment {
  std::unordered_map<std::string, SplitPart> parts;  // slide_id -> part
  std::uint64_t seed = 0;
  int repeat = 0;

  std::vector<std::string> ids_in(SplitPart part,
                                  const std::vector<dataio::SlideRecord>& cohort) const {
    std::vector<std::string> out;
    for (const auto& r : cohort) {
      auto it = parts.find(r.slide_id);
      if (it != parts.end() && it->second == part) out.push_back(r.slide_id);
    }
    return out;
  }
};

// Task label used for stratification and classification metrics. Survival
// tasks stratify on the event flag: short/long labels do not exist before
// the split (the cutoff comes from the training fold).
inline std::optional<int> strat_label(const dataio::SlideRecord& r, Task task) {
  switch (task) {
    case Task::Idh:
      if (r.idh == dataio::IdhStatus::Unknown) return std::nullopt;
      return r.idh == dataio::IdhStatus::Mutant ? 1 : 0;
    case Task::Codel:
      if (r.idh != dataio::IdhStatus::Mutant || r.codel == dataio::CodelStatus::Unknown)
        return std::nullopt;
      return r.codel == dataio::CodelStatus::Codeleted ? 1 : 0;
    default:
      if (!r.os_days.has_value() || !r.event.has_value()) return std::nullopt;
      return *r.event;
  }
}

// Rows eligible for a task after grade filtering.
inline std::vector<dataio::SlideRecord> select_cohort(
    const std::vector<dataio::SlideRecord>& manifest, Task task, GradeFilter grade) {
  std::vector<dataio::SlideRecord> out;
  for (const auto& r : manifest) {
    if (grade != GradeFilter::All) {
      const auto want = grade == GradeFilter::II   ? dataio::Grade::II
                        : grade == GradeFilter::III ? dataio::Grade::III
                                                     : dataio::Grade::IV;
      if (r.grade != want) continue;
    }
    if (!strat_label(r, task).has_value()) continue;
    out.push_back(r);
  }
  return out;
}

// Patient-grouped stratified split. Within each stratum, patients are
// shuffled once per seed; repeat r takes the r-th rotation block as the
// test set, and the remainder is divided train/val by largest remainder.
// Per-class slide counts stay within +-1 of the exact ratios whenever
// patients hold one slide each.
inline SplitAssignment stratified_split(const std::vector<dataio::SlideRecord>& cohort,
                                        const ExperimentConfig& cfg, int repeat) {
  cfg.validate();
  if (repeat < 0 || repeat >= cfg.repeats)
    throw ConfigError("repeat index out of range");

  // stratum -> patient -> slides, with deterministic ordering
  std::map<int, std::map<std::string, std::vector<std::string>>> strata;
  for (const auto& r : cohort) {
    const auto label = strat_label(r, cfg.task);
    if (!label.has_value())
      throw DataError("stratified_split: slide '" + r.slide_id + "' lacks the task label");
    strata[*label][r.patient_id].push_back(r.slide_id);
  }
  if (strata.size() < 2)
    throw DataError("stratified_split: need both classes present, got " +
                    std::to_string(strata.size()));

  SplitAssignment out;
  out.seed = cfg.seed;
  out.repeat = repeat;

  for (auto& [label, patients] : strata) {
    std::size_t n_slides = 0;
    for (const auto& [pid, slides] : patients) n_slides += slides.size();
    if (n_slides < 4)
      throw DataError("stratified_split: class " + std::to_string(label) + " has only " +
                      std::to_string(n_slides) + " slides (need >= 4)");

    std::vector<std::string> order;
    order.reserve(patients.size());
    for (const auto& [pid, slides] : patients) order.push_back(pid);
    // one shuffle per (seed, stratum); repeats rotate over the same order
    Rng rng(derive_seed(cfg.seed, "split-shuffle", static_cast<std::uint64_t>(label)));
    rng.shuffle(order);

    const std::size_t np = order.size();
    std::size_t test_begin, test_end;
    if (cfg.repeats > 1) {
      test_begin = (static_cast<std::size_t>(repeat) * np) / cfg.repeats;
      test_end = (static_cast<std::size_t>(repeat) + 1) * np / cfg.repeats;
    } else {
      // largest-remainder target for the test block
      const double target = cfg.test_ratio * static_cast<double>(np);
      test_begin = 0;
      test_end = static_cast<std::size_t>(target + 0.5);
      if (test_end < 1) test_end = 1;
      if (test_end > np - 2) test_end = np - 2;
    }

    std::vector<std::string> rest;
    for (std::size_t i = 0; i < np; ++i) {
      if (i >= test_begin && i < test_end) {
        for (const auto& sid : patients[order[i]]) out.parts[sid] = SplitPart::Test;
      } else {
        rest.push_back(order[i]);
      }
    }
    if (test_end == test_begin)
      throw DataError("stratified_split: class " + std::to_string(label) +
                      " too small for a nonempty test split");

    const double train_frac = cfg.train_ratio / (cfg.train_ratio + cfg.val_ratio);
    const std::size_t n_train =
        std::min(rest.size() - 1,
                 std::max<std::size_t>(
                     1, static_cast<std::size_t>(train_frac * static_cast<double>(rest.size()) + 0.5)));
    for (std::size_t i = 0; i < rest.size(); ++i) {
      const SplitPart part = i < n_train ? SplitPart::Train : SplitPart::Val;
      for (const auto& sid : patients[rest[i]]) out.parts[sid] = part;
    }
  }
  return out;
}

struct SurvivalClasses {
  double cutoff_days = 0.0;
  // slide_id -> 1 (short) / 0 (long); censored subjects below the cutoff are
  // absent (their class is unknowable)
  std::unordered_map<std::string, int> labels;
  std::size_t excluded = 0;
};

// Short/long survivor labels: cutoff is the median training-fold os_days,
// computed once per repeat and reused for val/test.
inline SurvivalClasses derive_survival_classes(const std::vector<dataio::SlideRecord>& cohort,
                                               const SplitAssignment& split) {
  std::vector<double> train_os;
  bool train_has_event = false;
  for (const auto& r : cohort) {
    auto it = split.parts.find(r.slide_id);
    if (it == split.parts.end() || it->second != SplitPart::Train) continue;
    if (!r.os_days.has_value())
      throw DataError("derive_survival_classes: training slide '" + r.slide_id +
                      "' has unknown os_days");
    train_os.push_back(*r.os_days);
    if (r.event.value_or(0) == 1) train_has_event = true;
  }
  if (train_os.empty()) throw DataError("derive_survival_classes: empty training split");
  if (!train_has_event)
    throw DataError("derive_survival_classes: training split is fully censored, "
                    "no cutoff can be defined");

  std::sort(train_os.begin(), train_os.end());
  const std::size_t m = train_os.size();
  const double cutoff =
      m % 2 == 1 ? train_os[m / 2] : 0.5 * (train_os[m / 2 - 1] + train_os[m / 2]);

  SurvivalClasses out;
  out.cutoff_days = cutoff;
  for (const auto& r : cohort) {
    if (!split.parts.count(r.slide_id)) continue;
    if (!r.os_days.has_value() || !r.event.has_value()) continue;
    if (*r.event == 0 && *r.os_days < cutoff) {
      ++out.excluded;  // censored before the cutoff: class unknowable
      continue;
    }
    out.labels[r.slide_id] = *r.os_days < cutoff ? 1 : 0;  // short = 1
  }
  return out;
}

}  // namespace pathflow::harness
