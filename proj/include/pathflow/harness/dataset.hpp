#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "pathflow/dataio/image.hpp"
#include "pathflow/dataio/manifest.hpp"
#include "pathflow/dataio/patches.hpp"
#include "pathflow/dataio/tissue.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/harness/config.hpp"
#include "pathflow/rng.hpp"
#include "pathflow/tensor.hpp"

namespace pathflow::harness {

// Patches of one slide, stored compactly; batches are widened to fp64 and
// normalized on assembly.
struct SlidePatches {
  std::string slide_id;
  dataio::Grade grade = dataio::Grade::II;
  int label = -1;
  double os_days = 0.0;
  int event = 0;
  int n_patches = 0;
  int patch_size = 0;
  bool with_replacement = false;
  std::vector<float> data;  // n_patches * 3 * p * p, CHW per patch
};

inline SlidePatches extract_slide(const dataio::SlideRecord& rec,
                                  const std::string& manifest_dir,
                                  const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::path img_path(rec.image_path);
  if (img_path.is_relative()) img_path = fs::path(manifest_dir) / img_path;

  const dataio::ImageRaster img = dataio::decode_image(img_path.string());
  const dataio::BoolRaster mask =
      dataio::tissue_mask(img, cfg.white_thresh, cfg.var_thresh, cfg.mask_window);
  // per-slide substream: seed XOR hash(slide_id)
  const std::uint64_t slide_seed = cfg.seed ^ fnv1a(rec.slide_id);
  const dataio::PatchSet ps = dataio::extract_patches(img, mask, rec.slide_id,
                                                      cfg.patches_per_slide, cfg.patch_size,
                                                      slide_seed);
  SlidePatches out;
  out.slide_id = rec.slide_id;
  out.grade = rec.grade;
  out.os_days = rec.os_days.value_or(0.0);
  out.event = rec.event.value_or(0);
  out.n_patches = static_cast<int>(ps.patches.size());
  out.patch_size = cfg.patch_size;
  out.with_replacement = ps.with_replacement;
  const std::size_t per = static_cast<std::size_t>(3) * cfg.patch_size * cfg.patch_size;
  out.data.resize(per * ps.patches.size());
  for (std::size_t i = 0; i < ps.patches.size(); ++i)
    for (std::size_t t = 0; t < per; ++t)
      out.data[i * per + t] = static_cast<float>(ps.patches[i].v[t]);
  return out;
}

// Extraction fans out across a worker pool; results land in index-addressed
// slots, so the output is identical for any worker count.
inline std::vector<SlidePatches> extract_cohort_patches(
    const std::vector<dataio::SlideRecord>& cohort, const std::string& manifest_dir,
    const ExperimentConfig& cfg) {
  std::vector<SlidePatches> out(cohort.size());
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(cohort.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < cohort.size(); ++i)
      out[i] = extract_slide(cohort[i], manifest_dir, cfg);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cohort.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cohort.size()) return;
        try {
          out[i] = extract_slide(cohort[i], manifest_dir, cfg);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);  // lowest slide index wins
  return out;
}

struct ChannelNorm {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stdev{1.0, 1.0, 1.0};
};

// Per-channel statistics over the training patches, accumulated in slide
// order for exact reproducibility.
inline ChannelNorm compute_norm(const std::vector<SlidePatches>& slides,
                                const std::vector<std::size_t>& train_indices) {
  std::array<double, 3> sum{0, 0, 0}, sumsq{0, 0, 0};
  std::size_t count = 0;
  for (std::size_t si : train_indices) {
    const auto& s = slides[si];
    const std::size_t hw = static_cast<std::size_t>(s.patch_size) * s.patch_size;
    for (int pi = 0; pi < s.n_patches; ++pi) {
      const float* base = s.data.data() + static_cast<std::size_t>(pi) * 3 * hw;
      for (int c = 0; c < 3; ++c) {
        const float* p = base + c * hw;
        for (std::size_t t = 0; t < hw; ++t) {
          sum[c] += p[t];
          sumsq[c] += static_cast<double>(p[t]) * p[t];
        }
      }
    }
    count += static_cast<std::size_t>(s.n_patches) * hw;
  }
  if (count == 0) throw DataError("compute_norm: no training patches");
  ChannelNorm norm;
  for (int c = 0; c < 3; ++c) {
    norm.mean[c] = sum[c] / static_cast<double>(count);
    double var = sumsq[c] / static_cast<double>(count) - norm.mean[c] * norm.mean[c];
    if (var < 1e-12) var = 1e-12;
    norm.stdev[c] = std::sqrt(var);
  }
  return norm;
}

// (slide index, patch index) pairs -> normalized fp64 batch tensor
inline Tensor4 make_batch(const std::vector<SlidePatches>& slides,
                          const std::vector<std::pair<std::uint32_t, std::uint32_t>>& items,
                          std::size_t begin, std::size_t end, const ChannelNorm& norm) {
  const int p = slides[items[begin].first].patch_size;
  const std::size_t hw = static_cast<std::size_t>(p) * p;
  Tensor4 batch(static_cast<int>(end - begin), 3, p, p);
  for (std::size_t b = begin; b < end; ++b) {
    const auto& s = slides[items[b].first];
    const float* base = s.data.data() + static_cast<std::size_t>(items[b].second) * 3 * hw;
    double* dst = batch.v.data() + (b - begin) * 3 * hw;
    for (int c = 0; c < 3; ++c)
      for (std::size_t t = 0; t < hw; ++t)
        dst[c * hw + t] = (static_cast<double>(base[c * hw + t]) - norm.mean[c]) / norm.stdev[c];
  }
  return batch;
}

}  // namespace pathflow::harness
