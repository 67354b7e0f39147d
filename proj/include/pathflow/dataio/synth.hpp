#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pathflow/dataio/image.hpp"
#include "pathflow/dataio/manifest.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/rng.hpp"

namespace pathflow::dataio {

// Desk-scale synthetic corpus: one textured disc per slide on a white
// background. The two classes differ by the texture frequency band theta;
// survival times shorten as theta grows.
struct CorpusSpec {
  int slides_per_class = 30;
  int image_size = 128;
  double theta_lo_class0 = 0.06;
  double theta_hi_class0 = 0.11;
  double theta_lo_class1 = 0.15;
  double theta_hi_class1 = 0.20;
  double contrast = 0.22;
  double pixel_noise = 0.03;
  double censor_prob = 0.2;
  double os_scale_days = 1500.0;
  double log_hazard_slope = 3.0;  // slope of -log(os) in normalized theta
  double os_sigma = 0.25;         // lognormal spread of survival times
  std::string format = "png";
};

struct SlideTruth {
  double theta = 0.0;       // texture frequency, cycles per pixel
  double theta_norm = 0.0;  // theta rescaled to [0,1] over the corpus range
  double disc_cx = 0.0;
  double disc_cy = 0.0;
  double disc_radius = 0.0;
};

struct SynthResult {
  std::vector<SlideRecord> manifest;
  std::vector<SlideTruth> truth;
  std::string manifest_path;
};

inline double theta_range_lo(const CorpusSpec& s) {
  return std::min(s.theta_lo_class0, s.theta_lo_class1);
}
inline double theta_range_hi(const CorpusSpec& s) {
  return std::max(s.theta_hi_class0, s.theta_hi_class1);
}

// Sampling law for survival: os_days = os_scale * exp(-slope * theta_norm
// + sigma * eps) with eps ~ N(0,1), so the risk of death rises
// monotonically with theta. Censored subjects (probability censor_prob)
// report a uniform fraction of their true survival time.
inline std::pair<double, int> sample_survival(const CorpusSpec& spec, double theta_norm,
                                              Rng& rng) {
  const double eps = rng.normal();
  double os = spec.os_scale_days *
              std::exp(-spec.log_hazard_slope * theta_norm + spec.os_sigma * eps);
  int event = 1;
  if (rng.uniform() < spec.censor_prob) {
    event = 0;
    os *= rng.uniform(0.2, 0.95);
  }
  return {os, event};
}

inline ImageRaster render_slide(const CorpusSpec& spec, const SlideTruth& truth,
                                std::uint64_t pixel_seed) {
  const int S = spec.image_size;
  ImageRaster img(S, S);
  Rng rng(pixel_seed);
  const double phi = rng.uniform(0.0, 3.141592653589793);
  const double phase = rng.uniform(0.0, 6.283185307179586);
  const double cosp = std::cos(phi), sinp = std::sin(phi);
  const double r2 = truth.disc_radius * truth.disc_radius;
  const double base = 0.52;
  auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double dx = x - truth.disc_cx, dy = y - truth.disc_cy;
      if (dx * dx + dy * dy > r2) {
        img.at(0, y, x) = img.at(1, y, x) = img.at(2, y, x) = 1.0;
        continue;
      }
      const double wave =
          std::sin(6.283185307179586 * truth.theta * (cosp * x + sinp * y) + phase);
      const double v = base + spec.contrast * wave + spec.pixel_noise * (2.0 * rng.uniform() - 1.0);
      img.at(0, y, x) = clamp01(v + 0.10);
      img.at(1, y, x) = clamp01(v - 0.02);
      img.at(2, y, x) = clamp01(v + 0.04);
    }
  return img;
}

inline SlideTruth sample_truth(const CorpusSpec& spec, int cls, Rng& rng) {
  SlideTruth t;
  const double lo = cls == 0 ? spec.theta_lo_class0 : spec.theta_lo_class1;
  const double hi = cls == 0 ? spec.theta_hi_class0 : spec.theta_hi_class1;
  t.theta = rng.uniform(lo, hi);
  const double glo = theta_range_lo(spec), ghi = theta_range_hi(spec);
  t.theta_norm = (t.theta - glo) / (ghi - glo);
  const int S = spec.image_size;
  t.disc_cx = S / 2.0 + rng.uniform(-S / 32.0, S / 32.0);
  t.disc_cy = S / 2.0 + rng.uniform(-S / 32.0, S / 32.0);
  t.disc_radius = 0.40 * S * rng.uniform(0.95, 1.05);
  return t;
}

inline SynthResult synth_corpus(const CorpusSpec& spec, std::uint64_t seed,
                                const std::string& out_dir) {
  if (spec.slides_per_class < 1) throw ConfigError("synth: slides_per_class must be >= 1");
  if (spec.image_size < 8) throw ConfigError("synth: image_size too small");
  if (spec.censor_prob < 0.0 || spec.censor_prob >= 1.0)
    throw ConfigError("synth: censor_prob must be in [0,1)");
  if (spec.format != "png" && spec.format != "ppm")
    throw ConfigError("synth: format must be png or ppm");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw DataError("cannot create output directory: " + out_dir);

  SynthResult result;
  const int total = 2 * spec.slides_per_class;
  int codel_counter = 0;
  for (int i = 0; i < total; ++i) {
    const int cls = i < spec.slides_per_class ? 0 : 1;
    Rng rng(derive_seed(seed, "synth-slide", static_cast<std::uint64_t>(i)));
    SlideTruth truth = sample_truth(spec, cls, rng);
    auto [os, event] = sample_survival(spec, truth.theta_norm, rng);

    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth_%04d", i);
    SlideRecord r;
    r.slide_id = idbuf;
    r.patient_id = std::string("pt_") + (idbuf + 6);
    r.image_path = std::string("images/") + idbuf + "." + spec.format;
    r.idh = cls == 0 ? IdhStatus::Wildtype : IdhStatus::Mutant;
    if (cls == 1) {
      const bool codeleted = (codel_counter++ % 2) == 0;
      r.codel = codeleted ? CodelStatus::Codeleted : CodelStatus::NonCodeleted;
      // mirror the cohort structure: no grade-IV codeleted slides
      r.grade = codeleted ? (i % 2 == 0 ? Grade::II : Grade::III)
                          : (i % 3 == 0 ? Grade::II : (i % 3 == 1 ? Grade::III : Grade::IV));
    } else {
      r.grade = i % 3 == 0 ? Grade::II : (i % 3 == 1 ? Grade::III : Grade::IV);
    }
    r.os_days = os;
    r.event = event;
    r.sex = i % 2 == 0 ? Sex::M : Sex::F;
    r.age_years = std::floor(rng.uniform(30.0, 70.0) * 10.0) / 10.0;

    ImageRaster img =
        render_slide(spec, truth, derive_seed(seed, "synth-pixels", static_cast<std::uint64_t>(i)));
    encode_image(img, (fs::path(out_dir) / r.image_path).string());

    result.manifest.push_back(std::move(r));
    result.truth.push_back(truth);
  }

  result.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  write_manifest(result.manifest, result.manifest_path);
  return result;
}

}  // namespace pathflow::dataio
