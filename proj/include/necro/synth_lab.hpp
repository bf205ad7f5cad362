// Copyright 2026 The necro Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file synth_lab.hpp
/// @brief Deterministic synthetic slides and cohorts with exact ground truth.
///
/// Slides are a Voronoi partition of the plane over a jittered grid of sites
/// (one site per `granularity`-sized cell). Cells are visited in a seeded
/// random order and handed out to classes until each class has exactly its
/// quota of pixels. A cell that straddles a quota boundary is split by rank of
/// (distance to site, y, x), so the inner part goes to one class and the outer
/// ring to the next. Class pixel counts therefore equal the quotas exactly.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "necro/error.hpp"
#include "necro/parallel.hpp"
#include "necro/png_io.hpp"
#include "necro/quantify.hpp"
#include "necro/raster.hpp"
#include "necro/rng.hpp"
#include "necro/slide_store.hpp"
#include "necro/tissue.hpp"

namespace necro {

struct SynthSpec {
  std::uint64_t seed = 0;
  int width = 1024;
  int height = 1024;
  std::array<double, kNumClasses> fractions{};  // index = class code; code 0 must be 0
  int granularity = 128;
  Palette palette = kCanonicalPalette;
  double noise_epsilon = 0.0;  // fraction of pixels that get color jitter
  int jitter_amplitude = 32;   // jitter is uniform in [-a, a] per channel
  std::vector<int> levels{1, 2, 4};
};

/// Largest-remainder apportionment of `total` pixels; ties go to the lower code.
inline ClassCounts class_quotas(const std::array<double, kNumClasses>& fractions, std::uint64_t total) {
  ClassCounts q;
  std::array<double, kNumClasses> rem{};
  std::uint64_t assigned = 0;
  const double sum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  for (int c = 0; c < kNumClasses; ++c) {
    const double exact = std::min(1.0, fractions[c] / sum) * static_cast<double>(total);
    q.n[c] = static_cast<std::uint64_t>(std::floor(exact));
    rem[c] = exact - std::floor(exact);
    assigned += q.n[c];
  }
  std::array<int, kNumClasses> order{};
  for (int c = 0; c < kNumClasses; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; assigned < total; i = (i + 1) % kNumClasses) {
    if (fractions[order[i]] <= 0.0) continue;
    ++q.n[order[i]];
    ++assigned;
  }
  return q;
}

inline void validate_spec(const SynthSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw ValidationError("synth: zero-area slide");
  if (spec.granularity <= 0) throw ValidationError("synth: granularity must be positive");
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!(spec.fractions[c] >= 0.0 && spec.fractions[c] <= 1.0)) throw ValidationError("synth: fraction outside [0,1]");
    sum += spec.fractions[c];
  }
  if (spec.fractions[0] != 0.0) throw ValidationError("synth: the unlabeled class cannot have area");
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("synth: class fractions sum to " + std::to_string(sum) + ", not 1");
  if (!(spec.noise_epsilon >= 0.0 && spec.noise_epsilon <= 1.0)) throw ValidationError("synth: noise_epsilon outside [0,1]");
  if (spec.jitter_amplitude < 0 || spec.jitter_amplitude > 255) throw ValidationError("synth: jitter_amplitude outside [0,255]");
}

/// The label field of a synthetic slide; evaluable at any pixel without
/// materializing the whole mask.
class BlobLayout {
 public:
  explicit BlobLayout(const SynthSpec& spec)
      : width_(spec.width), height_(spec.height), g_(spec.granularity) {
    validate_spec(spec);
    gx_ = ceil_div(width_, g_);
    gy_ = ceil_div(height_, g_);
    Rng rng(hash_key({spec.seed, 0x5173ull}));
    sites_.resize(static_cast<std::size_t>(gx_) * gy_);
    for (int j = 0; j < gy_; ++j) {
      for (int i = 0; i < gx_; ++i) {
        const int cw = std::min(g_, width_ - i * g_);
        const int ch = std::min(g_, height_ - j * g_);
        sites_[j * gx_ + i] = {i * g_ + static_cast<int>(rng.below(cw)), j * g_ + static_cast<int>(rng.below(ch))};
      }
    }

    std::vector<std::uint64_t> area(sites_.size(), 0);
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) ++area[nearest(x, y).first];
    }

    quotas_ = class_quotas(spec.fractions, static_cast<std::uint64_t>(width_) * height_);
    std::vector<std::uint32_t> order(sites_.size());
    for (std::uint32_t k = 0; k < order.size(); ++k) order[k] = k;
    rng.shuffle(order);

    cell_class_.assign(sites_.size(), 0);
    std::array<std::uint64_t, kNumClasses> left = quotas_.n;
    int cls = 1;
    for (std::uint32_t k : order) {
      std::uint64_t need = area[k];
      std::vector<std::pair<std::uint64_t, std::uint8_t>> segments;  // (pixel count, class)
      while (need > 0) {
        while (cls < kNumClasses && left[cls] == 0) ++cls;
        if (cls >= kNumClasses) throw Error("synth: quota bookkeeping underflow");
        const std::uint64_t take = std::min(need, left[cls]);
        segments.emplace_back(take, static_cast<std::uint8_t>(cls));
        left[cls] -= take;
        need -= take;
      }
      if (segments.size() == 1) {
        cell_class_[k] = segments[0].second;
      } else if (!segments.empty()) {
        split_cell(k, segments);
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const ClassCounts& quotas() const { return quotas_; }

  std::uint8_t label_at(int x, int y) const {
    auto [k, d2] = nearest(x, y);
    const std::uint8_t c = cell_class_[k];
    if (c != kSplit) return c;
    const Rank r{d2, y, x};
    for (const auto& [cut, cls] : splits_.at(k)) {
      if (r < cut) return cls;
    }
    return splits_.at(k).back().second;
  }

  void fill_rows(int y0, LabelGrid& band) const {
    for (int y = 0; y < band.height(); ++y) {
      auto row = band.row(y);
      for (int x = 0; x < width_; ++x) row[x] = label_at(x, y0 + y);
    }
  }

 private:
  using Rank = std::tuple<std::int64_t, int, int>;
  static constexpr std::uint8_t kSplit = 0xFF;

  std::pair<std::uint32_t, std::int64_t> nearest(int x, int y) const {
    const int ci = x / g_;
    const int cj = y / g_;
    std::uint32_t best = 0;
    std::int64_t best_d = INT64_MAX;
    for (int j = std::max(0, cj - 1); j <= std::min(gy_ - 1, cj + 1); ++j) {
      for (int i = std::max(0, ci - 1); i <= std::min(gx_ - 1, ci + 1); ++i) {
        const std::uint32_t k = static_cast<std::uint32_t>(j * gx_ + i);
        const std::int64_t dx = x - sites_[k].first;
        const std::int64_t dy = y - sites_[k].second;
        const std::int64_t d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
    }
    return {best, best_d};
  }

  // Pixels of cell k lie within one grid cell of the site's own grid cell.
  void split_cell(std::uint32_t k, const std::vector<std::pair<std::uint64_t, std::uint8_t>>& segments) {
    const int si = static_cast<int>(k) % gx_;
    const int sj = static_cast<int>(k) / gx_;
    std::vector<Rank> ranks;
    for (int y = std::max(0, (sj - 1) * g_); y < std::min(height_, (sj + 2) * g_); ++y) {
      for (int x = std::max(0, (si - 1) * g_); x < std::min(width_, (si + 2) * g_); ++x) {
        auto [nk, d2] = nearest(x, y);
        if (nk == k) ranks.emplace_back(d2, y, x);
      }
    }
    std::sort(ranks.begin(), ranks.end());
    std::vector<std::pair<Rank, std::uint8_t>> cuts;
    std::uint64_t cum = 0;
    for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
      cum += segments[s].first;
      cuts.emplace_back(ranks[cum], segments[s].second);
    }
    cuts.emplace_back(Rank{INT64_MAX, 0, 0}, segments.back().second);
    cell_class_[k] = kSplit;
    splits_[k] = std::move(cuts);
  }

  int width_, height_, g_;
  int gx_ = 0, gy_ = 0;
  std::vector<std::pair<int, int>> sites_;
  std::vector<std::uint8_t> cell_class_;
  std::map<std::uint32_t, std::vector<std::pair<Rank, std::uint8_t>>> splits_;
  ClassCounts quotas_;
};

/// Paints canonical colors for a band of labels and applies seeded per-pixel jitter.
inline RgbImage paint_rows(const SynthSpec& spec, int y0, const LabelGrid& labels) {
  RgbImage out(labels.width(), labels.height());
  const int span = 2 * spec.jitter_amplitude + 1;
  for (int y = 0; y < labels.height(); ++y) {
    auto lrow = labels.row(y);
    auto orow = out.row(y);
    for (int x = 0; x < labels.width(); ++x) {
      Rgb c = spec.palette[lrow[x]];
      if (spec.noise_epsilon > 0.0) {
        const std::uint64_t h = hash_key({spec.seed, 0x401Eull, static_cast<std::uint64_t>(y0 + y),
                                          static_cast<std::uint64_t>(x)});
        if (unit_from_bits(h) < spec.noise_epsilon) {
          const std::uint64_t j = splitmix64(h);
          auto jitter = [&](std::uint8_t v, int shift) {
            const int d = static_cast<int>(((j >> shift) & 0xFFFF) % static_cast<std::uint64_t>(span)) -
                          spec.jitter_amplitude;
            return static_cast<std::uint8_t>(std::clamp(int{v} + d, 0, 255));
          };
          c = Rgb{jitter(c.r, 0), jitter(c.g, 16), jitter(c.b, 32)};
        }
      }
      orow[x] = c;
    }
  }
  return out;
}

struct SynthSlide {
  RgbImage level0;
  LabelMask mask;
};

/// Whole slide in memory; intended for small slides and tests.
inline SynthSlide render_slide(const SynthSpec& spec, std::string slide_id = "synthetic") {
  BlobLayout layout(spec);
  LabelGrid labels(spec.width, spec.height);
  layout.fill_rows(0, labels);
  RgbImage rgb = paint_rows(spec, 0, labels);
  return {std::move(rgb), LabelMask{std::move(slide_id), std::move(labels)}};
}

struct GeneratedSlide {
  SlideInfo info;
  ClassCounts truth;
};

/// Writes the pyramid and `mask.png` for one slide under `slide_dir`,
/// streaming bands so memory stays bounded for large slides.
inline GeneratedSlide write_slide(const SynthSpec& spec, const fs::path& slide_dir, const std::string& slide_id) {
  BlobLayout layout(spec);
  SlideInfo info{slide_id, spec.width, spec.height, spec.levels};
  fs::create_directories(slide_dir);
  png::RowWriter mask_out(slide_dir / "mask.png", spec.width, spec.height, 1, 6);
  write_pyramid(slide_dir, info, [&](int y0, int rows) {
    LabelGrid labels(spec.width, rows);
    layout.fill_rows(y0, labels);
    for (int y = 0; y < rows; ++y) mask_out.write_row(labels.row(y).data());
    return paint_rows(spec, y0, labels);
  });
  mask_out.finish();
  return {info, layout.quotas()};
}

// ---------------------------------------------------------------------------
// Cohorts
// ---------------------------------------------------------------------------

struct Exclusions {
  int missing_r_pr = 0;
  int missing_os = 0;
  int missing_metastasis = 0;
  int metastatic = 0;
};

struct CohortSpec {
  std::uint64_t seed = 0;
  int cases = 10;        // held-out (test) cases
  int train_cases = 0;
  int min_slides = 1;
  int max_slides = 1;
  int width = 1024;
  int height = 1024;
  int granularity = 128;
  double noise_epsilon = 0.0;
  int jitter_amplitude = 32;
  double tumor_min = 0.4;  // share of slide area that is tumor
  double tumor_max = 0.8;
  double ratio_min = 0.0;
  double ratio_max = 1.0;
  double complete_response = 0.0;  // probability a case is drawn with ratio exactly 1
  double planted_cutoff = 0.8;
  double responder_hazard = 0.005;     // events per month, ratio >= planted cutoff
  double nonresponder_hazard = 0.05;
  double progression_factor = 2.0;    // progression hazard = factor * death hazard
  double censoring_rate = 0.01;
  double follow_up_months = 120.0;
  double report_noise = 0.1;           // sd of reported ratio around the truth
  Exclusions exclusions;
};

struct SynthCohort {
  Dataset dataset;                          // root unset until materialized
  std::vector<SynthSpec> slide_specs;       // parallel to dataset.slides
  std::vector<ClassCounts> slide_truth;     // exact per-slide class counts
  std::map<std::string, Ratio> true_ratio;  // per case
};

inline std::array<double, kNumClasses> draw_fractions(Rng& rng, double ratio, double tumor_min, double tumor_max) {
  std::array<double, kNumClasses> f{};
  const double tumor = rng.uniform(tumor_min, tumor_max);
  const double bone_share = rng.uniform(0.2, 0.8);
  f[1] = tumor * (1.0 - ratio);
  f[2] = tumor * ratio * bone_share;
  f[3] = tumor * ratio * (1.0 - bone_share);
  std::array<double, 4> w{};
  double wsum = 0.0;
  for (double& x : w) wsum += (x = rng.uniform(0.5, 1.5));
  for (int i = 0; i < 4; ++i) f[4 + i] = (1.0 - tumor) * w[i] / wsum;
  double sum = 0.0;
  for (double x : f) sum += x;
  for (double& x : f) x /= sum;
  return f;
}

/// Draws case ratios, slide layouts and outcomes. Pixel data is not produced;
/// see materialize(). Outcome hazards depend on whether the exact mask-derived
/// ratio reaches the planted cutoff.
inline SynthCohort generate_cohort(const CohortSpec& spec) {
  if (spec.cases <= 0) throw ValidationError("cohort: degenerate arm (zero cases)");
  if (spec.train_cases < 0) throw ValidationError("cohort: negative train_cases");
  if (spec.min_slides < 1 || spec.max_slides < spec.min_slides) throw ValidationError("cohort: bad slides-per-case range");
  if (spec.width <= 0 || spec.height <= 0) throw ValidationError("cohort: zero-area slide");
  if (!(spec.tumor_min > 0.0 && spec.tumor_min <= spec.tumor_max && spec.tumor_max <= 1.0)) {
    throw ValidationError("cohort: tumor share range must satisfy 0 < min <= max <= 1");
  }
  if (!(spec.ratio_min >= 0.0 && spec.ratio_min <= spec.ratio_max && spec.ratio_max <= 1.0)) {
    throw ValidationError("cohort: ratio range must lie in [0,1]");
  }
  if (spec.responder_hazard < 0 || spec.nonresponder_hazard < 0 || spec.censoring_rate < 0 ||
      spec.progression_factor < 0 || !(spec.follow_up_months > 0)) {
    throw ValidationError("cohort: invalid survival parameters");
  }
  const auto& ex = spec.exclusions;
  if (ex.missing_r_pr < 0 || ex.missing_os < 0 || ex.missing_metastasis < 0 || ex.metastatic < 0 ||
      ex.missing_r_pr + ex.missing_os + ex.missing_metastasis + ex.metastatic > spec.cases) {
    throw ValidationError("cohort: exclusions exceed case count");
  }

  SynthCohort out;
  Rng rng(hash_key({spec.seed, 0xC0407ull}));
  const int total = spec.cases + spec.train_cases;
  char buf[64];
  for (int ci = 0; ci < total; ++ci) {
    CaseRecord rec;
    std::snprintf(buf, sizeof(buf), "case_%03d", ci);
    rec.id = buf;
    rec.split = ci < spec.cases ? Split::kTest : Split::kTrain;
    const double ratio = rng.uniform() < spec.complete_response ? 1.0 : rng.uniform(spec.ratio_min, spec.ratio_max);
    const int nslides = rng.between(spec.min_slides, spec.max_slides);
    ClassCounts case_counts;
    for (int s = 0; s < nslides; ++s) {
      SynthSpec ss;
      ss.seed = hash_key({spec.seed, static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(s)});
      ss.width = spec.width;
      ss.height = spec.height;
      ss.granularity = spec.granularity;
      ss.noise_epsilon = spec.noise_epsilon;
      ss.jitter_amplitude = spec.jitter_amplitude;
      ss.fractions = draw_fractions(rng, ratio, spec.tumor_min, spec.tumor_max);
      const ClassCounts q = class_quotas(ss.fractions, static_cast<std::uint64_t>(ss.width) * ss.height);
      case_counts.merge(q);
      std::snprintf(buf, sizeof(buf), "%s_s%02d", rec.id.c_str(), s);
      rec.slide_ids.emplace_back(buf);
      out.dataset.slides.push_back({buf, ss.width, ss.height, ss.levels});
      out.slide_specs.push_back(ss);
      out.slide_truth.push_back(q);
    }
    const Ratio r_true = necrosis_ratio(case_counts);
    out.true_ratio.emplace(rec.id, r_true);

    const bool responder = r_true.value() >= spec.planted_cutoff;
    const double hazard = responder ? spec.responder_hazard : spec.nonresponder_hazard;
    const double death = rng.exponential(hazard);
    const double progression = rng.exponential(hazard * spec.progression_factor);
    const double censor = std::min(rng.exponential(spec.censoring_rate), spec.follow_up_months);
    rec.os_months = std::min(death, censor);
    rec.os_event = death <= censor;
    const double pfs_event_time = std::min(death, progression);
    rec.pfs_months = std::min(pfs_event_time, censor);
    rec.pfs_event = pfs_event_time <= censor;
    const double reported = std::clamp(r_true.value() + spec.report_noise * rng.normal(), 0.0, 1.0);
    rec.r_pr = std::round(reported * 100.0) / 100.0;
    rec.metastasis_at_diagnosis = false;
    out.dataset.cases.push_back(std::move(rec));
  }

  // Staged exclusions over disjoint shuffled test cases.
  std::vector<std::size_t> idx(static_cast<std::size_t>(spec.cases));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  std::size_t k = 0;
  auto& cases = out.dataset.cases;
  for (int i = 0; i < ex.missing_r_pr; ++i) cases[idx[k++]].r_pr.reset();
  for (int i = 0; i < ex.missing_os; ++i) {
    auto& c = cases[idx[k++]];
    c.os_months.reset();
    c.pfs_months.reset();
    c.os_event = c.pfs_event = false;
  }
  for (int i = 0; i < ex.missing_metastasis; ++i) cases[idx[k++]].metastasis_at_diagnosis.reset();
  for (int i = 0; i < ex.metastatic; ++i) cases[idx[k++]].metastasis_at_diagnosis = true;

  validate_dataset(out.dataset);
  return out;
}

/// Writes every slide (pyramid + ground-truth mask) and the manifest under `root`.
inline void materialize(SynthCohort& cohort, const fs::path& root, int workers = 1) {
  cohort.dataset.root = root;
  fs::create_directories(root / "slides");
  parallel_for(cohort.slide_specs.size(), workers, [&](std::size_t i) {
    const auto& id = cohort.dataset.slides[i].id;
    write_slide(cohort.slide_specs[i], cohort.dataset.slide_dir(id), id);
  });
  save_manifest(cohort.dataset);
}

// ---------------------------------------------------------------------------
// JSON specs
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end()) dst = it->get<T>();
}

}  // namespace detail

/// {"seed", "width", "height", "fractions": {"viable_tumor": 0.25, ...},
///  "granularity", "noise_epsilon", "jitter_amplitude", "levels"}
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  detail::reject_unknown_keys(
      j, {"seed", "width", "height", "fractions", "granularity", "noise_epsilon", "jitter_amplitude", "levels"},
      "synth spec");
  try {
    detail::read_field(j, "seed", s.seed);
    detail::read_field(j, "width", s.width);
    detail::read_field(j, "height", s.height);
    detail::read_field(j, "granularity", s.granularity);
    detail::read_field(j, "noise_epsilon", s.noise_epsilon);
    detail::read_field(j, "jitter_amplitude", s.jitter_amplitude);
    detail::read_field(j, "levels", s.levels);
    const auto& fr = detail::require(j, "fractions", "synth spec");
    if (!fr.is_object()) throw ValidationError("synth spec: 'fractions' must be an object");
    for (const auto& [name, v] : fr.items()) {
      auto c = class_from_name(name);
      if (!c || *c == TissueClass::kUnlabeled) throw ValidationError("synth spec: unknown class '" + name + "'");
      s.fractions[code_of(*c)] = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  validate_spec(s);
  return s;
}

inline CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  CohortSpec s;
  detail::reject_unknown_keys(
      j, {"seed", "cases", "train_cases", "slides_per_case", "width", "height", "granularity", "noise_epsilon",
          "jitter_amplitude", "tumor_fraction", "ratio_range", "complete_response", "planted_cutoff",
          "responder_hazard", "nonresponder_hazard", "progression_factor", "censoring_rate", "follow_up_months",
          "report_noise", "exclusions"},
      "cohort spec");
  try {
    detail::read_field(j, "seed", s.seed);
    detail::read_field(j, "cases", s.cases);
    detail::read_field(j, "train_cases", s.train_cases);
    if (auto it = j.find("slides_per_case"); it != j.end()) {
      auto v = it->get<std::array<int, 2>>();
      s.min_slides = v[0];
      s.max_slides = v[1];
    }
    detail::read_field(j, "width", s.width);
    detail::read_field(j, "height", s.height);
    detail::read_field(j, "granularity", s.granularity);
    detail::read_field(j, "noise_epsilon", s.noise_epsilon);
    detail::read_field(j, "jitter_amplitude", s.jitter_amplitude);
    if (auto it = j.find("tumor_fraction"); it != j.end()) {
      auto v = it->get<std::array<double, 2>>();
      s.tumor_min = v[0];
      s.tumor_max = v[1];
    }
    if (auto it = j.find("ratio_range"); it != j.end()) {
      auto v = it->get<std::array<double, 2>>();
      s.ratio_min = v[0];
      s.ratio_max = v[1];
    }
    detail::read_field(j, "complete_response", s.complete_response);
    detail::read_field(j, "planted_cutoff", s.planted_cutoff);
    detail::read_field(j, "responder_hazard", s.responder_hazard);
    detail::read_field(j, "nonresponder_hazard", s.nonresponder_hazard);
    detail::read_field(j, "progression_factor", s.progression_factor);
    detail::read_field(j, "censoring_rate", s.censoring_rate);
    detail::read_field(j, "follow_up_months", s.follow_up_months);
    detail::read_field(j, "report_noise", s.report_noise);
    if (auto it = j.find("exclusions"); it != j.end()) {
      detail::reject_unknown_keys(*it, {"missing_r_pr", "missing_os", "missing_metastasis", "metastatic"},
                                  "cohort spec exclusions");
      detail::read_field(*it, "missing_r_pr", s.exclusions.missing_r_pr);
      detail::read_field(*it, "missing_os", s.exclusions.missing_os);
      detail::read_field(*it, "missing_metastasis", s.exclusions.missing_metastasis);
      detail::read_field(*it, "metastatic", s.exclusions.metastatic);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cohort spec: ") + e.what());
  }
  return s;
}

}  // namespace necro
