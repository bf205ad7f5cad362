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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "necro/error.hpp"
#include "necro/png_io.hpp"
#include "necro/raster.hpp"
#include "necro/slide_store.hpp"
#include "necro/tissue.hpp"

namespace necro {

/// Pixel tally per tissue class. Merging is element-wise addition.
struct ClassCounts {
  std::array<std::uint64_t, kNumClasses> n{};

  std::uint64_t operator[](TissueClass c) const { return n[code_of(c)]; }
  std::uint64_t& operator[](TissueClass c) { return n[code_of(c)]; }

  std::uint64_t viable() const { return n[1]; }
  std::uint64_t necrotic() const { return n[2] + n[3]; }
  std::uint64_t total() const { return std::accumulate(n.begin(), n.end(), std::uint64_t{0}); }

  ClassCounts& merge(const ClassCounts& o) {
    for (int i = 0; i < kNumClasses; ++i) n[i] += o.n[i];
    return *this;
  }
  friend ClassCounts operator+(ClassCounts a, const ClassCounts& b) { return a.merge(b); }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Necrotic fraction of tumor held as exact integer counts.
struct Ratio {
  std::uint64_t necrotic = 0;
  std::uint64_t tumor = 0;  // viable + necrotic, > 0

  double value() const { return static_cast<double>(necrotic) / static_cast<double>(tumor); }

  /// Exact equality of the rationals (not of the representation).
  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<unsigned __int128>(a.necrotic) * b.tumor ==
           static_cast<unsigned __int128>(b.necrotic) * a.tumor;
  }
};

inline ClassCounts count_pixels(const LabelGrid& labels) {
  std::array<std::uint64_t, 256> hist{};
  for (std::uint8_t c : labels.pixels()) ++hist[c];
  ClassCounts out;
  for (int i = 0; i < kNumClasses; ++i) out.n[i] = hist[i];
  for (int i = kNumClasses; i < 256; ++i) {
    if (hist[i] != 0) throw ValidationError("invalid tissue code " + std::to_string(i) + " in mask");
  }
  return out;
}

inline ClassCounts count_pixels(const LabelMask& mask) { return count_pixels(mask.labels); }

/// Counts a mask PNG without holding it in memory.
inline ClassCounts count_mask_file(const fs::path& path, const SlideInfo& info) {
  if (!fs::exists(path)) throw ValidationError("missing mask for slide '" + info.id + "': " + path.string());
  std::array<std::uint64_t, 256> hist{};
  int width = 0;
  auto header = png::read_rows(
      path, png::Layout::kLabels, [&](const png::Header& h) { width = h.width; },
      [&](int, const std::uint8_t* row) {
        for (int x = 0; x < width; ++x) ++hist[row[x]];
      });
  if (header.width != info.width || header.height != info.height) {
    throw ValidationError("mask for slide '" + info.id + "' does not match slide dimensions");
  }
  ClassCounts out;
  for (int i = 0; i < kNumClasses; ++i) out.n[i] = hist[i];
  for (int i = kNumClasses; i < 256; ++i) {
    if (hist[i] != 0) throw ValidationError("invalid tissue code " + std::to_string(i) + " in " + path.string());
  }
  return out;
}

/// p_NT / (p_VT + p_NT) with p_NT = necrosis with bone + necrosis without bone.
inline Ratio necrosis_ratio(const ClassCounts& counts) {
  const std::uint64_t tumor = counts.viable() + counts.necrotic();
  if (tumor == 0) throw NoTumorError("no viable or necrotic tumor pixels");
  return {counts.necrotic(), tumor};
}

enum class NecrosisGrade { kI = 1, kII = 2, kIII = 3, kIV = 4 };

constexpr std::string_view grade_name(NecrosisGrade g) {
  switch (g) {
    case NecrosisGrade::kIV: return "IV";
    case NecrosisGrade::kIII: return "III";
    case NecrosisGrade::kII: return "II";
    case NecrosisGrade::kI: return "I";
  }
  return "?";
}

/// IV: r = 1; III: 0.9 <= r < 1; II: 0.5 <= r < 0.9; I: r < 0.5.
inline NecrosisGrade grade_of(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("necrosis ratio outside [0,1]: " + std::to_string(r));
  if (r == 1.0) return NecrosisGrade::kIV;
  if (r >= 0.9) return NecrosisGrade::kIII;
  if (r >= 0.5) return NecrosisGrade::kII;
  return NecrosisGrade::kI;
}

/// Same breakpoints, evaluated on the exact rational.
inline NecrosisGrade grade_of(const Ratio& r) {
  using U = unsigned __int128;
  if (r.tumor == 0 || r.necrotic > r.tumor) throw ValidationError("malformed ratio");
  if (r.necrotic == r.tumor) return NecrosisGrade::kIV;
  if (U(r.necrotic) * 10 >= U(r.tumor) * 9) return NecrosisGrade::kIII;
  if (U(r.necrotic) * 2 >= U(r.tumor)) return NecrosisGrade::kII;
  return NecrosisGrade::kI;
}

// ---------------------------------------------------------------------------
// Case aggregation
// ---------------------------------------------------------------------------

struct CaseQuantification {
  std::string case_id;
  std::vector<std::pair<std::string, ClassCounts>> slide_counts;
  ClassCounts counts;
  std::optional<Ratio> r_dl;
  std::optional<NecrosisGrade> grade;
  std::optional<double> r_pr;
  std::optional<double> abs_diff;
  std::vector<std::string> flags;

  bool flagged(std::string_view f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }
};

inline constexpr std::string_view kFlagNoTumor = "no_tumor";

/// Merges the per-slide counts of every slide in `c`. A case with no tumor
/// pixels is returned flagged, without a ratio.
inline CaseQuantification aggregate_case(const CaseRecord& c, const std::map<std::string, ClassCounts>& per_slide) {
  CaseQuantification q;
  q.case_id = c.id;
  q.r_pr = c.r_pr;
  for (const auto& sid : c.slide_ids) {
    auto it = per_slide.find(sid);
    if (it == per_slide.end()) {
      throw ValidationError("case '" + c.id + "': missing mask for slide '" + sid + "'");
    }
    q.slide_counts.emplace_back(sid, it->second);
    q.counts.merge(it->second);
  }
  try {
    q.r_dl = necrosis_ratio(q.counts);
  } catch (const NoTumorError&) {
    q.flags.emplace_back(kFlagNoTumor);
    return q;
  }
  q.grade = grade_of(*q.r_dl);
  if (q.r_pr) q.abs_diff = std::abs(*q.r_pr - q.r_dl->value());
  return q;
}

inline CaseQuantification aggregate_case(const CaseRecord& c, const std::map<std::string, LabelMask>& masks) {
  std::map<std::string, ClassCounts> counts;
  for (const auto& [id, m] : masks) counts.emplace(id, count_pixels(m));
  return aggregate_case(c, counts);
}

// ---------------------------------------------------------------------------
// Comparison against reported ratios
// ---------------------------------------------------------------------------

struct GradeStats {
  std::string label;  // "IV", "III", "II", "I", "All"
  std::string range;
  std::size_t count = 0;
  // Absolute differences in percentage points; NaN when count == 0.
  double mean = std::nan("");
  double median = std::nan("");
  double stddev = std::nan("");  // population
};

struct ScatterPoint {
  std::string case_id;
  double r_pr = 0.0;
  double r_dl = 0.0;
  NecrosisGrade grade = NecrosisGrade::kI;  // grade of r_pr
};

struct ComparisonReport {
  std::array<GradeStats, 5> rows;  // IV, III, II, I, All
  std::vector<ScatterPoint> scatter;
};

inline GradeStats summarize(std::string label, std::string range, std::vector<double> values) {
  GradeStats s{std::move(label), std::move(range), values.size()};
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / n);
  return s;
}

/// Groups cases by the grade of their reported ratio and summarizes |r_PR - r_DL|.
/// Cases lacking either ratio are skipped.
inline ComparisonReport report_comparison(const std::vector<CaseQuantification>& cases) {
  std::array<std::vector<double>, 5> diffs;
  ComparisonReport rep;
  for (const auto& q : cases) {
    if (!q.r_pr || !q.r_dl) continue;
    const NecrosisGrade g = grade_of(*q.r_pr);
    const double d = 100.0 * std::abs(*q.r_pr - q.r_dl->value());
    diffs[4 - static_cast<int>(g)].push_back(d);
    diffs[4].push_back(d);
    rep.scatter.push_back({q.case_id, *q.r_pr, q.r_dl->value(), g});
  }
  if (diffs[4].empty()) throw ValidationError("report_comparison: no case has both reported and model ratios");
  const std::array<const char*, 5> labels = {"IV", "III", "II", "I", "All"};
  const std::array<const char*, 5> ranges = {"r_PR = 100%", "90% <= r_PR < 100%", "50% <= r_PR < 90%",
                                             "0% <= r_PR < 50%", "0% <= r_PR <= 100%"};
  for (int i = 0; i < 5; ++i) rep.rows[i] = summarize(labels[i], ranges[i], diffs[i]);
  return rep;
}

// ---------------------------------------------------------------------------
// Mask agreement
// ---------------------------------------------------------------------------

/// Mean over classes present in either mask of |pred & truth| / |pred | truth|.
inline double mean_iou(const LabelGrid& pred, const LabelGrid& truth) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw ValidationError("mean_iou: dimension mismatch");
  }
  std::array<std::uint64_t, kNumClasses> inter{}, in_pred{}, in_truth{};
  auto p = pred.pixels();
  auto t = truth.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!is_valid_code(p[i]) || !is_valid_code(t[i])) throw ValidationError("mean_iou: invalid tissue code");
    ++in_pred[p[i]];
    ++in_truth[t[i]];
    if (p[i] == t[i]) ++inter[p[i]];
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const std::uint64_t uni = in_pred[c] + in_truth[c] - inter[c];
    if (uni == 0) continue;
    sum += static_cast<double>(inter[c]) / static_cast<double>(uni);
    ++present;
  }
  return present == 0 ? 1.0 : sum / present;
}

inline double mean_iou(const LabelMask& pred, const LabelMask& truth) { return mean_iou(pred.labels, truth.labels); }

// ---------------------------------------------------------------------------
// Overlay
// ---------------------------------------------------------------------------

inline std::uint8_t blend_channel(std::uint8_t base, std::uint8_t over, double alpha) {
  return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * base + alpha * over));
}

/// Alpha-blends legend colors of `mask` over `slide` (same dimensions).
inline RgbImage render_overlay(const RgbImage& slide, const LabelGrid& mask, double alpha,
                               const Palette& palette = kLegendPalette) {
  if (slide.width() != mask.width() || slide.height() != mask.height()) {
    throw ValidationError("render_overlay: mask does not match slide");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("render_overlay: alpha outside [0,1]");
  RgbImage out(slide.width(), slide.height());
  auto s = slide.pixels();
  auto m = mask.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_valid_code(m[i])) throw ValidationError("render_overlay: invalid tissue code");
    const Rgb c = palette[m[i]];
    o[i] = Rgb{blend_channel(s[i].r, c.r, alpha), blend_channel(s[i].g, c.g, alpha), blend_channel(s[i].b, c.b, alpha)};
  }
  return out;
}

/// Majority label of each factor x factor block (ties go to the lower code).
inline LabelGrid mode_downsample(const LabelGrid& mask, int factor) {
  const Extent e = level_extent(mask.width(), mask.height(), factor);
  LabelGrid out(e.width, e.height);
  std::vector<std::array<std::uint32_t, kNumClasses>> hist(static_cast<std::size_t>(e.width));
  for (int oy = 0; oy < e.height; ++oy) {
    for (auto& h : hist) h.fill(0);
    for (int y = oy * factor; y < std::min(mask.height(), (oy + 1) * factor); ++y) {
      auto row = mask.row(y);
      for (int x = 0; x < mask.width(); ++x) ++hist[x / factor][row[x] & 7];
    }
    for (int ox = 0; ox < e.width; ++ox) {
      const auto& h = hist[ox];
      out.at(ox, oy) = static_cast<std::uint8_t>(std::max_element(h.begin(), h.end()) - h.begin());
    }
  }
  return out;
}

/// Overlay rendered at pyramid level `factor`.
inline RgbImage render_overlay(const SlideReader& slide, const LabelMask& mask, double alpha, int factor = 1) {
  const SlideInfo& info = slide.info();
  if (mask.width() != info.width || mask.height() != info.height) {
    throw ValidationError("render_overlay: mask does not match slide '" + info.id + "'");
  }
  const Extent e = level_extent(info.width, info.height, factor);
  RgbImage base = slide.read_region(factor, 0, 0, e.width, e.height);
  if (factor == 1) return render_overlay(base, mask.labels, alpha);
  return render_overlay(base, mode_downsample(mask.labels, factor), alpha);
}

}  // namespace necro
