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

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "necro/parallel.hpp"
#include "necro/quantify.hpp"
#include "necro/segmenter.hpp"
#include "necro/slide_store.hpp"
#include "necro/survival.hpp"

namespace necro {

/// Predicted masks live flat in one directory: <dir>/<slide_id>.png.
inline fs::path predicted_mask_path(const fs::path& masks_dir, const std::string& slide_id) {
  return masks_dir / (slide_id + ".png");
}

struct SlideRunRecord {
  std::string slide_id;
  RunStats stats;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Segments every slide of the dataset in manifest order; slides are processed
/// one at a time and tiles of a slide in parallel.
inline std::vector<SlideRunRecord> segment_dataset(const Dataset& ds, const BackendConfig& cfg, const fs::path& masks_dir,
                                                   const RunOptions& opt, const ProgressFn& progress = {}) {
  auto backend = make_backend(cfg);
  fs::create_directories(masks_dir);
  std::vector<SlideRunRecord> log;
  for (const auto& info : ds.slides) {
    SlideReader reader(ds.slide_dir(info.id), info);
    std::optional<LabelMask> truth;
    if (cfg.kind == BackendKind::kOracle) truth = read_mask(ds.mask_path(info.id), info);
    RunStats stats;
    LabelMask pred = run_slide(reader, truth ? &truth->labels : nullptr, *backend, opt, &stats);
    write_mask(predicted_mask_path(masks_dir, info.id), pred);
    log.push_back({info.id, stats});
    if (progress) {
      progress("segmented " + info.id + ": " + std::to_string(stats.tiles) + " tiles in " +
               std::to_string(stats.seconds) + " s");
    }
  }
  return log;
}

/// Per-slide class counts of the masks in `masks_dir` (predicted layout), or of
/// the dataset's ground truth when `masks_dir` is empty.
inline std::map<std::string, ClassCounts> count_dataset(const Dataset& ds, const std::optional<fs::path>& masks_dir,
                                                        int workers = 1) {
  std::vector<ClassCounts> counts(ds.slides.size());
  parallel_for(ds.slides.size(), workers, [&](std::size_t i) {
    const SlideInfo& info = ds.slides[i];
    const fs::path p = masks_dir ? predicted_mask_path(*masks_dir, info.id) : ds.mask_path(info.id);
    counts[i] = count_mask_file(p, info);
  });
  std::map<std::string, ClassCounts> out;
  for (std::size_t i = 0; i < ds.slides.size(); ++i) out.emplace(ds.slides[i].id, counts[i]);
  return out;
}

inline std::vector<CaseQuantification> quantify_cases(const Dataset& ds,
                                                      const std::map<std::string, ClassCounts>& per_slide) {
  std::vector<CaseQuantification> out;
  out.reserve(ds.cases.size());
  for (const auto& c : ds.cases) out.push_back(aggregate_case(c, per_slide));
  return out;
}

inline std::vector<CohortEntry> cohort_entries(const Dataset& ds, const std::vector<CaseQuantification>& quant) {
  std::map<std::string, const CaseQuantification*> by_id;
  for (const auto& q : quant) by_id[q.case_id] = &q;
  std::vector<CohortEntry> out;
  for (const auto& c : ds.cases) {
    auto it = by_id.find(c.id);
    out.push_back({c, it != by_id.end() ? it->second->r_dl : std::nullopt});
  }
  return out;
}

}  // namespace necro
