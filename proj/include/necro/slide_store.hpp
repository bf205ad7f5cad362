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

/// @file slide_store.hpp
/// @brief On-disk dataset layout: manifest, tiled slide pyramids, label masks.
///
/// A dataset is a directory:
///
///     <root>/manifest.json
///     <root>/slides/<slide_id>/levels/<factor>/tile_<col>_<row>.png
///     <root>/slides/<slide_id>/mask.png            (optional ground truth)
///
/// Level `f` of a slide has ceil(width / f) x ceil(height / f) pixels, each the
/// rounded mean of the in-bounds level-0 pixels of its f x f block. Every level
/// is cut into 256 x 256 tiles; tiles on the right and bottom edge are smaller.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "necro/error.hpp"
#include "necro/png_io.hpp"
#include "necro/raster.hpp"

namespace necro {

namespace fs = std::filesystem;

inline constexpr int kTileSize = 256;

struct SlideInfo {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<int> levels{1, 2, 4};

  friend bool operator==(const SlideInfo&, const SlideInfo&) = default;
};

enum class Split { kTest, kTrain };

struct CaseRecord {
  std::string id;
  std::vector<std::string> slide_ids;
  std::optional<double> r_pr;
  std::optional<double> os_months;
  bool os_event = false;
  std::optional<double> pfs_months;
  bool pfs_event = false;
  std::optional<bool> metastasis_at_diagnosis = false;  // nullopt = status unknown
  Split split = Split::kTest;

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

struct Dataset {
  fs::path root;
  std::vector<SlideInfo> slides;
  std::vector<CaseRecord> cases;

  const SlideInfo& slide(const std::string& id) const {
    for (const auto& s : slides) {
      if (s.id == id) return s;
    }
    throw ValidationError("unknown slide id '" + id + "'");
  }
  fs::path slide_dir(const std::string& id) const { return root / "slides" / id; }
  fs::path mask_path(const std::string& id) const { return slide_dir(id) / "mask.png"; }
};

constexpr int ceil_div(int a, int b) { return (a + b - 1) / b; }

struct Extent {
  int width = 0;
  int height = 0;
  friend bool operator==(const Extent&, const Extent&) = default;
};

constexpr Extent level_extent(int width, int height, int factor) {
  return {ceil_div(width, factor), ceil_div(height, factor)};
}

inline fs::path tile_path(const fs::path& slide_dir, int factor, int col, int row) {
  return slide_dir / "levels" / std::to_string(factor) /
         ("tile_" + std::to_string(col) + "_" + std::to_string(row) + ".png");
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing key '" + key + "'");
  return *it;
}

inline std::optional<double> optional_number(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ValidationError(where + ": '" + key + "' must be a number or null");
  return it->get<double>();
}

inline bool boolean(const json& obj, const std::string& key, const std::string& where, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw ValidationError(where + ": '" + key + "' must be a boolean");
  return it->get<bool>();
}

inline void check_id(const std::string& id, const std::string& where) {
  bool ok = !id.empty() && id[0] != '.';
  for (char c : id) {
    ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.');
  }
  if (!ok) throw ValidationError(where + ": invalid id '" + id + "' (allowed: letters, digits, _ - .)");
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline void validate_slide(const SlideInfo& s) {
  const std::string where = "slide '" + s.id + "'";
  detail::check_id(s.id, "slide");
  if (s.width <= 0 || s.height <= 0) throw ValidationError(where + ": zero-area slide");
  std::set<int> seen;
  for (int f : s.levels) {
    if (f <= 0 || (f & (f - 1)) != 0) throw ValidationError(where + ": level factor " + std::to_string(f) + " is not a power of 2");
    if (!seen.insert(f).second) throw ValidationError(where + ": duplicate level factor " + std::to_string(f));
  }
  for (int f : {1, 2, 4}) {
    if (!seen.contains(f)) throw ValidationError(where + ": levels must include factor " + std::to_string(f));
  }
}

inline void validate_case(const CaseRecord& c) {
  const std::string where = "case '" + c.id + "'";
  detail::check_id(c.id, "case");
  if (c.slide_ids.empty()) throw ValidationError(where + ": needs at least one slide");
  if (c.r_pr && !(*c.r_pr >= 0.0 && *c.r_pr <= 1.0)) throw ValidationError(where + ": r_pr outside [0,1]");
  if (c.os_months && !(*c.os_months >= 0.0)) throw ValidationError(where + ": negative os_months");
  if (c.pfs_months && !(*c.pfs_months >= 0.0)) throw ValidationError(where + ": negative pfs_months");
}

/// Checks ids are unique and every case's slides resolve.
inline void validate_dataset(const Dataset& ds) {
  std::set<std::string> slide_ids;
  for (const auto& s : ds.slides) {
    validate_slide(s);
    if (!slide_ids.insert(s.id).second) throw ValidationError("duplicate slide id '" + s.id + "'");
  }
  std::set<std::string> case_ids;
  for (const auto& c : ds.cases) {
    validate_case(c);
    if (!case_ids.insert(c.id).second) throw ValidationError("duplicate case id '" + c.id + "'");
    for (const auto& sid : c.slide_ids) {
      if (!slide_ids.contains(sid)) {
        throw ValidationError("case '" + c.id + "': dangling slide reference '" + sid + "'");
      }
    }
  }
}

inline Dataset parse_manifest(const nlohmann::json& doc, fs::path root) {
  using detail::json;
  Dataset ds;
  ds.root = std::move(root);
  detail::reject_unknown_keys(doc, {"slides", "cases"}, "manifest");
  const json& slides = detail::require(doc, "slides", "manifest");
  const json& cases = detail::require(doc, "cases", "manifest");
  if (!slides.is_array() || !cases.is_array()) throw ValidationError("manifest: 'slides' and 'cases' must be arrays");

  try {
    for (std::size_t i = 0; i < slides.size(); ++i) {
      const json& js = slides[i];
      std::string where = "manifest slides[" + std::to_string(i) + "]";
      detail::reject_unknown_keys(js, {"id", "width", "height", "levels"}, where);
      SlideInfo s;
      s.id = detail::require(js, "id", where).get<std::string>();
      s.width = detail::require(js, "width", where).get<int>();
      s.height = detail::require(js, "height", where).get<int>();
      if (auto lv = js.find("levels"); lv != js.end()) s.levels = lv->get<std::vector<int>>();
      ds.slides.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const json& jc = cases[i];
      std::string where = "manifest cases[" + std::to_string(i) + "]";
      detail::reject_unknown_keys(jc,
                                  {"id", "slides", "r_pr", "os_months", "os_event", "pfs_months", "pfs_event",
                                   "metastasis_at_diagnosis", "split"},
                                  where);
      CaseRecord c;
      c.id = detail::require(jc, "id", where).get<std::string>();
      where = "case '" + c.id + "'";
      c.slide_ids = detail::require(jc, "slides", where).get<std::vector<std::string>>();
      c.r_pr = detail::optional_number(jc, "r_pr", where);
      c.os_months = detail::optional_number(jc, "os_months", where);
      c.os_event = detail::boolean(jc, "os_event", where, false);
      c.pfs_months = detail::optional_number(jc, "pfs_months", where);
      c.pfs_event = detail::boolean(jc, "pfs_event", where, false);
      auto met = jc.find("metastasis_at_diagnosis");
      if (met == jc.end() || met->is_null()) {
        c.metastasis_at_diagnosis = std::nullopt;
      } else if (met->is_boolean()) {
        c.metastasis_at_diagnosis = met->get<bool>();
      } else {
        throw ValidationError(where + ": 'metastasis_at_diagnosis' must be a boolean or null");
      }
      if (auto sp = jc.find("split"); sp != jc.end()) {
        std::string v = sp->is_string() ? sp->get<std::string>() : "";
        if (v == "test") {
          c.split = Split::kTest;
        } else if (v == "train") {
          c.split = Split::kTrain;
        } else {
          throw ValidationError(where + ": 'split' must be \"train\" or \"test\"");
        }
      }
      ds.cases.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  validate_dataset(ds);
  return ds;
}

/// Loads `<root>/manifest.json` (or a manifest file path directly).
inline Dataset load_manifest(const fs::path& path) {
  fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw ValidationError("manifest not found: " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
  return parse_manifest(doc, file.parent_path());
}

inline nlohmann::json manifest_json(const Dataset& ds) {
  using detail::json;
  json slides = json::array();
  for (const auto& s : ds.slides) {
    slides.push_back({{"id", s.id}, {"width", s.width}, {"height", s.height}, {"levels", s.levels}});
  }
  json cases = json::array();
  for (const auto& c : ds.cases) {
    cases.push_back({{"id", c.id},
                     {"slides", c.slide_ids},
                     {"r_pr", detail::optional_json(c.r_pr)},
                     {"os_months", detail::optional_json(c.os_months)},
                     {"os_event", c.os_event},
                     {"pfs_months", detail::optional_json(c.pfs_months)},
                     {"pfs_event", c.pfs_event},
                     {"metastasis_at_diagnosis",
                      c.metastasis_at_diagnosis ? json(*c.metastasis_at_diagnosis) : json(nullptr)},
                     {"split", c.split == Split::kTrain ? "train" : "test"}});
  }
  return {{"slides", slides}, {"cases", cases}};
}

inline void save_manifest(const Dataset& ds) {
  validate_dataset(ds);
  fs::create_directories(ds.root);
  std::ofstream out(ds.root / "manifest.json");
  if (!out) throw IoError("cannot write " + (ds.root / "manifest.json").string());
  out << manifest_json(ds).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Cohort filtering (staged exclusions)
// ---------------------------------------------------------------------------

/// Analysis stages; each admits a subset of the previous one.
enum class Stage {
  kTesting,          // held-out cases
  kRatio,            // + reported ratio present
  kOverallSurvival,  // + OS time present
  kProgressionFree,  // + metastasis status known and negative, PFS time present
};

inline bool admitted(const CaseRecord& c, Stage stage) {
  if (c.split != Split::kTest) return false;
  if (stage == Stage::kTesting) return true;
  if (!c.r_pr) return false;
  if (stage == Stage::kRatio) return true;
  if (!c.os_months) return false;
  if (stage == Stage::kOverallSurvival) return true;
  return c.metastasis_at_diagnosis.has_value() && !*c.metastasis_at_diagnosis && c.pfs_months.has_value();
}

inline std::vector<CaseRecord> filter_cases(const std::vector<CaseRecord>& cases, Stage stage) {
  std::vector<CaseRecord> out;
  for (const auto& c : cases) {
    if (admitted(c, stage)) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pyramid reading
// ---------------------------------------------------------------------------

/// Box-filter downsample; partial edge blocks average their in-bounds pixels.
inline RgbImage area_downsample(const RgbImage& src, int factor) {
  const Extent e = level_extent(src.width(), src.height(), factor);
  RgbImage out(e.width, e.height);
  std::vector<std::uint32_t> acc(static_cast<std::size_t>(e.width) * 3);
  std::vector<std::uint32_t> cnt(static_cast<std::size_t>(e.width));
  for (int oy = 0; oy < e.height; ++oy) {
    std::fill(acc.begin(), acc.end(), 0u);
    std::fill(cnt.begin(), cnt.end(), 0u);
    const int y_end = std::min(src.height(), (oy + 1) * factor);
    for (int y = oy * factor; y < y_end; ++y) {
      auto row = src.row(y);
      for (int x = 0; x < src.width(); ++x) {
        const int ox = x / factor;
        acc[3 * ox] += row[x].r;
        acc[3 * ox + 1] += row[x].g;
        acc[3 * ox + 2] += row[x].b;
        ++cnt[ox];
      }
    }
    auto orow = out.row(oy);
    for (int ox = 0; ox < e.width; ++ox) {
      const std::uint32_t n = cnt[ox];
      orow[ox] = Rgb{static_cast<std::uint8_t>((acc[3 * ox] + n / 2) / n),
                     static_cast<std::uint8_t>((acc[3 * ox + 1] + n / 2) / n),
                     static_cast<std::uint8_t>((acc[3 * ox + 2] + n / 2) / n)};
    }
  }
  return out;
}

/// Read-only handle on a stored pyramid. Safe for concurrent read_region calls;
/// decoded tiles are kept in a small bounded LRU cache.
class SlideReader {
 public:
  SlideReader(fs::path slide_dir, SlideInfo info, std::size_t cache_tiles = 160)
      : dir_(std::move(slide_dir)), info_(std::move(info)), capacity_(cache_tiles) {
    validate_slide(info_);
  }

  static SlideReader open(const Dataset& ds, const std::string& slide_id) {
    return SlideReader(ds.slide_dir(slide_id), ds.slide(slide_id));
  }

  const SlideInfo& info() const { return info_; }
  const fs::path& dir() const { return dir_; }

  bool has_level(int factor) const {
    return std::find(info_.levels.begin(), info_.levels.end(), factor) != info_.levels.end();
  }

  /// w x h raster at level `factor` with top-left (x, y) in that level's pixel
  /// coordinates. Pixels outside the level extent are white.
  RgbImage read_region(int factor, int x, int y, int w, int h) const {
    if (!has_level(factor)) {
      throw ValidationError("slide '" + info_.id + "': unknown level factor " + std::to_string(factor));
    }
    if (w <= 0 || h <= 0) throw ValidationError("read_region: non-positive dimensions");
    const Extent e = level_extent(info_.width, info_.height, factor);
    const int x0 = std::max(x, 0);
    const int y0 = std::max(y, 0);
    const int x1 = std::min(x + w, e.width);
    const int y1 = std::min(y + h, e.height);
    if (x0 >= x1 || y0 >= y1) {
      throw ValidationError("read_region: rectangle does not intersect slide '" + info_.id + "' at factor " +
                            std::to_string(factor));
    }
    RgbImage out(w, h, kWhite);
    for (int row = y0 / kTileSize; row <= (y1 - 1) / kTileSize; ++row) {
      for (int col = x0 / kTileSize; col <= (x1 - 1) / kTileSize; ++col) {
        auto tile = load_tile(factor, col, row);
        out.paste(*tile, col * kTileSize - x, row * kTileSize - y);
      }
    }
    return out;
  }

 private:
  using TilePtr = std::shared_ptr<const RgbImage>;
  struct Key {
    int factor, col, row;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return (static_cast<std::size_t>(k.factor) * 1000003u + static_cast<std::size_t>(k.col)) * 1000033u +
             static_cast<std::size_t>(k.row);
    }
  };
  struct Cache {
    std::mutex mu;
    std::list<std::pair<Key, TilePtr>> lru;
    std::unordered_map<Key, decltype(lru)::iterator, KeyHash> index;
  };

  TilePtr load_tile(int factor, int col, int row) const {
    const Key key{factor, col, row};
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      auto it = cache_->index.find(key);
      if (it != cache_->index.end()) {
        cache_->lru.splice(cache_->lru.begin(), cache_->lru, it->second);
        return it->second->second;
      }
    }
    fs::path p = tile_path(dir_, factor, col, row);
    if (!fs::exists(p)) throw IoError("missing tile " + p.string());
    auto tile = std::make_shared<const RgbImage>(png::read_rgb(p));
    const Extent e = level_extent(info_.width, info_.height, factor);
    const int ew = std::min(kTileSize, e.width - col * kTileSize);
    const int eh = std::min(kTileSize, e.height - row * kTileSize);
    if (tile->width() != ew || tile->height() != eh) throw IoError("tile has wrong size: " + p.string());
    if (capacity_ == 0) return tile;
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (cache_->index.find(key) == cache_->index.end()) {
      cache_->lru.emplace_front(key, tile);
      cache_->index[key] = cache_->lru.begin();
      if (cache_->lru.size() > capacity_) {
        cache_->index.erase(cache_->lru.back().first);
        cache_->lru.pop_back();
      }
    }
    return tile;
  }

  fs::path dir_;
  SlideInfo info_;
  std::size_t capacity_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

// ---------------------------------------------------------------------------
// Pyramid writing
// ---------------------------------------------------------------------------

/// Supplies level-0 rows [y0, y0 + rows) as a width x rows image.
using BandSource = std::function<RgbImage(int y0, int rows)>;

/// Writes every level of a pyramid, pulling level-0 data one band at a time so
/// memory stays proportional to width * 256 * max_factor.
inline void write_pyramid(const fs::path& slide_dir, const SlideInfo& info, const BandSource& source,
                          int compression = 1) {
  validate_slide(info);
  const int max_factor = *std::max_element(info.levels.begin(), info.levels.end());
  const int band = kTileSize * max_factor;
  for (int f : info.levels) fs::create_directories(slide_dir / "levels" / std::to_string(f));

  for (int y0 = 0; y0 < info.height; y0 += band) {
    const int rows = std::min(band, info.height - y0);
    RgbImage level0 = source(y0, rows);
    if (level0.width() != info.width || level0.height() != rows) {
      throw ValidationError("band source returned wrong dimensions");
    }
    for (int f : info.levels) {
      RgbImage lvl = f == 1 ? level0 : area_downsample(level0, f);
      const int row_base = (y0 / f) / kTileSize;
      for (int ty = 0; ty * kTileSize < lvl.height(); ++ty) {
        for (int tx = 0; tx * kTileSize < lvl.width(); ++tx) {
          const int tw = std::min(kTileSize, lvl.width() - tx * kTileSize);
          const int th = std::min(kTileSize, lvl.height() - ty * kTileSize);
          RgbImage tile = lvl.crop(tx * kTileSize, ty * kTileSize, tw, th, kWhite);
          png::write_rgb(tile_path(slide_dir, f, tx, row_base + ty), tile, compression);
        }
      }
    }
  }
}

inline void write_pyramid(const fs::path& slide_dir, const SlideInfo& info, const RgbImage& level0,
                          int compression = 1) {
  if (level0.width() != info.width || level0.height() != info.height) {
    throw ValidationError("slide '" + info.id + "': raster does not match declared dimensions");
  }
  write_pyramid(
      slide_dir, info, [&](int y0, int rows) { return level0.crop(0, y0, level0.width(), rows, kWhite); },
      compression);
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

/// Reads a label mask and checks it is congruent with `info`.
inline LabelMask read_mask(const fs::path& path, const SlideInfo& info) {
  if (!fs::exists(path)) throw ValidationError("missing mask for slide '" + info.id + "': " + path.string());
  LabelMask m{info.id, png::read_labels(path)};
  if (m.width() != info.width || m.height() != info.height) {
    throw ValidationError("mask for slide '" + info.id + "' is " + std::to_string(m.width()) + "x" +
                          std::to_string(m.height()) + ", slide is " + std::to_string(info.width) + "x" +
                          std::to_string(info.height));
  }
  validate_codes(m.labels, "mask for slide '" + info.id + "'");
  return m;
}

inline void write_mask(const fs::path& path, const LabelMask& mask) {
  validate_codes(mask.labels, "mask for slide '" + mask.slide_id + "'");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png::write_labels(path, mask.labels);
}

}  // namespace necro
