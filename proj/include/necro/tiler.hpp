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

#include <array>
#include <vector>

#include "necro/error.hpp"
#include "necro/raster.hpp"
#include "necro/slide_store.hpp"

namespace necro {

/// One window of the sliding-window pass. (x0, y0) is the level-0 origin;
/// (w, h) is the part of the 256 x 256 window that lies on the slide.
struct TileCoord {
  int col = 0;
  int row = 0;
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const TileCoord&, const TileCoord&) = default;
};

/// Row-major windows from the top-left corner with stride 256. Every window is
/// scheduled; there is no tissue-detection prefilter.
inline std::vector<TileCoord> schedule(int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("schedule: zero-dimension slide");
  std::vector<TileCoord> out;
  const int cols = ceil_div(width, kTileSize);
  const int rows = ceil_div(height, kTileSize);
  out.reserve(static_cast<std::size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int x0 = c * kTileSize;
      const int y0 = r * kTileSize;
      out.push_back({c, r, x0, y0, std::min(kTileSize, width - x0), std::min(kTileSize, height - y0)});
    }
  }
  return out;
}

/// Source field of a patch: side `span` level-0 pixels, read at `factor`.
struct PatchField {
  int factor = 1;
  int span = kTileSize;
};

inline constexpr std::array<PatchField, 3> kPatchFields = {{{1, 256}, {2, 512}, {4, 1024}}};

/// Center of a window, (x0 + 128, y0 + 128). Fields are [c - s/2, c + s/2).
struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

constexpr Point patch_center(const TileCoord& t) { return {t.x0 + kTileSize / 2, t.y0 + kTileSize / 2}; }

/// Level-0 top-left of a field.
constexpr Point field_origin(const TileCoord& t, const PatchField& f) {
  const Point c = patch_center(t);
  return {c.x - f.span / 2, c.y - f.span / 2};
}

/// Co-centered 256 x 256 patches at 20x (factor 1), 10x (factor 2) and 5x (factor 4).
struct MultiMagPatch {
  TileCoord tile;
  RgbImage p20;
  RgbImage p10;
  RgbImage p5;
};

inline RgbImage read_field(const SlideReader& slide, const TileCoord& t, const PatchField& f) {
  const Point o = field_origin(t, f);
  // Field origins are multiples of the factor, so the division is exact.
  return slide.read_region(f.factor, o.x / f.factor, o.y / f.factor, kTileSize, kTileSize);
}

inline MultiMagPatch extract(const SlideReader& slide, const TileCoord& t) {
  const SlideInfo& info = slide.info();
  if (t.x0 < 0 || t.y0 < 0 || t.x0 >= info.width || t.y0 >= info.height || t.x0 % kTileSize != 0 ||
      t.y0 % kTileSize != 0 || t.col != t.x0 / kTileSize || t.row != t.y0 / kTileSize ||
      t.w != std::min(kTileSize, info.width - t.x0) || t.h != std::min(kTileSize, info.height - t.y0)) {
    throw ValidationError("extract: tile is not on the schedule of slide '" + info.id + "'");
  }
  return {t, read_field(slide, t, kPatchFields[0]), read_field(slide, t, kPatchFields[1]),
          read_field(slide, t, kPatchFields[2])};
}

}  // namespace necro
