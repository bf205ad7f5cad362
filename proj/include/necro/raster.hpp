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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "necro/error.hpp"
#include "necro/tissue.hpp"

namespace necro {

/// Dense row-major 2D grid of pixels.
template <typename Pixel>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, Pixel fill = Pixel{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ValidationError("negative grid dimensions");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Pixel& at(int x, int y) { return data_[index(x, y)]; }
  const Pixel& at(int x, int y) const { return data_[index(x, y)]; }

  std::span<Pixel> row(int y) {
    return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const Pixel> row(int y) const {
    return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<Pixel> pixels() { return data_; }
  std::span<const Pixel> pixels() const { return data_; }

  /// Copies `src` so that its (0,0) lands at (x, y); parts outside this grid are dropped.
  void paste(const Grid& src, int x, int y) {
    for (int sy = 0; sy < src.height(); ++sy) {
      int dy = y + sy;
      if (dy < 0 || dy >= height_) continue;
      for (int sx = 0; sx < src.width(); ++sx) {
        int dx = x + sx;
        if (dx < 0 || dx >= width_) continue;
        at(dx, dy) = src.at(sx, sy);
      }
    }
  }

  /// Sub-rectangle; out-of-range parts are filled with `pad`.
  Grid crop(int x, int y, int w, int h, Pixel pad) const {
    Grid out(w, h, pad);
    for (int oy = 0; oy < h; ++oy) {
      int sy = y + oy;
      if (sy < 0 || sy >= height_) continue;
      for (int ox = 0; ox < w; ++ox) {
        int sx = x + ox;
        if (sx < 0 || sx >= width_) continue;
        out.at(ox, oy) = at(sx, sy);
      }
    }
    return out;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> data_;
};

using RgbImage = Grid<Rgb>;
using LabelGrid = Grid<std::uint8_t>;

/// Per-pixel tissue codes for one slide at level 0.
struct LabelMask {
  std::string slide_id;
  LabelGrid labels;

  int width() const { return labels.width(); }
  int height() const { return labels.height(); }
};

/// Throws unless every code in `labels` is a valid TissueClass.
inline void validate_codes(const LabelGrid& labels, std::string_view what) {
  for (std::uint8_t c : labels.pixels()) {
    if (!is_valid_code(c)) {
      throw ValidationError(std::string(what) + ": invalid tissue code " + std::to_string(c));
    }
  }
}

}  // namespace necro
