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

#include <gtest/gtest.h>

#include "necro/tiler.hpp"
#include "support.hpp"

namespace necro {
namespace {

using testing::TempDir;

TEST(Schedule, Examples) {
  auto t = schedule(512, 512);
  ASSERT_EQ(t.size(), 4u);
  for (const auto& c : t) {
    EXPECT_EQ(c.w, 256);
    EXPECT_EQ(c.h, 256);
  }
  t = schedule(500, 300);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t.back(), (TileCoord{1, 1, 256, 256, 244, 44}));
  t = schedule(1, 1);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (TileCoord{0, 0, 0, 0, 1, 1}));
  EXPECT_THROW(schedule(0, 5), ValidationError);
  EXPECT_THROW(schedule(5, -1), ValidationError);
}

TEST(Schedule, RowMajorOrder) {
  auto t = schedule(600, 600);
  ASSERT_EQ(t.size(), 9u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t[i].col, static_cast<int>(i % 3));
    EXPECT_EQ(t[i].row, static_cast<int>(i / 3));
    EXPECT_EQ(t[i].x0, 256 * t[i].col);
    EXPECT_EQ(t[i].y0, 256 * t[i].row);
  }
}

TEST(Schedule, CoverageExactlyOnceProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = rng.between(1, 1300), h = rng.between(1, 1300);
    LabelGrid hits(w, h, 0);
    std::uint64_t area = 0;
    for (const auto& c : schedule(w, h)) {
      area += static_cast<std::uint64_t>(c.w) * c.h;
      for (int y = c.y0; y < c.y0 + c.h; ++y) {
        for (int x = c.x0; x < c.x0 + c.w; ++x) ++hits.at(x, y);
      }
    }
    EXPECT_EQ(area, static_cast<std::uint64_t>(w) * h);
    for (auto v : hits.pixels()) ASSERT_EQ(v, 1);
  }
}

TEST(PatchGeometry, FieldOriginsAreConcentric) {
  const TileCoord t{3, 2, 768, 512, 256, 256};
  const Point c = patch_center(t);
  EXPECT_EQ(c.x, 896);
  EXPECT_EQ(c.y, 640);
  for (const auto& f : kPatchFields) {
    const Point o = field_origin(t, f);
    EXPECT_EQ(o.x + f.span / 2, c.x);
    EXPECT_EQ(o.y + f.span / 2, c.y);
    EXPECT_EQ(f.span / f.factor, kTileSize);
  }
  EXPECT_EQ(field_origin({0, 0, 0, 0, 256, 256}, kPatchFields[2]).x, -384);
}

class ExtractTest : public ::testing::Test {
 protected:
  void SetUp() override {
    info_ = SlideInfo{"e", 1500, 1300, {1, 2, 4}};
    img_ = testing::random_image(info_.width, info_.height, 17);
    write_pyramid(dir_.path(), info_, img_);
  }
  TempDir dir_;
  SlideInfo info_;
  RgbImage img_;
};

TEST_F(ExtractTest, InteriorTileHasNoPadding) {
  SlideReader r(dir_.path(), info_);
  const TileCoord t{2, 2, 512, 512, 256, 256};
  auto p = extract(r, t);
  EXPECT_EQ(p.p20, img_.crop(512, 512, 256, 256, kWhite));
  const RgbImage l2 = area_downsample(img_, 2);
  const RgbImage l4 = area_downsample(img_, 4);
  EXPECT_EQ(p.p10, l2.crop(384 / 2, 384 / 2, 256, 256, kWhite));
  EXPECT_EQ(p.p5, l4.crop(128 / 4, 128 / 4, 256, 256, kWhite));
}

TEST_F(ExtractTest, EdgeTileSizesAreFixed) {
  SlideReader r(dir_.path(), info_);
  for (const auto& t : schedule(info_.width, info_.height)) {
    auto p = extract(r, t);
    ASSERT_EQ(p.p20.width(), 256);
    ASSERT_EQ(p.p10.height(), 256);
    ASSERT_EQ(p.p5.width(), 256);
    EXPECT_EQ(p.tile, t);
  }
}

TEST_F(ExtractTest, RejectsForeignTile) {
  SlideReader r(dir_.path(), info_);
  EXPECT_THROW(extract(r, TileCoord{9, 9, 9 * 256, 9 * 256, 256, 256}), ValidationError);
  EXPECT_THROW(extract(r, TileCoord{0, 0, 0, 0, 100, 256}), ValidationError);
}

TEST(Extract, UniformSlideGivesUniformPatches) {
  TempDir d;
  SlideInfo info{"u", 2048, 2048, {1, 2, 4}};
  const Rgb c{12, 34, 56};
  write_pyramid(d.path(), info, RgbImage(2048, 2048, c));
  SlideReader r(d.path(), info);
  auto p = extract(r, TileCoord{3, 3, 768, 768, 256, 256});
  for (const auto* img : {&p.p20, &p.p10, &p.p5}) {
    for (const Rgb& px : img->pixels()) ASSERT_EQ(px, c);
  }
}

}  // namespace
}  // namespace necro
