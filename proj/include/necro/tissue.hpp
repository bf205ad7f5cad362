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
#include <cstdint>
#include <optional>
#include <string_view>

namespace necro {

/// Tissue classes. The integer codes are part of every file format.
enum class TissueClass : std::uint8_t {
  kUnlabeled = 0,
  kViableTumor = 1,
  kNecrosisWithBone = 2,
  kNecrosisWithoutBone = 3,
  kNormalBone = 4,
  kNormalTissue = 5,
  kCartilage = 6,
  kBlank = 7,
};

inline constexpr int kNumClasses = 8;

constexpr std::uint8_t code_of(TissueClass c) { return static_cast<std::uint8_t>(c); }

constexpr bool is_valid_code(std::uint8_t code) { return code < kNumClasses; }

constexpr bool is_necrotic_tumor(TissueClass c) {
  return c == TissueClass::kNecrosisWithBone || c == TissueClass::kNecrosisWithoutBone;
}

constexpr std::string_view class_name(TissueClass c) {
  constexpr std::array<std::string_view, kNumClasses> names = {
      "unlabeled",   "viable_tumor",  "necrosis_with_bone", "necrosis_without_bone",
      "normal_bone", "normal_tissue", "cartilage",          "blank"};
  return names[code_of(c)];
}

inline std::optional<TissueClass> class_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    auto c = static_cast<TissueClass>(i);
    if (class_name(c) == name) return c;
  }
  return std::nullopt;
}

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};
static_assert(sizeof(Rgb) == 3);

inline constexpr Rgb kWhite{255, 255, 255};

using Palette = std::array<Rgb, kNumClasses>;

// Overlay legend: red, blue, yellow, green, orange, brown, gray for codes 1-7.
// Unlabeled renders black.
inline constexpr Palette kLegendPalette = {{
    {0, 0, 0},
    {255, 0, 0},
    {0, 0, 255},
    {255, 255, 0},
    {0, 128, 0},
    {255, 165, 0},
    {165, 42, 42},
    {128, 128, 128},
}};

// Colors synthetic slides are painted with. Same as the legend except Blank,
// which is glass white so that it matches out-of-bounds padding.
inline constexpr Palette kCanonicalPalette = {{
    {0, 0, 0},
    {255, 0, 0},
    {0, 0, 255},
    {255, 255, 0},
    {0, 128, 0},
    {255, 165, 0},
    {165, 42, 42},
    {255, 255, 255},
}};

}  // namespace necro
