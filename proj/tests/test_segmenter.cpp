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

#include "necro/quantify.hpp"
#include "necro/segmenter.hpp"
#include "necro/synth_lab.hpp"
#include "support.hpp"

namespace necro {
namespace {

using testing::TempDir;

// Brute-force nearest canonical color, ties to the lowest code.
std::uint8_t oracle_nearest(const Rgb& p, const Palette& pal) {
  std::uint8_t best = 0;
  long best_d = -1;
  for (int c = 1; c < kNumClasses; ++c) {
    const long d = (long{p.r} - pal[c].r) * (long{p.r} - pal[c].r) + (long{p.g} - pal[c].g) * (long{p.g} - pal[c].g) +
                   (long{p.b} - pal[c].b) * (long{p.b} - pal[c].b);
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = static_cast<std::uint8_t>(c);
    }
  }
  return best;
}

struct Fixture {
  TempDir dir;
  SlideInfo info;
  LabelMask truth;

  Fixture(int w, int h, std::uint64_t seed, double noise = 0.0) {
    SynthSpec s;
    s.seed = seed;
    s.width = w;
    s.height = h;
    s.granularity = 48;
    s.noise_epsilon = noise;
    s.fractions = {0, 0.25, 0.15, 0.2, 0.1, 0.1, 0.05, 0.15};
    auto g = write_slide(s, dir.path(), "fx");
    info = g.info;
    truth = read_mask(dir / "mask.png", info);
  }
  SlideReader reader() const { return SlideReader(dir.path(), info); }
};

TEST(NearestColor, TableMatchesBruteForce) {
  const auto table = nearest_color_table(kCanonicalPalette);
  Rng rng(3);
  for (int i = 0; i < 200000; ++i) {
    const std::uint64_t v = rng.next();
    const Rgb p{static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16)};
    ASSERT_EQ((*table)[(std::size_t{p.r} << 16) | (p.g << 8) | p.b], oracle_nearest(p, kCanonicalPalette));
  }
  for (int c = 1; c < kNumClasses; ++c) {
    const Rgb& p = kCanonicalPalette[c];
    EXPECT_EQ((*table)[(std::size_t{p.r} << 16) | (p.g << 8) | p.b], c);
  }
}

TEST(NearestColor, TieGoesToLowerCode) {
  Palette pal = kCanonicalPalette;
  pal[1] = Rgb{0, 0, 0};
  pal[2] = Rgb{2, 0, 0};
  const auto table = nearest_color_table(pal);
  EXPECT_EQ((*table)[std::size_t{1} << 16], 1);  // (1,0,0) is equidistant
}

TEST(Chromatic, WhitePatchIsBlank) {
  MultiMagPatch p{{0, 0, 0, 0, 256, 256}, RgbImage(256, 256, kWhite), RgbImage(256, 256, kWhite),
                  RgbImage(256, 256, kWhite)};
  BackendConfig cfg;
  auto lp = segment(p, cfg);
  for (auto v : lp.labels.pixels()) ASSERT_EQ(v, code_of(TissueClass::kBlank));
}

TEST(Chromatic, IgnoresLowerMagnifications) {
  RgbImage p20 = testing::random_image(256, 256, 8);
  MultiMagPatch a{{}, p20, RgbImage(256, 256, kWhite), RgbImage(256, 256, kWhite)};
  MultiMagPatch b{{}, p20, testing::random_image(256, 256, 1), testing::random_image(256, 256, 2)};
  BackendConfig cfg;
  EXPECT_EQ(segment(a, cfg).labels, segment(b, cfg).labels);
}

TEST(Chromatic, NoiseFreeSlideEqualsTruth) {
  Fixture fx(500, 300, 4);
  auto reader = fx.reader();
  BackendConfig cfg;
  LabelMask m = run_slide(reader, nullptr, cfg);
  EXPECT_EQ(m.labels, fx.truth.labels);
  for (auto v : m.labels.pixels()) ASSERT_NE(v, 0);
}

TEST(Oracle, FixedPointAndPadding) {
  for (auto [w, h] : {std::pair{512, 512}, std::pair{500, 300}, std::pair{1, 1}, std::pair{257, 511}}) {
    Fixture fx(w, h, 5, 0.3);
    auto reader = fx.reader();
    BackendConfig cfg;
    cfg.kind = BackendKind::kOracle;
    EXPECT_EQ(run_slide(reader, &fx.truth.labels, cfg).labels, fx.truth.labels) << w << "x" << h;
  }
  Fixture fx(300, 300, 6);
  OracleBackend oracle;
  auto p = extract(fx.reader(), TileCoord{1, 1, 256, 256, 44, 44});
  auto out = oracle.segment_batch({p}, SegmentContext{&fx.info, &fx.truth.labels});
  EXPECT_EQ(out[0].labels.at(43, 43), fx.truth.labels.at(299, 299));
  EXPECT_EQ(out[0].labels.at(44, 0), code_of(TissueClass::kBlank));
  EXPECT_THROW(oracle.segment_batch({p}, SegmentContext{&fx.info, nullptr}), BackendError);
}

TEST(Chromatic, MislabelRateMatchesExpectation) {
  Fixture fx(1024, 1024, 7);
  auto reader = fx.reader();
  BackendConfig cfg;
  cfg.mislabel_rate = 0.01;
  cfg.seed = 2024;
  LabelMask m = run_slide(reader, nullptr, cfg);
  std::size_t diff = 0;
  std::array<std::size_t, kNumClasses> to{};
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const auto p = m.labels.pixels()[i], t = fx.truth.labels.pixels()[i];
    ASSERT_TRUE(p >= 1 && p <= 7);
    if (p != t) {
      ++diff;
      ++to[p];
    }
  }
  const double rate = static_cast<double>(diff) / static_cast<double>(m.labels.size());
  EXPECT_NEAR(rate, 0.01, 0.002);
  // Replacement labels are spread over all classes.
  for (int c = 1; c < kNumClasses; ++c) EXPECT_GT(to[c], diff / 20);
  // A different seed perturbs a different subset.
  cfg.seed = 2025;
  EXPECT_NE(run_slide(reader, nullptr, cfg).labels, m.labels);
}

TEST(RunSlide, WorkerCountDoesNotChangeOutput) {
  Fixture fx(900, 700, 8, 0.2);
  auto reader = fx.reader();
  BackendConfig cfg;
  cfg.mislabel_rate = 0.05;
  cfg.seed = 1;
  const LabelMask one = run_slide(reader, nullptr, cfg, RunOptions{1, 16});
  for (int workers : {2, 3, 8}) {
    for (int batch : {1, 5, 64}) {
      EXPECT_EQ(run_slide(reader, nullptr, cfg, RunOptions{workers, batch}).labels, one.labels);
    }
  }
}

TEST(RunSlide, RejectsIncongruentTruth) {
  Fixture fx(300, 300, 9);
  LabelGrid wrong(299, 300, 1);
  BackendConfig cfg;
  cfg.kind = BackendKind::kOracle;
  EXPECT_THROW(run_slide(fx.reader(), &wrong, cfg), ValidationError);
}

TEST(BackendConfig, Validation) {
  EXPECT_EQ(backend_kind_from_name("oracle"), BackendKind::kOracle);
  EXPECT_EQ(backend_kind_name(BackendKind::kExternal), "external");
  EXPECT_THROW(backend_kind_from_name("neural"), ValidationError);
  BackendConfig cfg;
  cfg.mislabel_rate = 1.5;
  EXPECT_THROW(make_backend(cfg), ValidationError);
  cfg = BackendConfig{};
  cfg.kind = BackendKind::kExternal;
  EXPECT_THROW(make_backend(cfg), ValidationError);
}

// ---------------------------------------------------------------------------
// External protocol
// ---------------------------------------------------------------------------

class ExternalTest : public ::testing::Test {
 protected:
  BackendConfig config(const std::string& mode) {
    BackendConfig cfg;
    cfg.kind = BackendKind::kExternal;
    cfg.command = std::string(NECRO_STUB_PATH) + " --mode=" + mode;
    cfg.working_dir = work_.path();
    cfg.timeout = std::chrono::milliseconds(20000);
    return cfg;
  }
  bool work_dir_empty() const { return fs::is_empty(work_.path()); }

  TempDir work_;
};

TEST_F(ExternalTest, StubReproducesChromatic) {
  Fixture fx(600, 300, 10);
  auto reader = fx.reader();
  LabelMask m = run_slide(reader, nullptr, config("ok"), RunOptions{2, 3});
  EXPECT_EQ(m.labels, fx.truth.labels);
  EXPECT_TRUE(work_dir_empty());
}

TEST_F(ExternalTest, FailuresAreBackendErrorsWithTileCoordinates) {
  Fixture fx(300, 260, 11);
  auto reader = fx.reader();
  for (const char* mode : {"fail", "baddims", "badcode", "missing", "crash"}) {
    try {
      run_slide(reader, nullptr, config(mode), RunOptions{1, 4});
      ADD_FAILURE() << mode << ": expected BackendError";
    } catch (const BackendError& e) {
      EXPECT_NE(std::string(e.what()).find("tiles (0,0)"), std::string::npos) << mode << ": " << e.what();
    }
  }
  EXPECT_TRUE(work_dir_empty());
}

TEST_F(ExternalTest, TimeoutKillsTheProcess) {
  Fixture fx(256, 256, 12);
  auto cfg = config("sleep");
  cfg.timeout = std::chrono::milliseconds(300);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(run_slide(fx.reader(), nullptr, cfg), BackendError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST_F(ExternalTest, MissingExecutable) {
  Fixture fx(256, 256, 13);
  auto cfg = config("ok");
  cfg.command = "/nonexistent/segmenter --flag";
  EXPECT_THROW(run_slide(fx.reader(), nullptr, cfg), BackendError);
}

TEST(SplitCommand, QuotesGroupWords) {
  EXPECT_EQ(split_command("a  b\t'c d' \"e f\"g"), (std::vector<std::string>{"a", "b", "c d", "e fg"}));
  EXPECT_TRUE(split_command("   ").empty());
}

}  // namespace
}  // namespace necro
