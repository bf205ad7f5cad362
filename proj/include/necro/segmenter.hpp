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

/// @file segmenter.hpp
/// @brief Segmentation backends and the whole-slide sliding-window driver.
///
/// External protocol: for each batch the driver creates a directory holding
/// `batch.json` ({"items":[{"id","p20","p10","p5"}, ...]}, file names relative
/// to the directory), the three RGB PNGs of every item and an empty `out/`.
/// The configured command runs with the directory as its only argument and
/// must write `out/<id>.png` (8-bit single channel, tissue codes, 256 x 256)
/// for every item, then exit 0.

#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "necro/error.hpp"
#include "necro/parallel.hpp"
#include "necro/png_io.hpp"
#include "necro/raster.hpp"
#include "necro/rng.hpp"
#include "necro/slide_store.hpp"
#include "necro/subprocess.hpp"
#include "necro/tiler.hpp"
#include "necro/tissue.hpp"

namespace necro {

struct LabelPatch {
  TileCoord tile;
  LabelGrid labels;  // kTileSize x kTileSize
};

enum class BackendKind { kOracle, kChromatic, kExternal };

inline BackendKind backend_kind_from_name(std::string_view name) {
  if (name == "oracle") return BackendKind::kOracle;
  if (name == "chromatic") return BackendKind::kChromatic;
  if (name == "external") return BackendKind::kExternal;
  throw ValidationError("unknown backend '" + std::string(name) + "'");
}

constexpr std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::kOracle: return "oracle";
    case BackendKind::kChromatic: return "chromatic";
    case BackendKind::kExternal: return "external";
  }
  return "?";
}

struct BackendConfig {
  BackendKind kind = BackendKind::kChromatic;
  // chromatic
  Palette palette = kCanonicalPalette;
  double mislabel_rate = 0.0;
  std::uint64_t seed = 0;
  // external
  std::string command;
  std::optional<fs::path> working_dir;  // batch directories go here; temp dir if unset
  int batch_size = 16;
  std::chrono::milliseconds timeout{60000};
};

/// Per-slide information a backend may need besides pixels.
struct SegmentContext {
  const SlideInfo* slide = nullptr;
  const LabelGrid* truth = nullptr;  // oracle only
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<LabelPatch> segment_batch(const std::vector<MultiMagPatch>& patches,
                                                const SegmentContext& ctx) const = 0;
};

// ---------------------------------------------------------------------------

class OracleBackend final : public Backend {
 public:
  std::vector<LabelPatch> segment_batch(const std::vector<MultiMagPatch>& patches,
                                        const SegmentContext& ctx) const override {
    if (ctx.truth == nullptr) throw BackendError("oracle backend needs a ground-truth mask");
    std::vector<LabelPatch> out;
    out.reserve(patches.size());
    for (const auto& p : patches) {
      out.push_back({p.tile, ctx.truth->crop(p.tile.x0, p.tile.y0, kTileSize, kTileSize, code_of(TissueClass::kBlank))});
    }
    return out;
  }
};

// ---------------------------------------------------------------------------

/// 2^24-entry table from RGB to nearest palette class (codes 1-7, Euclidean,
/// ties to the lower code). Tables are shared between backends with the same palette.
inline std::shared_ptr<const std::vector<std::uint8_t>> nearest_color_table(const Palette& palette) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const std::vector<std::uint8_t>>> cache;
  std::string key(reinterpret_cast<const char*>(palette.data()), sizeof(Palette));
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto table = std::make_shared<std::vector<std::uint8_t>>(std::size_t{1} << 24);
  for (int r = 0; r < 256; ++r) {
    for (int g = 0; g < 256; ++g) {
      for (int b = 0; b < 256; ++b) {
        int best = 1;
        int best_d = INT32_MAX;
        for (int c = 1; c < kNumClasses; ++c) {
          const int dr = r - palette[c].r, dg = g - palette[c].g, db = b - palette[c].b;
          const int d = dr * dr + dg * dg + db * db;
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        (*table)[(static_cast<std::size_t>(r) << 16) | (g << 8) | b] = static_cast<std::uint8_t>(best);
      }
    }
  }
  cache.emplace(std::move(key), table);
  return table;
}

/// Nearest-canonical-color classifier on the 20x patch. With a positive
/// mislabel rate, a seeded subset of pixels (keyed by tile and pixel) is
/// relabeled to a uniformly chosen different class.
class ChromaticBackend final : public Backend {
 public:
  explicit ChromaticBackend(const BackendConfig& cfg)
      : table_(nearest_color_table(cfg.palette)), mislabel_rate_(cfg.mislabel_rate), seed_(cfg.seed) {
    if (!(mislabel_rate_ >= 0.0 && mislabel_rate_ <= 1.0)) throw ValidationError("mislabel rate outside [0,1]");
  }

  LabelGrid classify(const RgbImage& p20, const TileCoord& tile) const {
    LabelGrid out(p20.width(), p20.height());
    auto src = p20.pixels();
    auto dst = out.pixels();
    const auto& table = *table_;
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = table[(static_cast<std::size_t>(src[i].r) << 16) | (src[i].g << 8) | src[i].b];
    }
    if (mislabel_rate_ > 0.0) {
      for (std::size_t i = 0; i < dst.size(); ++i) {
        const std::uint64_t h = hash_key({seed_, static_cast<std::uint64_t>(tile.col),
                                          static_cast<std::uint64_t>(tile.row), i});
        if (unit_from_bits(h) < mislabel_rate_) {
          // Uniform over the six classes in 1..7 other than the current one.
          const int pick = 1 + static_cast<int>(splitmix64(h) % 6);
          dst[i] = static_cast<std::uint8_t>(pick >= dst[i] ? pick + 1 : pick);
        }
      }
    }
    return out;
  }

  std::vector<LabelPatch> segment_batch(const std::vector<MultiMagPatch>& patches,
                                        const SegmentContext&) const override {
    std::vector<LabelPatch> out;
    out.reserve(patches.size());
    for (const auto& p : patches) out.push_back({p.tile, classify(p.p20, p.tile)});
    return out;
  }

 private:
  std::shared_ptr<const std::vector<std::uint8_t>> table_;
  double mislabel_rate_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------

class ExternalBackend final : public Backend {
 public:
  explicit ExternalBackend(const BackendConfig& cfg) : cfg_(cfg), argv_(split_command(cfg.command)) {
    if (argv_.empty()) throw ValidationError("external backend needs a command");
  }

  static std::string item_id(const TileCoord& t) {
    return "tile_" + std::to_string(t.col) + "_" + std::to_string(t.row);
  }

  std::vector<LabelPatch> segment_batch(const std::vector<MultiMagPatch>& patches,
                                        const SegmentContext& ctx) const override {
    if (patches.empty()) return {};
    const fs::path base = cfg_.working_dir ? *cfg_.working_dir : fs::temp_directory_path();
    static std::atomic<std::uint64_t> counter{0};
    const std::string slide = ctx.slide != nullptr ? ctx.slide->id : "slide";
    const fs::path dir = base / ("necro_batch_" + std::to_string(::getpid()) + "_" + slide + "_" +
                                 item_id(patches.front().tile) + "_" + std::to_string(counter++));
    struct Cleanup {
      fs::path p;
      ~Cleanup() {
        std::error_code ec;
        fs::remove_all(p, ec);
      }
    } cleanup{dir};
    fs::create_directories(dir / "out");

    nlohmann::json items = nlohmann::json::array();
    for (const auto& p : patches) {
      const std::string id = item_id(p.tile);
      png::write_rgb(dir / (id + "_p20.png"), p.p20);
      png::write_rgb(dir / (id + "_p10.png"), p.p10);
      png::write_rgb(dir / (id + "_p5.png"), p.p5);
      items.push_back({{"id", id}, {"p20", id + "_p20.png"}, {"p10", id + "_p10.png"}, {"p5", id + "_p5.png"}});
    }
    {
      std::ofstream f(dir / "batch.json");
      f << nlohmann::json{{"items", items}}.dump() << "\n";
      if (!f) throw IoError("cannot write " + (dir / "batch.json").string());
    }

    std::vector<std::string> argv = argv_;
    argv.push_back(dir.string());
    const ProcessResult r = run_process(argv, cfg_.timeout);
    if (r.timed_out) throw BackendError("external backend timed out after " + std::to_string(cfg_.timeout.count()) + " ms");
    if (r.signaled) throw BackendError("external backend killed by signal");
    if (r.exit_code != 0) throw BackendError("external backend exited with status " + std::to_string(r.exit_code));

    std::vector<LabelPatch> out;
    out.reserve(patches.size());
    for (const auto& p : patches) {
      const fs::path result = dir / "out" / (item_id(p.tile) + ".png");
      if (!fs::exists(result)) throw BackendError("external backend produced no output for " + item_id(p.tile));
      LabelGrid labels;
      try {
        labels = png::read_labels(result);
      } catch (const Error& e) {
        throw BackendError(std::string("malformed external output: ") + e.what());
      }
      if (labels.width() != kTileSize || labels.height() != kTileSize) {
        throw BackendError("external output " + item_id(p.tile) + " is " + std::to_string(labels.width()) + "x" +
                           std::to_string(labels.height()) + ", expected 256x256");
      }
      for (std::uint8_t c : labels.pixels()) {
        if (!is_valid_code(c)) throw BackendError("external output " + item_id(p.tile) + " has invalid code " + std::to_string(c));
      }
      out.push_back({p.tile, std::move(labels)});
    }
    return out;
  }

 private:
  BackendConfig cfg_;
  std::vector<std::string> argv_;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  switch (cfg.kind) {
    case BackendKind::kOracle: return std::make_unique<OracleBackend>();
    case BackendKind::kChromatic: return std::make_unique<ChromaticBackend>(cfg);
    case BackendKind::kExternal: return std::make_unique<ExternalBackend>(cfg);
  }
  throw ValidationError("unknown backend kind");
}

/// Single-patch convenience wrapper.
inline LabelPatch segment(const MultiMagPatch& patch, const BackendConfig& cfg, const SegmentContext& ctx = {}) {
  auto out = make_backend(cfg)->segment_batch({patch}, ctx);
  if (out.size() != 1) throw BackendError("backend returned wrong number of patches");
  return std::move(out.front());
}

// ---------------------------------------------------------------------------

struct RunOptions {
  int workers = 1;
  int batch_size = 16;
};

struct RunStats {
  std::size_t tiles = 0;
  double seconds = 0.0;
};

/// Segments every scheduled window and writes each window's on-slide extent
/// into the output mask. Any failing window aborts the slide.
inline LabelMask run_slide(const SlideReader& slide, const LabelGrid* truth, const Backend& backend,
                           const RunOptions& opt = {}, RunStats* stats = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  const SlideInfo& info = slide.info();
  if (truth != nullptr && (truth->width() != info.width || truth->height() != info.height)) {
    throw ValidationError("ground-truth mask does not match slide '" + info.id + "'");
  }
  const std::vector<TileCoord> tiles = schedule(info.width, info.height);
  LabelMask mask{info.id, LabelGrid(info.width, info.height, code_of(TissueClass::kUnlabeled))};
  const std::size_t batch = static_cast<std::size_t>(std::max(1, opt.batch_size));
  const std::size_t nbatches = (tiles.size() + batch - 1) / batch;
  const SegmentContext ctx{&info, truth};

  parallel_for(nbatches, opt.workers, [&](std::size_t b) {
    const std::size_t lo = b * batch;
    const std::size_t hi = std::min(tiles.size(), lo + batch);
    std::vector<MultiMagPatch> patches;
    patches.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) patches.push_back(extract(slide, tiles[i]));
    std::vector<LabelPatch> labels;
    try {
      labels = backend.segment_batch(patches, ctx);
    } catch (const BackendError& e) {
      throw BackendError("slide '" + info.id + "' tiles (" + std::to_string(tiles[lo].col) + "," +
                         std::to_string(tiles[lo].row) + ")..(" + std::to_string(tiles[hi - 1].col) + "," +
                         std::to_string(tiles[hi - 1].row) + "): " + e.what());
    }
    if (labels.size() != patches.size()) throw BackendError("backend returned wrong number of patches");
    for (const auto& lp : labels) {
      const TileCoord& t = lp.tile;
      if (lp.labels.width() != kTileSize || lp.labels.height() != kTileSize) {
        throw BackendError("label patch for tile (" + std::to_string(t.col) + "," + std::to_string(t.row) +
                           ") is not 256x256");
      }
      for (int y = 0; y < t.h; ++y) {
        auto src = lp.labels.row(y);
        auto dst = mask.labels.row(t.y0 + y);
        std::copy(src.begin(), src.begin() + t.w, dst.begin() + t.x0);
      }
    }
  });

  if (stats != nullptr) {
    stats->tiles = tiles.size();
    stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return mask;
}

inline LabelMask run_slide(const SlideReader& slide, const LabelGrid* truth, const BackendConfig& cfg,
                           const RunOptions& opt = {}) {
  return run_slide(slide, truth, *make_backend(cfg), opt);
}

}  // namespace necro
