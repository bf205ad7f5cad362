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

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "necro/error.hpp"
#include "necro/raster.hpp"

namespace necro::png {

// Thin wrapper over classic libpng. All libpng calls live in frames whose only
// non-trivial locals are declared before setjmp, so a longjmp never skips a
// destructor.

namespace detail {

struct ErrorSink {
  char message[256] = {0};
};

inline void on_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  if (sink != nullptr) std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  png_longjmp(png, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

struct ReadHandles {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~ReadHandles() {
    if (png != nullptr) png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
  }
};

struct WriteHandles {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~WriteHandles() {
    if (png != nullptr) png_destroy_write_struct(&png, info != nullptr ? &info : nullptr);
  }
};

}  // namespace detail

enum class Layout { kRgb, kLabels };

struct Header {
  int width = 0;
  int height = 0;
};

/// Decodes `path` row by row. For kRgb every color type is normalized to 8-bit
/// RGB. For kLabels only 8-bit grayscale or palette images are accepted and the
/// raw sample (palette index) is delivered.
inline Header read_rows(const std::filesystem::path& path, Layout layout,
                        const std::function<void(const Header&)>& on_header,
                        const std::function<void(int y, const std::uint8_t* row)>& on_row) {
  detail::FilePtr file = detail::open(path, "rb");
  detail::ErrorSink sink;
  detail::ReadHandles h;
  std::vector<std::uint8_t> row;
  Header header;
  std::string failure;

  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, detail::on_error, detail::on_warning);
  if (h.png == nullptr) throw IoError("png_create_read_struct failed");
  h.info = png_create_info_struct(h.png);
  if (h.info == nullptr) throw IoError("png_create_info_struct failed");

  if (setjmp(png_jmpbuf(h.png))) {
    throw IoError(path.string() + ": " + sink.message);
  }

  png_init_io(h.png, file.get());
  png_read_info(h.png, h.info);
  const int bit_depth = png_get_bit_depth(h.png, h.info);
  const int color_type = png_get_color_type(h.png, h.info);
  const int interlace = png_get_interlace_type(h.png, h.info);
  header.width = static_cast<int>(png_get_image_width(h.png, h.info));
  header.height = static_cast<int>(png_get_image_height(h.png, h.info));

  if (interlace != PNG_INTERLACE_NONE) {
    failure = "interlaced PNG not supported";
  } else if (layout == Layout::kLabels) {
    if (bit_depth != 8 || (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE)) {
      failure = "label PNG must be 8-bit single channel (gray or palette)";
    }
  } else {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(h.png);
    if (bit_depth == 16) png_set_strip_16(h.png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(h.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(h.png);
    png_read_update_info(h.png, h.info);
  }

  if (failure.empty()) {
    on_header(header);
    row.resize(png_get_rowbytes(h.png, h.info));
    for (int y = 0; y < header.height; ++y) {
      png_read_row(h.png, row.data(), nullptr);
      on_row(y, row.data());
    }
    png_read_end(h.png, nullptr);
  }
  if (!failure.empty()) throw ValidationError(path.string() + ": " + failure);
  return header;
}

inline RgbImage read_rgb(const std::filesystem::path& path) {
  RgbImage img;
  read_rows(
      path, Layout::kRgb, [&](const Header& hd) { img = RgbImage(hd.width, hd.height); },
      [&](int y, const std::uint8_t* row) {
        auto dst = img.row(y);
        std::memcpy(dst.data(), row, dst.size_bytes());
      });
  return img;
}

inline LabelGrid read_labels(const std::filesystem::path& path) {
  LabelGrid img;
  read_rows(
      path, Layout::kLabels, [&](const Header& hd) { img = LabelGrid(hd.width, hd.height); },
      [&](int y, const std::uint8_t* row) {
        auto dst = img.row(y);
        std::memcpy(dst.data(), row, dst.size_bytes());
      });
  return img;
}

inline Header read_header(const std::filesystem::path& path) {
  detail::FilePtr file = detail::open(path, "rb");
  detail::ErrorSink sink;
  detail::ReadHandles h;
  Header header;
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, detail::on_error, detail::on_warning);
  if (h.png == nullptr) throw IoError("png_create_read_struct failed");
  h.info = png_create_info_struct(h.png);
  if (h.info == nullptr) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(h.png))) throw IoError(path.string() + ": " + sink.message);
  png_init_io(h.png, file.get());
  png_read_info(h.png, h.info);
  header.width = static_cast<int>(png_get_image_width(h.png, h.info));
  header.height = static_cast<int>(png_get_image_height(h.png, h.info));
  return header;
}

/// Push-style encoder: construct, call write_row() exactly `height` times,
/// then finish(). Output bytes depend only on pixel data and `compression`.
class RowWriter {
 public:
  RowWriter(const std::filesystem::path& path, int width, int height, int channels, int compression = 1)
      : path_(path), height_(height), file_(detail::open(path, "wb")) {
    if (width <= 0 || height <= 0) throw ValidationError("cannot encode empty PNG " + path.string());
    h_.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink_, detail::on_error, detail::on_warning);
    if (h_.png == nullptr) throw IoError("png_create_write_struct failed");
    h_.info = png_create_info_struct(h_.png);
    if (h_.info == nullptr) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(h_.png))) throw IoError(path_.string() + ": " + sink_.message);
    png_init_io(h_.png, file_.get());
    png_set_compression_level(h_.png, compression);
    png_set_filter(h_.png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_set_IHDR(h_.png, h_.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    png_write_info(h_.png, h_.info);
  }

  RowWriter(const RowWriter&) = delete;
  RowWriter& operator=(const RowWriter&) = delete;

  void write_row(const std::uint8_t* row) {
    if (rows_ >= height_) throw IoError(path_.string() + ": too many rows");
    if (setjmp(png_jmpbuf(h_.png))) throw IoError(path_.string() + ": " + sink_.message);
    png_write_row(h_.png, const_cast<png_bytep>(row));
    ++rows_;
  }

  void finish() {
    if (rows_ != height_) throw IoError(path_.string() + ": incomplete image");
    if (setjmp(png_jmpbuf(h_.png))) throw IoError(path_.string() + ": " + sink_.message);
    png_write_end(h_.png, nullptr);
    if (std::fflush(file_.get()) != 0) throw IoError("flush failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  int height_;
  int rows_ = 0;
  detail::FilePtr file_;
  detail::ErrorSink sink_;
  detail::WriteHandles h_;
};

inline void write_rows(const std::filesystem::path& path, int width, int height, int channels,
                       const std::function<const std::uint8_t*(int y)>& row_at, int compression = 1) {
  RowWriter w(path, width, height, channels, compression);
  for (int y = 0; y < height; ++y) w.write_row(row_at(y));
  w.finish();
}

inline void write_rgb(const std::filesystem::path& path, const RgbImage& img, int compression = 1) {
  write_rows(
      path, img.width(), img.height(), 3,
      [&](int y) { return reinterpret_cast<const std::uint8_t*>(img.row(y).data()); }, compression);
}

inline void write_labels(const std::filesystem::path& path, const LabelGrid& img, int compression = 6) {
  write_rows(
      path, img.width(), img.height(), 1, [&](int y) { return img.row(y).data(); }, compression);
}

}  // namespace necro::png
