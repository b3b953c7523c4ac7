// Copyright 2026 The PixLift Authors.
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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pixlift/tensor.hpp"

namespace pixlift::image {

// 8-bit raster, row-major, channels interleaved. Channels are 1 (gray),
// 3 (RGB) or 4 (RGBA).
class ImageBuffer {
 public:
  ImageBuffer() = default;
  // Zero-filled.
  ImageBuffer(int width, int height, int channels);
  ImageBuffer(int width, int height, int channels,
              std::vector<std::uint8_t> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return samples_.empty(); }
  bool has_alpha() const { return channels_ == 4; }

  std::span<std::uint8_t> samples() { return samples_; }
  std::span<const std::uint8_t> samples() const { return samples_; }

  std::uint8_t& at(int x, int y, int c) {
    return samples_[index(x, y, c)];
  }
  std::uint8_t at(int x, int y, int c) const {
    return samples_[index(x, y, c)];
  }

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> samples_;
};

// Bilinear resampling with half-pixel centres: src = (dst + 0.5) * in/out - 0.5,
// clamped to the edge. Results are rounded half away from zero.
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h);

// Nearest-neighbour integer upscale (each pixel becomes a factor x factor block).
ImageBuffer upscale_nearest(const ImageBuffer& img, int factor);

// Layout must be one of NCHW, NHWC (batch 1), CHW or HWC. With normalize the
// values are sample / 255, otherwise raw sample values.
Tensor to_tensor(const ImageBuffer& img, Layout layout, bool normalize = true);

// Inverse of to_tensor(normalize = true): clamp(round(x * 255), 0, 255) with
// NaN mapped to 0.
ImageBuffer from_tensor(const Tensor& t);

// Channel plumbing around the RGB-only models.
ImageBuffer to_rgb(const ImageBuffer& img);
std::pair<ImageBuffer, ImageBuffer> split_alpha(const ImageBuffer& rgba);
ImageBuffer attach_alpha(const ImageBuffer& rgb, const ImageBuffer& alpha);

// Height that keeps the aspect ratio when scaling to new_width (>= 1).
int proportional_height(int width, int height, int new_width);

}  // namespace pixlift::image
