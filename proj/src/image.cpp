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

#include "pixlift/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pixlift/errors.hpp"

namespace pixlift::image {
namespace {

void check_dims(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw ShapeError("image dimensions must be >= 1, got " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  if (channels != 1 && channels != 3 && channels != 4) {
    throw ShapeError("unsupported channel count " + std::to_string(channels));
  }
}

// Source taps and weight of the second tap for one output coordinate.
struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[d] = {lo, hi, src - lo};
  }
  return taps;
}

std::uint8_t round_sample(double v) {
  if (std::isnan(v)) return 0;
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels)
    : ImageBuffer(width, height, channels,
                  std::vector<std::uint8_t>(
                      static_cast<std::size_t>(std::max(width, 0)) *
                      std::max(height, 0) * std::max(channels, 0))) {}

ImageBuffer::ImageBuffer(int width, int height, int channels,
                         std::vector<std::uint8_t> samples)
    : width_(width),
      height_(height),
      channels_(channels),
      samples_(std::move(samples)) {
  check_dims(width, height, channels);
  if (samples_.size() !=
      static_cast<std::size_t>(width) * height * channels) {
    throw ShapeError("sample count " + std::to_string(samples_.size()) +
                     " does not match " + std::to_string(width) + "x" +
                     std::to_string(height) + "x" + std::to_string(channels));
  }
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) {
    throw ShapeError("resize target must be >= 1x1");
  }
  if (out_w == img.width() && out_h == img.height()) return img;

  const auto xs = bilinear_taps(img.width(), out_w);
  const auto ys = bilinear_taps(img.height(), out_h);
  const int channels = img.channels();
  ImageBuffer out(out_w, out_h, channels);
  for (int y = 0; y < out_h; ++y) {
    const auto& ty = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const auto& tx = xs[x];
      for (int c = 0; c < channels; ++c) {
        const double top = img.at(tx.lo, ty.lo, c) * (1.0 - tx.frac) +
                           img.at(tx.hi, ty.lo, c) * tx.frac;
        const double bottom = img.at(tx.lo, ty.hi, c) * (1.0 - tx.frac) +
                              img.at(tx.hi, ty.hi, c) * tx.frac;
        out.at(x, y, c) = round_sample(top * (1.0 - ty.frac) + bottom * ty.frac);
      }
    }
  }
  return out;
}

ImageBuffer upscale_nearest(const ImageBuffer& img, int factor) {
  if (factor < 1) throw ShapeError("upscale factor must be >= 1");
  ImageBuffer out(img.width() * factor, img.height() * factor, img.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(x, y, c) = img.at(x / factor, y / factor, c);
      }
    }
  }
  return out;
}

Tensor to_tensor(const ImageBuffer& img, Layout layout, bool normalize) {
  const auto w = static_cast<std::size_t>(img.width());
  const auto h = static_cast<std::size_t>(img.height());
  const auto c = static_cast<std::size_t>(img.channels());
  std::vector<std::size_t> shape;
  bool planar = false;
  switch (layout) {
    case Layout::kNCHW: shape = {1, c, h, w}; planar = true; break;
    case Layout::kCHW: shape = {c, h, w}; planar = true; break;
    case Layout::kNHWC: shape = {1, h, w, c}; break;
    case Layout::kHWC: shape = {h, w, c}; break;
    default:
      throw ShapeError("layout " + to_string(layout) + " is not an image layout");
  }
  Tensor t(std::move(shape), layout);
  auto data = t.data();
  const auto samples = img.samples();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const float raw = samples[(y * w + x) * c + k];
        const float v = normalize ? raw / 255.0f : raw;
        const std::size_t dst =
            planar ? (k * h + y) * w + x : (y * w + x) * c + k;
        data[dst] = v;
      }
    }
  }
  return t;
}

ImageBuffer from_tensor(const Tensor& t) {
  std::size_t c = 0, h = 0, w = 0;
  bool planar = false;
  const auto& s = t.shape();
  switch (t.layout()) {
    case Layout::kNCHW:
      if (s[0] != 1) throw ShapeError("from_tensor needs batch size 1");
      c = s[1]; h = s[2]; w = s[3]; planar = true;
      break;
    case Layout::kCHW: c = s[0]; h = s[1]; w = s[2]; planar = true; break;
    case Layout::kNHWC:
      if (s[0] != 1) throw ShapeError("from_tensor needs batch size 1");
      h = s[1]; w = s[2]; c = s[3];
      break;
    case Layout::kHWC: h = s[0]; w = s[1]; c = s[2]; break;
    default:
      throw ShapeError("layout " + to_string(t.layout()) +
                       " is not an image layout");
  }
  if (c != 1 && c != 3 && c != 4) {
    throw ShapeError("tensor " + shape_string(s) +
                     " has no image-compatible channel count");
  }
  ImageBuffer img(static_cast<int>(w), static_cast<int>(h),
                  static_cast<int>(c));
  auto samples = img.samples();
  const auto data = t.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t src =
            planar ? (k * h + y) * w + x : (y * w + x) * c + k;
        samples[(y * w + x) * c + k] =
            round_sample(static_cast<double>(data[src]) * 255.0);
      }
    }
  }
  return img;
}

ImageBuffer to_rgb(const ImageBuffer& img) {
  if (img.channels() == 3) return img;
  ImageBuffer out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = img.at(x, y, img.channels() == 1 ? 0 : c);
      }
    }
  }
  return out;
}

std::pair<ImageBuffer, ImageBuffer> split_alpha(const ImageBuffer& rgba) {
  if (rgba.channels() != 4) throw ShapeError("split_alpha needs 4 channels");
  ImageBuffer rgb(rgba.width(), rgba.height(), 3);
  ImageBuffer alpha(rgba.width(), rgba.height(), 1);
  for (int y = 0; y < rgba.height(); ++y) {
    for (int x = 0; x < rgba.width(); ++x) {
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = rgba.at(x, y, c);
      alpha.at(x, y, 0) = rgba.at(x, y, 3);
    }
  }
  return {std::move(rgb), std::move(alpha)};
}

ImageBuffer attach_alpha(const ImageBuffer& rgb, const ImageBuffer& alpha) {
  if (rgb.channels() != 3 || alpha.channels() != 1 ||
      rgb.width() != alpha.width() || rgb.height() != alpha.height()) {
    throw ShapeError("attach_alpha needs matching RGB and single-channel planes");
  }
  ImageBuffer out(rgb.width(), rgb.height(), 4);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb.at(x, y, c);
      out.at(x, y, 3) = alpha.at(x, y, 0);
    }
  }
  return out;
}

int proportional_height(int width, int height, int new_width) {
  if (width < 1) return std::max(height, 1);
  const double h = static_cast<double>(height) * new_width / width;
  return std::max(1, static_cast<int>(std::lround(h)));
}

}  // namespace pixlift::image
