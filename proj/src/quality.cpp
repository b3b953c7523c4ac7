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

#include "pixlift/quality.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pixlift/errors.hpp"

namespace pixlift::quality {
namespace {

void check_same_shape(const image::ImageBuffer& a, const image::ImageBuffer& b) {
  if (a.width() != b.width() || a.height() != b.height() ||
      a.channels() != b.channels()) {
    throw ShapeError("images differ in shape: " + std::to_string(a.width()) +
                     "x" + std::to_string(a.height()) + "x" +
                     std::to_string(a.channels()) + " vs " +
                     std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + "x" +
                     std::to_string(b.channels()));
  }
}

using Plane = std::vector<double>;

Plane luma_plane(const image::ImageBuffer& img) {
  Plane plane(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto i = static_cast<std::size_t>(y) * img.width() + x;
      if (img.channels() < 3) {
        plane[i] = img.at(x, y, 0);
      } else {
        plane[i] = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                   0.114 * img.at(x, y, 2);
      }
    }
  }
  return plane;
}

Plane channel_plane(const image::ImageBuffer& img, int channel) {
  Plane plane(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      plane[static_cast<std::size_t>(y) * img.width() + x] = img.at(x, y, channel);
    }
  }
  return plane;
}

// Valid-mode separable filtering: output is (w-k+1) x (h-k+1).
Plane filter_valid(const Plane& in, int w, int h, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  Plane rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    const double* src = in.data() + static_cast<std::size_t>(y) * w;
    double* dst = rows.data() + static_cast<std::size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += taps[t] * src[x + t];
      dst[x] = acc;
    }
  }
  Plane out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) {
        acc += taps[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double ssim_plane(const Plane& a, const Plane& b, int w, int h,
                  const SsimParams& params) {
  const auto taps = window_taps(params.window, params.gaussian_sigma);
  const int k = static_cast<int>(taps.size());
  if (w < k || h < k) {
    throw WindowError("image " + std::to_string(w) + "x" + std::to_string(h) +
                      " is smaller than the " + std::to_string(k) + "x" +
                      std::to_string(k) + " SSIM window");
  }
  Plane aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, w, h, taps);
  const auto mu_b = filter_valid(b, w, h, taps);
  const auto e_aa = filter_valid(aa, w, h, taps);
  const auto e_bb = filter_valid(bb, w, h, taps);
  const auto e_ab = filter_valid(ab, w, h, taps);

  const double c1 = params.c1();
  const double c2 = params.c2();
  // Neumaier-compensated mean, so a constant SSIM map averages to itself.
  double total = 0.0;
  double compensation = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double luminance = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double structure = (2.0 * cov + c2) / (var_a + var_b + c2);
    const double v = luminance * structure;
    const double t = total + v;
    compensation += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
    total = t;
  }
  return (total + compensation) / static_cast<double>(mu_a.size());
}

}  // namespace

std::vector<double> window_taps(SsimWindow window, double sigma) {
  if (window == SsimWindow::kUniform8) return std::vector<double>(8, 1.0 / 8.0);
  std::vector<double> taps(11);
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    taps[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  }
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (auto& t : taps) t /= sum;
  return taps;
}

double mse(const image::ImageBuffer& a, const image::ImageBuffer& b) {
  check_same_shape(a, b);
  const auto sa = a.samples();
  const auto sb = b.samples();
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = static_cast<double>(sa[i]) - sb[i];
    total += d * d;
  }
  return total / static_cast<double>(sa.size());
}

double psnr_from_mse(double mse_value, double peak) {
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const image::ImageBuffer& a, const image::ImageBuffer& b) {
  return psnr_from_mse(mse(a, b));
}

double ssim(const image::ImageBuffer& a, const image::ImageBuffer& b,
            const SsimParams& params) {
  check_same_shape(a, b);
  const int w = a.width();
  const int h = a.height();
  if (a.channels() == 1 || params.color == ColorMode::kLuma) {
    return ssim_plane(luma_plane(a), luma_plane(b), w, h, params);
  }
  const int colour = std::min(a.channels(), 3);
  double total = 0.0;
  for (int c = 0; c < colour; ++c) {
    total += ssim_plane(channel_plane(a, c), channel_plane(b, c), w, h, params);
  }
  return total / colour;
}

QualityScore score(const image::ImageBuffer& a, const image::ImageBuffer& b,
                   const SsimParams& params) {
  QualityScore s;
  s.mse = mse(a, b);
  s.psnr = psnr_from_mse(s.mse);
  s.ssim = ssim(a, b, params);
  return s;
}

std::string format_psnr(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

}  // namespace pixlift::quality
