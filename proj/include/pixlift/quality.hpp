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

#include <string>
#include <vector>

#include "pixlift/image.hpp"

namespace pixlift::quality {

enum class SsimWindow { kUniform8, kGaussian11 };
enum class ColorMode { kLuma, kPerChannelMean };

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  SsimWindow window = SsimWindow::kUniform8;
  double gaussian_sigma = 1.5;
  ColorMode color = ColorMode::kLuma;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

struct QualityScore {
  double mse = 0.0;
  double psnr = 0.0;  // +inf when mse == 0
  double ssim = 1.0;
};

// Mean squared difference over every sample. Throws ShapeError on
// mismatched dimensions or channel counts.
double mse(const image::ImageBuffer& a, const image::ImageBuffer& b);

double psnr_from_mse(double mse, double peak = 255.0);
double psnr(const image::ImageBuffer& a, const image::ImageBuffer& b);

// Mean SSIM over all fully-contained window positions (stride 1). Colour
// inputs are reduced to Rec.601 luma unless params.color asks for the
// per-channel mean. Throws WindowError when the image is smaller than the
// window.
double ssim(const image::ImageBuffer& a, const image::ImageBuffer& b,
            const SsimParams& params = {});

QualityScore score(const image::ImageBuffer& a, const image::ImageBuffer& b,
                   const SsimParams& params = {});

// Separable 1-D window taps (sum to 1); the 2-D window is their outer product.
std::vector<double> window_taps(SsimWindow window, double sigma = 1.5);

// "inf" for infinite PSNR, otherwise the value with full precision.
std::string format_psnr(double psnr);

}  // namespace pixlift::quality
