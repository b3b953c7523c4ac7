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

#include "pixlift/tensor.hpp"

#include <functional>
#include <numeric>

#include "pixlift/errors.hpp"

namespace pixlift {

std::size_t layout_rank(Layout layout) {
  switch (layout) {
    case Layout::kNCHW:
    case Layout::kNHWC:
    case Layout::kOIHW:
      return 4;
    case Layout::kCHW:
    case Layout::kHWC:
      return 3;
    case Layout::kLinear:
      return 1;
  }
  return 0;
}

std::string to_string(Layout layout) {
  switch (layout) {
    case Layout::kNCHW: return "NCHW";
    case Layout::kNHWC: return "NHWC";
    case Layout::kCHW: return "CHW";
    case Layout::kHWC: return "HWC";
    case Layout::kOIHW: return "OIHW";
    case Layout::kLinear: return "linear";
  }
  return "?";
}

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape, Layout layout)
    : Tensor(shape, layout, std::vector<float>(shape_product(shape), 0.0f)) {}

Tensor::Tensor(std::vector<std::size_t> shape, Layout layout,
               std::vector<float> data)
    : shape_(std::move(shape)), layout_(layout), data_(std::move(data)) {
  if (shape_.size() != layout_rank(layout_)) {
    throw ShapeError("layout " + to_string(layout_) + " needs rank " +
                     std::to_string(layout_rank(layout_)) + ", got shape " +
                     shape_string(shape_));
  }
  if (data_.size() != shape_product(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

}  // namespace pixlift
