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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pixlift {

// Dimension order of a dense tensor. kOIHW is the convolution weight layout,
// kLinear any rank-1 vector (biases).
enum class Layout { kNCHW, kNHWC, kCHW, kHWC, kOIHW, kLinear };

std::size_t layout_rank(Layout layout);
std::string to_string(Layout layout);

// Dense row-major float32 array with a declared layout.
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled.
  Tensor(std::vector<std::size_t> shape, Layout layout);
  Tensor(std::vector<std::size_t> shape, Layout layout, std::vector<float> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  Layout layout() const { return layout_; }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  Layout layout_ = Layout::kLinear;
  std::vector<float> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

}  // namespace pixlift
