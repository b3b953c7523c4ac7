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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pixlift/tensor.hpp"

// Super-resolution engine: a tiny declarative graph interpreter covering the
// sub-pixel CNN families (conv2d / relu / pixel shuffle / residual add).
namespace pixlift::sr {

enum class Padding { kZeros, kEdge };

struct Conv2d {
  int kernel_h = 3;
  int kernel_w = 3;
  int in_channels = 0;
  int out_channels = 0;
  Padding padding = Padding::kZeros;
};
struct Relu {};
struct PixelShuffle {
  int factor = 2;
};
// Element-wise sum of the source tensor and the output of node `other`.
struct Add {
  std::string other;
};
// Channel repeat-interleave: out[c * times + k] = in[c].
struct ReplicateInput {
  int times = 1;
};

using NodeOp = std::variant<Conv2d, Relu, PixelShuffle, Add, ReplicateInput>;

// The pseudo node id naming the model input.
inline constexpr std::string_view kInputId = "input";

struct Node {
  std::string id;
  // Node whose output feeds this one; empty means the previous node (the
  // model input for the first node).
  std::string source;
  NodeOp op;
};

struct ModelGraph {
  std::string name;
  int scale = 2;
  int input_channels = 3;
  // Weight file named by the manifest, relative to the manifest location.
  std::string weights_file;
  std::vector<Node> nodes;
};

// Conv node `id` owns "<id>.weight" (out x in x kh x kw) and "<id>.bias".
using WeightStore = std::map<std::string, Tensor, std::less<>>;

struct Model {
  ModelGraph graph;
  WeightStore weights;
  double load_time_ms = 0.0;
};

struct ValidationReport {
  std::string model;
  std::vector<std::size_t> input_shape;
  std::vector<std::size_t> output_shape;
  double load_time_ms = 0.0;
};

// ---- operators (NCHW) -------------------------------------------------------

// Stride 1 "same" convolution: out[n,o,y,x] = bias[o] +
//   sum_{c,i,j} in[n,c,y+i-kh/2,x+j-kw/2] * w[o,c,i,j]
// with zeros (or replicated edge samples) outside the input.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Padding padding = Padding::kZeros);

// (N, C*r*r, H, W) -> (N, C, rH, rW);
// out[c, rY+dy, rX+dx] = in[c*r*r + dy*r + dx, Y, X].
Tensor pixel_shuffle(const Tensor& input, int r);

Tensor relu(Tensor input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor replicate_channels(const Tensor& input, int times);

// ---- model files ------------------------------------------------------------

// Line-oriented manifest: "name", "scale", "input_channels", "weights"
// key/value lines followed by ordered "node <id> <op> key=value..." lines.
ModelGraph parse_manifest(std::string_view text);
std::string write_manifest(const ModelGraph& graph);

// Binary weight file: "PXLW", u16 version (1), u32 tensor count; per tensor
// u16 name length, UTF-8 name, u8 rank, u32 dims[rank], f32 data. All
// integers and floats little-endian.
WeightStore read_weights(std::string_view bytes);
std::string write_weights(const WeightStore& weights);

// Parses both inputs, checks every conv layer has weights of the declared
// shape (LoadError otherwise) and that the graph chains (ValidationError).
Model load_model(std::string_view manifest_text, std::string_view weight_bytes);
Model load_model_file(const std::string& manifest_path);

// Symbolic shape propagation for an (N, C, H, W) input.
ValidationReport validate(const Model& model,
                          std::span<const std::size_t> input_shape);

// Runs the graph. Deterministic; holds no state between calls, so one Model
// may serve concurrent callers.
Tensor infer(const Model& model, const Tensor& input);

// ---- reference models -------------------------------------------------------

// ReplicateInput(r*r) + PixelShuffle(r): exact nearest-neighbour upsampling.
Model nearest_model(int r);
// 3x3 edge-padded conv + PixelShuffle(r): reproduces half-pixel bilinear.
Model bilinear_model(int r);
// "nearest_x2", "nearest_x4", "bilinear_x2", "bilinear_x4", or a manifest path.
Model resolve_model(const std::string& name_or_path);
std::vector<std::string> builtin_model_names();

// He-normal weights from a portable seeded generator, zero biases.
WeightStore init_weights(const ModelGraph& graph, std::uint32_t seed);

}  // namespace pixlift::sr
