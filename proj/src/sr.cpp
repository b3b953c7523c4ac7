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

#include "pixlift/sr.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "pixlift/errors.hpp"

namespace pixlift::sr {
namespace {

constexpr char kMagic[4] = {'P', 'X', 'L', 'W'};
constexpr std::uint16_t kVersion = 1;

void require_nchw(const Tensor& t, const char* op) {
  if (t.layout() != Layout::kNCHW) {
    throw ShapeError(std::string(op) + " needs an NCHW tensor, got " +
                     to_string(t.layout()));
  }
}

std::string weight_name(const std::string& id) { return id + ".weight"; }
std::string bias_name(const std::string& id) { return id + ".bias"; }

// ---- manifest parsing helpers ----

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

int parse_int(std::string_view text, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw LoadError("expected an integer, got '" + std::string(text) + "'" + where);
  }
  return v;
}

using Attrs = std::map<std::string, std::string, std::less<>>;

Attrs parse_attrs(const std::vector<std::string>& toks, std::size_t from,
                  const std::string& where) {
  Attrs attrs;
  for (std::size_t i = from; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string::npos || eq == 0) {
      throw LoadError("expected key=value, got '" + toks[i] + "'" + where);
    }
    attrs[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
  }
  return attrs;
}

const std::string& need(const Attrs& attrs, const char* key,
                        const std::string& where) {
  const auto it = attrs.find(key);
  if (it == attrs.end()) {
    throw LoadError(std::string("missing attribute '") + key + "'" + where);
  }
  return it->second;
}

// ---- binary helpers ----

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw LoadError("weight file truncated");
  }
  std::uint32_t u(std::size_t n) {
    need(n);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= std::uint32_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    }
    pos_ += n;
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_u(std::string& out, std::uint32_t v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

Layout layout_for_rank(std::size_t rank) {
  switch (rank) {
    case 1: return Layout::kLinear;
    case 3: return Layout::kCHW;
    case 4: return Layout::kOIHW;
    default: break;
  }
  throw LoadError("unsupported tensor rank " + std::to_string(rank));
}

// Portable standard normal from mt19937 (std::normal_distribution output
// differs between standard libraries).
class PortableNormal {
 public:
  explicit PortableNormal(std::uint32_t seed) : gen_(seed) {}
  double operator()() {
    const double u1 = (static_cast<double>(gen_()) + 0.5) / 4294967296.0;
    const double u2 = (static_cast<double>(gen_()) + 0.5) / 4294967296.0;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937 gen_;
};

std::string source_of(const ModelGraph& g, std::size_t i) {
  if (!g.nodes[i].source.empty()) return g.nodes[i].source;
  return i == 0 ? std::string(kInputId) : g.nodes[i - 1].id;
}

void check_weights(const ModelGraph& graph, const WeightStore& weights) {
  for (const auto& node : graph.nodes) {
    const auto* conv = std::get_if<Conv2d>(&node.op);
    if (!conv) continue;
    const std::vector<std::size_t> w_shape = {
        static_cast<std::size_t>(conv->out_channels),
        static_cast<std::size_t>(conv->in_channels),
        static_cast<std::size_t>(conv->kernel_h),
        static_cast<std::size_t>(conv->kernel_w)};
    const std::vector<std::size_t> b_shape = {
        static_cast<std::size_t>(conv->out_channels)};
    const auto w = weights.find(weight_name(node.id));
    const auto b = weights.find(bias_name(node.id));
    if (w == weights.end() || b == weights.end()) {
      throw LoadError("missing weights for layer '" + node.id + "'");
    }
    if (w->second.shape() != w_shape) {
      throw LoadError("layer '" + node.id + "' weight shape mismatch: expected " +
                      shape_string(w_shape) + ", found " +
                      shape_string(w->second.shape()));
    }
    if (b->second.shape() != b_shape) {
      throw LoadError("layer '" + node.id + "' bias shape mismatch: expected " +
                      shape_string(b_shape) + ", found " +
                      shape_string(b->second.shape()));
    }
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

// ---- operators --------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Padding padding) {
  require_nchw(input, "conv2d");
  if (weights.rank() != 4) throw ShapeError("conv2d weights must be rank 4");
  const std::size_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  const std::size_t c_out = weights.dim(0), kh = weights.dim(2),
                    kw = weights.dim(3);
  if (weights.dim(1) != c_in) {
    throw ShapeError("conv2d channel mismatch: input has " +
                     std::to_string(c_in) + ", weights expect " +
                     std::to_string(weights.dim(1)));
  }
  if (bias.size() != c_out) {
    throw ShapeError("conv2d bias has " + std::to_string(bias.size()) +
                     " entries for " + std::to_string(c_out) + " outputs");
  }
  const std::size_t top = kh / 2, left = kw / 2;
  const std::size_t ph = h + kh - 1, pw = w + kw - 1;

  Tensor out({n, c_out, h, w}, Layout::kNCHW);
  const auto in = input.data();
  const auto wt = weights.data();
  const auto bs = bias.data();
  auto dst = out.data();

  std::vector<float> padded(c_in * ph * pw, 0.0f);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < c_in; ++c) {
      const float* plane = in.data() + (b * c_in + c) * h * w;
      float* pad = padded.data() + c * ph * pw;
      for (std::size_t py = 0; py < ph; ++py) {
        const auto sy = static_cast<std::ptrdiff_t>(py) - static_cast<std::ptrdiff_t>(top);
        if (padding == Padding::kZeros && (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h))) {
          std::fill_n(pad + py * pw, pw, 0.0f);
          continue;
        }
        const auto cy = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(sy, 0, static_cast<std::ptrdiff_t>(h) - 1));
        for (std::size_t px = 0; px < pw; ++px) {
          const auto sx = static_cast<std::ptrdiff_t>(px) - static_cast<std::ptrdiff_t>(left);
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) {
            pad[py * pw + px] =
                padding == Padding::kZeros
                    ? 0.0f
                    : plane[cy * w + (sx < 0 ? 0 : w - 1)];
          } else {
            pad[py * pw + px] = plane[cy * w + static_cast<std::size_t>(sx)];
          }
        }
      }
    }

    for (std::size_t o = 0; o < c_out; ++o) {
      float* res = dst.data() + (b * c_out + o) * h * w;
      std::fill_n(res, h * w, bs[o]);
      for (std::size_t c = 0; c < c_in; ++c) {
        const float* pad = padded.data() + c * ph * pw;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const float k = wt[((o * c_in + c) * kh + i) * kw + j];
            if (k == 0.0f) continue;
            for (std::size_t y = 0; y < h; ++y) {
              const float* src = pad + (y + i) * pw + j;
              float* row = res + y * w;
              for (std::size_t x = 0; x < w; ++x) row[x] += k * src[x];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor pixel_shuffle(const Tensor& input, int r) {
  require_nchw(input, "pixel_shuffle");
  if (r < 1) throw ShapeError("pixel_shuffle factor must be >= 1");
  const std::size_t rr = static_cast<std::size_t>(r) * r;
  const std::size_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  if (c_in % rr != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(c_in) +
                     " channels not divisible by " + std::to_string(rr));
  }
  if (r == 1) return input;
  const std::size_t c_out = c_in / rr;
  const std::size_t oh = h * r, ow = w * r;
  Tensor out({n, c_out, oh, ow}, Layout::kNCHW);
  const auto src = input.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < c_out; ++c) {
      for (std::size_t dy = 0; dy < static_cast<std::size_t>(r); ++dy) {
        for (std::size_t dx = 0; dx < static_cast<std::size_t>(r); ++dx) {
          const std::size_t ch = c * rr + dy * r + dx;
          const float* plane = src.data() + (b * c_in + ch) * h * w;
          float* base = dst.data() + (b * c_out + c) * oh * ow;
          for (std::size_t y = 0; y < h; ++y) {
            float* row = base + (y * r + dy) * ow + dx;
            for (std::size_t x = 0; x < w; ++x) row[x * r] = plane[y * w + x];
          }
        }
      }
    }
  }
  return out;
}

Tensor relu(Tensor input) {
  for (auto& v : input.data()) v = v > 0.0f ? v : 0.0f;
  return input;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor out = a;
  auto dst = out.data();
  const auto src = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Tensor replicate_channels(const Tensor& input, int times) {
  require_nchw(input, "replicate_input");
  if (times < 1) throw ShapeError("replicate_input times must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1),
                    plane = input.dim(2) * input.dim(3);
  const auto t = static_cast<std::size_t>(times);
  Tensor out({n, c * t, input.dim(2), input.dim(3)}, Layout::kNCHW);
  const auto src = input.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* from = src.data() + (b * c + ch) * plane;
      for (std::size_t k = 0; k < t; ++k) {
        std::copy_n(from, plane, dst.data() + (b * c * t + ch * t + k) * plane);
      }
    }
  }
  return out;
}

// ---- manifest ---------------------------------------------------------------

ModelGraph parse_manifest(std::string_view text) {
  ModelGraph graph;
  bool have_scale = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, bool, std::less<>> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    const auto where = " (manifest line " + std::to_string(line_no) + ")";
    const auto& key = toks[0];
    if (key == "node") {
      if (toks.size() < 3) throw LoadError("node needs an id and an op" + where);
      Node node;
      node.id = toks[1];
      if (node.id == kInputId || ids.count(node.id)) {
        throw LoadError("duplicate or reserved node id '" + node.id + "'" + where);
      }
      const auto& op = toks[2];
      auto attrs = parse_attrs(toks, 3, where);
      if (auto it = attrs.find("src"); it != attrs.end()) {
        node.source = it->second;
        attrs.erase(it);
      }
      if (op == "conv2d") {
        Conv2d conv;
        const auto& kernel = need(attrs, "kernel", where);
        if (const auto x = kernel.find('x'); x != std::string::npos) {
          conv.kernel_h = parse_int(std::string_view(kernel).substr(0, x), where);
          conv.kernel_w = parse_int(std::string_view(kernel).substr(x + 1), where);
        } else {
          conv.kernel_h = conv.kernel_w = parse_int(kernel, where);
        }
        conv.in_channels = parse_int(need(attrs, "in", where), where);
        conv.out_channels = parse_int(need(attrs, "out", where), where);
        if (auto it = attrs.find("pad"); it != attrs.end()) {
          if (it->second == "zeros") conv.padding = Padding::kZeros;
          else if (it->second == "edge") conv.padding = Padding::kEdge;
          else throw LoadError("unknown padding '" + it->second + "'" + where);
        }
        if (conv.kernel_h < 1 || conv.kernel_w < 1 || conv.in_channels < 1 ||
            conv.out_channels < 1) {
          throw LoadError("conv2d sizes must be positive" + where);
        }
        node.op = conv;
      } else if (op == "relu") {
        node.op = Relu{};
      } else if (op == "pixel_shuffle") {
        const int r = parse_int(need(attrs, "r", where), where);
        if (r < 1) throw LoadError("pixel_shuffle r must be >= 1" + where);
        node.op = PixelShuffle{r};
      } else if (op == "add") {
        node.op = Add{need(attrs, "with", where)};
      } else if (op == "replicate_input") {
        const int times = parse_int(need(attrs, "times", where), where);
        if (times < 1) throw LoadError("replicate_input times must be >= 1" + where);
        node.op = ReplicateInput{times};
      } else {
        throw LoadError("unknown op '" + op + "'" + where);
      }
      ids[node.id] = true;
      graph.nodes.push_back(std::move(node));
    } else if (toks.size() != 2) {
      throw LoadError("expected '<key> <value>'" + where);
    } else if (key == "name") {
      graph.name = toks[1];
    } else if (key == "scale") {
      graph.scale = parse_int(toks[1], where);
      have_scale = true;
    } else if (key == "input_channels") {
      graph.input_channels = parse_int(toks[1], where);
    } else if (key == "weights") {
      graph.weights_file = toks[1];
    } else {
      throw LoadError("unknown key '" + key + "'" + where);
    }
  }
  if (graph.name.empty()) throw LoadError("manifest lacks a name");
  if (!have_scale || graph.scale < 2) {
    throw LoadError("manifest needs an integer scale >= 2");
  }
  if (graph.nodes.empty()) throw LoadError("manifest has no nodes");
  return graph;
}

std::string write_manifest(const ModelGraph& graph) {
  std::ostringstream out;
  out << "name " << graph.name << "\n"
      << "scale " << graph.scale << "\n"
      << "input_channels " << graph.input_channels << "\n";
  if (!graph.weights_file.empty()) out << "weights " << graph.weights_file << "\n";
  for (const auto& node : graph.nodes) {
    out << "node " << node.id << " ";
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            out << "conv2d kernel=" << op.kernel_h << "x" << op.kernel_w
                << " in=" << op.in_channels << " out=" << op.out_channels;
            if (op.padding == Padding::kEdge) out << " pad=edge";
          } else if constexpr (std::is_same_v<T, Relu>) {
            out << "relu";
          } else if constexpr (std::is_same_v<T, PixelShuffle>) {
            out << "pixel_shuffle r=" << op.factor;
          } else if constexpr (std::is_same_v<T, Add>) {
            out << "add with=" << op.other;
          } else {
            out << "replicate_input times=" << op.times;
          }
        },
        node.op);
    if (!node.source.empty()) out << " src=" << node.source;
    out << "\n";
  }
  return out.str();
}

// ---- weights ----------------------------------------------------------------

WeightStore read_weights(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw LoadError("weight file format: bad magic");
  }
  r.take(4);
  const auto version = r.u(2);
  if (version != kVersion) {
    throw LoadError("weight file format: unsupported version " +
                    std::to_string(version));
  }
  const auto count = r.u(4);
  WeightStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.u(2);
    std::string name(r.take(name_len));
    const auto rank = r.u(1);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.u(4);
    const std::size_t n = shape_product(shape);
    r.need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) {
      const std::uint32_t bits = r.u(4);
      std::memcpy(&v, &bits, 4);
    }
    const auto layout = layout_for_rank(rank);
    if (!store.emplace(name, Tensor(std::move(shape), layout, std::move(data))).second) {
      throw LoadError("weight file repeats tensor '" + name + "'");
    }
  }
  if (!r.done()) throw LoadError("weight file has trailing bytes");
  return store;
}

std::string write_weights(const WeightStore& weights) {
  std::string out(kMagic, 4);
  put_u(out, kVersion, 2);
  put_u(out, static_cast<std::uint32_t>(weights.size()), 4);
  for (const auto& [name, tensor] : weights) {
    put_u(out, static_cast<std::uint32_t>(name.size()), 2);
    out += name;
    put_u(out, static_cast<std::uint32_t>(tensor.rank()), 1);
    for (const auto d : tensor.shape()) put_u(out, static_cast<std::uint32_t>(d), 4);
    for (const float v : tensor.data()) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, &v, 4);
      put_u(out, bits, 4);
    }
  }
  return out;
}

// ---- loading / validation / inference ---------------------------------------

Model load_model(std::string_view manifest_text, std::string_view weight_bytes) {
  const auto start = std::chrono::steady_clock::now();
  Model model;
  model.graph = parse_manifest(manifest_text);
  model.weights = read_weights(weight_bytes);
  check_weights(model.graph, model.weights);
  const std::vector<std::size_t> nominal = {
      1, static_cast<std::size_t>(model.graph.input_channels), 16, 16};
  validate(model, nominal);
  model.load_time_ms = elapsed_ms(start);
  return model;
}

Model load_model_file(const std::string& manifest_path) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LoadError("cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path path(manifest_path);
  const auto manifest = slurp(path);
  const auto graph = parse_manifest(manifest);
  const auto weights_path = graph.weights_file.empty()
                                ? path.parent_path() / (graph.name + ".pxlw")
                                : path.parent_path() / graph.weights_file;
  auto model = load_model(manifest, slurp(weights_path));
  model.load_time_ms = elapsed_ms(start);
  return model;
}

ValidationReport validate(const Model& model,
                          std::span<const std::size_t> input_shape) {
  const auto& g = model.graph;
  if (input_shape.size() != 4) {
    throw ValidationError("input must be rank 4 (N,C,H,W), got " +
                              shape_string(input_shape),
                          std::string(kInputId));
  }
  if (input_shape[1] != static_cast<std::size_t>(g.input_channels)) {
    throw ValidationError("model expects " + std::to_string(g.input_channels) +
                              " input channels, got " +
                              shape_string(input_shape),
                          std::string(kInputId));
  }
  std::unordered_map<std::string, std::vector<std::size_t>> shapes;
  shapes[std::string(kInputId)] = {input_shape.begin(), input_shape.end()};
  long long shuffle_product = 1;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    const auto src_id = source_of(g, i);
    const auto src = shapes.find(src_id);
    if (src == shapes.end()) {
      throw ValidationError("node '" + node.id + "' reads unknown or later node '" +
                                src_id + "'",
                            node.id);
    }
    auto shape = src->second;
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            if (shape[1] != static_cast<std::size_t>(op.in_channels)) {
              throw ValidationError("conv '" + node.id + "' expects " +
                                        std::to_string(op.in_channels) +
                                        " channels, receives " +
                                        shape_string(shape),
                                    node.id);
            }
            shape[1] = static_cast<std::size_t>(op.out_channels);
          } else if constexpr (std::is_same_v<T, PixelShuffle>) {
            const auto rr = static_cast<std::size_t>(op.factor) * op.factor;
            if (shape[1] % rr != 0) {
              throw ValidationError("pixel_shuffle '" + node.id + "': " +
                                        std::to_string(shape[1]) +
                                        " channels not divisible by " +
                                        std::to_string(rr),
                                    node.id);
            }
            shape[1] /= rr;
            shape[2] *= op.factor;
            shape[3] *= op.factor;
            shuffle_product *= op.factor;
          } else if constexpr (std::is_same_v<T, Add>) {
            const auto other = shapes.find(op.other);
            if (other == shapes.end()) {
              throw ValidationError("add '" + node.id + "' references unknown node '" +
                                        op.other + "'",
                                    node.id);
            }
            if (other->second != shape) {
              throw ValidationError("add '" + node.id + "' shape " +
                                        shape_string(shape) + " vs " +
                                        shape_string(other->second),
                                    node.id);
            }
          } else if constexpr (std::is_same_v<T, ReplicateInput>) {
            shape[1] *= static_cast<std::size_t>(op.times);
          }
        },
        node.op);
    shapes[node.id] = shape;
    current = shape;
  }
  const auto& last = g.nodes.back().id;
  if (shuffle_product != g.scale) {
    throw ValidationError("pixel shuffles multiply to " +
                              std::to_string(shuffle_product) + ", scale is " +
                              std::to_string(g.scale),
                          last);
  }
  const std::vector<std::size_t> expected = {
      input_shape[0], input_shape[1], input_shape[2] * g.scale,
      input_shape[3] * g.scale};
  if (current != expected) {
    throw ValidationError("output " + shape_string(current) + " != expected " +
                              shape_string(expected),
                          last);
  }
  ValidationReport report;
  report.model = g.name;
  report.input_shape = {input_shape.begin(), input_shape.end()};
  report.output_shape = current;
  report.load_time_ms = model.load_time_ms;
  return report;
}

Tensor infer(const Model& model, const Tensor& input) {
  const auto& g = model.graph;
  if (input.layout() != Layout::kNCHW) {
    throw ShapeError("infer needs an NCHW input");
  }
  // Last node index reading each value, so intermediates can be released.
  std::unordered_map<std::string, std::size_t> last_use;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    last_use[source_of(g, i)] = i;
    if (const auto* a = std::get_if<Add>(&g.nodes[i].op)) last_use[a->other] = i;
  }
  std::unordered_map<std::string, Tensor> values;
  auto fetch = [&](const std::string& id) -> const Tensor& {
    if (id == kInputId) return input;
    const auto it = values.find(id);
    if (it == values.end()) throw ShapeError("node output '" + id + "' unavailable");
    return it->second;
  };
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    const auto src_id = source_of(g, i);
    const Tensor& src = fetch(src_id);
    Tensor result = std::visit(
        [&](const auto& op) -> Tensor {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Conv2d>) {
            const auto w = model.weights.find(weight_name(node.id));
            const auto b = model.weights.find(bias_name(node.id));
            if (w == model.weights.end() || b == model.weights.end()) {
              throw ShapeError("missing weights for '" + node.id + "'");
            }
            return conv2d(src, w->second, b->second, op.padding);
          } else if constexpr (std::is_same_v<T, Relu>) {
            return relu(src);
          } else if constexpr (std::is_same_v<T, PixelShuffle>) {
            return pixel_shuffle(src, op.factor);
          } else if constexpr (std::is_same_v<T, Add>) {
            return add(src, fetch(op.other));
          } else {
            return replicate_channels(src, op.times);
          }
        },
        node.op);
    for (auto it = values.begin(); it != values.end();) {
      const auto lu = last_use.find(it->first);
      if (lu == last_use.end() || lu->second <= i) {
        it = values.erase(it);
      } else {
        ++it;
      }
    }
    values.insert_or_assign(node.id, std::move(result));
  }
  return std::move(values.at(g.nodes.back().id));
}

// ---- reference models -------------------------------------------------------

Model nearest_model(int r) {
  Model m;
  m.graph.name = "nearest_x" + std::to_string(r);
  m.graph.scale = r;
  m.graph.nodes = {{"replicate", "", ReplicateInput{r * r}},
                   {"shuffle", "", PixelShuffle{r}}};
  validate(m, std::vector<std::size_t>{1, 3, 4, 4});
  return m;
}

Model bilinear_model(int r) {
  Model m;
  m.graph.name = "bilinear_x" + std::to_string(r);
  m.graph.scale = r;
  const int rr = r * r;
  m.graph.nodes = {{"interp", "", Conv2d{3, 3, 3, 3 * rr, Padding::kEdge}},
                   {"shuffle", "", PixelShuffle{r}}};
  // Phase d of an r-times upscale samples the source at offset
  // (d + 0.5) / r - 0.5 from the centre tap.
  auto taps = [r](int d) {
    std::array<float, 3> t{0.0f, 0.0f, 0.0f};
    const double off = (d + 0.5) / r - 0.5;
    if (off < 0) {
      t[0] = static_cast<float>(-off);
      t[1] = static_cast<float>(1.0 + off);
    } else {
      t[1] = static_cast<float>(1.0 - off);
      t[2] = static_cast<float>(off);
    }
    return t;
  };
  Tensor w({static_cast<std::size_t>(3 * rr), 3, 3, 3}, Layout::kOIHW);
  auto data = w.data();
  for (int c = 0; c < 3; ++c) {
    for (int dy = 0; dy < r; ++dy) {
      for (int dx = 0; dx < r; ++dx) {
        const int o = c * rr + dy * r + dx;
        const auto ty = taps(dy);
        const auto tx = taps(dx);
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            data[((o * 3 + c) * 3 + i) * 3 + j] = ty[i] * tx[j];
          }
        }
      }
    }
  }
  m.weights.emplace("interp.weight", std::move(w));
  m.weights.emplace("interp.bias",
                    Tensor({static_cast<std::size_t>(3 * rr)}, Layout::kLinear));
  validate(m, std::vector<std::size_t>{1, 3, 4, 4});
  return m;
}

std::vector<std::string> builtin_model_names() {
  return {"nearest_x2", "nearest_x4", "bilinear_x2", "bilinear_x4"};
}

Model resolve_model(const std::string& name_or_path) {
  if (name_or_path == "nearest_x2") return nearest_model(2);
  if (name_or_path == "nearest_x4") return nearest_model(4);
  if (name_or_path == "bilinear_x2") return bilinear_model(2);
  if (name_or_path == "bilinear_x4") return bilinear_model(4);
  return load_model_file(name_or_path);
}

WeightStore init_weights(const ModelGraph& graph, std::uint32_t seed) {
  PortableNormal normal(seed);
  WeightStore store;
  for (const auto& node : graph.nodes) {
    const auto* conv = std::get_if<Conv2d>(&node.op);
    if (!conv) continue;
    const std::vector<std::size_t> shape = {
        static_cast<std::size_t>(conv->out_channels),
        static_cast<std::size_t>(conv->in_channels),
        static_cast<std::size_t>(conv->kernel_h),
        static_cast<std::size_t>(conv->kernel_w)};
    const double fan_in =
        static_cast<double>(conv->in_channels) * conv->kernel_h * conv->kernel_w;
    const double stddev = std::sqrt(2.0 / fan_in);
    Tensor w(shape, Layout::kOIHW);
    for (auto& v : w.data()) v = static_cast<float>(normal() * stddev);
    store.emplace(weight_name(node.id), std::move(w));
    store.emplace(bias_name(node.id),
                  Tensor({shape[0]}, Layout::kLinear));
  }
  return store;
}

}  // namespace pixlift::sr
