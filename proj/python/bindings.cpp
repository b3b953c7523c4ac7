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

#include <cstring>
#include <fstream>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pixlift/analyzer.hpp"
#include "pixlift/codec.hpp"
#include "pixlift/errors.hpp"
#include "pixlift/image.hpp"
#include "pixlift/patterns.hpp"
#include "pixlift/pipeline.hpp"
#include "pixlift/quality.hpp"
#include "pixlift/sr.hpp"

namespace py = pybind11;
using namespace pixlift;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// HxW or HxWxC uint8 array to an interleaved image buffer.
image::ImageBuffer to_image(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("image must be HxW or HxWxC");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  std::vector<std::uint8_t> samples(a.data(), a.data() + a.size());
  return image::ImageBuffer(w, h, c, std::move(samples));
}

U8Array from_image(const image::ImageBuffer& img) {
  U8Array out({img.height(), img.width(), img.channels()});
  std::memcpy(out.mutable_data(), img.samples().data(), img.samples().size());
  return out;
}

Tensor to_tensor(const F32Array& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  const auto layout = a.ndim() == 4 ? Layout::kNCHW : Layout::kLinear;
  return Tensor(std::move(shape), layout, std::vector<float>(a.data(), a.data() + a.size()));
}

F32Array from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  F32Array out(shape);
  std::memcpy(out.mutable_data(), t.data().data(), t.size() * sizeof(float));
  return out;
}

quality::SsimParams ssim_params(const std::string& window, bool per_channel) {
  quality::SsimParams p;
  if (window == "uniform8") p.window = quality::SsimWindow::kUniform8;
  else if (window == "gaussian11") p.window = quality::SsimWindow::kGaussian11;
  else throw ConfigError("window must be uniform8 or gaussian11");
  p.color = per_channel ? quality::ColorMode::kPerChannelMean : quality::ColorMode::kLuma;
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

PYBIND11_MODULE(pixlift, m) {
  m.doc() = "Image downscale/lift toolkit: metrics, SR models, URL patterns, savings analysis";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NoReductionError>(m, "NoReductionError", base.ptr());
  py::register_exception<DecodeError>(m, "DecodeError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<LoadError>(m, "LoadError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<WindowError>(m, "WindowError", base.ptr());
  py::register_exception<IngestError>(m, "IngestError", base.ptr());

  // Images and metrics.
  m.def("decode", [](py::bytes data) { return from_image(image::decode(std::string(data))); },
        py::arg("data"));
  m.def(
      "encode",
      [](const U8Array& img, const std::string& format, int quality) {
        const auto fmt = format == "png" ? image::Format::kPng : image::Format::kJpeg;
        return py::bytes(image::encode(to_image(img), fmt, quality));
      },
      py::arg("image"), py::arg("format") = "jpeg", py::arg("quality") = 85);
  m.def(
      "resize_bilinear",
      [](const U8Array& img, int width, int height) {
        return from_image(image::resize_bilinear(to_image(img), width, height));
      },
      py::arg("image"), py::arg("width"), py::arg("height"));
  m.def(
      "psnr", [](const U8Array& a, const U8Array& b) { return quality::psnr(to_image(a), to_image(b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "ssim",
      [](const U8Array& a, const U8Array& b, const std::string& window, bool per_channel) {
        return quality::ssim(to_image(a), to_image(b), ssim_params(window, per_channel));
      },
      py::arg("a"), py::arg("b"), py::arg("window") = "uniform8", py::arg("per_channel") = false);

  // Tensor operators.
  m.def(
      "conv2d",
      [](const F32Array& x, const F32Array& w, const F32Array& b, const std::string& padding) {
        const auto pad = padding == "edge" ? sr::Padding::kEdge : sr::Padding::kZeros;
        return from_tensor(sr::conv2d(to_tensor(x), to_tensor(w), to_tensor(b), pad));
      },
      py::arg("input"), py::arg("weight"), py::arg("bias"), py::arg("padding") = "zeros");
  m.def(
      "pixel_shuffle",
      [](const F32Array& x, int r) { return from_tensor(sr::pixel_shuffle(to_tensor(x), r)); },
      py::arg("input"), py::arg("r"));

  // Models.
  m.def(
      "validate_model",
      [](const std::string& model, std::vector<std::size_t> shape) {
        const auto report = sr::validate(sr::resolve_model(model), shape);
        return py::make_tuple(report.input_shape, report.output_shape);
      },
      py::arg("model"), py::arg("input_shape") = std::vector<std::size_t>{1, 3, 128, 128});
  m.def(
      "infer",
      [](const std::string& model, const F32Array& x) {
        return from_tensor(sr::infer(sr::resolve_model(model), to_tensor(x)));
      },
      py::arg("model"), py::arg("input"));
  m.def(
      "lift",
      [](py::bytes data, const std::string& model, std::optional<std::pair<int, int>> target,
         int input_side) {
        pipeline::PipelineConfig cfg;
        cfg.input_side = input_side;
        cfg.max_concurrent = 1;
        pipeline::Pipeline p(std::make_shared<const sr::Model>(sr::resolve_model(model)), cfg);
        pipeline::LiftRequest req;
        req.bytes = std::string(data);
        if (target) req.target = pipeline::Dims{target->first, target->second};
        pipeline::LiftResult result;
        {
          py::gil_scoped_release release;
          result = p.run_now(std::move(req));
        }
        if (!result.ok()) {
          if (result.error_kind == "DecodeError") throw DecodeError(result.error, "");
          throw Error(result.error_kind + ": " + result.error);
        }
        return from_image(result.image);
      },
      py::arg("data"), py::arg("model") = "bilinear_x4", py::arg("target") = py::none(),
      py::arg("input_side") = 128);

  // URL patterns.
  m.def(
      "detect",
      [](const std::string& url) -> std::optional<py::tuple> {
        const auto match = patterns::Registry::defaults().detect(url);
        if (!match) return std::nullopt;
        return py::make_tuple(match->pattern_id, match->original_width);
      },
      py::arg("url"));
  m.def(
      "rewrite",
      [](const std::string& url, int target_width) -> std::optional<std::string> {
        const auto reg = patterns::Registry::defaults();
        const auto match = reg.detect(url);
        if (!match) return std::nullopt;
        try {
          return reg.rewrite(url, *match, target_width);
        } catch (const NoReductionError&) {
          return std::nullopt;
        }
      },
      py::arg("url"), py::arg("target_width") = 200);

  // Page-load model and corpus analysis.
  m.def(
      "delta_plt",
      [](double delta_bytes, double images_lifted, const std::string& network,
         const std::string& device) {
        return analyzer::delta_plt(delta_bytes, analyzer::NetworkProfile::parse(network),
                                   analyzer::DeviceProfile::parse(device), images_lifted);
      },
      py::arg("delta_bytes"), py::arg("images_lifted"), py::arg("network") = "3gfast",
      py::arg("device") = "a12");
  m.def(
      "upscale_seconds",
      [](double images, const std::string& device) {
        return analyzer::DeviceProfile::parse(device).upscale_seconds(images);
      },
      py::arg("images"), py::arg("device") = "a12");
  m.def(
      "analyze",
      [](const std::string& input, const std::string& out, const std::string& mode,
         const std::string& network, const std::string& device, int target_width,
         const std::string& probes) {
        analyzer::AnalyzerConfig cfg;
        cfg.network = analyzer::NetworkProfile::parse(network);
        cfg.device = analyzer::DeviceProfile::parse(device);
        cfg.target_width = target_width;
        const auto report_mode = analyzer::parse_report_mode(mode);
        if (!report_mode) throw ConfigError("mode must be today, full or both");
        std::vector<patterns::SupportProbe> cached;
        if (!probes.empty()) {
          std::istringstream in(read_file(probes));
          cached = patterns::read_probe_csv(in);
        }
        py::gil_scoped_release release;
        const analyzer::ProbeSource source(std::move(cached));
        const auto result = analyzer::analyze_corpus(analyzer::load_corpus(input), cfg, source);
        analyzer::write_report(result, cfg, *report_mode, out);
        return result.pages.size();
      },
      py::arg("input"), py::arg("out"), py::arg("mode") = "both", py::arg("network") = "3gfast",
      py::arg("device") = "a12", py::arg("target_width") = 200, py::arg("probes") = "");
}
