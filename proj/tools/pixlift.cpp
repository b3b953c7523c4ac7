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

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pixlift/analyzer.hpp"
#include "pixlift/codec.hpp"
#include "pixlift/errors.hpp"
#include "pixlift/patterns.hpp"
#include "pixlift/pipeline.hpp"
#include "pixlift/proxy.hpp"
#include "pixlift/quality.hpp"
#include "pixlift/sr.hpp"
#include "pixlift/telemetry.hpp"

namespace fs = std::filesystem;
using namespace pixlift;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw Error("cannot write " + path.string());
  }
}

patterns::Registry load_registry(const std::string& file) {
  return file.empty() ? patterns::Registry::defaults() : patterns::Registry::load_file(file);
}

// ---- proxy ----

struct ProxyArgs {
  std::string listen = "127.0.0.1:8080";
  int target_width = 200;
  std::string viewport = "393x852";
  std::string model = "bilinear_x4";
  std::string mode = "lift";
  std::string metrics_push;
  std::string patterns;
  int max_concurrent = 2;
  std::string telemetry;
  int quiescence_ms = 2000;
};

int run_proxy(const ProxyArgs& a) {
  proxy::ProxyConfig cfg;
  cfg.listen = a.listen;
  cfg.target_width = a.target_width;
  const auto vp = proxy::parse_viewport(a.viewport);
  if (!vp) throw ConfigError("viewport must look like 393x852");
  cfg.viewport = *vp;
  cfg.model = a.model;
  const auto mode = proxy::parse_mode(a.mode);
  if (!mode) throw ConfigError("mode must be lift, passthrough or measure");
  cfg.mode = *mode;
  if (!a.metrics_push.empty()) cfg.metrics_push = a.metrics_push;
  cfg.patterns_file = a.patterns;
  cfg.max_concurrent = a.max_concurrent;
  cfg.telemetry_path = a.telemetry;
  cfg.quiescence = std::chrono::milliseconds(a.quiescence_ms);
  cfg.validate();

  // Block termination signals before any thread starts so sigwait owns them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  proxy::ProxyService service(cfg);
  telemetry::ResourceSampler sampler(service.recorder());
  proxy::ProxyServer server(service, *proxy::parse_listen(cfg.listen));
  server.start();
  std::cerr << "pixlift proxy listening on " << proxy::parse_listen(cfg.listen)->host << ":"
            << server.port() << " (mode " << proxy::to_string(cfg.mode) << ", model "
            << service.metrics_snapshot().at("model").get<std::string>() << ")\n";
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  return 0;
}

// ---- analyze ----

struct AnalyzeArgs {
  std::string input;
  std::string mode = "both";
  std::string network = "3gfast";
  std::string device = "a12";
  std::string viewport = "393x852";
  int target_width = 200;
  std::string out;
  std::string probes;
  bool live_probe = false;
  std::string patterns;
  int parallelism = 1;
};

int run_analyze(const AnalyzeArgs& a) {
  analyzer::AnalyzerConfig cfg;
  cfg.network = analyzer::NetworkProfile::parse(a.network);
  cfg.device = analyzer::DeviceProfile::parse(a.device);
  const auto vp = proxy::parse_viewport(a.viewport);
  if (!vp) throw ConfigError("viewport must look like 393x852");
  cfg.viewport = {vp->width, vp->height};
  cfg.target_width = a.target_width;
  if (cfg.target_width <= 0) throw ConfigError("target width must be positive");
  const auto mode = analyzer::parse_report_mode(a.mode);
  if (!mode) throw ConfigError("mode must be today, full or both");

  std::vector<patterns::SupportProbe> cached;
  fs::path probe_file = a.probes;
  if (probe_file.empty() && fs::exists(fs::path(a.input) / "probes.csv")) {
    probe_file = fs::path(a.input) / "probes.csv";
  }
  if (!probe_file.empty()) {
    std::istringstream in(read_file(probe_file));
    cached = patterns::read_probe_csv(in);
  }
  analyzer::ProbeSource probes(std::move(cached));
  const auto registry = load_registry(a.patterns);
  if (a.live_probe) {
    probes.enable_live(std::make_shared<http::HttpFetcher>(), &registry, cfg.target_width);
  }

  const auto corpus = analyzer::load_corpus(a.input);
  const auto result = analyzer::analyze_corpus(corpus, cfg, probes, a.parallelism);
  analyzer::write_report(result, cfg, *mode, a.out);
  std::size_t failed = 0;
  for (const auto& p : result.pages) failed += !p.error.empty();
  std::cerr << "analyzed " << result.pages.size() - failed << " pages";
  if (failed) std::cerr << " (" << failed << " inputs failed)";
  std::cerr << "; report in " << a.out << "\n";
  return 0;
}

// ---- probe ----

int run_probe(const std::vector<std::string>& urls_in, const std::string& urls_file,
              const std::string& patterns_file, int target_width, int parallelism,
              const std::string& out) {
  std::vector<std::string> urls = urls_in;
  if (!urls_file.empty()) {
    std::istringstream in(read_file(urls_file));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line[0] != '#') urls.push_back(line);
    }
  }
  const auto registry = load_registry(patterns_file);
  http::HttpFetcher fetcher;
  const auto probes = patterns::probe_all(urls, registry, fetcher, target_width, parallelism);
  if (out.empty() || out == "-") {
    patterns::write_probe_csv(std::cout, probes);
  } else {
    std::ofstream f(out, std::ios::trunc);
    patterns::write_probe_csv(f, probes);
    if (!f) throw Error("cannot write " + out);
  }
  return 0;
}

// ---- models ----

int run_make_weights(const std::string& manifest_path, std::uint32_t seed, const std::string& out) {
  const auto graph = sr::parse_manifest(read_file(manifest_path));
  const fs::path target =
      !out.empty() ? fs::path(out)
                   : fs::path(manifest_path).parent_path() /
                         (graph.weights_file.empty() ? graph.name + ".pxlw" : graph.weights_file);
  const auto bytes = sr::write_weights(sr::init_weights(graph, seed));
  write_file(target, bytes);
  // Loading back checks every layer against the manifest.
  sr::load_model(read_file(manifest_path), bytes);
  std::cout << "wrote " << target.string() << " (" << bytes.size() << " bytes)\n";
  return 0;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) shape.push_back(std::stoul(part));
  return shape;
}

int run_validate(const std::string& model_name, const std::string& shape_text) {
  const auto model = sr::resolve_model(model_name);
  const auto shape = parse_shape(shape_text);
  const auto r = sr::validate(model, shape);
  std::cout << "model " << r.model << "\n"
            << "scale " << model.graph.scale << "\n"
            << "input " << shape_string(r.input_shape) << "\n"
            << "output " << shape_string(r.output_shape) << "\n"
            << "load_ms " << model.load_time_ms << "\n";
  return 0;
}

int run_lift(const std::string& model_name, const std::string& input, const std::string& output,
             const std::string& target, const std::string& reference, int input_side) {
  auto model = std::make_shared<const sr::Model>(sr::resolve_model(model_name));
  pipeline::PipelineConfig cfg;
  cfg.input_side = input_side;
  cfg.evaluation = !reference.empty();
  pipeline::Pipeline p(model, cfg);
  pipeline::LiftRequest req;
  req.bytes = read_file(input);
  req.label = input;
  if (!target.empty()) {
    const auto vp = proxy::parse_viewport(target);
    if (!vp) throw ConfigError("target must look like 800x600");
    req.target = pipeline::Dims{vp->width, vp->height};
  }
  if (!reference.empty()) req.reference = image::decode(read_file(reference));
  const auto result = p.run_now(std::move(req));
  if (!result.ok()) {
    std::cerr << "lift failed (" << result.error_kind << "): " << result.error << "\n";
    return 1;
  }
  const auto format = result.image.has_alpha() || fs::path(output).extension() == ".png"
                          ? image::Format::kPng
                          : image::Format::kJpeg;
  write_file(output, image::encode(result.image, format, 85));
  std::cout << telemetry::to_json(telemetry::lift_record(result)).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixlift: downscale-in-transit image proxy, super-resolution and page analysis"};
  app.require_subcommand(1);

  ProxyArgs proxy_args;
  auto* proxy_cmd = app.add_subcommand("proxy", "run the forward proxy");
  proxy_cmd->add_option("--listen", proxy_args.listen, "host:port")->capture_default_str();
  proxy_cmd->add_option("--target-width", proxy_args.target_width, "downscale width in pixels")
      ->capture_default_str();
  proxy_cmd->add_option("--viewport", proxy_args.viewport, "WxH")->capture_default_str();
  proxy_cmd->add_option("--model", proxy_args.model, "built-in model name or manifest path")
      ->capture_default_str();
  proxy_cmd->add_option("--mode", proxy_args.mode, "lift|passthrough|measure")->capture_default_str();
  proxy_cmd->add_option("--metrics-push", proxy_args.metrics_push, "collector URL");
  proxy_cmd->add_option("--patterns", proxy_args.patterns, "resize pattern file (TSV)");
  proxy_cmd->add_option("--max-concurrent", proxy_args.max_concurrent)->capture_default_str();
  proxy_cmd->add_option("--telemetry", proxy_args.telemetry, "append JSONL records to this file");
  proxy_cmd->add_option("--quiescence-ms", proxy_args.quiescence_ms, "idle time before a push")
      ->capture_default_str();

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "estimate savings over a capture corpus");
  analyze_cmd->add_option("--input", an.input, "directory of .har/.csv captures")->required();
  analyze_cmd->add_option("--mode", an.mode, "today|full|both")->capture_default_str();
  analyze_cmd->add_option("--network", an.network, "3gfast|custom(D,U,RTT)")->capture_default_str();
  analyze_cmd->add_option("--device", an.device, "a03s|a12|a34|custom(...)")->capture_default_str();
  analyze_cmd->add_option("--viewport", an.viewport, "WxH")->capture_default_str();
  analyze_cmd->add_option("--target-width", an.target_width)->capture_default_str();
  analyze_cmd->add_option("--out", an.out, "report directory")->required();
  analyze_cmd->add_option("--probes", an.probes, "probe CSV (default: INPUT/probes.csv)");
  analyze_cmd->add_flag("--live-probe", an.live_probe, "probe uncached URLs over the network");
  analyze_cmd->add_option("--patterns", an.patterns, "resize pattern file (TSV)");
  analyze_cmd->add_option("--parallelism", an.parallelism)->capture_default_str();

  std::vector<std::string> probe_urls;
  std::string probe_file, probe_patterns, probe_out;
  int probe_width = 200, probe_parallel = 4;
  auto* probe_cmd = app.add_subcommand("probe", "check which URLs serve smaller variants today");
  probe_cmd->add_option("urls", probe_urls, "image URLs");
  probe_cmd->add_option("--urls-file", probe_file, "one URL per line");
  probe_cmd->add_option("--patterns", probe_patterns, "resize pattern file (TSV)");
  probe_cmd->add_option("--target-width", probe_width)->capture_default_str();
  probe_cmd->add_option("--parallelism", probe_parallel)->capture_default_str();
  probe_cmd->add_option("--out", probe_out, "CSV file (default stdout)");

  std::string mw_manifest, mw_out;
  std::uint32_t mw_seed = 1;
  auto* mw_cmd = app.add_subcommand("make-weights", "write seeded weights for a manifest");
  mw_cmd->add_option("manifest", mw_manifest)->required();
  mw_cmd->add_option("--seed", mw_seed)->capture_default_str();
  mw_cmd->add_option("--out", mw_out, "weight file (default: next to the manifest)");

  std::string vm_model, vm_shape = "1,3,128,128";
  auto* vm_cmd = app.add_subcommand("validate-model", "load a model and report shapes");
  vm_cmd->add_option("model", vm_model)->required();
  vm_cmd->add_option("--input-shape", vm_shape, "N,C,H,W")->capture_default_str();

  std::string lift_model = "bilinear_x4", lift_in, lift_out, lift_target, lift_ref;
  int lift_side = 128;
  auto* lift_cmd = app.add_subcommand("lift", "upscale one image file");
  lift_cmd->add_option("--model", lift_model)->capture_default_str();
  lift_cmd->add_option("--input", lift_in)->required();
  lift_cmd->add_option("--output", lift_out)->required();
  lift_cmd->add_option("--target", lift_target, "WxH (default: scale x input)");
  lift_cmd->add_option("--reference", lift_ref, "ground truth for PSNR/SSIM");
  lift_cmd->add_option("--input-side", lift_side)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*proxy_cmd) return run_proxy(proxy_args);
    if (*analyze_cmd) return run_analyze(an);
    if (*probe_cmd) {
      return run_probe(probe_urls, probe_file, probe_patterns, probe_width, probe_parallel, probe_out);
    }
    if (*mw_cmd) return run_make_weights(mw_manifest, mw_seed, mw_out);
    if (*vm_cmd) return run_validate(vm_model, vm_shape);
    if (*lift_cmd) return run_lift(lift_model, lift_in, lift_out, lift_target, lift_ref, lift_side);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
