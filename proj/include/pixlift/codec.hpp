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

#include <optional>
#include <string>
#include <string_view>

#include "pixlift/image.hpp"

namespace pixlift::image {

enum class Format { kUnknown, kPng, kJpeg };

Format sniff_format(std::string_view bytes);
std::string mime_type(Format format);
std::string to_string(Format format);

// Decodes PNG or JPEG. Gray+alpha PNGs are widened to RGBA; alpha is kept.
// Corrupt or truncated input throws DecodeError carrying the magic bytes.
// format_hint is used only when the magic bytes are not recognised.
ImageBuffer decode(std::string_view bytes,
                   std::optional<Format> format_hint = std::nullopt);

struct ImageInfo {
  int width = 0;
  int height = 0;
  Format format = Format::kUnknown;
};

// Reads dimensions from the header only; nullopt when undecodable.
std::optional<ImageInfo> read_info(std::string_view bytes);

std::string encode_png(const ImageBuffer& img);
// Gray or RGB only; RGBA input throws ShapeError (use PNG for alpha).
std::string encode_jpeg(const ImageBuffer& img, int quality = 85);
std::string encode(const ImageBuffer& img, Format format, int quality = 85);

}  // namespace pixlift::image
