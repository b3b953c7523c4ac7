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

#include "pixlift/codec.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>

// jpeglib.h needs size_t and FILE declared first.
#include <jpeglib.h>

#include "pixlift/errors.hpp"

namespace pixlift::image {
namespace {

std::string magic_hex(std::string_view bytes) {
  std::string out;
  const std::size_t n = std::min<std::size_t>(bytes.size(), 8);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[4];
    std::snprintf(buf, sizeof(buf), "%02x",
                  static_cast<unsigned char>(bytes[i]));
    out += buf;
  }
  return out;
}

[[noreturn]] void fail(const std::string& what, std::string_view bytes) {
  throw DecodeError(what + " (magic " + magic_hex(bytes) + ")",
                    magic_hex(bytes));
}

// ---- PNG ------------------------------------------------------------------

ImageBuffer decode_png(std::string_view bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail("png: " + msg, bytes);
  }
  int channels = 3;
  if (png.format & PNG_FORMAT_FLAG_ALPHA) {
    png.format = PNG_FORMAT_RGBA;
    channels = 4;
  } else if (!(png.format & PNG_FORMAT_FLAG_COLOR)) {
    png.format = PNG_FORMAT_GRAY;
    channels = 1;
  } else {
    png.format = PNG_FORMAT_RGB;
  }
  std::vector<std::uint8_t> samples(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, samples.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail("png: " + msg, bytes);
  }
  return ImageBuffer(static_cast<int>(png.width), static_cast<int>(png.height),
                     channels, std::move(samples));
}

// ---- JPEG -----------------------------------------------------------------

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Corrupt-data warnings (premature EOF, bad Huffman codes) are fatal: a
// truncated file must not decode into a half-grey image.
void jpeg_emit_message(j_common_ptr cinfo, int level) {
  if (level < 0) jpeg_error_exit(cinfo);
}

void jpeg_silent(j_common_ptr) {}

// Separate from the C++ wrappers so no object with a destructor lives in
// the frame that setjmp returns into.
bool decode_jpeg_raw(std::string_view bytes, std::vector<std::uint8_t>* out,
                     int* width, int* height, int* channels,
                     std::string* error) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  err.mgr.emit_message = jpeg_emit_message;
  err.mgr.output_message = jpeg_silent;
  if (setjmp(err.jump)) {
    *error = err.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK ||
      cinfo.jpeg_color_space == JCS_YCCK) {
    std::strcpy(err.message, "CMYK JPEG is not supported");
    std::longjmp(err.jump, 1);
  }
  cinfo.out_color_space =
      cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  *width = static_cast<int>(cinfo.output_width);
  *height = static_cast<int>(cinfo.output_height);
  *channels = cinfo.output_components;
  out->resize(static_cast<std::size_t>(*width) * *height * *channels);
  const std::size_t stride = static_cast<std::size_t>(*width) * *channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out->data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

ImageBuffer decode_jpeg(std::string_view bytes) {
  std::vector<std::uint8_t> samples;
  int width = 0, height = 0, channels = 0;
  std::string error;
  if (!decode_jpeg_raw(bytes, &samples, &width, &height, &channels, &error)) {
    fail("jpeg: " + error, bytes);
  }
  return ImageBuffer(width, height, channels, std::move(samples));
}

bool encode_jpeg_raw(const ImageBuffer& img, int quality, unsigned char** buf,
                     unsigned long* size, std::string* error) {
  jpeg_compress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  err.mgr.output_message = jpeg_silent;
  if (setjmp(err.jump)) {
    *error = err.message;
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, buf, size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = img.channels();
  cinfo.in_color_space = img.channels() == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  auto* base = const_cast<std::uint8_t*>(img.samples().data());
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = base + cinfo.next_scanline * stride;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

std::optional<ImageInfo> read_png_info(std::string_view bytes) {
  // Signature (8) + IHDR length/type (8) + width (4) + height (4).
  if (bytes.size() < 24 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    return std::nullopt;
  }
  auto be32 = [&](std::size_t off) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
  };
  return ImageInfo{static_cast<int>(be32(16)), static_cast<int>(be32(20)),
                   Format::kPng};
}

std::optional<ImageInfo> read_jpeg_info(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t i = 2;
  while (i + 4 <= bytes.size()) {
    if (p[i] != 0xFF) return std::nullopt;
    const unsigned marker = p[i + 1];
    if (marker == 0xFF) {
      ++i;
      continue;
    }
    if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
      i += 2;
      continue;
    }
    const std::size_t len = (std::size_t{p[i + 2]} << 8) | p[i + 3];
    const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 &&
                     marker != 0xC8 && marker != 0xCC;
    if (sof) {
      if (i + 9 > bytes.size()) return std::nullopt;
      const int height = (p[i + 5] << 8) | p[i + 6];
      const int width = (p[i + 7] << 8) | p[i + 8];
      return ImageInfo{width, height, Format::kJpeg};
    }
    i += 2 + len;
  }
  return std::nullopt;
}

}  // namespace

Format sniff_format(std::string_view bytes) {
  static constexpr unsigned char kPng[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) {
    return Format::kPng;
  }
  if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8 &&
      static_cast<unsigned char>(bytes[2]) == 0xFF) {
    return Format::kJpeg;
  }
  return Format::kUnknown;
}

std::string mime_type(Format format) {
  switch (format) {
    case Format::kPng: return "image/png";
    case Format::kJpeg: return "image/jpeg";
    case Format::kUnknown: break;
  }
  return "application/octet-stream";
}

std::string to_string(Format format) {
  switch (format) {
    case Format::kPng: return "png";
    case Format::kJpeg: return "jpeg";
    case Format::kUnknown: break;
  }
  return "unknown";
}

ImageBuffer decode(std::string_view bytes, std::optional<Format> format_hint) {
  if (bytes.empty()) fail("empty image data", bytes);
  Format format = sniff_format(bytes);
  if (format == Format::kUnknown && format_hint) format = *format_hint;
  switch (format) {
    case Format::kPng: return decode_png(bytes);
    case Format::kJpeg: return decode_jpeg(bytes);
    case Format::kUnknown: break;
  }
  fail("unrecognised image format", bytes);
}

std::optional<ImageInfo> read_info(std::string_view bytes) {
  switch (sniff_format(bytes)) {
    case Format::kPng: return read_png_info(bytes);
    case Format::kJpeg: return read_jpeg_info(bytes);
    case Format::kUnknown: break;
  }
  return std::nullopt;
}

std::string encode_png(const ImageBuffer& img) {
  if (img.empty()) throw ShapeError("cannot encode an empty image");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 1   ? PNG_FORMAT_GRAY
               : img.channels() == 3 ? PNG_FORMAT_RGB
                                     : PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.samples().data(),
                                 0, nullptr)) {
    throw Error(std::string("png encode: ") + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0,
                                 img.samples().data(), 0, nullptr)) {
    throw Error(std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

std::string encode_jpeg(const ImageBuffer& img, int quality) {
  if (img.empty()) throw ShapeError("cannot encode an empty image");
  if (img.channels() == 4) throw ShapeError("JPEG cannot carry alpha");
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  std::string error;
  if (!encode_jpeg_raw(img, quality, &buf, &size, &error)) {
    std::free(buf);
    throw Error("jpeg encode: " + error);
  }
  std::string out(reinterpret_cast<const char*>(buf), size);
  std::free(buf);
  return out;
}

std::string encode(const ImageBuffer& img, Format format, int quality) {
  if (format == Format::kJpeg && !img.has_alpha()) {
    return encode_jpeg(img, quality);
  }
  return encode_png(img);
}

}  // namespace pixlift::image
