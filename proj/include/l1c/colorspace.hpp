#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "l1c/plane.hpp"

namespace l1c {

struct RGBImage {
  int width = 0;
  int height = 0;
  Plane r, g, b;

  RGBImage() = default;
  RGBImage(int w, int h) : width(w), height(h), r(w, h), g(w, h), b(w, h) {}
};

struct YUVImage {
  int width = 0;
  int height = 0;
  Plane y, u, v;

  YUVImage() = default;
  YUVImage(int w, int h) : width(w), height(h), y(w, h), u(w, h), v(w, h) {}
};

// BT.601 analogue YUV.
inline constexpr double kWr = 0.299;
inline constexpr double kWg = 0.587;
inline constexpr double kWb = 0.114;
inline constexpr double kUScale = 0.492111;
inline constexpr double kVScale = 0.877283;
inline constexpr double kChromaLimit = 0.5;

struct Chroma {
  double u = 0.0;
  double v = 0.0;
};

/// Per-pixel forward transform; chroma is clamped to [-0.5, 0.5].
Chroma rgb_to_uv(double r, double g, double b);
double rgb_to_luma(double r, double g, double b);

YUVImage rgb_to_yuv(const RGBImage& img);
RGBImage yuv_to_rgb(const YUVImage& img);

/// Combines a luminance plane with chroma planes into an RGB image.
RGBImage compose(const Plane& y, const Plane& u, const Plane& v);

/// Reads a PNG or JPEG. 8-bit samples are scaled by 1/255, 16-bit by 1/65535.
RGBImage load_image(const std::filesystem::path& path);
RGBImage decode_image(std::span<const std::uint8_t> bytes);

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Dimensions read from a PNG or JPEG header without decoding the pixels;
/// empty when the header cannot be parsed.
std::optional<ImageSize> peek_image_size(std::span<const std::uint8_t> bytes);

/// Writes an 8-bit PNG; samples are clamped to [0,1] and quantized by
/// round-half-up of v*255.
void save_image(const RGBImage& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RGBImage& img);

std::uint8_t quantize(double v);

void validate(const RGBImage& img);

}  // namespace l1c
