#include "l1c/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "l1c/error.hpp"

namespace l1c {
namespace {

double clamp_chroma(double c) { return std::clamp(c, -kChromaLimit, kChromaLimit); }
double clamp_unit(double c) { return std::clamp(c, 0.0, 1.0); }

bool has_png_magic(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kMagic[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= 8 && std::equal(kMagic, kMagic + 8, b.begin());
}

bool has_jpeg_magic(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

}  // namespace

double rgb_to_luma(double r, double g, double b) { return kWr * r + kWg * g + kWb * b; }

Chroma rgb_to_uv(double r, double g, double b) {
  const double y = rgb_to_luma(r, g, b);
  return {clamp_chroma(kUScale * (b - y)), clamp_chroma(kVScale * (r - y))};
}

YUVImage rgb_to_yuv(const RGBImage& img) {
  YUVImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    const double r = img.r[i], g = img.g[i], b = img.b[i];
    out.y[i] = rgb_to_luma(r, g, b);
    const Chroma c = rgb_to_uv(r, g, b);
    out.u[i] = c.u;
    out.v[i] = c.v;
  }
  return out;
}

RGBImage compose(const Plane& y, const Plane& u, const Plane& v) {
  if (!y.same_shape(u) || !y.same_shape(v)) {
    throw Error(ErrorCode::DimensionMismatch, "compose: plane dimensions differ");
  }
  RGBImage out(y.width, y.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] + v[i] / kVScale;
    const double b = y[i] + u[i] / kUScale;
    const double g = (y[i] - kWr * r - kWb * b) / kWg;
    out.r[i] = clamp_unit(r);
    out.g[i] = clamp_unit(g);
    out.b[i] = clamp_unit(b);
  }
  return out;
}

RGBImage yuv_to_rgb(const YUVImage& img) { return compose(img.y, img.u, img.v); }

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::floor(clamp_unit(v) * 255.0 + 0.5));
}

void validate(const RGBImage& img) {
  const Plane* planes[] = {&img.r, &img.g, &img.b};
  for (const Plane* p : planes) {
    if (p->width != img.width || p->height != img.height ||
        p->size() != static_cast<std::size_t>(img.width) * img.height) {
      throw Error(ErrorCode::DimensionMismatch, "RGBImage planes do not share dimensions");
    }
    for (double s : p->samples) {
      if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw Error(ErrorCode::NonFinite, "RGBImage sample outside [0,1]");
      }
    }
  }
}

std::optional<ImageSize> peek_image_size(std::span<const std::uint8_t> bytes) {
  auto be16 = [&](std::size_t at) { return (bytes[at] << 8) | bytes[at + 1]; };
  auto be32 = [&](std::size_t at) { return static_cast<std::uint32_t>((be16(at) << 16) | be16(at + 2)); };

  if (has_png_magic(bytes)) {
    if (bytes.size() < 24) return std::nullopt;
    const std::uint32_t w = be32(16), h = be32(20);
    if (w == 0 || h == 0 || w > 0x7fffffffu || h > 0x7fffffffu) return std::nullopt;
    return ImageSize{static_cast<int>(w), static_cast<int>(h)};
  }
  if (has_jpeg_magic(bytes)) {
    std::size_t at = 2;
    while (at + 4 <= bytes.size()) {
      if (bytes[at] != 0xFF) return std::nullopt;
      const std::uint8_t marker = bytes[at + 1];
      if (marker == 0xFF) {
        ++at;
        continue;
      }
      if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
        at += 2;
        continue;
      }
      const std::size_t len = static_cast<std::size_t>(be16(at + 2));
      const bool frame = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
      if (frame) {
        if (at + 9 > bytes.size()) return std::nullopt;
        return ImageSize{be16(at + 7), be16(at + 5)};
      }
      at += 2 + len;
    }
  }
  return std::nullopt;
}

RGBImage decode_image(std::span<const std::uint8_t> bytes) {
  if (!has_png_magic(bytes) && !has_jpeg_magic(bytes)) {
    throw Error(ErrorCode::UnsupportedFormat, "not a PNG or JPEG stream");
  }
  cv::Mat mat;
  try {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U,
                      const_cast<std::uint8_t*>(bytes.data()));
    mat = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::CorruptImage, std::string("decode failed: ") + e.what());
  }
  if (mat.empty()) throw Error(ErrorCode::CorruptImage, "decode failed");

  double scale = 0.0;
  switch (mat.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw Error(ErrorCode::UnsupportedFormat, "unsupported sample depth");
  }

  RGBImage out(mat.cols, mat.rows);
  const int channels = mat.channels();
  cv::Mat f;
  mat.convertTo(f, CV_MAKETYPE(CV_64F, channels), scale);
  for (int y = 0; y < f.rows; ++y) {
    const double* row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      const double* px = row + x * channels;
      double r, g, b;
      if (channels <= 2) {
        r = g = b = px[0];
      } else {
        // OpenCV stores BGR(A).
        b = px[0];
        g = px[1];
        r = px[2];
      }
      out.r.at(x, y) = r;
      out.g.at(x, y) = g;
      out.b.at(x, y) = b;
    }
  }
  return out;
}

RGBImage load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RGBImage& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      row[3 * x + 0] = quantize(img.b.at(x, y));
      row[3 * x + 1] = quantize(img.g.at(x, y));
      row[3 * x + 2] = quantize(img.r.at(x, y));
    }
  }
  std::vector<std::uint8_t> out;
  try {
    if (!cv::imencode(".png", mat, out)) throw Error(ErrorCode::IOFailure, "PNG encode failed");
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::IOFailure, std::string("PNG encode failed: ") + e.what());
  }
  return out;
}

void save_image(const RGBImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IOFailure, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IOFailure, "write failed: " + path.string());
}

}  // namespace l1c
