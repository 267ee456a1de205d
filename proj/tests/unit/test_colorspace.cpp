#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <unistd.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "l1c/base64.hpp"
#include "l1c/colorspace.hpp"
#include "l1c/error.hpp"

namespace fs = std::filesystem;
using namespace l1c;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / ("l1c_colorspace_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an l1c::Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Colorspace, WhiteAndBlackHaveZeroChroma) {
  for (double level : {0.0, 0.25, 1.0}) {
    const Chroma c = rgb_to_uv(level, level, level);
    EXPECT_NEAR(rgb_to_luma(level, level, level), level, 1e-15);
    EXPECT_NEAR(c.u, 0.0, 1e-15);
    EXPECT_NEAR(c.v, 0.0, 1e-15);
  }
}

TEST(Colorspace, PrimaryValuesMatchBt601) {
  EXPECT_NEAR(rgb_to_luma(1, 0, 0), 0.299, 1e-15);
  EXPECT_NEAR(rgb_to_luma(0, 1, 0), 0.587, 1e-15);
  EXPECT_NEAR(rgb_to_luma(0, 0, 1), 0.114, 1e-15);
  const Chroma green = rgb_to_uv(0, 1, 0);
  EXPECT_NEAR(green.u, 0.492111 * (0.0 - 0.587), 1e-12);
  EXPECT_DOUBLE_EQ(green.v, -0.5);  // 0.877283 * -0.587 is clamped
  const Chroma blue = rgb_to_uv(0, 0, 1);
  EXPECT_NEAR(blue.u, 0.492111 * (1.0 - 0.114), 1e-12);
  EXPECT_NEAR(blue.v, 0.877283 * (0.0 - 0.114), 1e-12);
}

TEST(Colorspace, ChromaIsClampedToHalf) {
  // Pure red has V = 0.877283 * 0.701, beyond the clamp.
  EXPECT_DOUBLE_EQ(rgb_to_uv(1, 0, 0).v, 0.5);
  EXPECT_DOUBLE_EQ(rgb_to_uv(0, 1, 1).v, -0.5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Chroma c = rgb_to_uv(d(rng), d(rng), d(rng));
    EXPECT_LE(std::abs(c.u), 0.5);
    EXPECT_LE(std::abs(c.v), 0.5);
  }
}

TEST(Colorspace, RoundTripInsideClampRange) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  RGBImage img(16, 16);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    // Draw until the pixel's unclamped chroma lies inside [-0.5, 0.5].
    double r, g, b;
    do {
      r = d(rng), g = d(rng), b = d(rng);
    } while (std::abs(0.877283 * (r - rgb_to_luma(r, g, b))) > 0.5);
    img.r[i] = r;
    img.g[i] = g;
    img.b[i] = b;
  }
  const YUVImage yuv = rgb_to_yuv(img);
  const RGBImage back = yuv_to_rgb(yuv);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    EXPECT_NEAR(back.r[i], img.r[i], 1e-12);
    EXPECT_NEAR(back.g[i], img.g[i], 1e-12);
    EXPECT_NEAR(back.b[i], img.b[i], 1e-12);
  }
}

TEST(Colorspace, ComposeClampsToUnitRange) {
  Plane y(2, 1, 0.9), u(2, 1, 0.5), v(2, 1, -0.5);
  const RGBImage img = compose(y, u, v);
  for (std::size_t i = 0; i < 2; ++i) {
    for (double s : {img.r[i], img.g[i], img.b[i]}) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
  EXPECT_EQ(code_of([&] { compose(y, Plane(3, 1), v); }), ErrorCode::DimensionMismatch);
}

TEST(Colorspace, QuantizeRoundsHalfUpAndClamps) {
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_EQ(quantize(1.0), 255);
  EXPECT_EQ(quantize(0.5), 128);
  EXPECT_EQ(quantize(127.49 / 255.0), 127);
  EXPECT_EQ(quantize(-3.0), 0);
  EXPECT_EQ(quantize(7.0), 255);
}

TEST(Colorspace, PngRoundTripIsExactOnQuantizedSamples) {
  RGBImage img(5, 3);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    img.r[i] = static_cast<double>(i * 17 % 256) / 255.0;
    img.g[i] = static_cast<double>(i * 31 % 256) / 255.0;
    img.b[i] = static_cast<double>(i * 53 % 256) / 255.0;
  }
  const fs::path path = temp_dir() / "rt.png";
  save_image(img, path);
  const RGBImage back = load_image(path);
  ASSERT_EQ(back.width, 5);
  ASSERT_EQ(back.height, 3);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    EXPECT_DOUBLE_EQ(back.r[i], img.r[i]);
    EXPECT_DOUBLE_EQ(back.g[i], img.g[i]);
    EXPECT_DOUBLE_EQ(back.b[i], img.b[i]);
  }
}

TEST(Colorspace, SixteenBitPngIsScaledBy65535) {
  cv::Mat m(2, 2, CV_16UC3, cv::Scalar(0, 0, 0));
  m.at<cv::Vec3w>(0, 1) = cv::Vec3w(65535, 32768, 1);  // BGR
  const fs::path path = temp_dir() / "deep.png";
  ASSERT_TRUE(cv::imwrite(path.string(), m));
  const RGBImage img = load_image(path);
  EXPECT_DOUBLE_EQ(img.r.at(1, 0), 1.0 / 65535.0);
  EXPECT_DOUBLE_EQ(img.g.at(1, 0), 32768.0 / 65535.0);
  EXPECT_DOUBLE_EQ(img.b.at(1, 0), 1.0);
}

TEST(Colorspace, GrayscalePngLoadsAsEqualChannels) {
  cv::Mat m(3, 4, CV_8UC1, cv::Scalar(51));
  const fs::path path = temp_dir() / "gray.png";
  ASSERT_TRUE(cv::imwrite(path.string(), m));
  const RGBImage img = load_image(path);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    EXPECT_DOUBLE_EQ(img.r[i], 0.2);
    EXPECT_DOUBLE_EQ(img.g[i], 0.2);
    EXPECT_DOUBLE_EQ(img.b[i], 0.2);
  }
}

TEST(Colorspace, LoadsBundledJpeg) {
  const RGBImage img = load_image(fs::path(L1C_TEST_DATA_DIR) / "chelsea_250.jpg");
  EXPECT_EQ(img.width, 250);
  EXPECT_EQ(img.height, 250);
  validate(img);
}

TEST(Colorspace, ErrorsAreClassified) {
  const fs::path dir = temp_dir();
  EXPECT_EQ(code_of([&] { load_image(dir / "absent.png"); }), ErrorCode::FileNotFound);

  {
    std::ofstream(dir / "text.png") << "definitely not an image";
  }
  EXPECT_EQ(code_of([&] { load_image(dir / "text.png"); }), ErrorCode::UnsupportedFormat);

  RGBImage img(8, 8);
  save_image(img, dir / "whole.png");
  std::ifstream in(dir / "whole.png", std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  bytes.resize(bytes.size() / 2);
  EXPECT_EQ(code_of([&] { decode_image(bytes); }), ErrorCode::CorruptImage);
}

TEST(Colorspace, PeekReadsHeaderDimensions) {
  RGBImage img(37, 11);
  const auto png = encode_png(img);
  const auto size = peek_image_size(png);
  ASSERT_TRUE(size);
  EXPECT_EQ(size->width, 37);
  EXPECT_EQ(size->height, 11);

  std::ifstream in(fs::path(L1C_TEST_DATA_DIR) / "chelsea_250.jpg", std::ios::binary);
  std::vector<std::uint8_t> jpeg((std::istreambuf_iterator<char>(in)), {});
  const auto jsize = peek_image_size(jpeg);
  ASSERT_TRUE(jsize);
  EXPECT_EQ(jsize->width, 250);
  EXPECT_EQ(jsize->height, 250);

  const std::vector<std::uint8_t> junk{1, 2, 3};
  EXPECT_FALSE(peek_image_size(junk));
}

TEST(Base64, RoundTripsAllLengths) {
  std::vector<std::uint8_t> bytes;
  for (int n = 0; n < 40; ++n) {
    EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
    bytes.push_back(static_cast<std::uint8_t>(n * 37 + 11));
  }
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}), "Zm9vYg==");
  const auto decoded = base64_decode("Zm9v\nYmFy");
  EXPECT_EQ(std::string(decoded.begin(), decoded.end()), "foobar");
  EXPECT_EQ(code_of([] { base64_decode("ab$d"); }), ErrorCode::InvalidArgument);
}
