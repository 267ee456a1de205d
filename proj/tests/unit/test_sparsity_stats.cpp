#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "l1c/error.hpp"
#include "l1c/sparsity_stats.hpp"

using namespace l1c;

namespace {

// |X| / s is distributed as G^(1/alpha) with G ~ Gamma(1/alpha, 1).
std::vector<double> ggd_samples(std::size_t n, double alpha, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(1.0 / alpha, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> out(n);
  for (auto& x : out) {
    const double mag = scale * std::pow(gamma(rng), 1.0 / alpha);
    x = sign(rng) ? mag : -mag;
  }
  return out;
}

ErrorCode fit_error(const std::vector<double>& samples) {
  try {
    fit_ggd(samples);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "fit_ggd accepted degenerate samples";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(GGD, MomentRatioClosedForms) {
  EXPECT_NEAR(ggd_moment_ratio(2.0), std::numbers::pi / 2.0, 1e-12);
  EXPECT_NEAR(ggd_moment_ratio(1.0), 2.0, 1e-12);
  double prev = ggd_moment_ratio(kAlphaMin);
  for (double a = kAlphaMin + 0.05; a <= kAlphaMax; a += 0.05) {
    const double r = ggd_moment_ratio(a);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(GGD, DensityIntegratesToOne) {
  for (auto [alpha, scale] : {std::pair{2.0, 1.0}, std::pair{1.0, 0.5}, std::pair{0.8, 0.1}}) {
    // Trapezoid rule on |x| <= 400 s with a log-spaced grid near zero.
    double total = 0.0;
    double prev_x = 0.0, prev_f = std::exp(ggd_log_density(0.0, alpha, scale));
    for (int k = 0; k <= 200000; ++k) {
      const double x = scale * 1e-9 * std::pow(4e11, k / 200000.0);
      const double f = std::exp(ggd_log_density(x, alpha, scale));
      total += 0.5 * (f + prev_f) * (x - prev_x);
      prev_x = x;
      prev_f = f;
    }
    EXPECT_NEAR(2.0 * total, 1.0, 1e-6) << "alpha=" << alpha;
  }
  EXPECT_NEAR(ggd_log_density(0.3, 2.0, 1.0), -std::log(std::sqrt(std::numbers::pi)) - 0.09, 1e-12);
  EXPECT_NEAR(ggd_log_density(-0.3, 1.0, 0.5), -std::log(1.0) - 0.6, 1e-12);
}

TEST(GGD, RecoversParameters) {
  struct Case {
    double alpha, scale, alpha_tol;
  };
  for (const Case& c : {Case{2.0, 1.0, 0.1}, Case{1.0, 0.5, 0.05}, Case{0.8, 0.1, 0.05}}) {
    const auto x = ggd_samples(100000, c.alpha, c.scale, 42);
    const GGDFit fit = fit_ggd(x);
    EXPECT_NEAR(fit.alpha, c.alpha, c.alpha_tol);
    EXPECT_NEAR(fit.scale / c.scale, 1.0, 0.10);
    EXPECT_EQ(fit.n_samples, 100000u);
    double ll = 0.0;
    for (double v : x) ll += ggd_log_density(v, fit.alpha, fit.scale);
    EXPECT_NEAR(fit.log_likelihood, ll, 1e-6 * std::abs(ll));
  }
}

TEST(GGD, ScaleInvariance) {
  const auto x = ggd_samples(5000, 0.7, 1.0, 3);
  std::vector<double> y = x;
  for (double& v : y) v *= 1e-3;
  const GGDFit a = fit_ggd(x), b = fit_ggd(y);
  EXPECT_NEAR(a.alpha, b.alpha, 1e-9);
  EXPECT_NEAR(b.scale, a.scale * 1e-3, 1e-12);
}

TEST(GGD, DegenerateSamples) {
  EXPECT_EQ(fit_error(std::vector<double>(99, 1.0)), ErrorCode::DegenerateSamples);
  EXPECT_EQ(fit_error(std::vector<double>(500, 0.25)), ErrorCode::DegenerateSamples);
  EXPECT_EQ(fit_error(std::vector<double>(500, 0.0)), ErrorCode::DegenerateSamples);
  auto x = ggd_samples(500, 1.0, 1.0, 5);
  x[10] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(fit_error(x), ErrorCode::NonFinite);
}

TEST(Kurtosis, KnownDistributions) {
  EXPECT_NEAR(excess_kurtosis(ggd_samples(400000, 1.0, 1.0, 9)), 3.0, 0.25);
  EXPECT_NEAR(excess_kurtosis(ggd_samples(400000, 2.0, 1.0, 9)), 0.0, 0.05);
}

TEST(Histogram, SymmetricBinsCoverAllSamples) {
  const std::vector<double> x{-2.0, -0.5, 0.0, 0.1, 1.0, 1.9};
  const Histogram h = make_histogram(x, 4);
  ASSERT_EQ(h.bins(), 4u);
  EXPECT_DOUBLE_EQ(h.bin_edges.front(), -2.0);
  EXPECT_DOUBLE_EQ(h.bin_edges.back(), 2.0);
  EXPECT_EQ(h.total, 6u);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{1, 1, 2, 2}));
  EXPECT_DOUBLE_EQ(h.center(0), -1.5);
}

TEST(Histogram, ExportHasLogColumnsAndOverlays) {
  const auto x = ggd_samples(20000, 0.8, 0.1, 1);
  const Histogram h = make_histogram(x, 21);
  const GGDFit fit = fit_ggd(x);
  std::ostringstream os;
  export_log_histogram(h, os, fit);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "bin_center,count,log_count,ggd_fit,gaussian_fit");
  int rows = 0;
  double peak_log = 0.0;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 5u);
    EXPECT_NEAR(v[2], std::log10(v[1] + 1.0), 1e-9);
    peak_log = std::max(peak_log, v[2]);
    ++rows;
  }
  EXPECT_EQ(rows, 21);
  EXPECT_GT(peak_log, 3.0);

  std::ostringstream plain;
  export_log_histogram(h, plain);
  EXPECT_EQ(plain.str().substr(0, plain.str().find('\n')), "bin_center,count,log_count");
}

TEST(Responses, ConstantChromaGivesZeroResponses) {
  YUVImage img(12, 9);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (auto& s : img.y.samples) s = d(rng);
  for (auto& s : img.u.samples) s = 0.1;
  for (auto& s : img.v.samples) s = -0.2;
  const ChannelResponses r = collect_channel_responses(img, FilterConfig{});
  ASSERT_EQ(r.u.size(), 108u);
  ASSERT_EQ(r.v.size(), 108u);
  for (double s : r.u) EXPECT_LE(std::abs(s), 1e-12);
  for (double s : r.v) EXPECT_LE(std::abs(s), 1e-12);
  EXPECT_EQ(collect_responses(img, FilterConfig{}).size(), 216u);
  try {
    fit_ggd(collect_responses(img, FilterConfig{}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSamples);
  }
}

TEST(Responses, TinyImageIsDegenerate) {
  YUVImage img(1, 5);
  try {
    collect_channel_responses(img, FilterConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateImage);
  }
}
