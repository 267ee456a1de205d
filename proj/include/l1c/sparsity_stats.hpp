#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "l1c/affinity.hpp"
#include "l1c/colorspace.hpp"

namespace l1c {

/// Generalized Gaussian density (1/Z) exp(-|x/s|^alpha), Z = 2 s Gamma(1 + 1/alpha).
struct GGDFit {
  double alpha = 0.0;
  double scale = 0.0;
  double log_likelihood = 0.0;
  std::size_t n_samples = 0;
};

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t bins() const { return counts.size(); }
  double center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }
};

inline constexpr double kAlphaMin = 0.05;
inline constexpr double kAlphaMax = 4.0;
inline constexpr std::size_t kMinSamples = 100;

/// Filter responses of U followed by those of V, both weighted from Y.
std::vector<double> collect_responses(const YUVImage& img, const FilterConfig& cfg);

struct ChannelResponses {
  std::vector<double> u;
  std::vector<double> v;
};
ChannelResponses collect_channel_responses(const YUVImage& img, const FilterConfig& cfg);

/// Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2, the ratio E|x|^2 / (E|x|)^2 of a GGD.
double ggd_moment_ratio(double alpha);
double ggd_log_density(double x, double alpha, double scale);

/// Moment-matching estimate of (alpha, scale).
GGDFit fit_ggd(std::span<const double> samples);

double excess_kurtosis(std::span<const double> samples);

/// Equal-width bins over [-m, m], m = max |x|.
Histogram make_histogram(std::span<const double> samples, int bins);

void export_log_histogram(const Histogram& h, std::ostream& os, const std::optional<GGDFit>& fit = std::nullopt);
void export_log_histogram(const Histogram& h, const std::filesystem::path& path,
                          const std::optional<GGDFit>& fit = std::nullopt);

}  // namespace l1c
