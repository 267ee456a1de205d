#include "l1c/sparsity_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "l1c/error.hpp"

namespace l1c {
namespace {

double log_moment_ratio(double alpha) {
  return std::lgamma(1.0 / alpha) + std::lgamma(3.0 / alpha) - 2.0 * std::lgamma(2.0 / alpha);
}

}  // namespace

ChannelResponses collect_channel_responses(const YUVImage& img, const FilterConfig& cfg) {
  if (img.width < 2 || img.height < 2) {
    throw Error(ErrorCode::DegenerateImage, "collect_responses: image must be at least 2x2");
  }
  const SparseMatrix f = build_filter_matrix(img.y, cfg);
  return {f.multiply(img.u.samples), f.multiply(img.v.samples)};
}

std::vector<double> collect_responses(const YUVImage& img, const FilterConfig& cfg) {
  auto ch = collect_channel_responses(img, cfg);
  ch.u.insert(ch.u.end(), ch.v.begin(), ch.v.end());
  return std::move(ch.u);
}

double ggd_moment_ratio(double alpha) { return std::exp(log_moment_ratio(alpha)); }

double ggd_log_density(double x, double alpha, double scale) {
  const double log_z = std::log(2.0 * scale) + std::lgamma(1.0 + 1.0 / alpha);
  return -log_z - std::pow(std::abs(x / scale), alpha);
}

GGDFit fit_ggd(std::span<const double> samples) {
  if (samples.size() < kMinSamples) {
    throw Error(ErrorCode::DegenerateSamples, "fit_ggd: need at least 100 samples");
  }
  double m1 = 0.0, m2 = 0.0;
  bool all_equal = true;
  bool all_tiny = true;
  for (double x : samples) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "fit_ggd: non-finite sample");
    all_equal = all_equal && x == samples.front();
    all_tiny = all_tiny && std::abs(x) < 1e-12;
    m1 += std::abs(x);
    m2 += x * x;
  }
  if (all_equal || all_tiny) {
    throw Error(ErrorCode::DegenerateSamples, "fit_ggd: samples are degenerate (all equal or all zero)");
  }
  const double n = static_cast<double>(samples.size());
  m1 /= n;
  m2 /= n;

  // The ratio decreases monotonically in alpha; bisect in log space.
  const double target = std::log(m2 / (m1 * m1));
  double lo = kAlphaMin, hi = kAlphaMax;
  double alpha;
  if (target >= log_moment_ratio(lo)) {
    alpha = lo;
  } else if (target <= log_moment_ratio(hi)) {
    alpha = hi;
  } else {
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (log_moment_ratio(mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    alpha = 0.5 * (lo + hi);
  }

  GGDFit fit;
  fit.alpha = alpha;
  fit.scale = m1 * std::exp(std::lgamma(1.0 / alpha) - std::lgamma(2.0 / alpha));
  fit.n_samples = samples.size();
  double ll = 0.0;
  for (double x : samples) ll += ggd_log_density(x, fit.alpha, fit.scale);
  fit.log_likelihood = ll;
  return fit;
}

double excess_kurtosis(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

Histogram make_histogram(std::span<const double> samples, int bins) {
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "make_histogram: bins must be >= 1");
  double extent = 0.0;
  for (double x : samples) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "make_histogram: non-finite sample");
    extent = std::max(extent, std::abs(x));
  }
  if (extent == 0.0) extent = 1.0;

  Histogram h;
  h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.bin_edges[i] = -extent + 2.0 * extent * i / bins;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = 2.0 * extent / bins;
  for (double x : samples) {
    auto k = static_cast<long>(std::floor((x + extent) / width));
    k = std::clamp(k, 0L, static_cast<long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  h.total = samples.size();
  return h;
}

void export_log_histogram(const Histogram& h, std::ostream& os, const std::optional<GGDFit>& fit) {
  os << "bin_center,count,log_count";
  if (fit) os << ",ggd_fit,gaussian_fit";
  os << '\n';

  // Overlays are expected bin counts on the same log10(. + 1) scale as log_count.
  double gauss_var = 0.0;
  if (fit) {
    gauss_var = fit->scale * fit->scale * std::exp(std::lgamma(3.0 / fit->alpha) - std::lgamma(1.0 / fit->alpha));
  }
  const double total = static_cast<double>(h.total);
  os << std::setprecision(10);
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double c = h.center(i);
    const double width = h.bin_edges[i + 1] - h.bin_edges[i];
    os << c << ',' << h.counts[i] << ',' << std::log10(static_cast<double>(h.counts[i]) + 1.0);
    if (fit) {
      const double ggd = total * width * std::exp(ggd_log_density(c, fit->alpha, fit->scale));
      const double gauss = total * width * std::exp(-c * c / (2.0 * gauss_var)) /
                           std::sqrt(2.0 * std::numbers::pi * gauss_var);
      os << ',' << std::log1p(ggd) / std::numbers::ln10 << ',' << std::log1p(gauss) / std::numbers::ln10;
    }
    os << '\n';
  }
}

void export_log_histogram(const Histogram& h, const std::filesystem::path& path, const std::optional<GGDFit>& fit) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::IOFailure, "cannot open for writing: " + path.string());
  export_log_histogram(h, os, fit);
  if (!os) throw Error(ErrorCode::IOFailure, "write failed: " + path.string());
}

}  // namespace l1c
