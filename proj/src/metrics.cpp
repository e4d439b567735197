#include "pmvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pmvc/error.hpp"

namespace pmvc {

namespace {

std::vector<double> channel_plane(const std::vector<std::uint8_t>& rgb, int ch) {
  std::vector<double> plane(rgb.size() / 3);
  for (std::size_t i = 0; i < plane.size(); ++i)
    plane[i] = static_cast<double>(rgb[3 * i + static_cast<std::size_t>(ch)]);
  return plane;
}

constexpr int kWindow = 11;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Valid-mode separable Gaussian filter; output is (h-10) x (w-10).
std::vector<double> gauss_valid(const std::vector<double>& img, int h, int w,
                                const std::vector<double>& k) {
  const int wo = w - kWindow + 1, ho = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * wo);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i)
        s += k[static_cast<std::size_t>(i)] *
             img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * wo + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ho) * wo);
  for (int y = 0; y < ho; ++y)
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i)
        s += k[static_cast<std::size_t>(i)] *
             tmp[static_cast<std::size_t>(y + i) * wo + x];
      out[static_cast<std::size_t>(y) * wo + x] = s;
    }
  return out;
}

std::vector<double> downsample2(const std::vector<double>& img, int h, int w) {
  const int h2 = h / 2, w2 = w / 2;
  std::vector<double> out(static_cast<std::size_t>(h2) * w2);
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x)
      out[static_cast<std::size_t>(y) * w2 + x] =
          0.25 * (img[static_cast<std::size_t>(2 * y) * w + 2 * x] +
                  img[static_cast<std::size_t>(2 * y) * w + 2 * x + 1] +
                  img[static_cast<std::size_t>(2 * y + 1) * w + 2 * x] +
                  img[static_cast<std::size_t>(2 * y + 1) * w + 2 * x + 1]);
  return out;
}

struct ScaleTerms {
  double cs = 0.0;    // mean contrast-structure term
  double ssim = 0.0;  // mean full SSIM (luminance * cs)
};

ScaleTerms ssim_scale(const std::vector<double>& a, const std::vector<double>& b,
                      int h, int w, const std::vector<double>& k) {
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const std::size_t n = a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu1 = gauss_valid(a, h, w, k);
  const auto mu2 = gauss_valid(b, h, w, k);
  const auto e_aa = gauss_valid(aa, h, w, k);
  const auto e_bb = gauss_valid(bb, h, w, k);
  const auto e_ab = gauss_valid(ab, h, w, k);
  ScaleTerms t;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    const double var1 = e_aa[i] - mu1[i] * mu1[i];
    const double var2 = e_bb[i] - mu2[i] * mu2[i];
    const double cov = e_ab[i] - mu1[i] * mu2[i];
    const double cs = (2.0 * cov + c2) / (var1 + var2 + c2);
    const double lum =
        (2.0 * mu1[i] * mu2[i] + c1) / (mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1);
    t.cs += cs;
    t.ssim += lum * cs;
  }
  t.cs /= static_cast<double>(mu1.size());
  t.ssim /= static_cast<double>(mu1.size());
  return t;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), ErrorKind::kDimension,
          "metric inputs must share one shape");
  const auto ba = frame_to_rgb(a);
  const auto bb = frame_to_rgb(b);
  double sse = 0.0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    const double d = static_cast<double>(ba[i]) - static_cast<double>(bb[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(ba.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ms_ssim(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b) && a.rank() == 3 && a.dim(2) == 3,
          ErrorKind::kDimension, "metric inputs must be matching H x W x 3");
  const int h0 = a.dim(0), w0 = a.dim(1);
  const int min_dim = std::min(h0, w0);
  require(min_dim >= 44, ErrorKind::kDimension,
          "frame too small for multi-scale similarity (needs >= 44 pixels)");
  const int scales = min_dim >= 176 ? 5 : 3;
  double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += weights[s];
  for (int s = 0; s < scales; ++s) weights[s] /= wsum;

  const auto kernel = gaussian_kernel();
  const auto rgb_a = frame_to_rgb(a);
  const auto rgb_b = frame_to_rgb(b);
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    auto pa = channel_plane(rgb_a, ch);
    auto pb = channel_plane(rgb_b, ch);
    int h = h0, w = w0;
    double value = 1.0;
    for (int s = 0; s < scales; ++s) {
      if (s > 0) {
        pa = downsample2(pa, h, w);
        pb = downsample2(pb, h, w);
        h /= 2;
        w /= 2;
      }
      const ScaleTerms t = ssim_scale(pa, pb, h, w, kernel);
      const double term =
          s == scales - 1 ? std::max(t.ssim, 0.0) : std::max(t.cs, 0.0);
      value *= std::pow(term, weights[s]);
    }
    total += value;
  }
  return total / 3.0;
}

SequenceQuality sequence_quality(const Video& original, const Video& decoded) {
  require(original.frames.size() == decoded.frames.size() &&
              !original.frames.empty(),
          ErrorKind::kDimension, "sequences must pair up frame for frame");
  SequenceQuality q;
  for (std::size_t i = 0; i < original.frames.size(); ++i) {
    q.psnr_db += std::min(psnr(original.frames[i], decoded.frames[i]), kPsnrCap);
    q.msssim += ms_ssim(original.frames[i], decoded.frames[i]);
  }
  const double n = static_cast<double>(original.frames.size());
  q.psnr_db /= n;
  q.msssim /= n;
  return q;
}

}  // namespace pmvc
