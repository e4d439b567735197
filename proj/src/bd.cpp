#include "pmvc/bd.hpp"

#include <algorithm>
#include <cmath>

#include "pmvc/error.hpp"

namespace pmvc {

namespace {

struct CubicFit {
  double x0 = 0.0;  // centering offset for conditioning
  double c[4] = {0, 0, 0, 0};

  double eval(double x) const {
    const double t = x - x0;
    return c[0] + t * (c[1] + t * (c[2] + t * c[3]));
  }
};

CubicFit fit_cubic(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() >= 4, ErrorKind::kContract,
          "rate-distortion curves need at least four points");
  CubicFit fit;
  for (double x : xs) fit.x0 += x;
  fit.x0 /= static_cast<double>(xs.size());

  // Least-squares normal equations over centered x.
  double sp[7] = {0};  // sums of powers 0..6
  double b[4] = {0};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double t = xs[i] - fit.x0;
    double p = 1.0;
    for (int j = 0; j < 7; ++j) {
      sp[j] += p;
      if (j < 4) b[j] += ys[i] * p;
      p *= t;
    }
  }
  double a[4][5];
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) a[r][col] = sp[r + col];
    a[r][4] = b[r];
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    for (int k = 0; k < 5; ++k) std::swap(a[col][k], a[piv][k]);
    require(std::fabs(a[col][col]) > 1e-12, ErrorKind::kContract,
            "degenerate rate-distortion curve (coincident points)");
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < 5; ++k) a[r][k] -= f * a[col][k];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double v = a[r][4];
    for (int k = r + 1; k < 4; ++k) v -= a[r][k] * fit.c[k];
    fit.c[r] = v / a[r][r];
  }
  return fit;
}

// Mean of the fit over [lo, hi]: trapezoid rule on 1000 intervals.
double fit_mean(const CubicFit& fit, double lo, double hi) {
  constexpr int kIntervals = 1000;
  double sum = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double w = (i == 0 || i == kIntervals) ? 0.5 : 1.0;
    sum += w * fit.eval(lo + (hi - lo) * i / kIntervals);
  }
  return sum / kIntervals;
}

struct Axis {
  std::vector<double> x, y;
  double lo = 0.0, hi = 0.0;
};

Axis rate_on_quality(const std::vector<RdPoint>& curve) {
  Axis ax;
  for (const RdPoint& p : curve) {
    require(std::isfinite(p.bpp) && p.bpp > 0.0 && std::isfinite(p.psnr_db),
            ErrorKind::kContract, "rate-distortion points must be finite with positive rate");
    ax.x.push_back(p.psnr_db);
    ax.y.push_back(std::log10(p.bpp));
  }
  ax.lo = *std::min_element(ax.x.begin(), ax.x.end());
  ax.hi = *std::max_element(ax.x.begin(), ax.x.end());
  return ax;
}

Axis quality_on_rate(const std::vector<RdPoint>& curve) {
  Axis ax;
  for (const RdPoint& p : curve) {
    require(std::isfinite(p.bpp) && p.bpp > 0.0 && std::isfinite(p.psnr_db),
            ErrorKind::kContract, "rate-distortion points must be finite with positive rate");
    ax.x.push_back(std::log10(p.bpp));
    ax.y.push_back(p.psnr_db);
  }
  ax.lo = *std::min_element(ax.x.begin(), ax.x.end());
  ax.hi = *std::max_element(ax.x.begin(), ax.x.end());
  return ax;
}

double delta_over_overlap(const Axis& anchor, const Axis& test) {
  const double lo = std::max(anchor.lo, test.lo);
  const double hi = std::min(anchor.hi, test.hi);
  require(hi > lo, ErrorKind::kContract,
          "rate-distortion curves do not overlap");
  const CubicFit fa = fit_cubic(anchor.x, anchor.y);
  const CubicFit ft = fit_cubic(test.x, test.y);
  return fit_mean(ft, lo, hi) - fit_mean(fa, lo, hi);
}

}  // namespace

double bd_rate(const std::vector<RdPoint>& anchor,
               const std::vector<RdPoint>& test) {
  const double delta_log_rate =
      delta_over_overlap(rate_on_quality(anchor), rate_on_quality(test));
  return (std::pow(10.0, delta_log_rate) - 1.0) * 100.0;
}

double bd_psnr(const std::vector<RdPoint>& anchor,
               const std::vector<RdPoint>& test) {
  return delta_over_overlap(quality_on_rate(anchor), quality_on_rate(test));
}

}  // namespace pmvc
