#pragma once

#include <cmath>
#include <optional>

#include "cycletrans/tensor.hpp"

namespace cycletrans {

/// Canonical parameters of the SSIM reference formulation: 11x11 Gaussian
/// window, sigma 1.5, stabilizers C1=(0.01 L)^2 and C2=(0.03 L)^2. Images are
/// rescaled from [lo,hi] to [0,1] internally, so L = 1.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double lo = -1.0;
  double hi = 1.0;
};

template <typename Scalar>
struct SsimResult {
  Scalar score;
  Image<Scalar> map;  // per-pixel local SSIM, same extent as the inputs
};

namespace detail {

template <typename Scalar>
ArrayX<Scalar> gaussian_kernel(int window, double sigma) {
  ArrayX<Scalar> k(window);
  const double c = (window - 1) / 2.0;
  for (int i = 0; i < window; ++i)
    k[i] = static_cast<Scalar>(std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma)));
  k /= k.sum();
  return k;
}

/// Separable filtering with reflected borders, output same size as input.
template <typename Scalar>
Image<Scalar> filter_reflect(const Image<Scalar>& img, const ArrayX<Scalar>& kernel) {
  const Eigen::Index h = img.rows(), w = img.cols();
  const Eigen::Index half = kernel.size() / 2;
  auto reflect = [](Eigen::Index t, Eigen::Index n) {
    while (t < 0 || t >= n) {
      if (t < 0) t = -t;
      if (t >= n) t = 2 * n - 2 - t;
    }
    return t;
  };
  Image<Scalar> tmp(h, w), out(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (Eigen::Index i = 0; i < kernel.size(); ++i)
        acc += kernel[i] * img(y, reflect(x + i - half, w));
      tmp(y, x) = acc;
    }
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (Eigen::Index i = 0; i < kernel.size(); ++i)
        acc += kernel[i] * tmp(reflect(y + i - half, h), x);
      out(y, x) = acc;
    }
  return out;
}

}  // namespace detail

template <typename Scalar>
SsimResult<Scalar> ssim(const Image<Scalar>& a, const Image<Scalar>& b,
                        const SsimParams& params = {}) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InputError("ssim: shape mismatch");
  if (a.rows() < 1) throw InputError("ssim: empty image");
  const Scalar scale = Scalar(1) / Scalar(params.hi - params.lo);
  Image<Scalar> u = (a.array() - Scalar(params.lo)).matrix() * scale;
  Image<Scalar> v = (b.array() - Scalar(params.lo)).matrix() * scale;
  const Scalar c1 = static_cast<Scalar>(params.k1 * params.k1);
  const Scalar c2 = static_cast<Scalar>(params.k2 * params.k2);

  const auto kernel = detail::gaussian_kernel<Scalar>(params.window, params.sigma);
  Image<Scalar> mu1 = detail::filter_reflect(u, kernel);
  Image<Scalar> mu2 = detail::filter_reflect(v, kernel);
  Image<Scalar> uu = detail::filter_reflect<Scalar>(u.cwiseProduct(u), kernel);
  Image<Scalar> vv = detail::filter_reflect<Scalar>(v.cwiseProduct(v), kernel);
  Image<Scalar> uv = detail::filter_reflect<Scalar>(u.cwiseProduct(v), kernel);

  SsimResult<Scalar> r;
  r.map.resize(a.rows(), a.cols());
  for (Eigen::Index y = 0; y < a.rows(); ++y)
    for (Eigen::Index x = 0; x < a.cols(); ++x) {
      const Scalar m1 = mu1(y, x), m2 = mu2(y, x);
      const Scalar m1m2 = m1 * m2;
      const Scalar s1 = uu(y, x) - m1 * m1;
      const Scalar s2 = vv(y, x) - m2 * m2;
      const Scalar s12 = uv(y, x) - m1m2;
      r.map(y, x) = ((2 * m1m2 + c1) * (2 * s12 + c2)) /
                    ((m1 * m1 + m2 * m2 + c1) * (s1 + s2 + c2));
    }
  r.score = r.map.sum() / static_cast<Scalar>(r.map.size());
  return r;
}

struct Histogram {
  Eigen::VectorXd bin_edges;  // monotone, length bins + 1
  Eigen::VectorXd counts;     // length bins
  bool normalized = false;

  int bins() const { return static_cast<int>(counts.size()); }

  bool same_binning(const Histogram& o) const {
    return bin_edges.size() == o.bin_edges.size() && bin_edges == o.bin_edges;
  }
};

/// Counts over equal-width bins spanning [lo, hi]; values outside the span
/// land in the end bins. The optional mask selects foreground pixels.
template <typename Scalar>
Histogram histogram(const Image<Scalar>& img, int bins,
                    const Image<bool>* mask = nullptr, double lo = -1.0, double hi = 1.0) {
  if (bins < 2) throw InputError("histogram: bins must be >= 2");
  if (mask && (mask->rows() != img.rows() || mask->cols() != img.cols()))
    throw InputError("histogram: mask shape mismatch");
  Histogram h;
  h.bin_edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.bin_edges[i] = lo + (hi - lo) * i / bins;
  h.counts = Eigen::VectorXd::Zero(bins);
  long selected = 0;
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      if (mask && !(*mask)(y, x)) continue;
      ++selected;
      double t = (static_cast<double>(img(y, x)) - lo) / (hi - lo);
      int bin = static_cast<int>(t * bins);
      bin = std::clamp(bin, 0, bins - 1);
      h.counts[bin] += 1.0;
    }
  if (mask && selected == 0) throw InputError("histogram: mask selects no pixels");
  return h;
}

/// Accumulates one image's counts into a pooled histogram built with the same
/// binning.
template <typename Scalar>
void accumulate_histogram(Histogram& pooled, const Image<Scalar>& img,
                          const Image<bool>* mask = nullptr) {
  Histogram h = histogram(img, pooled.bins(), mask, pooled.bin_edges[0],
                          pooled.bin_edges[pooled.bin_edges.size() - 1]);
  pooled.counts += h.counts;
}

inline Histogram make_histogram_frame(int bins, double lo = -1.0, double hi = 1.0) {
  if (bins < 2) throw InputError("histogram: bins must be >= 2");
  Histogram h;
  h.bin_edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.bin_edges[i] = lo + (hi - lo) * i / bins;
  h.counts = Eigen::VectorXd::Zero(bins);
  return h;
}

inline Histogram normalized(const Histogram& h) {
  const double total = h.counts.sum();
  if (total <= 0) throw InputError("histogram: cannot normalize an empty histogram");
  Histogram out = h;
  out.counts /= total;
  out.normalized = true;
  return out;
}

inline constexpr double kBhattacharyyaEps = 1e-12;

struct BhattacharyyaResult {
  double value;
  bool clamped;  // coefficient hit a clamp bound (disjoint or overfull support)

  operator double() const { return value; }
};

/// BD = -ln(sum_i sqrt(p_i q_i)) with the coefficient clamped to
/// [kBhattacharyyaEps, 1].
inline BhattacharyyaResult bhattacharyya_distance(const Histogram& p, const Histogram& q) {
  if (!p.same_binning(q)) throw InputError("bhattacharyya_distance: binning mismatch");
  if (!p.normalized || !q.normalized)
    throw InputError("bhattacharyya_distance: histograms must be normalized");
  double coeff = 0;
  for (int i = 0; i < p.bins(); ++i) coeff += std::sqrt(p.counts[i] * q.counts[i]);
  BhattacharyyaResult r{};
  r.clamped = coeff < kBhattacharyyaEps || coeff > 1.0;
  coeff = std::clamp(coeff, kBhattacharyyaEps, 1.0);
  r.value = -std::log(coeff);
  return r;
}

/// Pearson correlation of the two count vectors about their means. Scale
/// invariant, so raw and normalized counts give the same value.
inline double histogram_correlation(const Histogram& p, const Histogram& q) {
  if (!p.same_binning(q)) throw InputError("histogram_correlation: binning mismatch");
  const int n = p.bins();
  const double mp = p.counts.mean();
  const double mq = q.counts.mean();
  double spq = 0, spp = 0, sqq = 0;
  for (int i = 0; i < n; ++i) {
    const double dp = p.counts[i] - mp;
    const double dq = q.counts[i] - mq;
    spq += dp * dq;
    spp += dp * dp;
    sqq += dq * dq;
  }
  if (spp <= 0 || sqq <= 0)
    throw ZeroVarianceError("histogram_correlation: zero-variance histogram");
  return spq / std::sqrt(spp * sqq);
}

}  // namespace cycletrans
