#pragma once

// Reference MS-SSIM written as whole-array operations in the style of the
// widely used NumPy implementation: valid convolution with a flipped kernel,
// image-wide moment maps, and reflect-mode 2 x 2 box filtering followed by
// stride-2 subsampling.

#include <algorithm>
#include <cmath>
#include <vector>

namespace testkit::ref {

struct Array2 {
  int rows = 0, cols = 0;
  std::vector<double> v;
  Array2() = default;
  Array2(int r, int c, double fill = 0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

inline Array2 zip(const Array2& a, const Array2& b, double (*f)(double, double)) {
  Array2 out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = f(a.v[i], b.v[i]);
  return out;
}

inline Array2 fspecial_gauss(int size, double sigma) {
  const int radius = size / 2;
  double offset = 0.0;
  int start = -radius, stop = radius + 1;
  if (size % 2 == 0) {
    offset = 0.5;
    stop -= 1;
  }
  const int n = stop - start;
  Array2 g(n, n);
  double total = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = offset + start + i, y = offset + start + j;
      g(i, j) = std::exp(-((x * x + y * y) / (2.0 * sigma * sigma)));
      total += g(i, j);
    }
  for (double& x : g.v) x /= total;
  return g;
}

inline Array2 convolve_valid(const Array2& img, const Array2& k) {
  Array2 out(img.rows - k.rows + 1, img.cols - k.cols + 1);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      double s = 0;
      for (int i = 0; i < k.rows; ++i)
        for (int j = 0; j < k.cols; ++j) s += img(r + i, c + j) * k(k.rows - 1 - i, k.cols - 1 - j);
      out(r, c) = s;
    }
  return out;
}

inline int reflect(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - i - 1;
  return i;
}

inline Array2 box_downsample(const Array2& img) {
  Array2 filtered(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c)
      filtered(r, c) = 0.25 * (img(r, c) + img(r, reflect(c + 1, img.cols)) + img(reflect(r + 1, img.rows), c) +
                               img(reflect(r + 1, img.rows), reflect(c + 1, img.cols)));
  Array2 out((img.rows + 1) / 2, (img.cols + 1) / 2);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out(r, c) = filtered(2 * r, 2 * c);
  return out;
}

inline void ssim_for_multiscale(const Array2& a, const Array2& b, double& ssim, double& cs) {
  const double max_val = 255, k1 = 0.01, k2 = 0.03;
  const int filter_size = 11;
  const int size = std::min({filter_size, a.rows, a.cols});
  const double sigma = size * 1.5 / filter_size;
  const Array2 window = fspecial_gauss(size, sigma);
  const Array2 mu1 = convolve_valid(a, window), mu2 = convolve_valid(b, window);
  const Array2 aa = zip(a, a, [](double x, double y) { return x * y; });
  const Array2 bb = zip(b, b, [](double x, double y) { return x * y; });
  const Array2 ab = zip(a, b, [](double x, double y) { return x * y; });
  const Array2 mu11 = zip(mu1, mu1, [](double x, double y) { return x * y; });
  const Array2 mu22 = zip(mu2, mu2, [](double x, double y) { return x * y; });
  const Array2 mu12 = zip(mu1, mu2, [](double x, double y) { return x * y; });
  const Array2 s11 = zip(convolve_valid(aa, window), mu11, [](double x, double y) { return x - y; });
  const Array2 s22 = zip(convolve_valid(bb, window), mu22, [](double x, double y) { return x - y; });
  const Array2 s12 = zip(convolve_valid(ab, window), mu12, [](double x, double y) { return x - y; });
  const double c1 = (k1 * max_val) * (k1 * max_val), c2 = (k2 * max_val) * (k2 * max_val);
  double ssim_sum = 0, cs_sum = 0;
  for (std::size_t i = 0; i < mu1.v.size(); ++i) {
    const double v1 = 2.0 * s12.v[i] + c2, v2 = s11.v[i] + s22.v[i] + c2;
    ssim_sum += ((2.0 * mu12.v[i] + c1) * v1) / ((mu11.v[i] + mu22.v[i] + c1) * v2);
    cs_sum += v1 / v2;
  }
  ssim = ssim_sum / static_cast<double>(mu1.v.size());
  cs = cs_sum / static_cast<double>(mu1.v.size());
}

inline double multiscale_ssim(Array2 a, Array2 b) {
  const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  std::vector<double> mssim, mcs;
  for (int l = 0; l < 5; ++l) {
    double s, c;
    ssim_for_multiscale(a, b, s, c);
    mssim.push_back(s);
    mcs.push_back(c);
    a = box_downsample(a);
    b = box_downsample(b);
  }
  double out = 1;
  for (int l = 0; l < 4; ++l) out *= std::pow(std::max(0.0, mcs[static_cast<std::size_t>(l)]), weights[l]);
  return out * std::pow(std::max(0.0, mssim[4]), weights[4]);
}

// Bilinear resize expressed as separable interpolation matrices.
inline Array2 resize(const Array2& img, int rows, int cols) {
  auto matrix = [](int out, int in) {
    Array2 m(out, in);
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * in / out - 0.5;
      src = std::clamp(src, 0.0, in - 1.0);
      const int lo = static_cast<int>(std::floor(src));
      const int hi = std::min(lo + 1, in - 1);
      m(o, lo) += 1 - (src - lo);
      m(o, hi) += src - lo;
    }
    return m;
  };
  const Array2 my = matrix(rows, img.rows), mx = matrix(cols, img.cols);
  Array2 tmp(rows, img.cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < img.cols; ++c)
      for (int k = 0; k < img.rows; ++k) tmp(r, c) += my(r, k) * img(k, c);
  Array2 out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < img.cols; ++k) out(r, c) += tmp(r, k) * mx(c, k);
  return out;
}

}  // namespace testkit::ref
