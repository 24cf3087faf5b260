#include "hpgm/numcore/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace hpgm::nc {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) throw ShapeMismatch(op, a, b);
    out[i] = std::max(da, db);
  }
  return out;
}

// Flat input offset for every flat output offset.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::size_t> stride(r, 0);
  std::size_t s = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    std::size_t i = k + (r - in.size());
    stride[i] = in[k] == 1 ? 0 : s;
    s *= in[k];
  }
  std::vector<std::size_t> idx(numel(out));
  std::vector<std::size_t> counter(r, 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < idx.size(); ++flat) {
    idx[flat] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      off += stride[d];
      if (counter[d] < out[d]) break;
      off -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return idx;
}

template <typename Fwd, typename Bwd>
Tensor binary_broadcast(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
  Tensor out(out_shape);
  if (a.shape() == out_shape && b.shape() == out_shape) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[i], b[i]);
    TensorData *pa = a.impl(), *pb = b.impl(), *po = out.impl();
    detail::record({a, b}, out, [pa, pb, po] {
      for (std::size_t i = 0; i < po->value.size(); ++i) {
        auto [ga, gb] = Bwd{}(pa->value[i], pb->value[i], po->grad[i]);
        if (pa->requires_grad) pa->grad[i] += ga;
        if (pb->requires_grad) pb->grad[i] += gb;
      }
    });
    return out;
  }
  auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(a.shape(), out_shape));
  auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(b.shape(), out_shape));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[(*ia)[i]], b[(*ib)[i]]);
  TensorData *pa = a.impl(), *pb = b.impl(), *po = out.impl();
  detail::record({a, b}, out, [pa, pb, po, ia, ib] {
    for (std::size_t i = 0; i < po->value.size(); ++i) {
      std::size_t j = (*ia)[i], k = (*ib)[i];
      auto [ga, gb] = Bwd{}(pa->value[j], pb->value[k], po->grad[i]);
      if (pa->requires_grad) pa->grad[j] += ga;
      if (pb->requires_grad) pb->grad[k] += gb;
    }
  });
  (void)bwd;
  return out;
}

struct AddGrad {
  std::pair<double, double> operator()(double, double, double g) const { return {g, g}; }
};
struct SubGrad {
  std::pair<double, double> operator()(double, double, double g) const { return {g, -g}; }
};
struct MulGrad {
  std::pair<double, double> operator()(double x, double y, double g) const { return {g * y, g * x}; }
};

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fwd(a[i]);
  TensorData *pa = a.impl(), *po = out.impl();
  detail::record({a}, out, [pa, po, deriv] {
    for (std::size_t i = 0; i < po->value.size(); ++i)
      pa->grad[i] += po->grad[i] * deriv(pa->value[i], po->value[i]);
  });
  return out;
}

// Splits `shape` around `axis` into (outer, axis extent, inner).
std::tuple<std::size_t, std::size_t, std::size_t> split_axis(const Shape& shape, std::size_t axis) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  return {outer, shape[axis], inner};
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeMismatch(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                        to_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast("add", a, b, [](double x, double y) { return x + y; }, AddGrad{});
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast("sub", a, b, [](double x, double y) { return x - y; }, SubGrad{});
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast("mul", a, b, [](double x, double y) { return x * y; }, MulGrad{});
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::scalar(std::accumulate(a.data().begin(), a.data().end(), 0.0));
  TensorData *pa = a.impl(), *po = out.impl();
  detail::record({a}, out, [pa, po] {
    for (double& g : pa->grad) g += po->grad[0];
  });
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeMismatch("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) throw ShapeMismatch("matmul", a.shape(), b.shape());
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  Tensor out(Shape{a.dim(0), b.dim(1)});
  MapMat(out.data().data(), m, n).noalias() =
      CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, n);
  TensorData *pa = a.impl(), *pb = b.impl(), *po = out.impl();
  detail::record({a, b}, out, [pa, pb, po, m, k, n] {
    CMapMat g(po->grad.data(), m, n);
    if (pa->requires_grad)
      MapMat(pa->grad.data(), m, k).noalias() += g * CMapMat(pb->value.data(), k, n).transpose();
    if (pb->requires_grad)
      MapMat(pb->grad.data(), k, n).noalias() += CMapMat(pa->value.data(), m, k).transpose() * g;
  });
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) throw ShapeMismatch("reshape", a.shape(), shape);
  Tensor out(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  TensorData *pa = a.impl(), *po = out.impl();
  detail::record({a}, out, [pa, po] {
    for (std::size_t i = 0; i < po->grad.size(); ++i) pa->grad[i] += po->grad[i];
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeMismatch("concat: axis out of range for " + to_string(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == ref[i];
    if (!ok) throw ShapeMismatch("concat", ref, s);
    out_shape[axis] += s[axis];
  }
  Tensor out(out_shape);
  auto [outer, total, inner] = split_axis(out_shape, axis);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const std::size_t ext = p.dim(axis);
    offsets.push_back(offset);
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.data().data() + o * ext * inner, ext * inner,
                  out.data().data() + (o * total + offset) * inner);
    offset += ext;
  }
  std::vector<TensorData*> raw;
  for (const auto& p : parts) raw.push_back(p.impl());
  TensorData* po = out.impl();
  detail::record(parts, out, [raw, offsets, po, outer, total, inner, axis] {
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (!raw[k]->requires_grad) continue;
      const std::size_t ext = raw[k]->shape[axis];
      for (std::size_t o = 0; o < outer; ++o) {
        const double* src = po->grad.data() + (o * total + offsets[k]) * inner;
        double* dst = raw[k]->grad.data() + o * ext * inner;
        for (std::size_t i = 0; i < ext * inner; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(a, [slope](double x) { return x > 0 ? x : slope * x; },
               [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) throw ShapeMismatch("softmax: axis out of range for " + to_string(a.shape()));
  auto [outer, ext, inner] = split_axis(a.shape(), axis);
  Tensor out(a.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * ext * inner + i;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < ext; ++k) mx = std::max(mx, a[base + k * inner]);
      double z = 0;
      for (std::size_t k = 0; k < ext; ++k) z += (out[base + k * inner] = std::exp(a[base + k * inner] - mx));
      for (std::size_t k = 0; k < ext; ++k) out[base + k * inner] /= z;
    }
  }
  TensorData *pa = a.impl(), *po = out.impl();
  detail::record({a}, out, [pa, po, outer = outer, ext = ext, inner = inner] {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * ext * inner + i;
        double dot = 0;
        for (std::size_t k = 0; k < ext; ++k) dot += po->grad[base + k * inner] * po->value[base + k * inner];
        for (std::size_t k = 0; k < ext; ++k) {
          const std::size_t j = base + k * inner;
          pa->grad[j] += po->value[j] * (po->grad[j] - dot);
        }
      }
    }
  });
  return out;
}

Tensor upsample2x_nearest(const Tensor& x) {
  require_rank("upsample2x_nearest", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out(Shape{n, c, 2 * h, 2 * w});
  const std::size_t planes = n * c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data().data() + p * h * w;
    double* dst = out.data().data() + p * 4 * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
  }
  TensorData *px = x.impl(), *po = out.impl();
  detail::record({x}, out, [px, po, planes, h, w] {
    for (std::size_t p = 0; p < planes; ++p) {
      const double* g = po->grad.data() + p * 4 * h * w;
      double* dst = px->grad.data() + p * h * w;
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += g[y * 2 * w + xx];
    }
  });
  return out;
}

namespace {

constexpr std::size_t kIm2colBudget = std::size_t{1} << 20;  // doubles per unfolded chunk

struct ConvGeom {
  std::size_t n, c, h, w, o, k, stride, pad, ho, wo;
  std::size_t rows() const { return c * k * k; }
  std::size_t cols() const { return n * ho * wo; }
};

void im2col(const ConvGeom& g, const double* x, double* cols) {
  const std::size_t hw = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.c; ++ci)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((ci * g.k + ky) * g.k + kx) * g.cols();
        for (std::size_t ni = 0; ni < g.n; ++ni) {
          const double* plane = x + (ni * g.c + ci) * g.h * g.w;
          double* dst = row + ni * hw;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) &&
                                  ix < static_cast<long>(g.w);
              dst[oy * g.wo + ox] = inside ? plane[iy * g.w + ix] : 0.0;
            }
          }
        }
      }
}

void col2im(const ConvGeom& g, const double* cols, double* dx) {
  const std::size_t hw = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.c; ++ci)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((ci * g.k + ky) * g.k + kx) * g.cols();
        for (std::size_t ni = 0; ni < g.n; ++ni) {
          double* plane = dx + (ni * g.c + ci) * g.h * g.w;
          const double* src = row + ni * hw;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              plane[iy * g.w + ix] += src[oy * g.wo + ox];
            }
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opt) {
  require_rank("conv2d input", x, 4);
  require_rank("conv2d weight", weight, 4);
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3))
    throw ShapeMismatch("conv2d", x.shape(), weight.shape());
  if (opt.stride == 0) throw ShapeMismatch("conv2d: stride must be positive");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))
    throw ShapeMismatch("conv2d bias", weight.shape(), bias.shape());
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), opt.stride,
             opt.padding, 0, 0};
  if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k)
    throw ShapeMismatch("conv2d: kernel larger than padded input", x.shape(), weight.shape());
  g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;

  // Samples are processed in chunks so the unfolded buffer stays small.
  const std::size_t chunk = std::max<std::size_t>(1, kIm2colBudget / std::max<std::size_t>(1, g.rows() * g.ho * g.wo));
  const std::size_t hw = g.ho * g.wo, in_plane = g.c * g.h * g.w;
  Tensor out(Shape{g.n, g.o, g.ho, g.wo});
  {
    std::vector<double> cols;
    for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
      ConvGeom gc = g;
      gc.n = std::min(chunk, g.n - n0);
      cols.resize(gc.rows() * gc.cols());
      im2col(gc, x.data().data() + n0 * in_plane, cols.data());
      const RowMat prod = CMapMat(weight.data().data(), g.o, g.rows()) * CMapMat(cols.data(), gc.rows(), gc.cols());
      for (std::size_t ni = 0; ni < gc.n; ++ni)
        for (std::size_t oc = 0; oc < g.o; ++oc) {
          const double b = bias.defined() ? bias[oc] : 0.0;
          const double* src = prod.data() + oc * gc.cols() + ni * hw;
          double* dst = out.data().data() + ((n0 + ni) * g.o + oc) * hw;
          for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] + b;
        }
    }
  }

  TensorData *px = x.impl(), *pw = weight.impl(), *po = out.impl();
  TensorData* pb = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  detail::record(inputs, out, [px, pw, pb, po, g, chunk, hw, in_plane] {
    std::vector<double> cols;
    for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
      ConvGeom gc = g;
      gc.n = std::min(chunk, g.n - n0);
      RowMat gout(g.o, gc.cols());
      for (std::size_t ni = 0; ni < gc.n; ++ni)
        for (std::size_t oc = 0; oc < g.o; ++oc)
          std::copy_n(po->grad.data() + ((n0 + ni) * g.o + oc) * hw, hw, gout.data() + oc * gc.cols() + ni * hw);
      if (pb && pb->requires_grad)
        for (std::size_t oc = 0; oc < g.o; ++oc) pb->grad[oc] += gout.row(oc).sum();
      if (pw->requires_grad) {
        cols.resize(gc.rows() * gc.cols());
        im2col(gc, px->value.data() + n0 * in_plane, cols.data());
        MapMat(pw->grad.data(), g.o, g.rows()).noalias() +=
            gout * CMapMat(cols.data(), gc.rows(), gc.cols()).transpose();
      }
      if (px->requires_grad) {
        const RowMat dcols = CMapMat(pw->value.data(), g.o, g.rows()).transpose() * gout;
        col2im(gc, dcols.data(), px->grad.data() + n0 * in_plane);
      }
    }
  });
  return out;
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                   BatchNormMode mode) {
  require_rank("batchnorm2d", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.size() != c || beta.size() != c || stats.running_mean.size() != c)
    throw ShapeMismatch("batchnorm2d", x.shape(), gamma.shape());
  const double count = static_cast<double>(n * hw);
  std::vector<double> mu(c), inv_std(c);
  if (mode == BatchNormMode::kTrain) {
    if (n * hw < 2) throw ShapeMismatch("batchnorm2d: training needs more than one value per channel");
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0;
      for (std::size_t ni = 0; ni < n; ++ni) {
        const double* p = x.data().data() + (ni * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      mu[ch] = s / count;
      double v = 0;
      for (std::size_t ni = 0; ni < n; ++ni) {
        const double* p = x.data().data() + (ni * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - mu[ch]) * (p[i] - mu[ch]);
      }
      const double var = v / count;
      inv_std[ch] = 1.0 / std::sqrt(var + stats.eps);
      stats.running_mean[ch] = (1 - stats.momentum) * stats.running_mean[ch] + stats.momentum * mu[ch];
      stats.running_var[ch] =
          (1 - stats.momentum) * stats.running_var[ch] + stats.momentum * v / (count - 1.0);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = stats.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.running_var[ch] + stats.eps);
    }
  }
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (ni * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (x[base + i] - mu[ch]) * inv_std[ch];
        (*xhat)[base + i] = xh;
        out[base + i] = gamma[ch] * xh + beta[ch];
      }
    }
  TensorData *px = x.impl(), *pg = gamma.impl(), *pb = beta.impl(), *po = out.impl();
  const bool train = mode == BatchNormMode::kTrain;
  detail::record({x, gamma, beta}, out, [px, pg, pb, po, xhat, inv_std, n, c, hw, count, train] {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_g = 0, sum_gx = 0;
      for (std::size_t ni = 0; ni < n; ++ni) {
        const std::size_t base = (ni * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g += po->grad[base + i];
          sum_gx += po->grad[base + i] * (*xhat)[base + i];
        }
      }
      if (pg->requires_grad) pg->grad[ch] += sum_gx;
      if (pb->requires_grad) pb->grad[ch] += sum_g;
      if (!px->requires_grad) continue;
      const double k = pg->value[ch] * inv_std[ch];
      for (std::size_t ni = 0; ni < n; ++ni) {
        const std::size_t base = (ni * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double gi = po->grad[base + i];
          px->grad[base + i] += train ? k * (gi - sum_g / count - (*xhat)[base + i] * sum_gx / count)
                                      : k * gi;
        }
      }
    }
  });
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out(Shape{n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    double s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += x[p * hw + i];
    out[p] = s / static_cast<double>(hw);
  }
  TensorData *px = x.impl(), *po = out.impl();
  detail::record({x}, out, [px, po, n, c, hw] {
    for (std::size_t p = 0; p < n * c; ++p)
      for (std::size_t i = 0; i < hw; ++i) px->grad[p * hw + i] += po->grad[p] / static_cast<double>(hw);
  });
  return out;
}

Tensor bce_loss(const Tensor& prob, const Tensor& target) {
  if (prob.shape() != target.shape()) throw ShapeMismatch("bce_loss", prob.shape(), target.shape());
  if (prob.size() == 0) throw ShapeMismatch("bce_loss of empty tensor");
  const double count = static_cast<double>(prob.size());
  double total = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kProbEps, 1 - kProbEps);
    total -= target[i] * std::log(p) + (1 - target[i]) * std::log(1 - p);
  }
  Tensor out = Tensor::scalar(total / count);
  TensorData *pp = prob.impl(), *pt = target.impl(), *po = out.impl();
  detail::record({prob, target}, out, [pp, pt, po, count] {
    const double g = po->grad[0] / count;
    for (std::size_t i = 0; i < pp->value.size(); ++i) {
      const double raw = pp->value[i];
      const double p = std::clamp(raw, kProbEps, 1 - kProbEps);
      const double t = pt->value[i];
      if (pp->requires_grad && raw == p) pp->grad[i] += g * (-t / p + (1 - t) / (1 - p));
      if (pt->requires_grad) pt->grad[i] += g * (-std::log(p) + std::log(1 - p));
    }
  });
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n)
    throw ShapeMismatch("softmax_cross_entropy", logits.shape(), Shape{labels.size()});
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= k)
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(l) + " outside [0, " +
                              std::to_string(k) + ")");
  const double floor = std::log(kProbEps);
  auto probs = std::make_shared<std::vector<double>>(n * k);
  auto clamped = std::make_shared<std::vector<bool>>(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - lse);
    const double logp = row[labels[i]] - lse;
    (*clamped)[i] = logp < floor;
    total -= std::max(logp, floor);
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  TensorData *pl = logits.impl(), *po = out.impl();
  detail::record({logits}, out, [pl, po, probs, clamped, labels, n, k] {
    const double g = po->grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      if ((*clamped)[i]) continue;
      for (std::size_t j = 0; j < k; ++j) {
        const double onehot = static_cast<int>(j) == labels[i] ? 1.0 : 0.0;
        pl->grad[i * k + j] += g * ((*probs)[i * k + j] - onehot);
      }
    }
  });
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) throw ShapeMismatch("mse_loss", pred.shape(), target.shape());
  Tensor d = sub(pred, target);
  return mean(mul(d, d));
}

}  // namespace hpgm::nc
