#include "athv/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace athv {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gradient buffer of input i, or nullptr when it takes no gradient.
template <typename T>
T* grad_of(Node<T>& self, std::size_t i) {
  Node<T>& in = *self.inputs[i];
  return in.requires_grad ? in.grad_buffer().ptr() : nullptr;
}

template <typename T>
const Tensor<T>& value_of(Node<T>& self, std::size_t i) {
  return self.inputs[i]->value;
}

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;
  bool same = false;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b) {
  BroadcastPlan p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.resize(r);
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t d = r - 1 - k;
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    require(da == db || da == 1 || db == 1, ErrorCode::ShapeMismatch,
            "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    p.out[d] = std::max(da, db);
    p.stride_a[d] = da == 1 ? 0 : sa;
    p.stride_b[d] = db == 1 ? 0 : sb;
    sa *= da;
    sb *= db;
  }
  return p;
}

/// Calls f(o, ia, ib) for every output element in row-major order.
template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& f) {
  const std::size_t n = numel(p.out);
  if (p.same) {
    for (std::size_t o = 0; o < n; ++o) f(o, o, o);
    return;
  }
  const std::size_t r = p.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += p.stride_a[d];
      ib += p.stride_b[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.stride_a[d] * p.out[d];
      ib -= p.stride_b[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

/// Elementwise binary op. `partials(x, y, out)` returns (d out/dx, d out/dy).
template <typename T, typename Fwd, typename Partials>
Var<T> binary(const char* name, const Var<T>& a, const Var<T>& b, Fwd fwd, Partials partials) {
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape()));
  Tensor<T> out(plan->out);
  const T* pa = a.value().ptr();
  const T* pb = b.value().ptr();
  T* po = out.ptr();
  for_each_broadcast(*plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { po[o] = fwd(pa[ia], pb[ib]); });
  return record<T>(name, std::move(out), {a, b}, [plan, partials](Node<T>& self) {
    const T* x = value_of(self, 0).ptr();
    const T* y = value_of(self, 1).ptr();
    const T* g = self.grad.ptr();
    const T* out = self.value.ptr();
    T* gx = grad_of(self, 0);
    T* gy = grad_of(self, 1);
    for_each_broadcast(*plan, [&](std::size_t o, std::size_t ix, std::size_t iy) {
      const auto [dx, dy] = partials(x[ix], y[iy], out[o]);
      if (gx) gx[ix] += g[o] * dx;
      if (gy) gy[iy] += g[o] * dy;
    });
  });
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const char* name, const Var<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  const T* px = x.value().ptr();
  T* po = out.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = fwd(px[i]);
  return record<T>(name, std::move(out), {x}, [deriv](Node<T>& self) {
    const T* xv = value_of(self, 0).ptr();
    const T* yv = self.value.ptr();
    const T* g = self.grad.ptr();
    T* gx = grad_of(self, 0);
    for (std::size_t i = 0; i < self.value.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

struct Planes {
  std::size_t count, h, w;
};

template <typename T>
Planes planes_of(const Tensor<T>& t, const char* op) {
  require(t.rank() >= 2, ErrorCode::ShapeMismatch, std::string(op) + " needs rank >= 2, got " + shape_str(t.shape()));
  const std::size_t h = t.dim(t.rank() - 2), w = t.dim(t.rank() - 1);
  return {t.size() / (h * w), h, w};
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T, T, T) { return std::pair<T, T>{T(1), T(1)}; });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T, T, T) { return std::pair<T, T>{T(1), T(-1)}; });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T x, T y, T) { return std::pair<T, T>{y, x}; });
}

template <typename T>
Var<T> maximum(const Var<T>& a, const Var<T>& b) {
  return binary<T>(
      "maximum", a, b, [](T x, T y) { return x >= y ? x : y; },
      [](T x, T y, T) { return x >= y ? std::pair<T, T>{T(1), T(0)} : std::pair<T, T>{T(0), T(1)}; });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  return unary<T>(
      "scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        // Split by sign so exp never overflows.
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const Var<T>& bias, int stride, int padding) {
  const auto& xs = x.shape();
  const auto& ks = kernel.shape();
  require(xs.size() == 3, ErrorCode::ShapeMismatch, "conv2d input must be [C,H,W], got " + shape_str(xs));
  require(ks.size() == 4, ErrorCode::ShapeMismatch, "conv2d kernel must be [Co,Ci,kH,kW], got " + shape_str(ks));
  require(ks[1] == xs[0], ErrorCode::ShapeMismatch,
          "conv2d kernel expects " + std::to_string(ks[1]) + " input channels, input has " + std::to_string(xs[0]));
  require(bias.shape() == Shape{ks[0]}, ErrorCode::ShapeMismatch, "conv2d bias must be [" + std::to_string(ks[0]) + "]");
  require(ks[2] % 2 == 1 && ks[3] % 2 == 1, ErrorCode::InvalidArgument, "conv2d kernel extents must be odd");
  require(stride >= 1 && padding >= 0, ErrorCode::InvalidArgument, "conv2d needs stride >= 1 and padding >= 0");

  const long cin = long(xs[0]), h = long(xs[1]), w = long(xs[2]);
  const long cout = long(ks[0]), kh = long(ks[2]), kw = long(ks[3]);
  const long s = stride, p = padding;
  require(h + 2 * p >= kh && w + 2 * p >= kw, ErrorCode::ShapeMismatch, "conv2d kernel larger than padded input");
  const long ho = (h + 2 * p - kh) / s + 1, wo = (w + 2 * p - kw) / s + 1;
  const long kdim = cin * kh * kw, pix = ho * wo;

  // Pointwise kernels read the input directly; others go through im2col.
  const bool direct = kh == 1 && kw == 1 && s == 1 && p == 0;
  auto cols = std::make_shared<Buffer<T>>();
  if (!direct) {
    cols->assign(std::size_t(kdim * pix), T(0));
    const T* px = x.value().ptr();
    for (long c = 0; c < cin; ++c)
      for (long ki = 0; ki < kh; ++ki)
        for (long kj = 0; kj < kw; ++kj) {
          T* row = cols->data() + ((c * kh + ki) * kw + kj) * pix;
          for (long oy = 0; oy < ho; ++oy) {
            const long iy = oy * s - p + ki;
            if (iy < 0 || iy >= h) continue;
            const T* src = px + (c * h + iy) * w;
            for (long ox = 0; ox < wo; ++ox) {
              const long ix = ox * s - p + kj;
              if (ix >= 0 && ix < w) row[oy * wo + ox] = src[ix];
            }
          }
        }
  }

  Tensor<T> out(Shape{std::size_t(cout), std::size_t(ho), std::size_t(wo)});
  {
    Eigen::Map<const RowMat<T>> km(kernel.value().ptr(), cout, kdim);
    Eigen::Map<const RowMat<T>> cm(direct ? x.value().ptr() : cols->data(), kdim, pix);
    Eigen::Map<RowMat<T>> om(out.ptr(), cout, pix);
    om.noalias() = km * cm;
    const T* pb = bias.value().ptr();
    for (long o = 0; o < cout; ++o) om.row(o).array() += pb[o];
  }

  return record<T>("conv2d", std::move(out), {x, kernel, bias}, [=](Node<T>& self) {
    Eigen::Map<const RowMat<T>> g(self.grad.ptr(), cout, pix);
    const T* colsrc = direct ? value_of(self, 0).ptr() : cols->data();
    Eigen::Map<const RowMat<T>> cm(colsrc, kdim, pix);
    if (T* gk = grad_of(self, 1)) {
      Eigen::Map<RowMat<T>> gkm(gk, cout, kdim);
      gkm.noalias() += g * cm.transpose();
    }
    if (T* gb = grad_of(self, 2)) {
      for (long o = 0; o < cout; ++o) gb[o] += g.row(o).sum();
    }
    if (T* gx = grad_of(self, 0)) {
      Eigen::Map<const RowMat<T>> km(value_of(self, 1).ptr(), cout, kdim);
      if (direct) {
        Eigen::Map<RowMat<T>> gxm(gx, kdim, pix);
        gxm.noalias() += km.transpose() * g;
        return;
      }
      RowMat<T> gcols = km.transpose() * g;
      for (long c = 0; c < cin; ++c)
        for (long ki = 0; ki < kh; ++ki)
          for (long kj = 0; kj < kw; ++kj) {
            const T* row = gcols.data() + ((c * kh + ki) * kw + kj) * pix;
            for (long oy = 0; oy < ho; ++oy) {
              const long iy = oy * s - p + ki;
              if (iy < 0 || iy >= h) continue;
              T* dst = gx + (c * h + iy) * w;
              for (long ox = 0; ox < wo; ++ox) {
                const long ix = ox * s - p + kj;
                if (ix >= 0 && ix < w) dst[ix] += row[oy * wo + ox];
              }
            }
          }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require(x.shape().size() == 3, ErrorCode::ShapeMismatch, "global_avg_pool needs [C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  Tensor<T> out(Shape{c});
  const T* px = x.value().ptr();
  for (std::size_t k = 0; k < c; ++k) {
    T acc = 0;
    for (std::size_t i = 0; i < hw; ++i) acc += px[k * hw + i];
    out[k] = acc / T(hw);
  }
  return record<T>("global_avg_pool", std::move(out), {x}, [c, hw](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t k = 0; k < c; ++k) {
      const T gk = self.grad[k] / T(hw);
      for (std::size_t i = 0; i < hw; ++i) gx[k * hw + i] += gk;
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require(x.shape().size() == 1 && weight.shape().size() == 2, ErrorCode::ShapeMismatch,
          "linear needs x[in] and W[out,in], got " + shape_str(x.shape()) + " and " + shape_str(weight.shape()));
  const std::size_t in = x.shape()[0], outn = weight.shape()[0];
  require(weight.shape()[1] == in, ErrorCode::ShapeMismatch,
          "linear weight " + shape_str(weight.shape()) + " does not accept input " + shape_str(x.shape()));
  require(bias.shape() == Shape{outn}, ErrorCode::ShapeMismatch, "linear bias must be [" + std::to_string(outn) + "]");
  Tensor<T> out(Shape{outn});
  const T* pw = weight.value().ptr();
  const T* px = x.value().ptr();
  for (std::size_t o = 0; o < outn; ++o) {
    T acc = bias.value()[o];
    for (std::size_t i = 0; i < in; ++i) acc += pw[o * in + i] * px[i];
    out[o] = acc;
  }
  return record<T>("linear", std::move(out), {x, weight, bias}, [in, outn](Node<T>& self) {
    const T* g = self.grad.ptr();
    const T* px = value_of(self, 0).ptr();
    const T* pw = value_of(self, 1).ptr();
    if (T* gx = grad_of(self, 0))
      for (std::size_t o = 0; o < outn; ++o)
        for (std::size_t i = 0; i < in; ++i) gx[i] += pw[o * in + i] * g[o];
    if (T* gw = grad_of(self, 1))
      for (std::size_t o = 0; o < outn; ++o)
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += g[o] * px[i];
    if (T* gb = grad_of(self, 2))
      for (std::size_t o = 0; o < outn; ++o) gb[o] += g[o];
  });
}

template <typename T>
Var<T> pool_down(const Var<T>& x) {
  const auto [n, h, w] = planes_of(x.value(), "pool_down");
  require(h % 2 == 0 && w % 2 == 0, ErrorCode::InvalidArgument,
          "pool_down needs even spatial extents, got " + shape_str(x.shape()));
  Shape os = x.shape();
  os[os.size() - 2] = h / 2;
  os[os.size() - 1] = w / 2;
  Tensor<T> out(os);
  const T* px = x.value().ptr();
  const std::size_t h2 = h / 2, w2 = w / 2;
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j) {
        const T* src = px + c * h * w + 2 * i * w + 2 * j;
        out[(c * h2 + i) * w2 + j] = (src[0] + src[1] + src[w] + src[w + 1]) * T(0.25);
      }
  return record<T>("pool_down", std::move(out), {x}, [n, h, w, h2, w2](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < h2; ++i)
        for (std::size_t j = 0; j < w2; ++j) {
          const T g = self.grad[(c * h2 + i) * w2 + j] * T(0.25);
          T* dst = gx + c * h * w + 2 * i * w + 2 * j;
          dst[0] += g;
          dst[1] += g;
          dst[w] += g;
          dst[w + 1] += g;
        }
  });
}

template <typename T>
Var<T> upsample(const Var<T>& x) {
  const auto [n, h, w] = planes_of(x.value(), "upsample");
  Shape os = x.shape();
  os[os.size() - 2] = 2 * h;
  os[os.size() - 1] = 2 * w;
  Tensor<T> out(os);
  const T* px = x.value().ptr();
  const std::size_t W2 = 2 * w;
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < W2; ++j) out[(c * 2 * h + i) * W2 + j] = px[(c * h + i / 2) * w + j / 2];
  return record<T>("upsample", std::move(out), {x}, [n, h, w, W2](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < 2 * h; ++i)
        for (std::size_t j = 0; j < W2; ++j) gx[(c * h + i / 2) * w + j / 2] += self.grad[(c * 2 * h + i) * W2 + j];
  });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const auto [n, h, w] = planes_of(x.value(), "instance_norm");
  const std::size_t hw = h * w;
  Tensor<T> out(x.shape());
  auto inv_std = std::make_shared<std::vector<T>>(n);
  const T* px = x.value().ptr();
  for (std::size_t c = 0; c < n; ++c) {
    const T* src = px + c * hw;
    T mu = 0;
    for (std::size_t i = 0; i < hw; ++i) mu += src[i];
    mu /= T(hw);
    T var = 0;
    for (std::size_t i = 0; i < hw; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= T(hw);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] = (src[i] - mu) * is;
  }
  return record<T>("instance_norm", std::move(out), {x}, [n, hw, inv_std](Node<T>& self) {
    T* gx = grad_of(self, 0);
    const T* y = self.value.ptr();
    const T* g = self.grad.ptr();
    for (std::size_t c = 0; c < n; ++c) {
      T sg = 0, sgy = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        sg += g[c * hw + i];
        sgy += g[c * hw + i] * y[c * hw + i];
      }
      const T is = (*inv_std)[c];
      const T inv_n = T(1) / T(hw);
      for (std::size_t i = 0; i < hw; ++i)
        gx[c * hw + i] += is * (g[c * hw + i] - sg * inv_n - y[c * hw + i] * sgy * inv_n);
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs) {
  require(!xs.empty(), ErrorCode::InvalidArgument, "concat of nothing");
  Shape os = xs[0].shape();
  std::size_t total = 0;
  for (const auto& v : xs) {
    const Shape& s = v.shape();
    require(s.size() == os.size() && std::equal(s.begin() + 1, s.end(), os.begin() + 1), ErrorCode::ShapeMismatch,
            "concat of " + shape_str(os) + " and " + shape_str(s));
    total += s[0];
  }
  os[0] = total;
  Tensor<T> out(os);
  std::size_t offset = 0;
  auto sizes = std::make_shared<std::vector<std::size_t>>();
  for (const auto& v : xs) {
    std::copy(v.value().data().begin(), v.value().data().end(), out.ptr() + offset);
    offset += v.size();
    sizes->push_back(v.size());
  }
  return record<T>("concat", std::move(out), xs, [sizes](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < sizes->size(); ++i) {
      if (T* g = grad_of(self, i))
        for (std::size_t k = 0; k < (*sizes)[i]; ++k) g[k] += self.grad[off + k];
      off += (*sizes)[i];
    }
  });
}

template <typename T>
Var<T> narrow(const Var<T>& x, std::size_t start, std::size_t length) {
  require(x.shape().size() >= 1 && length >= 1 && start + length <= x.shape()[0], ErrorCode::ShapeMismatch,
          "narrow [" + std::to_string(start) + "," + std::to_string(start + length) + ") out of " + shape_str(x.shape()));
  Shape os = x.shape();
  os[0] = length;
  const std::size_t inner = x.size() / x.shape()[0];
  Tensor<T> out(os);
  const std::size_t off = start * inner;
  std::copy_n(x.value().ptr() + off, out.size(), out.ptr());
  return record<T>("narrow", std::move(out), {x}, [off](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t k = 0; k < self.grad.size(); ++k) gx[off + k] += self.grad[k];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return record<T>("reshape", std::move(out), {x}, [](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t k = 0; k < self.grad.size(); ++k) gx[k] += self.grad[k];
  });
}

namespace {

std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return std::size_t(i < n ? i : period - i);
}

}  // namespace

template <typename T>
Var<T> reflect_pad(const Var<T>& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
  const auto [n, h, w] = planes_of(x.value(), "reflect_pad");
  const std::size_t ph = h + top + bottom, pw = w + left + right;
  Shape os = x.shape();
  os[os.size() - 2] = ph;
  os[os.size() - 1] = pw;
  Tensor<T> out(os);
  // Source offset for every padded pixel, shared with backward.
  auto src = std::make_shared<std::vector<std::size_t>>(ph * pw);
  for (std::size_t i = 0; i < ph; ++i)
    for (std::size_t j = 0; j < pw; ++j)
      (*src)[i * pw + j] = reflect_index(long(i) - long(top), long(h)) * w + reflect_index(long(j) - long(left), long(w));
  const T* px = x.value().ptr();
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t k = 0; k < ph * pw; ++k) out[c * ph * pw + k] = px[c * h * w + (*src)[k]];
  return record<T>("reflect_pad", std::move(out), {x}, [n, h, w, ph, pw, src](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t k = 0; k < ph * pw; ++k) gx[c * h * w + (*src)[k]] += self.grad[c * ph * pw + k];
  });
}

template <typename T>
Var<T> crop(const Var<T>& x, std::size_t top, std::size_t left, std::size_t ch, std::size_t cw) {
  const auto [n, h, w] = planes_of(x.value(), "crop");
  require(ch >= 1 && cw >= 1 && top + ch <= h && left + cw <= w, ErrorCode::ShapeMismatch,
          "crop window outside " + shape_str(x.shape()));
  Shape os = x.shape();
  os[os.size() - 2] = ch;
  os[os.size() - 1] = cw;
  Tensor<T> out(os);
  const T* px = x.value().ptr();
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t i = 0; i < ch; ++i)
      std::copy_n(px + c * h * w + (top + i) * w + left, cw, out.ptr() + (c * ch + i) * cw);
  return record<T>("crop", std::move(out), {x}, [=](Node<T>& self) {
    T* gx = grad_of(self, 0);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < ch; ++i)
        for (std::size_t j = 0; j < cw; ++j) gx[c * h * w + (top + i) * w + left + j] += self.grad[(c * ch + i) * cw + j];
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (T v : x.value().data()) acc += v;
  return record<T>("sum", Tensor<T>::scalar(acc), {x}, [](Node<T>& self) {
    T* gx = grad_of(self, 0);
    const T g = self.grad[0];
    for (std::size_t k = 0; k < self.inputs[0]->value.size(); ++k) gx[k] += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / T(x.size()));
}

template <typename T>
Var<T> nrmse_loss(const Tensor<T>& target, const Var<T>& pred, double eps) {
  require(target.shape() == pred.shape(), ErrorCode::ShapeMismatch,
          "nrmse target " + shape_str(target.shape()) + " vs prediction " + shape_str(pred.shape()));
  const auto [lo, hi] = std::minmax_element(target.data().begin(), target.data().end());
  const double denom = double(*hi) - double(*lo) + eps;
  const std::size_t n = target.size();
  double sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(pred.value()[i]) - double(target[i]);
    sq += d * d;
  }
  const double rmse = std::sqrt(sq / double(n));
  auto tgt = std::make_shared<Tensor<T>>(target);
  return record<T>("nrmse", Tensor<T>::scalar(T(rmse / denom)), {pred}, [tgt, rmse, denom, n](Node<T>& self) {
    if (rmse == 0.0) return;
    T* gp = grad_of(self, 0);
    const T* p = self.inputs[0]->value.ptr();
    const double k = double(self.grad[0]) / (double(n) * rmse * denom);
    for (std::size_t i = 0; i < n; ++i) gp[i] += T(k * (double(p[i]) - double((*tgt)[i])));
  });
}

#define ATHV_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                             \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                             \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                             \
  template Var<T> maximum(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, T);                                                       \
  template Var<T> relu(const Var<T>&);                                                           \
  template Var<T> sigmoid(const Var<T>&);                                                        \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                 \
  template Var<T> global_avg_pool(const Var<T>&);                                                \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                           \
  template Var<T> pool_down(const Var<T>&);                                                      \
  template Var<T> upsample(const Var<T>&);                                                       \
  template Var<T> instance_norm(const Var<T>&, T);                                               \
  template Var<T> concat(const std::vector<Var<T>>&);                                            \
  template Var<T> narrow(const Var<T>&, std::size_t, std::size_t);                               \
  template Var<T> reshape(const Var<T>&, Shape);                                                 \
  template Var<T> reflect_pad(const Var<T>&, std::size_t, std::size_t, std::size_t, std::size_t); \
  template Var<T> crop(const Var<T>&, std::size_t, std::size_t, std::size_t, std::size_t);       \
  template Var<T> sum(const Var<T>&);                                                            \
  template Var<T> mean(const Var<T>&);                                                           \
  template Var<T> nrmse_loss(const Tensor<T>&, const Var<T>&, double);

ATHV_INSTANTIATE_OPS(float)
ATHV_INSTANTIATE_OPS(double)

}  // namespace athv
