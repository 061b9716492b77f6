#include "athv/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>

#include "athv/ops.hpp"

namespace athv {
namespace {

bool is_pow2(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

/// Twiddles exp(-2 pi i k / n) for k < n/2, computed in double once per size.
template <typename T>
const std::vector<std::complex<T>>& twiddles(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<std::complex<T>>> cache;
  std::lock_guard lock(mu);
  auto& tw = cache[n];
  if (tw.empty() && n > 1) {
    tw.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * double(k) / double(n);
      tw[k] = {T(std::cos(a)), T(std::sin(a))};
    }
  }
  return tw;
}

/// In-place iterative radix-2 FFT over `n` points spaced `stride` apart.
template <typename T>
void fft1d(std::complex<T>* a, std::size_t n, std::size_t stride, bool inverse, const std::vector<std::complex<T>>& tw) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i * stride], a[j * stride]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, step = n / len;
    for (std::size_t i = 0; i < n; i += len)
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<T> w = tw[k * step];
        if (inverse) w = std::conj(w);
        std::complex<T>& u = a[(i + k) * stride];
        std::complex<T>& v = a[(i + k + half) * stride];
        const std::complex<T> t = v * w;
        v = u - t;
        u = u + t;
      }
  }
}

template <typename T>
Tensor<T> centered_transform(const Tensor<T>& x, bool inverse) {
  require(x.rank() >= 3 && x.dim(x.rank() - 3) == 2, ErrorCode::ShapeMismatch,
          "complex field must be [...,2,H,W], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  require(is_pow2(h) && is_pow2(w), ErrorCode::InvalidArgument,
          "fft2c supports power-of-two extents only, got " + shape_str(x.shape()));
  const std::size_t images = x.size() / (2 * h * w);
  const auto& tw_h = twiddles<T>(h);
  const auto& tw_w = twiddles<T>(w);
  const T norm = T(1) / std::sqrt(T(h * w));
  // For even extents fftshift and ifftshift are the same roll by n/2.
  const std::size_t sh = h / 2, sw = w / 2;
  Tensor<T> out(x.shape());
  std::vector<std::complex<T>> buf(h * w);
  for (std::size_t img = 0; img < images; ++img) {
    const T* re = x.ptr() + img * 2 * h * w;
    const T* im = re + h * w;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) buf[((i + sh) % h) * w + (j + sw) % w] = {re[i * w + j], im[i * w + j]};
    if (w > 1)
      for (std::size_t i = 0; i < h; ++i) fft1d(buf.data() + i * w, w, 1, inverse, tw_w);
    if (h > 1)
      for (std::size_t j = 0; j < w; ++j) fft1d(buf.data() + j, h, w, inverse, tw_h);
    T* ore = out.ptr() + img * 2 * h * w;
    T* oim = ore + h * w;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const std::complex<T> v = buf[i * w + j] * norm;
        const std::size_t o = ((i + sh) % h) * w + (j + sw) % w;
        ore[o] = v.real();
        oim[o] = v.imag();
      }
  }
  return out;
}

void check_complex(const Shape& s, std::size_t rank, const char* what) {
  require(s.size() == rank && s[rank - 3] == 2, ErrorCode::ShapeMismatch,
          std::string(what) + " has shape " + shape_str(s) + ", expected " + (rank == 3 ? "[2,H,W]" : "[N,2,H,W]"));
}

}  // namespace

template <typename T>
ComplexImage<T>::ComplexImage(Tensor<T> t) : data(std::move(t)) {
  check_complex(data.shape(), 3, "complex image");
}

template <typename T>
KSpace<T>::KSpace(Tensor<T> t) : data(std::move(t)) {
  check_complex(data.shape(), 4, "k-space");
}

template <typename T>
SensitivityMaps<T>::SensitivityMaps(Tensor<T> t) : maps(std::move(t)) {
  check_complex(maps.shape(), 4, "sensitivity maps");
}

template <typename T>
double SensitivityMaps<T>::max_normalization_error() const {
  const Tensor<T> rss = root_sum_squares(maps);
  double worst = 0;
  for (T r : rss.data()) worst = std::max(worst, std::abs(double(r) * double(r) - 1.0));
  return worst;
}

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::CartesianRandom: return "random";
    case MaskKind::CartesianEquispaced: return "equispaced";
    case MaskKind::Gaussian2D: return "gaussian2d";
  }
  return "unknown";
}

MaskKind parse_mask_kind(const std::string& s) {
  if (s == "random" || s == "cartesian-random") return MaskKind::CartesianRandom;
  if (s == "equispaced" || s == "cartesian-equispaced") return MaskKind::CartesianEquispaced;
  if (s == "gaussian2d" || s == "gaussian") return MaskKind::Gaussian2D;
  throw Error(ErrorCode::InvalidArgument, "unknown mask kind '" + s + "'");
}

std::size_t Mask::sampled() const {
  return std::size_t(std::count(pattern.begin(), pattern.end(), std::uint8_t{1}));
}

std::size_t Mask::sampled_columns() const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < width; ++j)
    for (std::size_t i = 0; i < height; ++i)
      if (at(i, j)) {
        ++n;
        break;
      }
  return n;
}

template <typename T>
Tensor<T> Mask::as_tensor() const {
  Tensor<T> t(Shape{height, width});
  for (std::size_t i = 0; i < pattern.size(); ++i) t[i] = T(pattern[i]);
  return t;
}

template <typename T>
Tensor<T> fft2c(const Tensor<T>& x) {
  return centered_transform(x, false);
}

template <typename T>
Tensor<T> ifft2c(const Tensor<T>& x) {
  return centered_transform(x, true);
}

template <typename T>
Var<T> fft2c(const Var<T>& x) {
  // The transform is unitary, so its adjoint is the inverse.
  return record<T>("fft2c", fft2c(x.value()), {x}, [](Node<T>& self) {
    const Tensor<T> g = ifft2c(self.grad);
    T* gx = self.inputs[0]->grad_buffer().ptr();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Var<T> ifft2c(const Var<T>& x) {
  return record<T>("ifft2c", ifft2c(x.value()), {x}, [](Node<T>& self) {
    const Tensor<T> g = fft2c(self.grad);
    T* gx = self.inputs[0]->grad_buffer().ptr();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Var<T> expand(const Var<T>& x, const Var<T>& maps) {
  check_complex(x.shape(), 3, "expand image");
  check_complex(maps.shape(), 4, "expand maps");
  require(maps.shape()[2] == x.shape()[1] && maps.shape()[3] == x.shape()[2], ErrorCode::ShapeMismatch,
          "expand: image " + shape_str(x.shape()) + " vs maps " + shape_str(maps.shape()));
  const std::size_t n = maps.shape()[0], hw = x.shape()[1] * x.shape()[2];
  Tensor<T> out(maps.shape());
  const T* c = x.value().ptr();
  const T* d = c + hw;
  for (std::size_t i = 0; i < n; ++i) {
    const T* a = maps.value().ptr() + i * 2 * hw;
    const T* b = a + hw;
    T* ore = out.ptr() + i * 2 * hw;
    T* oim = ore + hw;
    for (std::size_t p = 0; p < hw; ++p) {
      ore[p] = a[p] * c[p] - b[p] * d[p];
      oim[p] = a[p] * d[p] + b[p] * c[p];
    }
  }
  return record<T>("expand", std::move(out), {x, maps}, [n, hw](Node<T>& self) {
    const T* c = self.inputs[0]->value.ptr();
    const T* d = c + hw;
    T* gx = self.inputs[0]->requires_grad ? self.inputs[0]->grad_buffer().ptr() : nullptr;
    T* gs = self.inputs[1]->requires_grad ? self.inputs[1]->grad_buffer().ptr() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      const T* a = self.inputs[1]->value.ptr() + i * 2 * hw;
      const T* b = a + hw;
      const T* gr = self.grad.ptr() + i * 2 * hw;
      const T* gi = gr + hw;
      for (std::size_t p = 0; p < hw; ++p) {
        if (gx) {
          gx[p] += a[p] * gr[p] + b[p] * gi[p];
          gx[hw + p] += a[p] * gi[p] - b[p] * gr[p];
        }
        if (gs) {
          gs[i * 2 * hw + p] += gr[p] * c[p] + gi[p] * d[p];
          gs[i * 2 * hw + hw + p] += gi[p] * c[p] - gr[p] * d[p];
        }
      }
    }
  });
}

template <typename T>
Var<T> reduce(const Var<T>& coils, const Var<T>& maps) {
  check_complex(coils.shape(), 4, "reduce coils");
  require(coils.shape() == maps.shape(), ErrorCode::ShapeMismatch,
          "reduce: coils " + shape_str(coils.shape()) + " vs maps " + shape_str(maps.shape()));
  const std::size_t n = maps.shape()[0], h = maps.shape()[2], w = maps.shape()[3], hw = h * w;
  Tensor<T> out(Shape{2, h, w});
  T* ore = out.ptr();
  T* oim = ore + hw;
  for (std::size_t i = 0; i < n; ++i) {
    const T* a = maps.value().ptr() + i * 2 * hw;
    const T* b = a + hw;
    const T* e = coils.value().ptr() + i * 2 * hw;
    const T* f = e + hw;
    for (std::size_t p = 0; p < hw; ++p) {
      ore[p] += a[p] * e[p] + b[p] * f[p];
      oim[p] += a[p] * f[p] - b[p] * e[p];
    }
  }
  return record<T>("reduce", std::move(out), {coils, maps}, [n, hw](Node<T>& self) {
    T* gy = self.inputs[0]->requires_grad ? self.inputs[0]->grad_buffer().ptr() : nullptr;
    T* gs = self.inputs[1]->requires_grad ? self.inputs[1]->grad_buffer().ptr() : nullptr;
    const T* gr = self.grad.ptr();
    const T* gi = gr + hw;
    for (std::size_t i = 0; i < n; ++i) {
      const T* a = self.inputs[1]->value.ptr() + i * 2 * hw;
      const T* b = a + hw;
      const T* e = self.inputs[0]->value.ptr() + i * 2 * hw;
      const T* f = e + hw;
      for (std::size_t p = 0; p < hw; ++p) {
        if (gy) {
          gy[i * 2 * hw + p] += a[p] * gr[p] - b[p] * gi[p];
          gy[i * 2 * hw + hw + p] += b[p] * gr[p] + a[p] * gi[p];
        }
        if (gs) {
          gs[i * 2 * hw + p] += gr[p] * e[p] + gi[p] * f[p];
          gs[i * 2 * hw + hw + p] += gr[p] * f[p] - gi[p] * e[p];
        }
      }
    }
  });
}

template <typename T>
Var<T> dc_step(const Var<T>& k_t, const Var<T>& k_ref, const Var<T>& mask, const Var<T>& eta, const Var<T>& g) {
  require(k_t.shape() == k_ref.shape() && k_t.shape() == g.shape(), ErrorCode::ShapeMismatch,
          "dc_step operands " + shape_str(k_t.shape()) + ", " + shape_str(k_ref.shape()) + ", " + shape_str(g.shape()));
  require(eta.size() == 1, ErrorCode::ShapeMismatch, "dc_step eta must be a scalar");
  const Var<T> residual = mul(sub(k_t, k_ref), mask);
  return add(sub(k_t, mul(residual, eta)), g);
}

template <typename T>
Var<T> root_sum_squares(const Var<T>& x) {
  require(x.shape().size() >= 2, ErrorCode::ShapeMismatch, "root_sum_squares needs rank >= 2");
  const std::size_t h = x.shape()[x.shape().size() - 2], w = x.shape().back(), hw = h * w;
  const std::size_t planes = x.size() / hw;
  Tensor<T> out(Shape{h, w});
  const T* px = x.value().ptr();
  for (std::size_t k = 0; k < planes; ++k)
    for (std::size_t p = 0; p < hw; ++p) out[p] += px[k * hw + p] * px[k * hw + p];
  for (std::size_t p = 0; p < hw; ++p) out[p] = std::sqrt(out[p]);
  return record<T>("root_sum_squares", std::move(out), {x}, [planes, hw](Node<T>& self) {
    T* gx = self.inputs[0]->grad_buffer().ptr();
    const T* px = self.inputs[0]->value.ptr();
    for (std::size_t p = 0; p < hw; ++p) {
      const T r = self.value[p];
      if (r == T(0)) continue;
      const T k = self.grad[p] / r;
      for (std::size_t c = 0; c < planes; ++c) gx[c * hw + p] += k * px[c * hw + p];
    }
  });
}

template <typename T>
Var<T> normalize_maps(const Var<T>& maps) {
  check_complex(maps.shape(), 4, "normalize_maps input");
  const std::size_t n = maps.shape()[0], hw = maps.shape()[2] * maps.shape()[3];
  const std::size_t planes = 2 * n;
  auto inv = std::make_shared<std::vector<T>>(hw);
  const T* px = maps.value().ptr();
  Tensor<T> out(maps.shape());
  const T uniform = T(1) / std::sqrt(T(n));
  for (std::size_t p = 0; p < hw; ++p) {
    T r2 = 0;
    for (std::size_t c = 0; c < planes; ++c) r2 += px[c * hw + p] * px[c * hw + p];
    if (r2 > T(0)) {
      const T ir = T(1) / std::sqrt(r2);
      (*inv)[p] = ir;
      for (std::size_t c = 0; c < planes; ++c) out[c * hw + p] = px[c * hw + p] * ir;
    } else {
      (*inv)[p] = 0;
      for (std::size_t i = 0; i < n; ++i) out[i * 2 * hw + p] = uniform;
    }
  }
  return record<T>("normalize_maps", std::move(out), {maps}, [planes, hw, inv](Node<T>& self) {
    T* gx = self.inputs[0]->grad_buffer().ptr();
    const T* y = self.value.ptr();
    const T* g = self.grad.ptr();
    for (std::size_t p = 0; p < hw; ++p) {
      const T ir = (*inv)[p];
      if (ir == T(0)) continue;
      T dot = 0;
      for (std::size_t c = 0; c < planes; ++c) dot += g[c * hw + p] * y[c * hw + p];
      for (std::size_t c = 0; c < planes; ++c) gx[c * hw + p] += ir * (g[c * hw + p] - y[c * hw + p] * dot);
    }
  });
}

template <typename T>
KSpace<T> apply_mask(const KSpace<T>& k, const Mask& m) {
  require(k.height() == m.height && k.width() == m.width, ErrorCode::ShapeMismatch,
          "mask " + std::to_string(m.height) + "x" + std::to_string(m.width) + " vs k-space " + shape_str(k.data.shape()));
  Tensor<T> out = k.data;
  const std::size_t hw = m.height * m.width;
  for (std::size_t plane = 0; plane < out.size() / hw; ++plane)
    for (std::size_t p = 0; p < hw; ++p)
      if (!m.pattern[p]) out[plane * hw + p] = T(0);
  return KSpace<T>(std::move(out));
}

template <typename T>
Tensor<T> expand(const ComplexImage<T>& x, const SensitivityMaps<T>& s) {
  return expand(Var<T>::constant(x.data), Var<T>::constant(s.maps)).value();
}

template <typename T>
ComplexImage<T> reduce(const Tensor<T>& coils, const SensitivityMaps<T>& s) {
  return ComplexImage<T>(reduce(Var<T>::constant(coils), Var<T>::constant(s.maps)).value());
}

template <typename T>
KSpace<T> dc_step(const KSpace<T>& k_t, const KSpace<T>& k_ref, const Mask& m, T eta, const KSpace<T>& g) {
  require(k_t.height() == m.height && k_t.width() == m.width, ErrorCode::ShapeMismatch, "dc_step mask/k-space mismatch");
  return KSpace<T>(dc_step(Var<T>::constant(k_t.data), Var<T>::constant(k_ref.data),
                           Var<T>::constant(m.as_tensor<T>()), Var<T>::constant(Tensor<T>::scalar(eta)),
                           Var<T>::constant(g.data))
                       .value());
}

template <typename T>
Tensor<T> root_sum_squares(const Tensor<T>& x) {
  return root_sum_squares(Var<T>::constant(x)).value();
}

#define ATHV_INSTANTIATE_KSPACE(T)                                                                            \
  template struct ComplexImage<T>;                                                                            \
  template struct KSpace<T>;                                                                                  \
  template struct SensitivityMaps<T>;                                                                         \
  template Tensor<T> Mask::as_tensor<T>() const;                                                              \
  template Tensor<T> fft2c(const Tensor<T>&);                                                                 \
  template Tensor<T> ifft2c(const Tensor<T>&);                                                                \
  template Var<T> fft2c(const Var<T>&);                                                                       \
  template Var<T> ifft2c(const Var<T>&);                                                                      \
  template Var<T> expand(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> reduce(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> dc_step(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);         \
  template Var<T> root_sum_squares(const Var<T>&);                                                            \
  template Var<T> normalize_maps(const Var<T>&);                                                              \
  template KSpace<T> apply_mask(const KSpace<T>&, const Mask&);                                               \
  template Tensor<T> expand(const ComplexImage<T>&, const SensitivityMaps<T>&);                               \
  template ComplexImage<T> reduce(const Tensor<T>&, const SensitivityMaps<T>&);                               \
  template KSpace<T> dc_step(const KSpace<T>&, const KSpace<T>&, const Mask&, T, const KSpace<T>&);           \
  template Tensor<T> root_sum_squares(const Tensor<T>&);

ATHV_INSTANTIATE_KSPACE(float)
ATHV_INSTANTIATE_KSPACE(double)

}  // namespace athv
