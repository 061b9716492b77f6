#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "athv/kspace.hpp"
#include "athv/masks.hpp"
#include "gradcheck.hpp"

using namespace athv;
using namespace athv::testing;

namespace {

Var<D> param(const Tensor<D>& t) { return Var<D>::parameter(t); }
Var<D> cst(const Tensor<D>& t) { return Var<D>::constant(t); }

double max_abs_diff(const Tensor<D>& a, const Tensor<D>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double energy(const Tensor<D>& t) {
  double e = 0;
  for (double v : t.data()) e += v * v;
  return e;
}

SensitivityMaps<D> random_normalized_maps(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  return SensitivityMaps<D>(normalize_maps(cst(random_tensor(Shape{n, 2, h, w}, seed))).value());
}

/// Complex inner product <a, b> = sum conj(a) b over [...,2,H,W] tensors.
std::complex<double> inner(const Tensor<D>& a, const Tensor<D>& b) {
  const std::size_t hw = a.dim(a.rank() - 1) * a.dim(a.rank() - 2);
  const std::size_t blocks = a.size() / (2 * hw);
  std::complex<double> s = 0;
  for (std::size_t k = 0; k < blocks; ++k)
    for (std::size_t p = 0; p < hw; ++p) {
      const std::complex<double> ca(a[(2 * k) * hw + p], a[(2 * k + 1) * hw + p]);
      const std::complex<double> cb(b[(2 * k) * hw + p], b[(2 * k + 1) * hw + p]);
      s += std::conj(ca) * cb;
    }
  return s;
}

Mask full_mask(std::size_t h, std::size_t w, std::uint8_t value = 1) {
  Mask m;
  m.height = h;
  m.width = w;
  m.pattern.assign(h * w, value);
  return m;
}

/// Reference DFT straight from the definition, with explicit centering.
Tensor<D> naive_fft2c(const Tensor<D>& x) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  Tensor<D> out(x.shape());
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double a = double(i) - double(h / 2), b = double(j) - double(w / 2);
          const double fu = double(u) - double(h / 2), fv = double(v) - double(w / 2);
          const double ph = -2 * M_PI * (a * fu / double(h) + b * fv / double(w));
          acc += std::complex<double>(x[i * w + j], x[h * w + i * w + j]) * std::polar(1.0, ph);
        }
      acc /= std::sqrt(double(h * w));
      out[u * w + v] = acc.real();
      out[h * w + u * w + v] = acc.imag();
    }
  return out;
}

}  // namespace

TEST(Fourier, RoundTrip64Bit) {
  for (std::size_t n : {4u, 16u, 64u}) {
    const Tensor<D> x = random_tensor(Shape{3, 2, n, n}, n);
    EXPECT_LE(max_abs_diff(ifft2c(fft2c(x)), x), 1e-10);
  }
}

TEST(Fourier, RoundTrip32Bit) {
  const Tensor<float> x = random_tensor(Shape{2, 64, 32}, 3).cast<float>();
  const Tensor<float> y = ifft2c(fft2c(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-4);
}

TEST(Fourier, MatchesDirectDefinition) {
  const Tensor<D> x = random_tensor(Shape{2, 8, 4}, 5);
  EXPECT_LE(max_abs_diff(fft2c(x), naive_fft2c(x)), 1e-12);
}

TEST(Fourier, CenteredImpulseIsFlat) {
  Tensor<D> x(Shape{2, 4, 4});
  x[2 * 4 + 2] = 1.0;
  const Tensor<D> k = fft2c(x);
  for (std::size_t p = 0; p < 16; ++p) {
    EXPECT_NEAR(std::hypot(k[p], k[16 + p]), 0.25, 1e-15);
    EXPECT_NEAR(k[p], 0.25, 1e-15);  // zero phase everywhere under centering
    EXPECT_NEAR(k[16 + p], 0.0, 1e-15);
  }
}

TEST(Fourier, Parseval) {
  const Tensor<D> x = random_tensor(Shape{2, 2, 32, 16}, 6);
  EXPECT_NEAR(energy(fft2c(x)), energy(x), 1e-9);
}

TEST(Fourier, NonPowerOfTwoRejected) {
  EXPECT_THROW(fft2c(Tensor<D>(Shape{2, 6, 8})), Error);
}

TEST(Fourier, GradCheck) {
  auto x = param(random_tensor(Shape{2, 2, 4}, 7));
  EXPECT_LE(gradcheck([&] { return probe(fft2c(x)); }, {x}).max_rel_error, 1e-5);
  EXPECT_LE(gradcheck([&] { return probe(ifft2c(x)); }, {x}).max_rel_error, 1e-5);
}

TEST(Mask, ApplyMask) {
  const KSpace<D> k(random_tensor(Shape{2, 2, 4, 4}, 8));
  EXPECT_TRUE(bit_identical(apply_mask(k, full_mask(4, 4)).data, k.data));
  {
    const auto held = apply_mask(k, full_mask(4, 4, 0)).data;
    for (double v : held.data()) EXPECT_EQ(v, 0.0);
  }
  Mask col0 = full_mask(4, 4, 0);
  for (std::size_t i = 0; i < 4; ++i) col0.pattern[i * 4] = 1;
  const Tensor<D> out = apply_mask(k, col0).data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i % 4 == 0) EXPECT_EQ(out[i], k.data[i]);
    else EXPECT_EQ(out[i], 0.0);
  }
}

TEST(Mask, ApplyMaskIdempotent) {
  const KSpace<D> k(random_tensor(Shape{1, 2, 8, 8}, 9));
  const Mask m = cartesian_mask(8, 8, 2, 0.25, MaskKind::CartesianRandom, 3);
  const KSpace<D> once = apply_mask(k, m);
  EXPECT_TRUE(bit_identical(apply_mask(once, m).data, once.data));
}

TEST(Mask, ApplyMaskShapeMismatch) {
  EXPECT_THROW(apply_mask(KSpace<D>(Tensor<D>(Shape{1, 2, 4, 4})), full_mask(4, 8)), Error);
}

TEST(Coils, ExpandReduceExamples) {
  const Tensor<D> x = random_tensor(Shape{2, 4, 4}, 10);
  Tensor<D> unit(Shape{1, 2, 4, 4});
  for (std::size_t p = 0; p < 16; ++p) unit[p] = 1.0;
  const SensitivityMaps<D> one(unit);
  EXPECT_TRUE(bit_identical(expand(ComplexImage<D>(x), one).reshaped(Shape{2, 4, 4}), x));
  EXPECT_TRUE(bit_identical(reduce(x.reshaped(Shape{1, 2, 4, 4}), one).data, x));

  const SensitivityMaps<D> maps = random_normalized_maps(3, 4, 4, 11);
  {
    const auto held = expand(ComplexImage<D>(Tensor<D>(Shape{2, 4, 4})), maps);
    for (double v : held.data()) EXPECT_EQ(v, 0.0);
  }

  // S = i / sqrt(2) on two coils, real x: each coil is i x / sqrt(2).
  Tensor<D> imag(Shape{2, 2, 4, 4});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 16; ++p) imag[(2 * c + 1) * 16 + p] = 1.0 / std::sqrt(2.0);
  Tensor<D> real_x(Shape{2, 4, 4});
  for (std::size_t p = 0; p < 16; ++p) real_x[p] = x[p];
  const Tensor<D> e = expand(ComplexImage<D>(real_x), SensitivityMaps<D>(imag));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 16; ++p) {
      EXPECT_EQ(e[(2 * c) * 16 + p], 0.0);
      EXPECT_NEAR(e[(2 * c + 1) * 16 + p], x[p] / std::sqrt(2.0), 1e-15);
    }

  // Two coils with S = 1/sqrt(2) and equal coil images c combine to c.
  Tensor<D> half(Shape{2, 2, 4, 4});
  Tensor<D> coils(Shape{2, 2, 4, 4});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t q = 0; q < 32; ++q) {
      if (q < 16) half[c * 32 + q] = 1.0 / std::sqrt(2.0);
      coils[c * 32 + q] = x[q];
    }
  const Tensor<D> r = reduce(coils, SensitivityMaps<D>(half)).data;
  for (std::size_t q = 0; q < 32; ++q) EXPECT_NEAR(r[q], x[q] * std::sqrt(2.0), 1e-14);
}

TEST(Coils, ReduceExpandIsIdentityUnderNormalizedMaps) {
  const SensitivityMaps<D> maps = random_normalized_maps(4, 8, 8, 12);
  EXPECT_LE(maps.max_normalization_error(), 1e-12);
  const Tensor<D> x = random_tensor(Shape{2, 8, 8}, 13);
  const Tensor<D> back = reduce(expand(ComplexImage<D>(x), maps), maps).data;
  EXPECT_LE(max_abs_diff(back, x) / std::sqrt(energy(x)), 1e-6);
}

TEST(Coils, ExpandAndReduceAreAdjoint) {
  const SensitivityMaps<D> maps(random_tensor(Shape{3, 2, 8, 4}, 14));
  const Tensor<D> x = random_tensor(Shape{2, 8, 4}, 15);
  const Tensor<D> y = random_tensor(Shape{3, 2, 8, 4}, 16);
  const auto lhs = inner(expand(ComplexImage<D>(x), maps), y);
  const auto rhs = inner(x, reduce(y, maps).data);
  EXPECT_LE(std::abs(lhs - rhs) / std::abs(lhs), 1e-6);
}

TEST(Coils, ShapeMismatch) {
  EXPECT_THROW(expand(cst(Tensor<D>(Shape{2, 4, 4})), cst(Tensor<D>(Shape{1, 2, 4, 8}))), Error);
  EXPECT_THROW(reduce(cst(Tensor<D>(Shape{2, 2, 4, 4})), cst(Tensor<D>(Shape{1, 2, 4, 4}))), Error);
}

TEST(Coils, GradCheck) {
  auto x = param(random_tensor(Shape{2, 2, 2}, 17));
  auto s = param(random_tensor(Shape{2, 2, 2, 2}, 18));
  auto y = param(random_tensor(Shape{2, 2, 2, 2}, 19));
  EXPECT_LE(gradcheck([&] { return probe(expand(x, s)); }, {x, s}).max_rel_error, 1e-5);
  EXPECT_LE(gradcheck([&] { return probe(reduce(y, s)); }, {y, s}).max_rel_error, 1e-5);
}

TEST(DataConsistency, Examples) {
  const Mask m = cartesian_mask(8, 8, 2, 0.25, MaskKind::CartesianRandom, 4);
  const KSpace<D> k_ref = apply_mask(KSpace<D>(random_tensor(Shape{2, 2, 8, 8}, 20)), m);
  const KSpace<D> zero(Tensor<D>(Shape{2, 2, 8, 8}));
  KSpace<D> k_t(random_tensor(Shape{2, 2, 8, 8}, 21));

  // eta = 0, g = 0: unchanged.
  EXPECT_TRUE(bit_identical(dc_step(k_t, k_ref, m, 0.0, zero).data, k_t.data));

  // eta = 1, g = 0: measured values on the mask, k_t elsewhere.
  const Tensor<D> replaced = dc_step(k_t, k_ref, m, 1.0, zero).data;
  for (std::size_t i = 0; i < replaced.size(); ++i) {
    if (m.pattern[i % 64]) EXPECT_NEAR(replaced[i], k_ref.data[i], 1e-15);
    else EXPECT_EQ(replaced[i], k_t.data[i]);
  }

  // Fixed point: k_t agrees with k_ref on the mask -> unchanged for any eta.
  for (std::size_t i = 0; i < k_t.data.size(); ++i)
    if (m.pattern[i % 64]) k_t.data[i] = k_ref.data[i];
  for (double eta : {0.3, 1.0, 1.7})
    EXPECT_TRUE(bit_identical(dc_step(k_t, k_ref, m, eta, zero).data, k_t.data));
}

TEST(DataConsistency, LinearInOperands) {
  const Mask m = cartesian_mask(8, 8, 2, 0.25, MaskKind::CartesianEquispaced, 5);
  auto r = [](std::uint64_t s) { return KSpace<D>(random_tensor(Shape{1, 2, 8, 8}, s)); };
  const KSpace<D> a1 = r(22), b1 = r(23), g1 = r(24), a2 = r(25), b2 = r(26), g2 = r(27);
  auto sum = [](const KSpace<D>& p, const KSpace<D>& q) {
    Tensor<D> t = p.data;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += q.data[i];
    return KSpace<D>(t);
  };
  const Tensor<D> lhs = dc_step(sum(a1, a2), sum(b1, b2), m, 0.7, sum(g1, g2)).data;
  const Tensor<D> r1 = dc_step(a1, b1, m, 0.7, g1).data, r2 = dc_step(a2, b2, m, 0.7, g2).data;
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], r1[i] + r2[i], 1e-12);
}

TEST(DataConsistency, GradCheck) {
  auto kt = param(random_tensor(Shape{1, 2, 2, 2}, 28));
  auto kr = param(random_tensor(Shape{1, 2, 2, 2}, 29));
  auto g = param(random_tensor(Shape{1, 2, 2, 2}, 30));
  auto eta = param(Tensor<D>::scalar(0.8));
  const auto mask = cst(Tensor<D>(Shape{2, 2}, std::vector<D>{1, 0, 0, 1}));
  EXPECT_LE(gradcheck([&] { return probe(dc_step(kt, kr, mask, eta, g)); }, {kt, kr, g, eta}).max_rel_error, 1e-5);
}

TEST(RootSumSquares, ValuesAndGradient) {
  Tensor<D> x(Shape{2, 2, 1, 1}, std::vector<D>{3, 0, 0, 4});
  EXPECT_DOUBLE_EQ(root_sum_squares(x)[0], 5.0);
  auto v = param(random_away_from_zero(Shape{2, 2, 2}, 31));
  EXPECT_LE(gradcheck([&] { return probe(root_sum_squares(v)); }, {v}).max_rel_error, 1e-5);
}

TEST(NormalizeMaps, UnitEnergyAndUniformFallback) {
  Tensor<D> raw = random_tensor(Shape{3, 2, 4, 4}, 32);
  for (std::size_t q = 0; q < raw.size(); q += 16) raw[q] = 0.0;  // pixel 0 empty in every plane
  const SensitivityMaps<D> maps(normalize_maps(cst(raw)).value());
  EXPECT_LE(maps.max_normalization_error(), 1e-12);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(maps.maps[(2 * c) * 16], 1.0 / std::sqrt(3.0));
    EXPECT_EQ(maps.maps[(2 * c + 1) * 16], 0.0);
  }
}

TEST(NormalizeMaps, SingleCoilHasUnitMagnitude) {
  const Tensor<D> maps = normalize_maps(cst(random_tensor(Shape{1, 2, 4, 4}, 33))).value();
  for (std::size_t p = 0; p < 16; ++p) EXPECT_NEAR(std::hypot(maps[p], maps[16 + p]), 1.0, 1e-14);
}

TEST(NormalizeMaps, GradCheck) {
  auto s = param(random_tensor(Shape{2, 2, 2, 2}, 34));
  EXPECT_LE(gradcheck([&] { return probe(normalize_maps(s)); }, {s}).max_rel_error, 1e-5);
}
