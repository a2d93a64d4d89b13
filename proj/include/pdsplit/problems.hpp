#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "pdsplit/grid.hpp"
#include "pdsplit/linops.hpp"
#include "pdsplit/prox.hpp"
#include "pdsplit/rng.hpp"
#include "pdsplit/solvers.hpp"

namespace pdsplit {

struct GroundTruthPair {
  Grid truth;
  Grid observed;
  LinOp forward;
};

struct Problem {
  SaddleProblem saddle;
  GroundTruthPair gt;
  double delta = 1.0;
};

/// Non-negative Lasso: min rho ||x||_1 + 1/2 ||Ax - b||^2 s.t. x >= 0.
/// A is m x n standard normal, the truth has ones on a random 20% support,
/// b = A x_true + 0.01 eps. The smooth term is split f1 = delta f,
/// f2 = (1-delta) f; the constraint rides on the dual side with K = I.
inline Problem gen_nn_lasso(int m, int n, std::uint64_t seed, double delta,
                            double rho = 0.01) {
  if (m <= 0 || n <= 0) throw ParamError("gen_nn_lasso: nonpositive dimensions");
  if (!(delta > 0.0 && delta <= 1.0)) throw ParamError("gen_nn_lasso: delta outside (0,1]");
  Rng rng(seed);
  std::vector<double> a(static_cast<std::size_t>(m) * n);
  for (double& v : a) v = rng.normal();
  const int support = static_cast<int>(std::ceil(0.2 * n));
  auto perm = rng.permutation(static_cast<std::size_t>(n));
  Grid x_true({n});
  for (int i = 0; i < support; ++i) x_true.data[perm[i]] = 1.0;
  Grid noise({m});
  for (double& v : noise.data) v = rng.normal();

  LinOp A = LinOp::dense(m, n, std::move(a));
  Grid b = A.apply(x_true);
  axpy(b, 0.01, noise);

  const double l_full = norm_sq_estimate(A, 2000, 1e-12);
  SmoothFn f1 = SmoothFn::quadratic(A, b, delta).with_lipschitz(delta * l_full);
  SmoothFn f2 =
      SmoothFn::quadratic(A, b, 1.0 - delta).with_lipschitz((1.0 - delta) * l_full);

  Problem prob{make_problem(std::move(f1), std::move(f2), ProxFn::l1(rho), ProxFn::nonneg(),
                            LinOp::identity({n})),
               {x_true, b, A},
               delta};
  return prob;
}

/// Separable certifiable family: min 1/2 ||Dx - a||^2 + rho ||x||_1
/// s.t. x >= 0 with a positive diagonal D. Every certificate ingredient has
/// a closed form here, and the minimizer is max(0, (d_i a_i - rho)/d_i^2).
inline Problem gen_quad_nonneg(int n, std::uint64_t seed, double delta, double rho = 0.1) {
  if (n <= 0) throw ParamError("gen_quad_nonneg: nonpositive dimension");
  if (!(delta > 0.0 && delta <= 1.0)) throw ParamError("gen_quad_nonneg: delta outside (0,1]");
  Rng rng(seed);
  Grid dweights({n});
  for (double& v : dweights.data) v = 0.5 + rng.uniform();  // [0.5, 1.5)
  Grid a({n});
  for (double& v : a.data) v = 0.2 + 0.6 * rng.normal();

  LinOp D = LinOp::mask(dweights);
  double dmax = 0.0;
  for (double v : dweights.data) dmax = std::max(dmax, v * v);
  SmoothFn f1 = SmoothFn::quadratic(D, a, delta).with_lipschitz(delta * dmax);
  SmoothFn f2 = SmoothFn::quadratic(D, a, 1.0 - delta).with_lipschitz((1.0 - delta) * dmax);

  Grid x_star({n});
  for (int i = 0; i < n; ++i) {
    const double di = dweights.data[i];
    x_star.data[i] = std::max(0.0, (di * a.data[i] - rho) / (di * di));
  }

  Problem prob{make_problem(std::move(f1), std::move(f2), ProxFn::l1(rho), ProxFn::nonneg(),
                            LinOp::identity({n})),
               {x_star, a, D},
               delta};
  return prob;
}

/// Constrained TV inpainting: min lambda ||grad x||_{2,1} +
/// 1/2 ||Phi x - y||^2 s.t. x in [0,1]^N, with Phi a random pixel mask.
/// Gaussian noise enters only at observed pixels.
inline Problem build_ctv_inpaint(const Grid& image, double missing_frac, double noise_sigma,
                                 std::uint64_t seed, double delta, double lambda = 0.001) {
  if (image.shape.size() != 2) throw ShapeError("build_ctv_inpaint: needs a 2-D image");
  if (!(missing_frac >= 0.0 && missing_frac < 1.0))
    throw ParamError("build_ctv_inpaint: missing_frac outside [0,1)");
  if (noise_sigma < 0.0) throw ParamError("build_ctv_inpaint: negative noise level");
  if (!(delta > 0.0 && delta <= 1.0)) throw ParamError("build_ctv_inpaint: delta outside (0,1]");
  const int h = image.shape[0], w = image.shape[1];
  const std::size_t count = image.size();
  const auto n_missing =
      static_cast<std::size_t>(std::llround(missing_frac * static_cast<double>(count)));

  Rng rng(seed);
  auto perm = rng.permutation(count);
  Grid maskw(image.shape, 1.0);
  for (std::size_t i = 0; i < n_missing; ++i) maskw.data[perm[i]] = 0.0;
  Grid observed(image.shape);
  for (std::size_t i = 0; i < count; ++i) {
    const double eta = rng.normal();  // one draw per pixel keeps the stream aligned
    observed.data[i] = maskw.data[i] * (image.data[i] + noise_sigma * eta);
  }

  LinOp phi = LinOp::mask(maskw);
  const double l_full = n_missing < count ? 1.0 : 0.0;
  SmoothFn f1 = SmoothFn::quadratic(phi, observed, delta).with_lipschitz(delta * l_full);
  SmoothFn f2 =
      SmoothFn::quadratic(phi, observed, 1.0 - delta).with_lipschitz((1.0 - delta) * l_full);

  Problem prob{make_problem(std::move(f1), std::move(f2), ProxFn::box(0.0, 1.0),
                            ProxFn::l21(lambda), LinOp::grad2d(h, w)),
               {image, observed, phi},
               delta};
  return prob;
}

/// Low-rank + TV super-resolution: min lambda1 ||x||_* +
/// lambda2 ||grad x||_{2,1} + 1/2 ||DS x - T||^2 where S is a Gaussian blur
/// and D keeps every factor-th pixel. The low-resolution observation is the
/// clean forward image.
inline Problem build_lrtv_sr(const Grid& image, double blur_sigma, int factor, double delta,
                             double lambda1 = 0.01, double lambda2 = 0.01) {
  if (image.shape.size() != 2) throw ShapeError("build_lrtv_sr: needs a 2-D image");
  if (!(delta > 0.0 && delta <= 1.0)) throw ParamError("build_lrtv_sr: delta outside (0,1]");
  const int h = image.shape[0], w = image.shape[1];
  LinOp fwd = LinOp::compose(LinOp::downsample(h, w, factor),
                             LinOp::gaussian_blur(h, w, blur_sigma));
  Grid t = fwd.apply(image);

  const double l_full = norm_sq_estimate(fwd, 2000, 1e-12);
  SmoothFn f1 = SmoothFn::quadratic(fwd, t, delta).with_lipschitz(delta * l_full);
  SmoothFn f2 =
      SmoothFn::quadratic(fwd, t, 1.0 - delta).with_lipschitz((1.0 - delta) * l_full);

  Problem prob{make_problem(std::move(f1), std::move(f2), ProxFn::nuclear(lambda1),
                            ProxFn::l21(lambda2), LinOp::grad2d(h, w)),
               {image, t, fwd},
               delta};
  return prob;
}

/// Deterministic n x n test image in [0,1]: a rank-2 background with two
/// rectangles, a disk, and a horizontal ramp band. The bottom-right corner
/// block stays pure background, so its rank never exceeds 2.
inline Grid synth_phantom(int n) {
  if (n < 8) throw ParamError("synth_phantom: side below 8");
  Grid img({n, n});
  const double dn = n - 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) img.at(i, j) = 0.15 + 0.25 * (i / dn) * (j / dn);

  auto rect = [&](double r0, double r1, double c0, double c1, double v) {
    for (int i = static_cast<int>(r0 * n); i < static_cast<int>(r1 * n); ++i)
      for (int j = static_cast<int>(c0 * n); j < static_cast<int>(c1 * n); ++j)
        img.at(i, j) = v;
  };
  rect(0.08, 0.30, 0.10, 0.42, 0.85);
  rect(0.12, 0.22, 0.55, 0.88, 0.55);

  const double ci = 0.62 * n, cj = 0.30 * n, rad = 0.14 * n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double di = i - ci, dj = j - cj;
      if (di * di + dj * dj <= rad * rad) img.at(i, j) = 0.95;
    }

  const int r0 = static_cast<int>(0.70 * n), r1 = static_cast<int>(0.86 * n);
  const int c0 = static_cast<int>(0.15 * n), c1 = static_cast<int>(0.85 * n);
  for (int i = r0; i < r1; ++i)
    for (int j = c0; j < c1; ++j)
      img.at(i, j) = 0.15 + 0.75 * (j - c0) / std::max(1, c1 - c0 - 1);

  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

/// SNR in dB against a reference, 10 log10(||ref||^2 / ||x - ref||^2),
/// capped at the 300 dB sentinel once the error norm underflows.
inline double snr_db(const Grid& x, const Grid& ref) {
  require_same_shape(x, ref, "snr_db");
  const double rn = norm_sq(ref);
  if (rn <= 0.0) throw NumericError("snr_db: zero reference");
  Grid e = x;
  e -= ref;
  const double en = norm(e);
  if (en < 1e-14) return 300.0;
  return std::min(300.0, 10.0 * std::log10(rn / (en * en)));
}

/// Single-window SSIM over the whole grid with the standard constants
/// c1 = (0.01 R)^2, c2 = (0.03 R)^2. Population moments; identical inputs
/// give exactly 1.
inline double ssim_global(const Grid& x, const Grid& ref, double range = 1.0) {
  require_same_shape(x, ref, "ssim_global");
  if (!(range > 0.0)) throw ParamError("ssim_global: nonpositive range");
  const double c1 = 0.0001 * range * range, c2 = 0.0009 * range * range;
  const double n = static_cast<double>(x.size());
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m1 += x.data[i];
    m2 += ref.data[i];
  }
  m1 /= n;
  m2 /= n;
  double v1 = 0.0, v2 = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x.data[i] - m1, b = ref.data[i] - m2;
    v1 += a * a;
    v2 += b * b;
    cov += a * b;
  }
  v1 /= n;
  v2 /= n;
  cov /= n;
  return (2.0 * m1 * m2 + c1) * (2.0 * cov + c2) /
         ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
}

}  // namespace pdsplit
