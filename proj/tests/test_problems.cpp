#include <catch2/catch_amalgamated.hpp>

#include <pdsplit/errors.hpp>
#include <pdsplit/problems.hpp>
#include <pdsplit/solvers.hpp>

#include "checks.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

using namespace pdsplit;

TEST_CASE("non-negative lasso instances have the documented structure") {
  const int m = 30, n = 40;
  const double delta = 0.35, rho = 0.01;
  Problem prob = gen_nn_lasso(m, n, 7, delta, rho);
  const SaddleProblem& p = prob.saddle;

  // Ground truth: ones on a ceil(0.2 n) support, zero elsewhere.
  int ones = 0;
  for (double v : prob.gt.truth.data) {
    REQUIRE((v == 0.0 || v == 1.0));
    if (v == 1.0) ++ones;
  }
  REQUIRE(ones == static_cast<int>(std::ceil(0.2 * n)));

  // Replicate the generator's random stream to recover the noise vector and
  // confirm observed = A x_true + 0.01 eps.
  Rng rng(7);
  for (int i = 0; i < m * n; ++i) rng.normal();
  rng.permutation(static_cast<std::size_t>(n));
  Grid noise({m});
  for (double& v : noise.data) v = rng.normal();
  Grid expect = prob.gt.forward.apply(prob.gt.truth);
  axpy(expect, 0.01, noise);
  REQUIRE(checks::max_abs_diff(expect, prob.gt.observed) < 1e-12);

  // Smooth split and composite pieces.
  REQUIRE(p.l_f1() == Catch::Approx(delta * p.l_f()).margin(1e-12));
  REQUIRE(p.l_f2() == Catch::Approx((1.0 - delta) * p.l_f()).margin(1e-12));
  REQUIRE(p.h.kind() == ProxFn::Kind::l1);
  REQUIRE(p.h.weight() == rho);
  REQUIRE(p.g.kind() == ProxFn::Kind::nonneg);
  REQUIRE(p.K.is_identity());
  REQUIRE(p.k_norm_sq == 1.0);

  // The smooth Lipschitz constant tracks ||A||^2.
  Eigen::MatrixXd dense = checks::dense_matrix_of(prob.gt.forward);
  const double a_norm_sq = checks::largest_sv_sq(dense);
  REQUIRE(p.l_f() == Catch::Approx(a_norm_sq).epsilon(1e-6));

  // Same seed reproduces the instance; another seed changes the data.
  Problem again = gen_nn_lasso(m, n, 7, delta, rho);
  REQUIRE(checks::max_abs_diff(again.gt.observed, prob.gt.observed) == 0.0);
  Problem other = gen_nn_lasso(m, n, 8, delta, rho);
  REQUIRE(checks::max_abs_diff(other.gt.observed, prob.gt.observed) > 1e-6);

  REQUIRE_THROWS_AS(gen_nn_lasso(0, 5, 1, 0.5), ParamError);
  REQUIRE_THROWS_AS(gen_nn_lasso(5, 5, 1, 0.0), ParamError);
  REQUIRE_THROWS_AS(gen_nn_lasso(5, 5, 1, 1.2), ParamError);
}

TEST_CASE("separable family's recorded truth minimizes the composite objective") {
  Problem prob = gen_quad_nonneg(25, 17, 0.7);
  const SaddleProblem& p = prob.saddle;
  const Grid& xs = prob.gt.truth;
  for (double v : xs.data) REQUIRE(v >= 0.0);
  const double f_star = p.objective(xs);
  Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = trial % 2 == 0 ? 1e-3 : 0.3;
    Grid x = xs + checks::random_grid(rng, p.primal_shape, scale);
    for (double& v : x.data) v = std::max(0.0, v);  // indicator feasibility
    REQUIRE(p.objective(x) >= f_star - 1e-12 * (1.0 + std::abs(f_star)));
  }
  REQUIRE_THROWS_AS(gen_quad_nonneg(-1, 1, 0.5), ParamError);
  REQUIRE_THROWS_AS(gen_quad_nonneg(5, 1, 1.5), ParamError);
}

TEST_CASE("inpainting builder masks, observes, and scales as documented") {
  Grid img = synth_phantom(64);
  const double frac = 0.15, sigma = 0.02, delta = 0.8;
  Problem prob = build_ctv_inpaint(img, frac, sigma, 33, delta);
  const SaddleProblem& p = prob.saddle;

  // Mask: exactly round(0.15 * 4096) zeros, recoverable from the forward op.
  Grid mask = prob.gt.forward.apply(Grid(img.shape, 1.0));
  int zeros = 0;
  for (double v : mask.data) {
    REQUIRE((v == 0.0 || v == 1.0));
    if (v == 0.0) ++zeros;
  }
  REQUIRE(zeros == static_cast<int>(std::llround(frac * 4096.0)));

  // Observed pixels vanish on the mask's holes and replicate the generator's
  // noise stream elsewhere.
  Rng rng(33);
  rng.permutation(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double eta = rng.normal();
    const double expect = mask.data[i] * (img.data[i] + sigma * eta);
    REQUIRE(prob.gt.observed.data[i] == Catch::Approx(expect).margin(1e-14));
  }

  REQUIRE(p.l_f() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(p.l_f1() == Catch::Approx(delta).margin(1e-12));
  REQUIRE(p.k_norm_sq >= 7.5);
  REQUIRE(p.k_norm_sq <= 8.0);
  REQUIRE(p.h.kind() == ProxFn::Kind::box);
  REQUIRE(p.h.lo() == 0.0);
  REQUIRE(p.h.hi() == 1.0);
  REQUIRE(p.g.kind() == ProxFn::Kind::l21);
  REQUIRE(p.g.weight() == 0.001);
  REQUIRE_FALSE(p.K.is_identity());

  // No holes and no noise reproduce the image exactly.
  Problem clean = build_ctv_inpaint(img, 0.0, 0.0, 1, delta);
  REQUIRE(checks::max_abs_diff(clean.gt.observed, img) == 0.0);

  REQUIRE_THROWS_AS(build_ctv_inpaint(img, 1.0, 0.0, 1, delta), ParamError);
  REQUIRE_THROWS_AS(build_ctv_inpaint(img, 0.1, -0.1, 1, delta), ParamError);
  REQUIRE_THROWS_AS(build_ctv_inpaint(img, 0.1, 0.1, 1, 0.0), ParamError);
  REQUIRE_THROWS_AS(build_ctv_inpaint(Grid({5}, 1.0), 0.1, 0.1, 1, delta), ShapeError);
}

TEST_CASE("fully observed noiseless inpainting drives the data term to zero") {
  // With a vanishing TV weight the solution must essentially interpolate the
  // clean data: the data term collapses by many orders of magnitude.
  Grid img = synth_phantom(16);
  Problem prob = build_ctv_inpaint(img, 0.0, 0.0, 2, 0.8, 1e-6);
  const SaddleProblem& p = prob.saddle;
  SolverConfig c;
  c.variant = Variant::pdfp;
  c.fair = true;
  const StepSizes st =
      stepsize_plan(c.variant, c.fair, Preset::ctv, p.l_f(), p.l_f1(), p.k_norm_sq);
  c.sigma = st.sigma;
  c.tau = st.tau;
  c.inner.solver = InnerConfig::Solver::condat_vu;
  c.inner.mode = InnerConfig::Mode::budget;
  c.inner.inn = 1;
  c.stop_tol = 1e-10;
  c.max_outer = 20000;
  c.x0 = Grid(img.shape, 0.0);
  Trace tr = run(p, c);
  Grid r = tr.x_final;
  r -= img;
  REQUIRE(0.5 * norm_sq(r) <= 1e-8 * 0.5 * norm_sq(img));
}

TEST_CASE("super-resolution builder composes blur and decimation") {
  Grid img = synth_phantom(32);
  Problem prob = build_lrtv_sr(img, 1.0, 2, 0.9);
  const SaddleProblem& p = prob.saddle;

  REQUIRE(prob.gt.observed.shape == Shape{16, 16});
  Grid fwd = prob.gt.forward.apply(img);
  REQUIRE(checks::max_abs_diff(fwd, prob.gt.observed) == 0.0);

  REQUIRE(p.h.kind() == ProxFn::Kind::nuclear);
  REQUIRE(p.h.weight() == 0.01);
  REQUIRE(p.g.kind() == ProxFn::Kind::l21);
  REQUIRE(p.g.weight() == 0.01);
  REQUIRE_FALSE(p.K.is_identity());
  REQUIRE(p.k_norm_sq >= 7.0);
  REQUIRE(p.k_norm_sq <= 8.0);
  REQUIRE(p.l_f1() == Catch::Approx(0.9 * p.l_f()).margin(1e-12));

  // The normalized blur followed by decimation never expands energy, and the
  // advertised constant matches a dense singular-value oracle.
  REQUIRE(p.l_f() <= 1.0 + 1e-6);
  Grid small = synth_phantom(16);
  Problem tiny = build_lrtv_sr(small, 1.0, 2, 0.9);
  Eigen::MatrixXd dense = checks::dense_matrix_of(tiny.gt.forward);
  REQUIRE(tiny.saddle.l_f() == Catch::Approx(checks::largest_sv_sq(dense)).epsilon(1e-6));

  // Near-identity configuration: no blur to speak of, no decimation.
  Problem ident = build_lrtv_sr(small, 1e-6, 1, 0.9);
  REQUIRE(checks::max_abs_diff(ident.gt.observed, small) < 1e-10);

  REQUIRE_THROWS_AS(build_lrtv_sr(img, 1.0, 2, 0.0), ParamError);
  REQUIRE_THROWS_AS(build_lrtv_sr(Grid({5}, 1.0), 1.0, 2, 0.9), ShapeError);
}

TEST_CASE("synthetic phantom is deterministic with the advertised structure") {
  Grid a = synth_phantom(64);
  Grid b = synth_phantom(64);
  REQUIRE(checks::max_abs_diff(a, b) == 0.0);
  for (double v : a.data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
  // Non-trivial edges.
  LinOp g = LinOp::grad2d(64, 64);
  REQUIRE(norm(g.apply(a)) > 1.0);

  // The bottom-right block is untouched smooth background: numerically rank 2.
  const int r0 = 56, c0 = 55;
  Eigen::MatrixXd corner(64 - r0, 64 - c0);
  for (int i = r0; i < 64; ++i)
    for (int j = c0; j < 64; ++j) corner(i - r0, j - c0) = a.at(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(corner);
  REQUIRE(svd.singularValues()(2) <= 1e-10);

  REQUIRE_THROWS_AS(synth_phantom(7), ParamError);
}

TEST_CASE("signal-to-noise ratio metric") {
  Grid ref({4}, {1.0, -2.0, 3.0, 0.5});
  REQUIRE(snr_db(ref, ref) == 300.0);
  REQUIRE(snr_db(2.0 * ref, ref) == 0.0);

  Rng rng(19);
  Grid e = rng.normal_grid({4});
  REQUIRE(snr_db(ref + e, ref) == Catch::Approx(snr_db(ref - e, ref)).margin(1e-12));
  const double expect = 10.0 * std::log10(norm_sq(ref) / norm_sq(e));
  REQUIRE(snr_db(ref + e, ref) == Catch::Approx(expect).margin(1e-12));

  REQUIRE_THROWS_AS(snr_db(Grid({4}), Grid({4})), NumericError);
  REQUIRE_THROWS_AS(snr_db(Grid({3}), ref), ShapeError);
}

TEST_CASE("structural similarity metric") {
  Grid x({4}, {0.2, 0.8, 0.5, 0.1});
  REQUIRE(ssim_global(x, x) == 1.0);

  // Anti-correlated zero-mean signals score poorly.
  Grid z({4}, {0.4, -0.4, 0.2, -0.2});
  REQUIRE(ssim_global(z, -1.0 * z) < 0.5);

  // Hand recomputation on a random pair.
  Rng rng(20);
  Grid u = rng.normal_grid({8, 8});
  Grid v = rng.normal_grid({8, 8});
  const double n = 64.0;
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    mu += u.data[i];
    mv += v.data[i];
  }
  mu /= n;
  mv /= n;
  double vu = 0.0, vv = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    vu += (u.data[i] - mu) * (u.data[i] - mu);
    vv += (v.data[i] - mv) * (v.data[i] - mv);
    cov += (u.data[i] - mu) * (v.data[i] - mv);
  }
  vu /= n;
  vv /= n;
  cov /= n;
  for (double range : {1.0, 2.0}) {
    const double c1 = 0.0001 * range * range, c2 = 0.0009 * range * range;
    const double expect = (2.0 * mu * mv + c1) * (2.0 * cov + c2) /
                          ((mu * mu + mv * mv + c1) * (vu + vv + c2));
    REQUIRE(ssim_global(u, v, range) == Catch::Approx(expect).margin(1e-12));
  }

  REQUIRE_THROWS_AS(ssim_global(x, x, 0.0), ParamError);
  REQUIRE_THROWS_AS(ssim_global(Grid({3}), x), ShapeError);
}

TEST_CASE("experiment presets produce admissible step sizes on their families") {
  const Variant all[] = {Variant::cv, Variant::pdfp, Variant::afba, Variant::pd3o};

  Problem lasso = gen_nn_lasso(30, 40, 3, 0.35);
  for (Variant v : all)
    for (bool fair : {true, false})
      for (Preset pr : {Preset::lasso, Preset::safe}) {
        SolverConfig c;
        c.variant = v;
        c.fair = fair;
        const StepSizes st = stepsize_plan(v, fair, pr, lasso.saddle.l_f(),
                                           lasso.saddle.l_f1(), lasso.saddle.k_norm_sq);
        c.sigma = st.sigma;
        c.tau = st.tau;
        REQUIRE_NOTHROW(validate_steps(lasso.saddle, c));
      }

  Grid img = synth_phantom(16);
  Problem sr = build_lrtv_sr(img, 1.0, 2, 0.9);
  for (Variant v : {Variant::cv, Variant::pdfp, Variant::pd3o})
    for (bool fair : {true, false}) {
      SolverConfig c;
      c.variant = v;
      c.fair = fair;
      const StepSizes st = stepsize_plan(v, fair, Preset::lrtv, sr.saddle.l_f(),
                                         sr.saddle.l_f1(), sr.saddle.k_norm_sq);
      c.sigma = st.sigma;
      c.tau = st.tau;
      REQUIRE_NOTHROW(validate_steps(sr.saddle, c));
    }

  Problem tv = build_ctv_inpaint(img, 0.15, 0.02, 4, 0.8);
  for (Variant v : {Variant::afba, Variant::pdfp, Variant::pd3o})
    for (bool fair : {true, false}) {
      SolverConfig c;
      c.variant = v;
      c.fair = fair;
      const StepSizes st = stepsize_plan(v, fair, Preset::ctv, tv.saddle.l_f(),
                                         tv.saddle.l_f1(), tv.saddle.k_norm_sq);
      c.sigma = st.sigma;
      c.tau = st.tau;
      REQUIRE_NOTHROW(validate_steps(tv.saddle, c));
    }
}
