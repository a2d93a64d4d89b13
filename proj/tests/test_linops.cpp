#include <catch2/catch_amalgamated.hpp>

#include <pdsplit/errors.hpp>
#include <pdsplit/grid.hpp>
#include <pdsplit/linops.hpp>
#include <pdsplit/rng.hpp>

#include "checks.hpp"

#include <cmath>
#include <vector>

using namespace pdsplit;

namespace {

// The operator zoo used by the adjoint and oracle property tests.
std::vector<LinOp> operator_zoo() {
  Rng rng(2024);
  Grid w = rng.normal_grid({3, 4});
  std::vector<double> dense_entries;
  for (int i = 0; i < 5 * 3; ++i) dense_entries.push_back(rng.normal());
  return {
      LinOp::identity({7}),
      LinOp::dense(5, 3, dense_entries),
      LinOp::mask(w),
      LinOp::grad2d(6, 5),
      LinOp::gaussian_blur(8, 7, 1.3),
      LinOp::downsample(9, 6, 2),
      LinOp::compose(LinOp::downsample(8, 8, 2), LinOp::gaussian_blur(8, 8, 1.0)),
  };
}

}  // namespace

TEST_CASE("mask applies elementwise weights") {
  LinOp m = LinOp::mask(Grid({3}, {1.0, 0.0, 1.0}));
  Grid x({3}, {3.0, 4.0, 5.0});
  Grid y = m.apply(x);
  REQUIRE(y.data == std::vector<double>{3.0, 0.0, 5.0});
  // Diagonal operators are self-adjoint.
  Grid z = m.adjoint(x);
  REQUIRE(z.data == y.data);
}

TEST_CASE("grad2d worked example with Neumann boundary") {
  LinOp g = LinOp::grad2d(2, 2);
  Grid x({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Grid y = g.apply(x);
  REQUIRE(y.shape == Shape{2, 2, 2});
  // Vertical part.
  REQUIRE(y.data[0] == 2.0);
  REQUIRE(y.data[1] == 2.0);
  REQUIRE(y.data[2] == 0.0);
  REQUIRE(y.data[3] == 0.0);
  // Horizontal part.
  REQUIRE(y.data[4] == 1.0);
  REQUIRE(y.data[5] == 0.0);
  REQUIRE(y.data[6] == 1.0);
  REQUIRE(y.data[7] == 0.0);
}

TEST_CASE("grad2d of a constant image is zero") {
  LinOp g = LinOp::grad2d(5, 7);
  Grid c({5, 7}, 3.25);
  Grid y = g.apply(c);
  for (double v : y.data) REQUIRE(v == 0.0);
}

TEST_CASE("dense matches explicit matrix-vector product") {
  Rng rng(11);
  std::vector<double> entries;
  for (int i = 0; i < 5 * 3; ++i) entries.push_back(rng.normal());
  LinOp a = LinOp::dense(5, 3, entries);
  Grid x = rng.normal_grid({3});
  Grid y = a.apply(x);
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += entries[i * 3 + j] * x.data[j];
    REQUIRE(y.data[i] == Catch::Approx(s).margin(1e-12));
  }
}

TEST_CASE("identity is self-adjoint and exact") {
  LinOp id = LinOp::identity({4});
  Grid x({4}, {1.0, -2.0, 3.0, 0.5});
  REQUIRE(id.apply(x).data == x.data);
  REQUIRE(id.adjoint(x).data == x.data);
}

TEST_CASE("adjoint identity holds for every operator kind") {
  Rng rng(5150);
  for (const LinOp& op : operator_zoo()) {
    for (int trial = 0; trial < 20; ++trial) {
      Grid x = rng.normal_grid(op.in_shape());
      Grid y = rng.normal_grid(op.out_shape());
      const double lhs = dot(op.apply(x), y);
      const double rhs = dot(x, op.adjoint(y));
      const double scale = 1.0 + norm(x) * norm(y);
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("apply and adjoint match the dense assembly oracle") {
  Rng rng(77);
  for (const LinOp& op : operator_zoo()) {
    const Eigen::MatrixXd m = checks::dense_matrix_of(op);
    Grid x = rng.normal_grid(op.in_shape());
    Grid y = rng.normal_grid(op.out_shape());

    const Grid ax = op.apply(x);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(i, j) * x.data[j];
      REQUIRE(ax.data[i] == Catch::Approx(s).margin(1e-10));
    }
    const Grid aty = op.adjoint(y);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < m.rows(); ++i) s += m(i, j) * y.data[i];
      REQUIRE(aty.data[j] == Catch::Approx(s).margin(1e-10));
    }
  }
}

TEST_CASE("compose equals the product of dense factors") {
  LinOp blur = LinOp::gaussian_blur(6, 6, 0.8);
  LinOp down = LinOp::downsample(6, 6, 2);
  LinOp c = LinOp::compose(down, blur);
  const Eigen::MatrixXd mc = checks::dense_matrix_of(c);
  const Eigen::MatrixXd md = checks::dense_matrix_of(down) * checks::dense_matrix_of(blur);
  REQUIRE((mc - md).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gaussian blur preserves constant images") {
  LinOp blur = LinOp::gaussian_blur(9, 11, 1.7);
  Grid c({9, 11}, 2.0);
  Grid y = blur.apply(c);
  for (double v : y.data) REQUIRE(v == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("downsample keeps every k-th pixel and rounds shapes up") {
  LinOp d = LinOp::downsample(5, 5, 2);
  REQUIRE(d.out_shape() == Shape{3, 3});
  Grid x({5, 5});
  for (int i = 0; i < 25; ++i) x.data[i] = i;
  Grid y = d.apply(x);
  REQUIRE(y.at(0, 0) == 0.0);
  REQUIRE(y.at(0, 1) == 2.0);
  REQUIRE(y.at(1, 0) == 10.0);
  REQUIRE(y.at(2, 2) == 24.0);

  REQUIRE(LinOp::downsample(64, 64, 2).out_shape() == Shape{32, 32});
  REQUIRE(LinOp::downsample(65, 64, 2).out_shape() == Shape{33, 32});
}

TEST_CASE("shape mismatches and bad parameters throw") {
  LinOp g = LinOp::grad2d(4, 4);
  REQUIRE_THROWS_AS(g.apply(Grid({3, 3})), ShapeError);
  REQUIRE_THROWS_AS(g.adjoint(Grid({4, 4})), ShapeError);
  REQUIRE_THROWS_AS(LinOp::dense(2, 2, {1.0}), ParamError);
  REQUIRE_THROWS_AS(LinOp::grad2d(0, 3), ParamError);
  REQUIRE_THROWS_AS(
      LinOp::compose(LinOp::identity({3}), LinOp::grad2d(2, 2)), ShapeError);
}

TEST_CASE("norm_sq_estimate on identity and zero operators") {
  REQUIRE(norm_sq_estimate(LinOp::identity({10})) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(norm_sq_estimate(LinOp::mask(Grid({4}, 0.0))) == 0.0);
}

TEST_CASE("norm_sq_estimate matches the dense SVD oracle on grad2d 4x4") {
  LinOp g = LinOp::grad2d(4, 4);
  const double est = norm_sq_estimate(g, 2000, 1e-12);
  const double oracle = checks::largest_sv_sq(checks::dense_matrix_of(g));
  REQUIRE(std::abs(est - oracle) <= 1e-8);
}

TEST_CASE("norm_sq_estimate never exceeds the dense oracle by more than tol") {
  Rng rng(31);
  std::vector<double> entries;
  for (int i = 0; i < 6 * 4; ++i) entries.push_back(rng.normal());
  std::vector<LinOp> ops = {
      LinOp::grad2d(3, 3),
      LinOp::gaussian_blur(5, 5, 0.9),
      LinOp::downsample(6, 6, 2),
      LinOp::dense(6, 4, entries),
      LinOp::compose(LinOp::downsample(5, 5, 2), LinOp::gaussian_blur(5, 5, 1.0)),
      LinOp::mask(rng.normal_grid({4, 4})),
  };
  for (const LinOp& op : ops) {
    const double est = norm_sq_estimate(op, 5000, 1e-13);
    const double oracle = checks::largest_sv_sq(checks::dense_matrix_of(op));
    REQUIRE(est <= oracle + 1e-8);
    REQUIRE(est >= oracle - 1e-6 * (1.0 + oracle));
  }
}

TEST_CASE("grad2d squared norm on 256x256 approaches eight") {
  const double est = norm_sq_estimate(LinOp::grad2d(256, 256), 3000, 1e-12);
  REQUIRE(est >= 7.9);
  REQUIRE(est <= 8.0);
}
