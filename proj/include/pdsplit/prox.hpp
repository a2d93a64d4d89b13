#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "pdsplit/grid.hpp"
#include "pdsplit/linops.hpp"

namespace pdsplit {

// All free prox functions take the effective threshold theta = sigma*lambda;
// ProxFn folds its own weight in before dispatching here.

inline double soft(double a, double theta) {
  if (a > theta) return a - theta;
  if (a < -theta) return a + theta;
  return 0.0;
}

inline Grid prox_l1(const Grid& a, double theta) {
  if (theta < 0.0) throw ParamError("prox_l1: negative threshold");
  Grid z = a;
  for (double& v : z.data) v = soft(v, theta);
  return z;
}

namespace detail {
// Group layout of the 2,1-norm: leading axis indexes the components of each
// group, trailing axes index the groups (a {2,h,w} gradient field has one
// 2-vector per pixel). A flat vector is all singleton groups.
inline std::pair<std::size_t, std::size_t> group_layout(const Grid& a) {
  if (a.shape.size() < 2) return {1, a.size()};
  const std::size_t c = static_cast<std::size_t>(a.shape[0]);
  return {c, c == 0 ? 0 : a.size() / c};
}
}  // namespace detail

inline Grid prox_l21(const Grid& a, double theta) {
  if (theta < 0.0) throw ParamError("prox_l21: negative threshold");
  auto [c, groups] = detail::group_layout(a);
  Grid z = a;
  for (std::size_t p = 0; p < groups; ++p) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = a.data[j * groups + p];
      n2 += v * v;
    }
    const double n = std::sqrt(n2);
    const double scale = n > theta ? 1.0 - theta / n : 0.0;
    for (std::size_t j = 0; j < c; ++j) z.data[j * groups + p] *= scale;
  }
  return z;
}

// Projection onto {y : ||y_p||_2 <= lambda for every group p}, the prox of
// the conjugate of the 2,1-norm. lambda = 0 gives the zero field.
inline Grid project_ball21(const Grid& a, double lambda) {
  if (lambda < 0.0) throw ParamError("project_ball21: negative radius");
  auto [c, groups] = detail::group_layout(a);
  Grid z = a;
  for (std::size_t p = 0; p < groups; ++p) {
    double n2 = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = a.data[j * groups + p];
      n2 += v * v;
    }
    const double n = std::sqrt(n2);
    if (n > lambda) {
      const double scale = lambda > 0.0 ? lambda / n : 0.0;
      for (std::size_t j = 0; j < c; ++j) z.data[j * groups + p] *= scale;
    }
  }
  return z;
}

// Singular value soft-thresholding.
inline Grid prox_nuclear(const Grid& a, double theta) {
  if (theta < 0.0) throw ParamError("prox_nuclear: negative threshold");
  if (a.shape.size() != 2) throw ShapeError("prox_nuclear: needs a 2-D grid");
  const int m = a.shape[0], n = a.shape[1];
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      A(a.data.data(), m, n);
  Eigen::MatrixXd M = A;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd s = svd.singularValues();
  for (int i = 0; i < s.size(); ++i) s[i] = std::max(0.0, s[i] - theta);
  Eigen::MatrixXd Z = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  Grid z(a.shape);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) z.at(i, j) = Z(i, j);
  return z;
}

inline double nuclear_norm(const Grid& a) {
  if (a.shape.size() != 2) throw ShapeError("nuclear_norm: needs a 2-D grid");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      A(a.data.data(), a.shape[0], a.shape[1]);
  Eigen::MatrixXd M = A;
  return Eigen::BDCSVD<Eigen::MatrixXd>(M).singularValues().sum();
}

inline Grid project_box(const Grid& a, double lo, double hi) {
  if (lo > hi) throw ParamError("project_box: lo > hi");
  Grid z = a;
  for (double& v : z.data) v = std::clamp(v, lo, hi);
  return z;
}

inline Grid project_nonneg(const Grid& a) {
  Grid z = a;
  for (double& v : z.data) v = std::max(0.0, v);
  return z;
}

/// Proximable term with its weight. prox(a, sigma) returns the exact
/// minimizer of value(z) + (1/(2 sigma)) ||z - a||^2; indicator kinds are
/// projections and report value 0 (constraints are enforced in the limit by
/// the solvers, and the reported objective tracks the finite terms).
class ProxFn {
 public:
  enum class Kind { zero, l1, l21, nuclear, box, nonneg };

  static ProxFn zero() { return ProxFn(Kind::zero, 0.0, 0.0, 0.0); }
  static ProxFn l1(double lam) { return weighted(Kind::l1, lam); }
  static ProxFn l21(double lam) { return weighted(Kind::l21, lam); }
  static ProxFn nuclear(double lam) { return weighted(Kind::nuclear, lam); }
  static ProxFn nonneg() { return ProxFn(Kind::nonneg, 0.0, 0.0, 0.0); }
  static ProxFn box(double lo, double hi) {
    if (lo > hi) throw ParamError("ProxFn::box: lo > hi");
    return ProxFn(Kind::box, 0.0, lo, hi);
  }

  Kind kind() const { return kind_; }
  double weight() const { return lam_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool is_indicator() const {
    return kind_ == Kind::zero || kind_ == Kind::box || kind_ == Kind::nonneg;
  }

  double value(const Grid& x) const {
    switch (kind_) {
      case Kind::zero:
      case Kind::box:
      case Kind::nonneg:
        return 0.0;
      case Kind::l1:
        return lam_ * norm1(x);
      case Kind::l21: {
        auto [c, groups] = detail::group_layout(x);
        double s = 0.0;
        for (std::size_t p = 0; p < groups; ++p) {
          double n2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double v = x.data[j * groups + p];
            n2 += v * v;
          }
          s += std::sqrt(n2);
        }
        return lam_ * s;
      }
      case Kind::nuclear:
        return lam_ * nuclear_norm(x);
    }
    return 0.0;
  }

  Grid prox(const Grid& a, double sigma) const {
    if (sigma < 0.0) throw ParamError("ProxFn::prox: negative step");
    switch (kind_) {
      case Kind::zero:
        return a;
      case Kind::l1:
        return prox_l1(a, sigma * lam_);
      case Kind::l21:
        return prox_l21(a, sigma * lam_);
      case Kind::nuclear:
        return prox_nuclear(a, sigma * lam_);
      case Kind::box:
        return project_box(a, lo_, hi_);
      case Kind::nonneg:
        return project_nonneg(a);
    }
    return a;
  }

 private:
  ProxFn(Kind k, double lam, double lo, double hi) : kind_(k), lam_(lam), lo_(lo), hi_(hi) {}
  static ProxFn weighted(Kind k, double lam) {
    if (lam < 0.0) throw ParamError("ProxFn: negative weight");
    return ProxFn(k, lam, 0.0, 0.0);
  }
  Kind kind_;
  double lam_, lo_, hi_;
};

/// Prox of the Fenchel conjugate through the Moreau identity:
/// Prox_{sigma f*}(a) = a - sigma Prox_{f/sigma}(a/sigma).
inline Grid prox_conjugate(const ProxFn& base, const Grid& a, double sigma) {
  if (!(sigma > 0.0)) throw ParamError("prox_conjugate: step must be positive");
  Grid scaled = a;
  for (double& v : scaled.data) v /= sigma;
  Grid p = base.prox(scaled, 1.0 / sigma);
  Grid z = a;
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] -= sigma * p.data[i];
  return z;
}

/// Smooth term: zero or a quadratic (beta/2)||Ax - b||^2 with a cached
/// Lipschitz constant beta*||A||^2 (exact for identity and mask operators,
/// power-iteration estimate otherwise; an explicit override wins).
class SmoothFn {
 public:
  enum class Kind { zero, quadratic };

  static SmoothFn zero(Shape in) {
    SmoothFn f;
    f.kind_ = Kind::zero;
    f.in_ = std::move(in);
    f.lipschitz_ = 0.0;
    return f;
  }

  static SmoothFn quadratic(LinOp a, Grid b, double beta) {
    if (!(beta >= 0.0)) throw ParamError("SmoothFn::quadratic: negative weight");
    if (b.shape != a.out_shape())
      throw ShapeError("SmoothFn::quadratic: offset shape " + shape_str(b.shape) +
                       " does not match operator output " + shape_str(a.out_shape()));
    SmoothFn f;
    f.kind_ = Kind::quadratic;
    f.in_ = a.in_shape();
    f.beta_ = beta;
    f.lipschitz_ = beta * op_norm_sq(a);
    f.op_ = std::move(a);
    f.b_ = std::move(b);
    return f;
  }

  SmoothFn with_lipschitz(double l) const {
    if (!(l >= 0.0)) throw ParamError("SmoothFn::with_lipschitz: negative constant");
    SmoothFn f = *this;
    f.lipschitz_ = l;
    return f;
  }

  Kind kind() const { return kind_; }
  const Shape& in_shape() const { return in_; }
  double lipschitz() const { return lipschitz_; }
  double weight() const { return beta_; }
  const LinOp& op() const {
    if (kind_ != Kind::quadratic) throw CapabilityError("SmoothFn::op: zero function");
    return *op_;
  }
  const Grid& offset() const {
    if (kind_ != Kind::quadratic) throw CapabilityError("SmoothFn::offset: zero function");
    return b_;
  }

  double value(const Grid& x) const {
    if (kind_ == Kind::zero) return 0.0;
    Grid r = op_->apply(x);
    r -= b_;
    return 0.5 * beta_ * norm_sq(r);
  }

  Grid grad(const Grid& x) const {
    if (kind_ == Kind::zero) return Grid(in_);
    Grid r = op_->apply(x);
    r -= b_;
    Grid g = op_->adjoint(r);
    g *= beta_;
    return g;
  }

  std::pair<double, Grid> value_grad(const Grid& x) const {
    if (kind_ == Kind::zero) return {0.0, Grid(in_)};
    Grid r = op_->apply(x);
    r -= b_;
    const double val = 0.5 * beta_ * norm_sq(r);
    Grid g = op_->adjoint(r);
    g *= beta_;
    return {val, std::move(g)};
  }

 private:
  static double op_norm_sq(const LinOp& a) {
    if (a.kind() == OpKind::identity) return 1.0;
    if (a.kind() == OpKind::mask) {
      // Diagonal operator: exact norm from the largest weight.
      Grid ones(a.in_shape(), 1.0);
      double m = 0.0;
      Grid w = a.apply(ones);
      for (double v : w.data) m = std::max(m, v * v);
      return m;
    }
    return norm_sq_estimate(a, 2000, 1e-12);
  }

  Kind kind_ = Kind::zero;
  Shape in_;
  std::optional<LinOp> op_;
  Grid b_;
  double beta_ = 0.0;
  double lipschitz_ = 0.0;
};

inline std::pair<double, Grid> smooth_eval_grad(const SmoothFn& f, const Grid& x) {
  return f.value_grad(x);
}

}  // namespace pdsplit
