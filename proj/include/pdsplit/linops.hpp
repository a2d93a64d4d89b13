#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/grid.hpp"
#include "pdsplit/rng.hpp"

namespace pdsplit {

enum class OpKind { identity, dense, mask, grad2d, blur, downsample, compose };

/// Linear operator between Grid spaces with an exact adjoint. Value type;
/// copies share the immutable implementation.
class LinOp {
  struct Impl {
    Shape in, out;
    OpKind kind;
    Impl(Shape i, Shape o, OpKind k) : in(std::move(i)), out(std::move(o)), kind(k) {}
    virtual ~Impl() = default;
    virtual Grid apply(const Grid& x) const = 0;
    virtual Grid adjoint(const Grid& y) const = 0;
  };

 public:
  const Shape& in_shape() const { return impl_->in; }
  const Shape& out_shape() const { return impl_->out; }
  OpKind kind() const { return impl_->kind; }
  bool is_identity() const { return impl_->kind == OpKind::identity; }

  Grid apply(const Grid& x) const {
    if (x.shape != impl_->in)
      throw ShapeError("LinOp::apply: input shape " + shape_str(x.shape) +
                       ", expected " + shape_str(impl_->in));
    return impl_->apply(x);
  }

  Grid adjoint(const Grid& y) const {
    if (y.shape != impl_->out)
      throw ShapeError("LinOp::adjoint: input shape " + shape_str(y.shape) +
                       ", expected " + shape_str(impl_->out));
    return impl_->adjoint(y);
  }

  static LinOp identity(Shape s);
  static LinOp dense(int rows, int cols, std::vector<double> row_major);
  static LinOp mask(Grid weights);
  static LinOp grad2d(int h, int w);
  static LinOp gaussian_blur(int h, int w, double sigma);
  static LinOp downsample(int h, int w, int factor);
  static LinOp compose(LinOp outer, LinOp inner);

 private:
  explicit LinOp(std::shared_ptr<const Impl> p) : impl_(std::move(p)) {}
  std::shared_ptr<const Impl> impl_;

  struct IdentityImpl;
  struct DenseImpl;
  struct MaskImpl;
  struct Grad2dImpl;
  struct BlurImpl;
  struct DownsampleImpl;
  struct ComposeImpl;
};

struct LinOp::IdentityImpl final : LinOp::Impl {
  explicit IdentityImpl(Shape s) : Impl(s, s, OpKind::identity) {}
  Grid apply(const Grid& x) const override { return x; }
  Grid adjoint(const Grid& y) const override { return y; }
};

struct LinOp::DenseImpl final : LinOp::Impl {
  std::vector<double> a;  // row-major rows x cols
  int rows, cols;
  DenseImpl(int r, int c, std::vector<double> d)
      : Impl({c}, {r}, OpKind::dense), a(std::move(d)), rows(r), cols(c) {}
  Grid apply(const Grid& x) const override {
    Grid y(out);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        A(a.data(), rows, cols);
    Eigen::Map<const Eigen::VectorXd> xv(x.data.data(), cols);
    Eigen::Map<Eigen::VectorXd> yv(y.data.data(), rows);
    yv.noalias() = A * xv;
    return y;
  }
  Grid adjoint(const Grid& y) const override {
    Grid x(in);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        A(a.data(), rows, cols);
    Eigen::Map<const Eigen::VectorXd> yv(y.data.data(), rows);
    Eigen::Map<Eigen::VectorXd> xv(x.data.data(), cols);
    xv.noalias() = A.transpose() * yv;
    return x;
  }
};

struct LinOp::MaskImpl final : LinOp::Impl {
  Grid w;
  explicit MaskImpl(Grid weights)
      : Impl(weights.shape, weights.shape, OpKind::mask), w(std::move(weights)) {}
  Grid apply(const Grid& x) const override {
    Grid y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= w.data[i];
    return y;
  }
  // Diagonal, self-adjoint.
  Grid adjoint(const Grid& y) const override { return apply(y); }
};

// Forward differences with a zero last difference per axis (Neumann-type
// boundary). Output stacks the vertical then horizontal parts: {2,h,w}.
struct LinOp::Grad2dImpl final : LinOp::Impl {
  int h, w;
  Grad2dImpl(int hh, int ww) : Impl({hh, ww}, {2, hh, ww}, OpKind::grad2d), h(hh), w(ww) {}
  Grid apply(const Grid& x) const override {
    Grid y(out);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const std::size_t p = static_cast<std::size_t>(i) * w + j;
        y.data[p] = (i + 1 < h) ? x.data[p + w] - x.data[p] : 0.0;
        y.data[plane + p] = (j + 1 < w) ? x.data[p + 1] - x.data[p] : 0.0;
      }
    return y;
  }
  Grid adjoint(const Grid& y) const override {
    Grid x(in);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const std::size_t p = static_cast<std::size_t>(i) * w + j;
        double v = 0.0;
        if (i > 0) v += y.data[p - w];
        if (i + 1 < h) v -= y.data[p];
        if (j > 0) v += y.data[plane + p - 1];
        if (j + 1 < w) v -= y.data[plane + p];
        x.data[p] = v;
      }
    return x;
  }
};

namespace detail {
// Symmetric (half-sample reflect) boundary index.
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}
}  // namespace detail

// Separable Gaussian, kernel truncated at 3*sigma, reflect padding. The
// adjoint scatters through the same index map, so the pair is an exact
// transpose including the boundary handling.
struct LinOp::BlurImpl final : LinOp::Impl {
  int h, w, r;
  std::vector<double> k;
  BlurImpl(int hh, int ww, double sigma)
      : Impl({hh, ww}, {hh, ww}, OpKind::blur), h(hh), w(ww) {
    r = static_cast<int>(std::ceil(3.0 * sigma));
    k.resize(2 * r + 1);
    double s = 0.0;
    for (int i = -r; i <= r; ++i) s += (k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma)));
    for (double& v : k) v /= s;
  }

  void pass(const std::vector<double>& in_v, std::vector<double>& out_v, int n_along,
            int n_across, int stride_along, int stride_across, bool transpose) const {
    for (int a = 0; a < n_across; ++a)
      for (int i = 0; i < n_along; ++i) {
        const std::size_t pi = static_cast<std::size_t>(a) * stride_across +
                               static_cast<std::size_t>(i) * stride_along;
        for (int t = -r; t <= r; ++t) {
          const int m = detail::reflect_index(i + t, n_along);
          const std::size_t pm = static_cast<std::size_t>(a) * stride_across +
                                 static_cast<std::size_t>(m) * stride_along;
          if (!transpose)
            out_v[pi] += k[t + r] * in_v[pm];
          else
            out_v[pm] += k[t + r] * in_v[pi];
        }
      }
  }

  Grid apply(const Grid& x) const override {
    std::vector<double> tmp(x.size(), 0.0);
    pass(x.data, tmp, h, w, w, 1, false);  // vertical
    Grid y(out);
    std::fill(y.data.begin(), y.data.end(), 0.0);
    pass(tmp, y.data, w, h, 1, w, false);  // horizontal
    return y;
  }
  Grid adjoint(const Grid& y) const override {
    std::vector<double> tmp(y.size(), 0.0);
    pass(y.data, tmp, w, h, 1, w, true);
    Grid x(in);
    std::fill(x.data.begin(), x.data.end(), 0.0);
    pass(tmp, x.data, h, w, w, 1, true);
    return x;
  }
};

// Keep every factor-th pixel starting at (0,0); adjoint inserts zeros.
struct LinOp::DownsampleImpl final : LinOp::Impl {
  int h, w, f, hh, ww;
  DownsampleImpl(int hin, int win, int factor)
      : Impl({hin, win}, {(hin + factor - 1) / factor, (win + factor - 1) / factor},
             OpKind::downsample),
        h(hin), w(win), f(factor), hh(out[0]), ww(out[1]) {}
  Grid apply(const Grid& x) const override {
    Grid y(out);
    for (int i = 0; i < hh; ++i)
      for (int j = 0; j < ww; ++j)
        y.at(i, j) = x.data[static_cast<std::size_t>(i) * f * w + static_cast<std::size_t>(j) * f];
    return y;
  }
  Grid adjoint(const Grid& y) const override {
    Grid x(in);
    for (int i = 0; i < hh; ++i)
      for (int j = 0; j < ww; ++j)
        x.data[static_cast<std::size_t>(i) * f * w + static_cast<std::size_t>(j) * f] = y.at(i, j);
    return x;
  }
};

struct LinOp::ComposeImpl final : LinOp::Impl {
  LinOp a, b;  // applies a(b(x))
  ComposeImpl(LinOp outer, LinOp inner)
      : Impl(inner.in_shape(), outer.out_shape(), OpKind::compose),
        a(std::move(outer)), b(std::move(inner)) {}
  Grid apply(const Grid& x) const override { return a.apply(b.apply(x)); }
  Grid adjoint(const Grid& y) const override { return b.adjoint(a.adjoint(y)); }
};

inline LinOp LinOp::identity(Shape s) {
  if (shape_count(s) == 0) throw ParamError("identity: empty shape");
  return LinOp(std::make_shared<IdentityImpl>(std::move(s)));
}

inline LinOp LinOp::dense(int rows, int cols, std::vector<double> row_major) {
  if (rows <= 0 || cols <= 0) throw ParamError("dense: nonpositive dimensions");
  if (row_major.size() != static_cast<std::size_t>(rows) * cols)
    throw ParamError("dense: entry count does not match rows*cols");
  return LinOp(std::make_shared<DenseImpl>(rows, cols, std::move(row_major)));
}

inline LinOp LinOp::mask(Grid weights) {
  if (weights.size() == 0) throw ParamError("mask: empty weights");
  return LinOp(std::make_shared<MaskImpl>(std::move(weights)));
}

inline LinOp LinOp::grad2d(int h, int w) {
  if (h <= 0 || w <= 0) throw ParamError("grad2d: nonpositive dimensions");
  return LinOp(std::make_shared<Grad2dImpl>(h, w));
}

inline LinOp LinOp::gaussian_blur(int h, int w, double sigma) {
  if (h <= 0 || w <= 0) throw ParamError("gaussian_blur: nonpositive dimensions");
  if (!(sigma > 0.0)) throw ParamError("gaussian_blur: sigma must be positive");
  return LinOp(std::make_shared<BlurImpl>(h, w, sigma));
}

inline LinOp LinOp::downsample(int h, int w, int factor) {
  if (h <= 0 || w <= 0) throw ParamError("downsample: nonpositive dimensions");
  if (factor < 1) throw ParamError("downsample: factor must be >= 1");
  return LinOp(std::make_shared<DownsampleImpl>(h, w, factor));
}

inline LinOp LinOp::compose(LinOp outer, LinOp inner) {
  if (inner.out_shape() != outer.in_shape())
    throw ShapeError("compose: inner output " + shape_str(inner.out_shape()) +
                     " does not feed outer input " + shape_str(outer.in_shape()));
  return LinOp(std::make_shared<ComposeImpl>(std::move(outer), std::move(inner)));
}

/// Largest eigenvalue of K^T K (= ||K||^2) by power iteration from a
/// normalized all-ones vector. Rayleigh quotients of a PSD matrix can only
/// underestimate, so the result is a safe lower bound up to the tolerance.
/// Operators that annihilate constants (gradients) collapse the first
/// iterate; one restart from a fixed-seed Gaussian vector covers those, and
/// a second collapse means the zero operator.
inline double norm_sq_estimate(const LinOp& op, int max_iters = 500, double tol = 1e-10) {
  if (max_iters < 1) throw ParamError("norm_sq_estimate: max_iters must be >= 1");
  Grid v(op.in_shape(), 1.0);
  const double n0 = norm(v);
  for (double& x : v.data) x /= n0;
  double lam = -1.0;
  bool restarted = false;
  for (int it = 0; it < max_iters; ++it) {
    Grid u = op.adjoint(op.apply(v));
    const double lam_new = dot(v, u);
    const double nu = norm(u);
    if (nu < 1e-14) {
      if (restarted) return 0.0;
      restarted = true;
      v = Rng(0x9e3779b97f4a7c15ULL).normal_grid(op.in_shape());
      const double nv = norm(v);
      if (nv < 1e-14) return 0.0;
      for (double& x : v.data) x /= nv;
      lam = -1.0;
      continue;
    }
    for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = u.data[i] / nu;
    if (lam >= 0.0 && std::abs(lam_new - lam) <= tol * std::max(std::abs(lam_new), 1e-300))
      return lam_new;
    lam = lam_new;
  }
  return lam;
}

}  // namespace pdsplit
