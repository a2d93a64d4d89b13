#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pdsplit/grid.hpp"
#include "pdsplit/solvers.hpp"

namespace pdsplit {

struct PDPoint {
  Grid x, y;
};

// Metric data for the per-variant distance-like functions d and d-tilde.
struct CertMetric {
  Variant variant;
  double sigma, tau, l_f1;
};

inline CertMetric metric_of(const SolverConfig& c, const SaddleProblem& p) {
  return {c.variant, c.sigma, c.tau, c.fair ? p.l_f1() : p.l_f()};
}

// Gradient values of f1 needed by the PD3O metric, which depends on the
// points' gradients and, in the d-tilde role, on the comparison point's.
struct DGrads {
  Grid at_v, at_ref;
};
struct DtGrads {
  Grid at_comparison, at_prev, at_next;
};

namespace detail {
inline double dbar_pd3o(double sigma, double tau, const Grid& dx, const Grid& dy,
                        const Grid& dg) {
  // 1/(2s)|dx|^2 + 1/(2t)|dy|^2 + s/2|dg|^2 - <dy, dx - s dg> - <dx, dg>
  return 0.5 / sigma * norm_sq(dx) + 0.5 / tau * norm_sq(dy) + 0.5 * sigma * norm_sq(dg) -
         dot(dy, dx) + sigma * dot(dy, dg) - dot(dx, dg);
}
}  // namespace detail

/// d(v; v_ref): the variant's Bregman-like distance generating the key
/// inequality. CV carries the cross term of its primal-dual metric; PDFP and
/// AFBA share the diagonal metric; PD3O needs the f1 gradients at both
/// points (pass DGrads).
inline double d_value(const CertMetric& m, const PDPoint& v, const PDPoint& ref,
                      const DGrads* grads = nullptr) {
  Grid dx = v.x;
  dx -= ref.x;
  Grid dy = v.y;
  dy -= ref.y;
  switch (m.variant) {
    case Variant::cv:
      return 0.5 / m.sigma * norm_sq(dx) + 0.5 / m.tau * norm_sq(dy) - dot(dx, dy);
    case Variant::pdfp:
    case Variant::afba:
      return 0.5 / m.sigma * norm_sq(dx) + 0.5 / m.tau * norm_sq(dy);
    case Variant::pd3o: {
      if (!grads) throw CapabilityError("d_value: PD3O needs f1 gradient values");
      Grid dg = grads->at_v;
      dg -= grads->at_ref;
      return detail::dbar_pd3o(m.sigma, m.tau, dx, dy, dg);
    }
  }
  return 0.0;
}

/// d-tilde(v_next; v_prev): the per-step decrease certificate. For PD3O the
/// first slot of the underlying two-point form is paired with the comparison
/// point's gradient, plus a cocoercivity surplus term.
inline double dtilde_value(const CertMetric& m, const PDPoint& next, const PDPoint& prev,
                           const DtGrads* grads = nullptr) {
  Grid dx = next.x;
  dx -= prev.x;
  Grid dy = next.y;
  dy -= prev.y;
  switch (m.variant) {
    case Variant::cv:
      return (0.5 / m.sigma - 0.5 * m.l_f1) * norm_sq(dx) + 0.5 / m.tau * norm_sq(dy) -
             dot(dx, dy);
    case Variant::pdfp:
    case Variant::afba:
      return 0.5 * (1.0 / m.sigma - m.l_f1) * norm_sq(dx) +
             0.5 * (1.0 / m.tau - m.sigma) * norm_sq(dy);
    case Variant::pd3o: {
      if (!grads) throw CapabilityError("dtilde_value: PD3O needs f1 gradient values");
      Grid dg = grads->at_comparison;
      dg -= grads->at_prev;
      double val = detail::dbar_pd3o(m.sigma, m.tau, dx, dy, dg);
      Grid de = grads->at_comparison;
      de -= grads->at_next;
      if (m.l_f1 > 0.0) val += (0.5 / m.l_f1 - 0.5 * m.sigma) * norm_sq(de);
      return val;
    }
  }
  return 0.0;
}

/// Closed-form value of (g(K.) + f2)* at y for the certifiable class:
/// K identity, f2 zero or a separable quadratic, g separable. Returns +inf
/// outside the conjugate's domain; throws CapabilityError when no closed
/// form exists.
inline double conj_gf2_value(const SaddleProblem& p, const Grid& y) {
  if (!p.K.is_identity())
    throw CapabilityError("conj_gf2_value: closed form needs K = identity");
  const double inf = std::numeric_limits<double>::infinity();

  if (p.f2.kind() == SmoothFn::Kind::zero) {
    switch (p.g.kind()) {
      case ProxFn::Kind::zero: {
        for (double v : y.data)
          if (v != 0.0) return inf;
        return 0.0;
      }
      case ProxFn::Kind::nonneg: {
        for (double v : y.data)
          if (v > 0.0) return inf;
        return 0.0;
      }
      case ProxFn::Kind::l1: {
        for (double v : y.data)
          if (std::abs(v) > p.g.weight()) return inf;
        return 0.0;
      }
      case ProxFn::Kind::box: {
        double s = 0.0;
        for (double v : y.data) s += v >= 0.0 ? v * p.g.hi() : v * p.g.lo();
        return s;
      }
      default:
        throw CapabilityError("conj_gf2_value: no closed form for this g");
    }
  }

  if (p.f2.kind() != SmoothFn::Kind::quadratic)
    throw CapabilityError("conj_gf2_value: unsupported f2");
  const OpKind a = p.f2.op().kind();
  if (a != OpKind::identity && a != OpKind::mask)
    throw CapabilityError("conj_gf2_value: f2 must be separable");
  Grid m(p.primal_shape, 1.0);
  if (a == OpKind::mask) m = p.f2.op().apply(m);
  const double beta = p.f2.weight();
  const Grid& b = p.f2.offset();

  // Per coordinate: sup_{z in C} y z - (beta/2)(m z - b)^2, concave in z.
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double mi = m.data[i];
    const double curv = beta * mi * mi;
    if (curv <= 0.0) throw CapabilityError("conj_gf2_value: flat coordinate in f2");
    double z = (y.data[i] + beta * mi * b.data[i]) / curv;
    switch (p.g.kind()) {
      case ProxFn::Kind::zero:
        break;
      case ProxFn::Kind::nonneg:
        z = std::max(0.0, z);
        break;
      case ProxFn::Kind::box:
        z = std::clamp(z, p.g.lo(), p.g.hi());
        break;
      default:
        throw CapabilityError("conj_gf2_value: g must be clamp-type with quadratic f2");
    }
    const double r = mi * z - b.data[i];
    total += y.data[i] * z - 0.5 * beta * r * r;
  }
  return total;
}

/// Saddle objective of the fair form: Psi(v) = f1(x) + h(x) + (g(K.)+f2)*(y).
inline double psi_value(const SaddleProblem& p, const PDPoint& v) {
  const double hx = p.h.value(v.x);
  return p.f1.value(v.x) + hx + conj_gf2_value(p, v.y);
}

struct Transition {
  PDPoint v_prev;       // (x^k, y^k)
  Grid x_hat;           // x-hat^{k+1}
  PDPoint v_next;       // (x^{k+1}, y^{k+1})
  const Grid* d = nullptr;  // inexact dual correction; null or zero = exact
};

/// Residual RHS - LHS of the per-iteration key inequality at comparison
/// point v. Nonnegative (up to roundoff) whenever the step-size conditions
/// hold. For inexact dual steps the subgradient optimality of y^{k+1} reads
/// (g~+f2)*(y) - (g~+f2)*(y^{k+1}) - <y - y^{k+1}, x-bar> >=
/// (1/tau)<y - y^{k+1}, y^k - y^{k+1} + d^{k+1}>, so the right-hand side of
/// the key inequality carries the correction -(1/tau)<y - y^{k+1}, d^{k+1}>
/// when d is present.
inline double key_inequality_residual(const SaddleProblem& p, const CertMetric& m,
                                      const Transition& t, const PDPoint& v) {
  const PDPoint u{t.x_hat, t.v_next.y};
  const double psi_u = psi_value(p, u);
  const double psi_v = psi_value(p, v);
  if (std::isinf(psi_v)) return std::numeric_limits<double>::infinity();

  // <v - u, F(u)> with F(v) = (y, -x)
  Grid dxu = v.x;
  dxu -= u.x;
  Grid dyu = v.y;
  dyu -= u.y;
  const double pairing = dot(dxu, u.y) - dot(dyu, u.x);
  const double lhs = psi_u - psi_v - pairing;

  double rhs;
  if (m.variant == Variant::pd3o) {
    Grid gv = p.f1.grad(v.x);
    Grid gp = p.f1.grad(t.v_prev.x);
    Grid gn = p.f1.grad(t.v_next.x);
    DGrads prev_pair{gv, gp};
    DGrads next_pair{gv, gn};
    DtGrads step_pair{gv, gp, gn};
    rhs = d_value(m, v, t.v_prev, &prev_pair) - d_value(m, v, t.v_next, &next_pair) -
          dtilde_value(m, t.v_next, t.v_prev, &step_pair);
  } else {
    rhs = d_value(m, v, t.v_prev) - d_value(m, v, t.v_next) -
          dtilde_value(m, t.v_next, t.v_prev);
  }
  if (t.d && t.d->size() > 0) {
    Grid dy = v.y;
    dy -= t.v_next.y;
    rhs -= dot(dy, *t.d) / m.tau;
  }
  return rhs - lhs;
}

/// Primal-dual gap against a saddle point: Gap(v) = Psi(v) - Psi(v*) +
/// <v - v*, F(v*)>; zero exactly at saddle points, positive elsewhere.
inline double gap_value(const SaddleProblem& p, const PDPoint& v, const PDPoint& v_star) {
  const double psi_v = psi_value(p, v);
  if (std::isinf(psi_v)) return psi_v;
  Grid dx = v.x;
  dx -= v_star.x;
  Grid dy = v.y;
  dy -= v_star.y;
  const double pairing = dot(dx, v_star.y) - dot(dy, v_star.x);
  return psi_v - psi_value(p, v_star) + pairing;
}

/// Gap of the ergodic averages u-hat^N = (1/N) sum_{k=1..N} (x-hat^k, y^k)
/// at each requested N. states must hold the recorded snapshots (states[k]
/// carries x-hat^k and y^k for k >= 1).
inline std::vector<std::pair<int, double>> ergodic_gap(const SaddleProblem& p,
                                                       const std::vector<Snapshot>& states,
                                                       const PDPoint& v_star,
                                                       const std::vector<int>& n_grid) {
  if (states.size() < 2) throw ParamError("ergodic_gap: no recorded iterations");
  Grid sx(states[1].x_hat.shape), sy(states[1].y.shape);
  std::vector<std::pair<int, double>> out;
  std::size_t grid_pos = 0;
  std::vector<int> sorted = n_grid;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 1; k < states.size() && grid_pos < sorted.size(); ++k) {
    sx += states[k].x_hat;
    sy += states[k].y;
    const int n = static_cast<int>(k);
    while (grid_pos < sorted.size() && sorted[grid_pos] == n) {
      PDPoint avg{(1.0 / n) * sx, (1.0 / n) * sy};
      out.emplace_back(n, gap_value(p, avg, v_star));
      ++grid_pos;
    }
  }
  if (grid_pos < sorted.size())
    throw ParamError("ergodic_gap: trace shorter than the largest requested N");
  return out;
}

/// Least-squares slope of log(gap) against log(N) over the pairs with
/// n_min <= N <= n_max and positive gap.
inline double loglog_slope(const std::vector<std::pair<int, double>>& gaps, int n_min,
                           int n_max) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (const auto& [n, g] : gaps) {
    if (n < n_min || n > n_max || !(g > 0.0)) continue;
    const double lx = std::log(static_cast<double>(n)), ly = std::log(g);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt < 2) throw ParamError("loglog_slope: fewer than two usable points");
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

}  // namespace pdsplit
