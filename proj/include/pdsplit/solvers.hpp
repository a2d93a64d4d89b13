#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdsplit/grid.hpp"
#include "pdsplit/linops.hpp"
#include "pdsplit/prox.hpp"

namespace pdsplit {

// The four base iterations. Each comes in an original flavor (dual variable
// in the range of K, closed-form Prox of g*) and a fair flavor (smooth term
// split as f = f1 + f2, dual variable in the primal space, dual prox of
// (g(K.) + f2)* taken exactly or approximated by an inner solver).
enum class Variant { cv, pdfp, afba, pd3o };

inline std::string variant_name(Variant v, bool fair) {
  const char* base = v == Variant::cv     ? "CV"
                     : v == Variant::pdfp ? "PDFP"
                     : v == Variant::afba ? "AFBA"
                                          : "PD3O";
  return fair ? std::string("F") + base : std::string(base);
}

struct SaddleProblem {
  SmoothFn f1, f2;  // f = f1 + f2
  ProxFn h, g;
  LinOp K;
  double k_norm_sq = 0.0;  // ||K||^2
  Shape primal_shape;

  double l_f1() const { return f1.lipschitz(); }
  double l_f2() const { return f2.lipschitz(); }
  double l_f() const { return f1.lipschitz() + f2.lipschitz(); }

  // Objective of the composite problem; indicator terms contribute zero.
  double objective(const Grid& x) const {
    return f1.value(x) + f2.value(x) + h.value(x) + g.value(K.apply(x));
  }
};

inline SaddleProblem make_problem(SmoothFn f1, SmoothFn f2, ProxFn h, ProxFn g, LinOp K) {
  SaddleProblem p{std::move(f1), std::move(f2), std::move(h), std::move(g), std::move(K)};
  if (p.f1.in_shape() != p.K.in_shape() || p.f2.in_shape() != p.K.in_shape())
    throw ShapeError("make_problem: smooth terms and K disagree on the primal shape");
  p.primal_shape = p.K.in_shape();
  p.k_norm_sq = p.K.is_identity() ? 1.0 : norm_sq_estimate(p.K, 2000, 1e-12);
  return p;
}

struct InnerConfig {
  enum class Solver { prox_grad, condat_vu };
  enum class Mode { exact, budget, criterion };
  Solver solver = Solver::prox_grad;
  Mode mode = Mode::exact;
  int inn = 1;            // budget mode: fixed inner steps per outer iteration
  double eps0 = 1.0;      // criterion mode: eps_k = eps0 / k^2
  int hard_cap = 100000;  // criterion mode: inner step bound
};

struct SolverConfig {
  Variant variant = Variant::pdfp;
  bool fair = true;
  double sigma = 0.0, tau = 0.0;
  InnerConfig inner;
  double stop_tol = 1e-6;
  int max_outer = 100000;
  bool record_states = false;
  std::string name;  // display label; empty = variant_name()

  std::optional<Grid> x0, y0;
};

struct StepSizes {
  double sigma, tau;
};

enum class Preset { lasso, lrtv, ctv, safe };

/// Step sizes per variant. The CV presets sit exactly on the closed
/// boundary of the admissible region by construction (sigma*tau*||K||^2 =
/// 1 - sigma*L), which validate_steps accepts.
inline StepSizes stepsize_plan(Variant v, bool fair, Preset p, double l_f, double l_f1,
                               double k2) {
  const double lf = l_f > 0.0 ? l_f : 1.0;
  const double lf1 = l_f1 > 0.0 ? l_f1 : 1.0;
  if (v == Variant::cv) {
    double prod;  // target sigma*tau (fair) or sigma*tau (original, with ||K||^2 factored in)
    switch (p) {
      case Preset::lasso:
        prod = 0.25;
        break;
      case Preset::lrtv:
      case Preset::ctv:
        prod = fair ? 0.1 : 1.0 / 80.0;
        break;
      case Preset::safe: {
        if (fair) {
          const double s = 0.5 / lf1;
          return {s, 0.9 * (1.0 - s * l_f1) / s};
        }
        const double s = 0.5 / lf;
        const double t = k2 > 0.0 ? 0.9 * (1.0 - s * l_f) / (s * k2) : 1.0 / s;
        return {s, t};
      }
    }
    if (fair) {
      const double s = (1.0 - prod) / lf1;
      return {s, prod / s};
    }
    if (prod * k2 >= 1.0)
      throw ParamError("stepsize_plan: CV preset infeasible for this operator norm");
    const double s = (1.0 - prod * k2) / lf;
    return {s, prod / s};
  }
  // PDFP / AFBA / PD3O share one recipe.
  if (fair) {
    const double s = 0.9 / lf1;
    return {s, 0.9 / s};
  }
  const double s = 0.9 / lf;
  const double t = k2 > 0.0 ? 0.9 / (s * k2) : 1.0 / s;
  return {s, t};
}

namespace detail {
// Closed-boundary comparison: the admissible regions are open in the
// analysis, but the published presets land exactly on the boundary, so the
// check accepts equality up to roundoff.
inline bool leq_boundary(double lhs, double rhs) {
  return lhs <= rhs * (1.0 + 1e-9) + 1e-12;
}
}  // namespace detail

inline void validate_steps(const SaddleProblem& p, const SolverConfig& c) {
  if (!(c.sigma > 0.0) || !(c.tau > 0.0))
    throw ParamError(variant_name(c.variant, c.fair) + ": step sizes must be positive");
  const double st = c.sigma * c.tau;
  if (c.fair) {
    if (c.variant == Variant::cv) {
      if (!detail::leq_boundary(st, 1.0 - c.sigma * p.l_f1()))
        throw ParamError("FCV: sigma*tau < 1 - sigma*L_f1 violated");
    } else {
      if (!detail::leq_boundary(st, 1.0))
        throw ParamError(variant_name(c.variant, true) + ": sigma*tau < 1 violated");
      if (!detail::leq_boundary(c.sigma * p.l_f1(), 1.0))
        throw ParamError(variant_name(c.variant, true) + ": sigma*L_f1 < 1 violated");
    }
  } else {
    const double stk = st * p.k_norm_sq;
    if (c.variant == Variant::cv) {
      if (!detail::leq_boundary(stk, 1.0 - c.sigma * p.l_f()))
        throw ParamError("CV: sigma*tau*||K||^2 < 1 - sigma*L_f violated");
    } else {
      if (!detail::leq_boundary(stk, 1.0))
        throw ParamError(variant_name(c.variant, false) + ": sigma*tau*||K||^2 < 1 violated");
      if (!detail::leq_boundary(c.sigma * p.l_f(), 1.0))
        throw ParamError(variant_name(c.variant, false) + ": sigma*L_f < 1 violated");
    }
  }
}

struct TraceRow {
  int k = 0;
  double resi = 0.0, f_value = 0.0;
  double snr = 0.0, ssim = 0.0;
  int inner_iters = 0;
  double d_norm = 0.0;
  double wall_time = 0.0;  // seconds since run start; kept out of CSV outputs
  double eps_k = 0.0, y_norm = 0.0;
};

enum class RunStatus { converged, max_iters, diverged };

struct Snapshot {
  Grid x, y;    // state after the iteration (x^k, y^k)
  Grid x_hat;   // the x-hat that produced this state; empty for k = 0
  Grid d;       // inexact dual correction d^k; empty when exact
};

struct Trace {
  std::vector<TraceRow> rows;
  RunStatus status = RunStatus::max_iters;
  Grid x_final, y_final;
  std::vector<Snapshot> states;  // filled when record_states is set
  std::string solver_name;
  // Outer iterations whose criterion-mode inner solve hit the hard cap
  // before meeting the acceptance bound; nonzero means those dual steps are
  // not certified by the criterion.
  int hard_cap_hits = 0;
};

// Divergence guard failure; carries whatever the run produced before the
// iterates left the finite range.
struct SolverDivergence : DivergenceError {
  SolverDivergence(int iter, Trace partial)
      : DivergenceError("iterates diverged at outer iteration " + std::to_string(iter)),
        iteration(iter),
        trace(std::move(partial)) {}
  int iteration;
  Trace trace;
};

/// Dual update y^{k+1} = Prox_{tau (g(K.)+f2)*}(y^k + tau x_bar), exactly or
/// through the inexact subgradient mechanism. Keeps the inner warm-start
/// state across outer iterations.
class DualUpdate {
 public:
  DualUpdate(const SaddleProblem& p, const SolverConfig& c) : p_(p), c_(c) {}

  static bool exact_supported(const SaddleProblem& p) {
    if (!p.K.is_identity()) return false;
    if (p.f2.kind() == SmoothFn::Kind::zero) return true;
    const OpKind a = p.f2.op().kind();
    if (a == OpKind::identity) return true;  // quadratic collapses into the prox step
    if (a == OpKind::mask) {
      // Separable quadratic: exact only against separable clamp-type g.
      switch (p.g.kind()) {
        case ProxFn::Kind::zero:
        case ProxFn::Kind::nonneg:
        case ProxFn::Kind::box:
          return true;
        default:
          return false;
      }
    }
    return false;
  }

  struct Result {
    Grid y;
    Grid z;  // inner iterate z^{k+1}
    Grid d;  // subgradient certificate; zero grid for exact steps
    int inner_iters = 0;
    double d_norm = 0.0;
    double eps_k = 0.0;
    bool capped = false;  // criterion mode stopped by the hard cap, not the bound
  };

  // outer_k is the 1-based index of the iterate being produced.
  Result step(const Grid& y, const Grid& x_bar, int outer_k) {
    const double tau = c_.tau;
    Grid z_bar = x_bar;
    axpy(z_bar, 1.0 / tau, y);  // z_bar = y/tau + x_bar
    if (c_.inner.mode == InnerConfig::Mode::exact) return exact_step(z_bar, tau);
    return inexact_step(z_bar, tau, outer_k);
  }

 private:
  Result exact_step(const Grid& z_bar, double tau) {
    if (!exact_supported(p_))
      throw CapabilityError("exact dual step unavailable for this composite; "
                            "use an inexact inner mode");
    Grid z;
    if (p_.f2.kind() == SmoothFn::Kind::zero) {
      z = p_.g.prox(z_bar, 1.0 / tau);
    } else if (p_.f2.op().kind() == OpKind::identity) {
      // (beta/2)||z-b||^2 + (tau/2)||z-z_bar||^2 collapses to a single
      // quadratic around z0 with curvature beta+tau.
      const double beta = p_.f2.weight();
      const Grid& b = p_.f2.offset();
      Grid z0(p_.primal_shape);
      for (std::size_t i = 0; i < z0.size(); ++i)
        z0.data[i] = (beta * b.data[i] + tau * z_bar.data[i]) / (beta + tau);
      z = p_.g.prox(z0, 1.0 / (beta + tau));
    } else {
      // Separable quadratic (beta/2)||Mz-b||^2 against a clamp-type g.
      const double beta = p_.f2.weight();
      const Grid& b = p_.f2.offset();
      Grid ones(p_.primal_shape, 1.0);
      Grid m = p_.f2.op().apply(ones);
      z = Grid(p_.primal_shape);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double mi = m.data[i];
        double v = (beta * mi * b.data[i] + tau * z_bar.data[i]) / (beta * mi * mi + tau);
        switch (p_.g.kind()) {
          case ProxFn::Kind::nonneg:
            v = std::max(0.0, v);
            break;
          case ProxFn::Kind::box:
            v = std::clamp(v, p_.g.lo(), p_.g.hi());
            break;
          default:
            break;
        }
        z.data[i] = v;
      }
    }
    Result r;
    r.y = z_bar;
    r.y -= z;
    r.y *= tau;  // y = tau (z_bar - z)
    r.z = std::move(z);
    r.d = Grid(p_.primal_shape);
    return r;
  }

  // grad of s(z) = f2(z) + (tau/2)||z - z_bar||^2
  Grid grad_s(const Grid& z, const Grid& z_bar, double tau) const {
    Grid g = p_.f2.grad(z);
    for (std::size_t i = 0; i < g.size(); ++i)
      g.data[i] += tau * (z.data[i] - z_bar.data[i]);
    return g;
  }

  Result inexact_step(const Grid& z_bar, double tau, int outer_k) {
    const bool use_cv = c_.inner.solver == InnerConfig::Solver::condat_vu;
    if (!use_cv && !p_.K.is_identity())
      throw CapabilityError("prox-grad inner solver needs K = identity; "
                            "use the inner Condat-Vu solver");
    if (!warm_) {
      z_ = z_bar;
      if (use_cv) w_ = Grid(p_.K.out_shape());
      warm_ = true;
    }
    const double ls = p_.l_f2() + tau;
    const double gamma = 1.0 / ls;          // prox-grad step
    const double s_in = 0.9 / ls;           // inner CV primal step
    const double t_in = 0.9 / (s_in * std::max(p_.k_norm_sq, 1e-300));

    const bool criterion = c_.inner.mode == InnerConfig::Mode::criterion;
    const double eps_k = criterion
        ? c_.inner.eps0 / (static_cast<double>(outer_k) * outer_k)
        : 0.0;
    const int cap = criterion ? c_.inner.hard_cap : c_.inner.inn;

    Result r;
    r.eps_k = eps_k;
    int steps = 0;
    while (true) {
      Grid z_next, d;
      if (!use_cv) {
        Grid gs = grad_s(z_, z_bar, tau);
        Grid arg = z_;
        axpy(arg, -gamma, gs);
        z_next = p_.g.prox(arg, gamma);
        // Exact subgradient of g + s at z_next from the prox optimality.
        d = grad_s(z_next, z_bar, tau);
        for (std::size_t i = 0; i < d.size(); ++i)
          d.data[i] += (z_.data[i] - z_next.data[i]) / gamma - gs.data[i];
      } else {
        Grid gs = grad_s(z_, z_bar, tau);
        Grid step_dir = p_.K.adjoint(w_);
        step_dir += gs;
        z_next = z_;
        axpy(z_next, -s_in, step_dir);
        Grid extr = z_next;
        extr *= 2.0;
        extr -= z_;
        Grid w_arg = w_;
        axpy(w_arg, t_in, p_.K.apply(extr));
        w_ = prox_conjugate(p_.g, w_arg, t_in);
        // Surrogate certificate from the inner dual iterate.
        d = p_.K.adjoint(w_);
        d += grad_s(z_next, z_bar, tau);
      }
      ++steps;
      z_ = std::move(z_next);
      const double dn = norm(d);
      Grid y_next = z_bar;
      y_next -= z_;
      y_next *= tau;
      y_next += d;
      if (criterion) {
        const double yn = norm(y_next);
        const bool certified = dn * std::max(1.0, yn) <= eps_k;
        if (certified || steps >= cap) {
          r.y = std::move(y_next);
          r.d = std::move(d);
          r.d_norm = dn;
          r.capped = !certified;
          break;
        }
      } else if (steps >= cap) {
        r.y = std::move(y_next);
        r.d = std::move(d);
        r.d_norm = dn;
        break;
      }
    }
    r.z = z_;
    r.inner_iters = steps;
    return r;
  }

  const SaddleProblem& p_;
  const SolverConfig& c_;
  Grid z_, w_;
  bool warm_ = false;
};

// snr/ssim hooks so the run loop can log reconstruction quality without
// depending on the metrics module.
struct RunMetrics {
  const Grid* truth = nullptr;
  double (*snr)(const Grid&, const Grid&) = nullptr;
  double (*ssim)(const Grid&, const Grid&) = nullptr;
};

/// One unified driver for all eight variant/fairness combinations.
/// Residual-based stopping: resi = ||x^{k+1} - x^k||_F / ||x^k||_F, with an
/// absolute norm once the denominator underflows.
inline Trace run(const SaddleProblem& p, const SolverConfig& cfg, const RunMetrics& metrics = {}) {
  validate_steps(p, cfg);
  const double sigma = cfg.sigma, tau = cfg.tau;
  const bool fair = cfg.fair;
  if (!fair && cfg.inner.mode != InnerConfig::Mode::exact)
    throw CapabilityError("original variants use the closed-form dual prox; "
                          "inner modes apply to fair runs only");

  const Shape dual_shape = fair ? p.primal_shape : p.K.out_shape();
  Grid x = cfg.x0 ? *cfg.x0 : Grid(p.primal_shape);
  Grid y = cfg.y0 ? *cfg.y0 : Grid(dual_shape);
  if (x.shape != p.primal_shape) throw ShapeError("run: x0 shape mismatch");
  if (y.shape != dual_shape) throw ShapeError("run: y0 shape mismatch");

  DualUpdate dual(p, cfg);
  Trace tr;
  tr.solver_name = cfg.name.empty() ? variant_name(cfg.variant, fair) : cfg.name;
  tr.rows.reserve(std::min(cfg.max_outer, 65536));
  if (cfg.record_states) tr.states.push_back({x, y, Grid{}, Grid{}});

  auto grad1 = [&](const Grid& v) { return fair ? p.f1.grad(v) : p.f1.grad(v) + p.f2.grad(v); };
  const auto t0 = std::chrono::steady_clock::now();

  for (int k = 0; k < cfg.max_outer; ++k) {
    Grid gk = grad1(x);

    // x_hat = Prox_{sigma h}(x - sigma (y-term + grad))
    Grid arg = x;
    if (fair) {
      axpy(arg, -sigma, y);
    } else {
      axpy(arg, -sigma, p.K.adjoint(y));
    }
    axpy(arg, -sigma, gk);
    Grid x_hat = p.h.prox(arg, sigma);

    // Iteration I
    Grid x_bar;
    switch (cfg.variant) {
      case Variant::cv:
        x_bar = x_hat;
        x_bar *= 2.0;
        x_bar -= x;
        break;
      case Variant::pdfp:
      case Variant::afba:
        x_bar = x_hat;
        break;
      case Variant::pd3o: {
        x_bar = x_hat;
        x_bar *= 2.0;
        x_bar -= x;
        Grid gh = grad1(x_hat);
        axpy(x_bar, sigma, gk);
        axpy(x_bar, -sigma, gh);
        break;
      }
    }

    // Dual step
    Grid y_next, d_grid;
    int inner_iters = 0;
    double d_norm = 0.0, eps_k = 0.0;
    if (fair) {
      auto res = dual.step(y, x_bar, k + 1);
      y_next = std::move(res.y);
      d_grid = std::move(res.d);
      inner_iters = res.inner_iters;
      d_norm = res.d_norm;
      eps_k = res.eps_k;
      if (res.capped) ++tr.hard_cap_hits;
    } else {
      Grid u = y;
      axpy(u, tau, p.K.apply(x_bar));
      y_next = prox_conjugate(p.g, u, tau);
    }

    // Iteration II
    Grid x_next;
    switch (cfg.variant) {
      case Variant::cv:
      case Variant::pd3o:
        x_next = x_hat;
        break;
      case Variant::pdfp: {
        Grid arg2 = x;
        if (fair) {
          axpy(arg2, -sigma, y_next);
        } else {
          axpy(arg2, -sigma, p.K.adjoint(y_next));
        }
        axpy(arg2, -sigma, gk);
        x_next = p.h.prox(arg2, sigma);
        break;
      }
      case Variant::afba: {
        x_next = x_bar;
        if (fair) {
          Grid dy = y_next;
          dy -= y;
          axpy(x_next, -sigma, dy);
        } else {
          Grid dy = y_next;
          dy -= y;
          axpy(x_next, -sigma, p.K.adjoint(dy));
        }
        break;
      }
    }

    if (!all_finite(x_next) || !all_finite(y_next)) {
      tr.status = RunStatus::diverged;
      tr.x_final = std::move(x);
      tr.y_final = std::move(y);
      throw SolverDivergence(k + 1, std::move(tr));
    }

    Grid dx = x_next;
    dx -= x;
    const double xn = norm(x);
    const double resi = xn > 1e-14 ? norm(dx) / xn : norm(dx);

    TraceRow row;
    row.k = k + 1;
    row.resi = resi;
    row.f_value = p.objective(x_next);
    if (metrics.truth) {
      if (metrics.snr) row.snr = metrics.snr(x_next, *metrics.truth);
      if (metrics.ssim) row.ssim = metrics.ssim(x_next, *metrics.truth);
    }
    row.inner_iters = inner_iters;
    row.d_norm = d_norm;
    row.eps_k = eps_k;
    row.y_norm = norm(y_next);
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    tr.rows.push_back(row);

    x = std::move(x_next);
    y = std::move(y_next);
    if (cfg.record_states) tr.states.push_back({x, y, std::move(x_hat), std::move(d_grid)});

    if (resi <= cfg.stop_tol) {
      tr.status = RunStatus::converged;
      break;
    }
  }

  tr.x_final = std::move(x);
  tr.y_final = std::move(y);
  if (tr.status != RunStatus::converged) tr.status = RunStatus::max_iters;
  return tr;
}

}  // namespace pdsplit
