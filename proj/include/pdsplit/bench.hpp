#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdsplit/certificates.hpp"
#include "pdsplit/io.hpp"
#include "pdsplit/problems.hpp"
#include "pdsplit/solvers.hpp"
#include "pdsplit/svg.hpp"

namespace pdsplit {

using nlohmann::json;

struct ExperimentSpec {
  std::string family = "nn_lasso";  // nn_lasso | quad_nonneg | ctv_inpaint | lrtv_sr
  int m = 300, n = 100;             // lasso rows/cols; n is the image side for image families
  std::uint64_t seed = 1;
  double delta = 0.35;
  double rho = 0.01;
  double lambda = 0.001;
  double lambda1 = 0.01, lambda2 = 0.01;
  double missing_frac = 0.15, noise_sigma = 0.02;
  double blur_sigma = 1.0;
  int factor = 2;
  std::string image = "phantom";  // or a 16-bit PGM path with a .json sidecar
};

struct SolverSpec {
  std::string variant = "pdfp";
  bool fair = true;
  std::string preset = "safe";  // lasso | lrtv | ctv | safe | explicit
  double sigma = 0.0, tau = 0.0;
  std::string inner_solver = "prox_grad";
  std::string inner_mode = "exact";  // exact | budget | criterion
  int inn = 1;
  double eps0 = 1.0;
  int hard_cap = 100000;
  double stop_tol = 1e-6;
  int max_outer = 100000;
  std::string name;
};

struct SweepSpec {
  std::vector<double> deltas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
  std::vector<int> inns = {1, 5, 10, 20};
};

struct CertifySpec {
  int samples = 20;
  int check_iters = 100;
  std::vector<int> rate_grid = {10, 20, 50, 100, 200, 500, 1000, 2000};
  double ref_tol = 1e-12;
  int ref_max_outer = 500000;
  double tol = 1e-8;
};

struct RunSpec {
  int schema = 1;
  ExperimentSpec experiment;
  std::vector<SolverSpec> solvers;
  SweepSpec sweep;
  CertifySpec certify;
  bool plots = true;
};

namespace bench_detail {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Variant parse_variant(const std::string& s) {
  if (s == "cv") return Variant::cv;
  if (s == "pdfp") return Variant::pdfp;
  if (s == "afba") return Variant::afba;
  if (s == "pd3o") return Variant::pd3o;
  throw ConfigError("unknown variant '" + s + "' (expected cv|pdfp|afba|pd3o)");
}

inline Preset parse_preset(const std::string& s) {
  if (s == "lasso") return Preset::lasso;
  if (s == "lrtv") return Preset::lrtv;
  if (s == "ctv") return Preset::ctv;
  if (s == "safe") return Preset::safe;
  throw ConfigError("unknown preset '" + s + "' (expected lasso|lrtv|ctv|safe|explicit)");
}

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (c == '-' || c == '_' || c == '.')
      out += c;
    else
      out += '_';
  }
  return out.empty() ? "solver" : out;
}

inline std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace bench_detail

inline RunSpec parse_run_spec(const json& j) {
  using bench_detail::maybe;
  RunSpec spec;
  maybe(j, "schema", spec.schema);
  if (spec.schema != 1)
    throw ConfigError("unsupported config schema " + std::to_string(spec.schema));
  if (j.contains("experiment")) {
    const json& e = j.at("experiment");
    auto& x = spec.experiment;
    maybe(e, "family", x.family);
    maybe(e, "m", x.m);
    maybe(e, "n", x.n);
    maybe(e, "seed", x.seed);
    maybe(e, "delta", x.delta);
    maybe(e, "rho", x.rho);
    maybe(e, "lambda", x.lambda);
    maybe(e, "lambda1", x.lambda1);
    maybe(e, "lambda2", x.lambda2);
    maybe(e, "missing_frac", x.missing_frac);
    maybe(e, "noise_sigma", x.noise_sigma);
    maybe(e, "blur_sigma", x.blur_sigma);
    maybe(e, "factor", x.factor);
    maybe(e, "image", x.image);
    if (x.family != "nn_lasso" && x.family != "quad_nonneg" && x.family != "ctv_inpaint" &&
        x.family != "lrtv_sr")
      throw ConfigError("unknown experiment family '" + x.family + "'");
  }
  if (!j.contains("solvers") || !j.at("solvers").is_array() || j.at("solvers").empty())
    throw ConfigError("config needs a non-empty 'solvers' array");
  for (const json& s : j.at("solvers")) {
    SolverSpec sv;
    maybe(s, "variant", sv.variant);
    maybe(s, "fair", sv.fair);
    maybe(s, "preset", sv.preset);
    maybe(s, "sigma", sv.sigma);
    maybe(s, "tau", sv.tau);
    if (s.contains("inner")) {
      const json& in = s.at("inner");
      maybe(in, "solver", sv.inner_solver);
      maybe(in, "mode", sv.inner_mode);
      maybe(in, "inn", sv.inn);
      maybe(in, "eps0", sv.eps0);
      maybe(in, "hard_cap", sv.hard_cap);
    }
    maybe(s, "stop_tol", sv.stop_tol);
    maybe(s, "max_outer", sv.max_outer);
    maybe(s, "name", sv.name);
    bench_detail::parse_variant(sv.variant);  // fail fast on bad names
    if (sv.preset != "explicit") bench_detail::parse_preset(sv.preset);
    if (sv.inner_solver != "prox_grad" && sv.inner_solver != "condat_vu")
      throw ConfigError("unknown inner solver '" + sv.inner_solver + "'");
    if (sv.inner_mode != "exact" && sv.inner_mode != "budget" && sv.inner_mode != "criterion")
      throw ConfigError("unknown inner mode '" + sv.inner_mode + "'");
    if (sv.inn < 1) throw ConfigError("inner budget must be >= 1");
    spec.solvers.push_back(std::move(sv));
  }
  if (j.contains("sweep")) {
    maybe(j.at("sweep"), "deltas", spec.sweep.deltas);
    maybe(j.at("sweep"), "inns", spec.sweep.inns);
  }
  if (j.contains("certify")) {
    const json& c = j.at("certify");
    maybe(c, "samples", spec.certify.samples);
    maybe(c, "check_iters", spec.certify.check_iters);
    maybe(c, "rate_grid", spec.certify.rate_grid);
    maybe(c, "ref_tol", spec.certify.ref_tol);
    maybe(c, "ref_max_outer", spec.certify.ref_max_outer);
    maybe(c, "tol", spec.certify.tol);
  }
  if (j.contains("output")) maybe(j.at("output"), "plots", spec.plots);
  return spec;
}

inline json dump_run_spec(const RunSpec& spec) {
  json e{{"family", spec.experiment.family}, {"m", spec.experiment.m},
         {"n", spec.experiment.n},           {"seed", spec.experiment.seed},
         {"delta", spec.experiment.delta},   {"rho", spec.experiment.rho},
         {"lambda", spec.experiment.lambda}, {"lambda1", spec.experiment.lambda1},
         {"lambda2", spec.experiment.lambda2},
         {"missing_frac", spec.experiment.missing_frac},
         {"noise_sigma", spec.experiment.noise_sigma},
         {"blur_sigma", spec.experiment.blur_sigma},
         {"factor", spec.experiment.factor}, {"image", spec.experiment.image}};
  json solvers = json::array();
  for (const auto& s : spec.solvers)
    solvers.push_back(json{{"variant", s.variant},
                           {"fair", s.fair},
                           {"preset", s.preset},
                           {"sigma", s.sigma},
                           {"tau", s.tau},
                           {"inner", json{{"solver", s.inner_solver},
                                          {"mode", s.inner_mode},
                                          {"inn", s.inn},
                                          {"eps0", s.eps0},
                                          {"hard_cap", s.hard_cap}}},
                           {"stop_tol", s.stop_tol},
                           {"max_outer", s.max_outer},
                           {"name", s.name}});
  return json{{"schema", spec.schema},
              {"experiment", std::move(e)},
              {"solvers", std::move(solvers)},
              {"sweep", json{{"deltas", spec.sweep.deltas}, {"inns", spec.sweep.inns}}},
              {"certify", json{{"samples", spec.certify.samples},
                               {"check_iters", spec.certify.check_iters},
                               {"rate_grid", spec.certify.rate_grid},
                               {"ref_tol", spec.certify.ref_tol},
                               {"ref_max_outer", spec.certify.ref_max_outer},
                               {"tol", spec.certify.tol}}},
              {"output", json{{"plots", spec.plots}}}};
}

inline Problem build_problem(const ExperimentSpec& e) {
  if (e.family == "nn_lasso") return gen_nn_lasso(e.m, e.n, e.seed, e.delta, e.rho);
  if (e.family == "quad_nonneg") return gen_quad_nonneg(e.n, e.seed, e.delta, e.rho);
  Grid img = e.image == "phantom" ? synth_phantom(e.n)
                                  : read_grid_pgm(e.image, e.image + ".json");
  if (e.family == "ctv_inpaint")
    return build_ctv_inpaint(img, e.missing_frac, e.noise_sigma, e.seed, e.delta, e.lambda);
  return build_lrtv_sr(img, e.blur_sigma, e.factor, e.delta, e.lambda1, e.lambda2);
}

/// Resolve a solver spec against a built problem: preset step sizes, inner
/// mode, display name.
inline SolverConfig resolve_solver(const SolverSpec& s, const Problem& prob) {
  SolverConfig c;
  c.variant = bench_detail::parse_variant(s.variant);
  c.fair = s.fair;
  if (s.preset == "explicit") {
    c.sigma = s.sigma;
    c.tau = s.tau;
  } else {
    const StepSizes st =
        stepsize_plan(c.variant, c.fair, bench_detail::parse_preset(s.preset),
                      prob.saddle.l_f(), prob.saddle.l_f1(), prob.saddle.k_norm_sq);
    c.sigma = st.sigma;
    c.tau = st.tau;
  }
  c.inner.solver = s.inner_solver == "condat_vu" ? InnerConfig::Solver::condat_vu
                                                 : InnerConfig::Solver::prox_grad;
  c.inner.mode = s.inner_mode == "exact"    ? InnerConfig::Mode::exact
                 : s.inner_mode == "budget" ? InnerConfig::Mode::budget
                                            : InnerConfig::Mode::criterion;
  c.inner.inn = s.inn;
  c.inner.eps0 = s.eps0;
  c.inner.hard_cap = s.hard_cap;
  c.stop_tol = s.stop_tol;
  c.max_outer = s.max_outer;
  c.name = s.name.empty() ? variant_name(c.variant, c.fair) : s.name;
  return c;
}

inline RunMetrics metrics_for(const Problem& prob) {
  RunMetrics m;
  m.truth = &prob.gt.truth;
  m.snr = [](const Grid& a, const Grid& b) { return snr_db(a, b); };
  m.ssim = [](const Grid& a, const Grid& b) { return ssim_global(a, b, 1.0); };
  return m;
}

namespace bench_detail {

inline std::string trace_csv(const Trace& tr) {
  std::string out = "k,resi,f_value,snr,ssim,inner_iters,d_norm\n";
  for (const auto& r : tr.rows) {
    out += std::to_string(r.k) + "," + format_sci(r.resi) + "," + format_sci(r.f_value) + "," +
           format_sci(r.snr) + "," + format_sci(r.ssim) + "," + std::to_string(r.inner_iters) +
           "," + format_sci(r.d_norm) + "\n";
  }
  return out;
}

inline const char* status_str(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters: return "max_iters";
    case RunStatus::diverged: return "diverged";
  }
  return "?";
}

struct TimedRun {
  Trace trace;
  double wall_s = 0.0, cpu_s = 0.0;
  bool diverged = false;
};

inline TimedRun timed_run(const SaddleProblem& p, const SolverConfig& c, const RunMetrics& m) {
  TimedRun out;
  const auto w0 = std::chrono::steady_clock::now();
  const std::clock_t c0 = std::clock();
  try {
    out.trace = run(p, c, m);
  } catch (SolverDivergence& e) {
    out.trace = std::move(e.trace);
    out.trace.status = RunStatus::diverged;
    out.diverged = true;
  }
  out.cpu_s = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
  return out;
}

}  // namespace bench_detail

/// run: every configured solver once on the configured experiment. Writes
/// per-solver trace CSVs, a summary CSV, the resolved config, plots, and a
/// meta.json holding everything time-dependent.
inline int cmd_run(const RunSpec& spec, const std::string& outdir, bool no_plots, bool quiet) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  Problem prob = build_problem(spec.experiment);
  const RunMetrics metrics = metrics_for(prob);

  json meta{{"command", "run"}, {"datetime", bench_detail::iso_utc_now()}, {"solvers", json::object()}};
  std::string summary = "solver,variant,fair,inner_mode,inn,status,iters,f_value,snr,ssim,resi\n";
  std::vector<Series> resi_series, snr_series, ssim_series;
  bool any_divergence = false;

  for (const auto& sspec : spec.solvers) {
    SolverConfig cfg = resolve_solver(sspec, prob);
    auto tr = bench_detail::timed_run(prob.saddle, cfg, metrics);
    any_divergence = any_divergence || tr.diverged;
    const std::string fname = bench_detail::sanitize(cfg.name);
    write_text_file(outdir + "/" + fname + "_trace.csv", bench_detail::trace_csv(tr.trace));
    meta["solvers"][cfg.name] = json{{"wall_s", tr.wall_s},
                                     {"cpu_s", tr.cpu_s},
                                     {"iters", tr.trace.rows.size()}};
    const TraceRow last = tr.trace.rows.empty() ? TraceRow{} : tr.trace.rows.back();
    summary += cfg.name + "," + sspec.variant + "," + (cfg.fair ? "1" : "0") + "," +
               sspec.inner_mode + "," + std::to_string(cfg.inner.inn) + "," +
               bench_detail::status_str(tr.trace.status) + "," + std::to_string(last.k) + "," +
               format_sci(last.f_value) + "," + format_sci(last.snr) + "," +
               format_sci(last.ssim) + "," + format_sci(last.resi) + "\n";
    Series rs{cfg.name, {}, {}}, ss{cfg.name, {}, {}}, ms{cfg.name, {}, {}};
    for (const auto& row : tr.trace.rows) {
      rs.x.push_back(row.k);
      rs.y.push_back(row.resi);
      ss.x.push_back(row.k);
      ss.y.push_back(row.snr);
      ms.x.push_back(row.k);
      ms.y.push_back(row.ssim);
    }
    resi_series.push_back(std::move(rs));
    snr_series.push_back(std::move(ss));
    ssim_series.push_back(std::move(ms));
    if (!quiet)
      std::printf("%-8s %-9s iters=%-7d f=%s\n", cfg.name.c_str(),
                  bench_detail::status_str(tr.trace.status), last.k,
                  format_sci(last.f_value).c_str());
  }

  write_text_file(outdir + "/summary.csv", summary);
  write_text_file(outdir + "/resolved_config.json", dump_run_spec(spec).dump(2) + "\n");
  write_text_file(outdir + "/meta.json", meta.dump(2) + "\n");
  if (!no_plots && spec.plots) {
    write_svg_lineplot(outdir + "/resi_vs_k.svg", "Relative residual", "iteration k", "resi",
                       resi_series, false, true);
    write_svg_lineplot(outdir + "/snr_vs_k.svg", "SNR", "iteration k", "SNR (dB)", snr_series,
                       false, false);
    write_svg_lineplot(outdir + "/ssim_vs_k.svg", "SSIM", "iteration k", "SSIM", ssim_series,
                       false, false);
  }
  return any_divergence ? 2 : 0;
}

/// sweep-delta: rebuild the experiment at each delta in the grid and rerun
/// every fair solver; iteration counts per delta go to CSV and SVG.
inline int cmd_sweep_delta(const RunSpec& spec, const std::string& outdir, bool no_plots,
                           bool quiet) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  std::string csv = "solver,delta,status,iters,f_value\n";
  json meta{{"command", "sweep-delta"}, {"datetime", bench_detail::iso_utc_now()},
            {"timing", json::array()}};
  std::map<std::string, Series> series;
  bool any_divergence = false;

  for (double delta : spec.sweep.deltas) {
    if (!(delta > 0.0 && delta <= 1.0))
      throw ConfigError("sweep delta outside (0,1]: " + std::to_string(delta));
    ExperimentSpec e = spec.experiment;
    e.delta = delta;
    Problem prob = build_problem(e);
    const RunMetrics metrics = metrics_for(prob);
    for (const auto& sspec : spec.solvers) {
      if (!sspec.fair) continue;  // delta only enters the fair split
      SolverConfig cfg = resolve_solver(sspec, prob);
      auto tr = bench_detail::timed_run(prob.saddle, cfg, metrics);
      any_divergence = any_divergence || tr.diverged;
      const TraceRow last = tr.trace.rows.empty() ? TraceRow{} : tr.trace.rows.back();
      csv += cfg.name + "," + format_sci(delta) + "," +
             bench_detail::status_str(tr.trace.status) + "," + std::to_string(last.k) + "," +
             format_sci(last.f_value) + "\n";
      meta["timing"].push_back(json{{"solver", cfg.name}, {"delta", delta},
                                    {"wall_s", tr.wall_s}, {"cpu_s", tr.cpu_s}});
      auto& s = series[cfg.name];
      s.label = cfg.name;
      s.x.push_back(delta);
      s.y.push_back(last.k);
      if (!quiet)
        std::printf("%-8s delta=%.2f iters=%d\n", cfg.name.c_str(), delta, last.k);
    }
  }
  write_text_file(outdir + "/sweep_delta.csv", csv);
  write_text_file(outdir + "/resolved_config.json", dump_run_spec(spec).dump(2) + "\n");
  write_text_file(outdir + "/meta.json", meta.dump(2) + "\n");
  if (!no_plots && spec.plots) {
    std::vector<Series> all;
    for (auto& [_, s] : series) all.push_back(s);
    write_svg_lineplot(outdir + "/iters_vs_delta.svg", "Outer iterations vs delta", "delta",
                       "iterations", all, false, true);
  }
  return any_divergence ? 2 : 0;
}

/// sweep-inn: rerun each budget-mode fair solver with every inner budget in
/// the grid.
inline int cmd_sweep_inn(const RunSpec& spec, const std::string& outdir, bool no_plots,
                         bool quiet) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  Problem prob = build_problem(spec.experiment);
  const RunMetrics metrics = metrics_for(prob);
  std::string csv = "solver,inn,status,iters,f_value,resi\n";
  json meta{{"command", "sweep-inn"}, {"datetime", bench_detail::iso_utc_now()},
            {"timing", json::array()}};
  std::map<std::string, Series> series;
  bool any_divergence = false;

  for (const auto& sspec : spec.solvers) {
    if (!sspec.fair || sspec.inner_mode != "budget") continue;
    for (int inn : spec.sweep.inns) {
      if (inn < 1) throw ConfigError("sweep inn must be >= 1");
      SolverConfig cfg = resolve_solver(sspec, prob);
      cfg.inner.inn = inn;
      auto tr = bench_detail::timed_run(prob.saddle, cfg, metrics);
      any_divergence = any_divergence || tr.diverged;
      const TraceRow last = tr.trace.rows.empty() ? TraceRow{} : tr.trace.rows.back();
      csv += cfg.name + "," + std::to_string(inn) + "," +
             bench_detail::status_str(tr.trace.status) + "," + std::to_string(last.k) + "," +
             format_sci(last.f_value) + "," + format_sci(last.resi) + "\n";
      meta["timing"].push_back(json{{"solver", cfg.name}, {"inn", inn},
                                    {"wall_s", tr.wall_s}, {"cpu_s", tr.cpu_s}});
      auto& s = series[cfg.name];
      s.label = cfg.name;
      s.x.push_back(inn);
      s.y.push_back(last.k);
      if (!quiet) std::printf("%-8s inn=%-3d iters=%d\n", cfg.name.c_str(), inn, last.k);
    }
  }
  write_text_file(outdir + "/sweep_inn.csv", csv);
  write_text_file(outdir + "/resolved_config.json", dump_run_spec(spec).dump(2) + "\n");
  write_text_file(outdir + "/meta.json", meta.dump(2) + "\n");
  if (!no_plots && spec.plots) {
    std::vector<Series> all;
    for (auto& [_, s] : series) all.push_back(s);
    write_svg_lineplot(outdir + "/iters_vs_inn.svg", "Outer iterations vs inner budget", "inn",
                       "iterations", all, false, false);
  }
  return any_divergence ? 2 : 0;
}

/// certify: run each fair solver on the certifiable family, then audit the
/// convergence theory numerically: per-step key-inequality residuals at
/// sampled comparison points, d-tilde nonnegativity, monotone distance to a
/// tight reference solution, and nonnegative ergodic gaps. Any violation
/// beyond tolerance fails the command (exit 3).
inline int cmd_certify(const RunSpec& spec, const std::string& outdir, bool /*no_plots*/,
                       bool quiet) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  Problem prob = build_problem(spec.experiment);
  if (!DualUpdate::exact_supported(prob.saddle))
    throw ConfigError("certify needs a certifiable experiment family "
                      "(closed-form dual prox and conjugate values)");
  const CertifySpec& cs = spec.certify;
  const double tol = cs.tol;
  int n_max = cs.check_iters;
  for (int n : cs.rate_grid) n_max = std::max(n_max, n);

  json meta{{"command", "certify"}, {"datetime", bench_detail::iso_utc_now()},
            {"solvers", json::object()}};
  bool all_ok = true;
  std::uint64_t sample_salt = 0;

  for (const auto& sspec : spec.solvers) {
    if (!sspec.fair)
      throw ConfigError("certify audits the fair framework; solver '" + sspec.variant +
                        "' has fair=false");
    SolverConfig cfg = resolve_solver(sspec, prob);

    SolverConfig ref_cfg = cfg;
    ref_cfg.inner.mode = InnerConfig::Mode::exact;
    ref_cfg.stop_tol = cs.ref_tol;
    ref_cfg.max_outer = cs.ref_max_outer;
    ref_cfg.record_states = false;
    Trace ref = run(prob.saddle, ref_cfg);
    const PDPoint v_star{ref.x_final, ref.y_final};

    SolverConfig main_cfg = cfg;
    main_cfg.stop_tol = -1.0;  // run the full horizon for the ergodic grid
    main_cfg.max_outer = n_max;
    main_cfg.record_states = true;
    Trace tr = run(prob.saddle, main_cfg);
    const auto& st = tr.states;
    const CertMetric metric = metric_of(cfg, prob.saddle);

    Rng sampler(spec.experiment.seed * 1000003ULL + 17ULL * ++sample_salt);
    std::vector<PDPoint> samples;
    for (int s = 0; s < cs.samples; ++s) {
      PDPoint v{v_star.x, v_star.y};
      for (double& val : v.x.data) val += sampler.normal();
      for (double& val : v.y.data) val += sampler.normal();
      samples.push_back(std::move(v));
    }

    double worst_residual = 0.0, worst_dtilde = 0.0, worst_monotone = 0.0, worst_gap = 0.0;
    std::vector<int> every_k;
    for (int k = 1; k < static_cast<int>(st.size()); ++k) every_k.push_back(k);
    const auto gaps = ergodic_gap(prob.saddle, st, v_star, every_k);

    std::string csv = "k,d,dtilde,residual,gap\n";
    double d_prev = 0.0;
    for (int k = 1; k < static_cast<int>(st.size()); ++k) {
      const PDPoint vk{st[k - 1].x, st[k - 1].y};
      const PDPoint vk1{st[k].x, st[k].y};
      Transition t{vk, st[k].x_hat, vk1,
                   st[k].d.size() > 0 ? &st[k].d : nullptr};

      double d_here, dtilde_here;
      if (metric.variant == Variant::pd3o) {
        Grid gs = prob.saddle.f1.grad(v_star.x);
        Grid gp = prob.saddle.f1.grad(vk.x);
        Grid gn = prob.saddle.f1.grad(vk1.x);
        DGrads pair{gs, gn};
        d_here = d_value(metric, v_star, vk1, &pair);
        DtGrads self{gn, gp, gn};  // self-paired form for the reported column
        dtilde_here = dtilde_value(metric, vk1, vk, &self);
      } else {
        d_here = d_value(metric, v_star, vk1);
        dtilde_here = dtilde_value(metric, vk1, vk);
      }

      double res_min = key_inequality_residual(prob.saddle, metric, t, v_star);
      if (k <= cs.check_iters)
        for (const auto& v : samples)
          res_min = std::min(res_min, key_inequality_residual(prob.saddle, metric, t, v));

      // Inexact steps are only quasi-monotone: the distance to the saddle
      // point may grow by the correction term (1/tau)<y^{k+1} - y*, d^{k+1}>.
      double slack = 0.0;
      if (t.d && t.d->size() > 0) {
        Grid dy = vk1.y;
        dy -= v_star.y;
        slack = std::max(0.0, dot(dy, *t.d) / metric.tau);
      }

      const double gap_k = gaps[k - 1].second;
      const double scale = std::max(1.0, std::abs(d_here));
      worst_residual = std::min(worst_residual, res_min);
      worst_dtilde = std::min(worst_dtilde, dtilde_here);
      worst_gap = std::min(worst_gap, gap_k);
      if (k > 1) worst_monotone = std::min(worst_monotone, (d_prev + slack - d_here) / scale);
      d_prev = d_here;

      csv += std::to_string(k) + "," + format_sci(d_here) + "," + format_sci(dtilde_here) +
             "," + format_sci(res_min) + "," + format_sci(gap_k) + "\n";
    }

    double slope = 0.0;
    bool have_slope = false;
    try {
      slope = loglog_slope(gaps, 100, n_max);
      have_slope = true;
    } catch (const ParamError&) {
    }

    const bool ok = worst_residual >= -tol && worst_dtilde >= -tol && worst_gap >= -tol &&
                    worst_monotone >= -tol;
    all_ok = all_ok && ok;
    write_text_file(outdir + "/certify_" + bench_detail::sanitize(cfg.name) + ".csv", csv);
    meta["solvers"][cfg.name] =
        json{{"worst_residual", worst_residual}, {"worst_dtilde", worst_dtilde},
             {"worst_gap", worst_gap},           {"worst_monotone", worst_monotone},
             {"gap_slope", have_slope ? json(slope) : json()},
             {"pass", ok}};
    if (!quiet) {
      const std::string slope_note = have_slope ? " slope=" + std::to_string(slope) : "";
      std::printf("%-8s %s  residual>=%.2e dtilde>=%.2e gap>=%.2e monotone>=%.2e%s\n",
                  cfg.name.c_str(), ok ? "PASS" : "FAIL", worst_residual, worst_dtilde,
                  worst_gap, worst_monotone, slope_note.c_str());
    }
  }

  write_text_file(outdir + "/resolved_config.json", dump_run_spec(spec).dump(2) + "\n");
  write_text_file(outdir + "/meta.json", meta.dump(2) + "\n");
  return all_ok ? 0 : 3;
}

}  // namespace pdsplit
