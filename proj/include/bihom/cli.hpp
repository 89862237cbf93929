#pragma once

// Command-line surface.  One process, twelve subcommands:
//   validate count fiber density-p density-inf expsum series hyperbola
//   peyre manin-report subvariety hypothesis
// Flags mirror job-config fields; `--config FILE` merges with flag overrides
// (flags win).  Exit codes: 0 success, 2 configuration error, 3 budget
// exceeded.  Every run logs (version, seed, config hash) to stderr; every
// CSV output begins with a `# config <hash>` comment line.

#include "bihom/config.hpp"
#include "bihom/counting.hpp"
#include "bihom/csv.hpp"
#include "bihom/densities.hpp"
#include "bihom/expsums.hpp"
#include "bihom/hyperbola.hpp"
#include "bihom/manin.hpp"
#include "bihom/parser.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace bihom::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kBudgetError = 3 };

namespace detail {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  // Millisecond resolution: diagnostic only, never part of reproducibility.
  double seconds() const {
    auto dt = std::chrono::steady_clock::now() - t0;
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
    return static_cast<double>(ms) / 1000.0;
  }
};

// Flags shared by every subcommand.
struct CommonFlags {
  std::string config_path;
  std::string out_path;
  long long n1 = 0, n2 = 0;
  std::vector<std::string> forms;
  unsigned long long budget = 0;
  unsigned long long seed = 0;
  long long workers = 0;
};

inline void add_common(CLI::App* sub, CommonFlags& cf) {
  sub->add_option("--config", cf.config_path, "job configuration file (JSON)");
  sub->add_option("--out", cf.out_path, "write the CSV table to this file");
  sub->add_option("--n1", cf.n1, "number of x variables");
  sub->add_option("--n2", cf.n2, "number of y variables");
  sub->add_option("--form", cf.forms, "one form (repeat the flag for a system)");
  sub->add_option("--budget", cf.budget, "elementary-step budget (default 1e9)");
  sub->add_option("--seed", cf.seed, "RNG seed (default 1)");
  sub->add_option("--workers", cf.workers, "worker pool size");
}

// Config file merged with flag overrides; flags win.
inline JobConfig effective_job(const CLI::App* sub, const CommonFlags& cf,
                               const std::string& task) {
  JobConfig job;
  if (!cf.config_path.empty()) {
    job = load_job(cf.config_path);
    if (job.task != task)
      throw ConfigError("task", "config names task '" + job.task +
                                    "' but the subcommand is '" + task + "'");
  }
  job.task = task;
  if (sub->count("--n1")) job.n1 = static_cast<int>(cf.n1);
  if (sub->count("--n2")) job.n2 = static_cast<int>(cf.n2);
  if (sub->count("--form")) job.forms = cf.forms;
  if (sub->count("--budget")) job.params["budget"] = cf.budget;
  if (sub->count("--seed")) job.params["seed"] = cf.seed;
  if (sub->count("--workers")) job.params["workers"] = cf.workers;
  if (sub->count("--out")) job.params["out"] = cf.out_path;
  return job;
}

// Resolved run context: hash computed over the effective (merged) config.
struct Ctx {
  JobConfig job;
  std::string hash;
  Budget budget;
  u64 seed = 1;
  int workers = 1;
  std::string out_path;
  std::ostringstream csv;

  explicit Ctx(JobConfig j)
      : job(std::move(j)),
        hash(config_hash(job)),
        budget(static_cast<u64>(param_int(job, "budget", 1'000'000'000))) {
    seed = static_cast<u64>(param_int(job, "seed", 1));
    workers = static_cast<int>(param_int(job, "workers", default_workers()));
    if (workers < 1) throw ConfigError("params.workers", "must be >= 1");
    out_path = param_string(job, "out", "");
    std::cerr << "bihom " << kVersion << "  task=" << job.task << "  seed=" << seed
              << "  config=" << hash << "\n";
  }

  void finish() {
    if (out_path.empty()) return;
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("out", "cannot open '" + out_path + "' for writing");
    out << csv.str();
  }
};

inline FormSystem require_system(const Ctx& ctx) {
  if (ctx.job.n1 < 1 || ctx.job.n2 < 1)
    throw ConfigError("n1", "set --n1 and --n2 (>= 1) or provide them in the config");
  return build_system(ctx.job);
}

inline std::vector<i64> require_y(const FormSystem& sys, const std::vector<long long>& y) {
  if (static_cast<int>(y.size()) != sys.n2())
    throw ConfigError("params.y", "expected " + std::to_string(sys.n2()) +
                                      " comma-separated entries");
  return std::vector<i64>(y.begin(), y.end());
}

inline std::vector<i64> grid_param(const JobConfig& job, const std::string& key,
                                   std::vector<long long> fallback) {
  std::vector<long long> raw = param_int_list(job, key, std::move(fallback));
  std::vector<i64> grid(raw.begin(), raw.end());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1) throw ConfigError("params." + key, "entries must be >= 1");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw ConfigError("params." + key, "entries must be strictly increasing");
  }
  return grid;
}

// ---------------------------------------------------------------------------
// subcommand bodies

inline int run_validate(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  CsvWriter w(ctx.csv, ctx.hash);
  w.row("R", "d1", "d2", "n1", "n2");
  w.row(sys.R(), sys.d1(), sys.d2(), sys.n1(), sys.n2());
  std::cout << "ok: R=" << sys.R() << " bidegree=(" << sys.d1() << "," << sys.d2()
            << ") n=(" << sys.n1() << "," << sys.n2() << ")\n";
  ctx.finish();
  return kOk;
}

inline int run_count(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  BoxSpec box = BoxSpec::unit(sys.n1(), sys.n2());
  CsvWriter w(ctx.csv, ctx.hash);
  if (has_param(ctx.job, "grid")) {
    std::vector<i64> grid = grid_param(ctx.job, "grid", {});
    w.row("P", "count", "seconds");
    for (i64 P : grid) {
      Stopwatch sw;
      Int c = count_box(sys, Rat(P), Rat(P), box, ctx.budget, ctx.workers);
      w.row(P, c, sw.seconds());
      std::cout << c << "\n";
    }
  } else {
    long long p1 = param_int(ctx.job, "p1", 10);
    long long p2 = param_int(ctx.job, "p2", p1);
    if (p1 < 0 || p2 < 0) throw ConfigError("params.p1", "heights must be >= 0");
    Stopwatch sw;
    Int c = count_box(sys, Rat(p1), Rat(p2), box, ctx.budget, ctx.workers);
    w.row("P1", "P2", "count", "seconds");
    w.row(p1, p2, c, sw.seconds());
    std::cout << c << "\n";
  }
  ctx.finish();
  return kOk;
}

inline int run_fiber(Ctx& ctx, const std::vector<long long>& yflag) {
  FormSystem sys = require_system(ctx);
  std::vector<i64> y = require_y(sys, yflag);
  BoxSpec box = BoxSpec::unit(sys.n1(), sys.n2());
  std::vector<i64> grid = grid_param(ctx.job, "grid", {param_int(ctx.job, "p1", 10)});
  CsvWriter w(ctx.csv, ctx.hash);
  w.row("P", "count", "seconds");
  for (i64 P : grid) {
    Stopwatch sw;
    Int c = count_fiber(sys, y, Rat(P), box, ctx.budget);
    w.row(P, c, sw.seconds());
    std::cout << c << "\n";
  }
  ctx.finish();
  return kOk;
}

inline int run_density_p(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  long long p = param_int(ctx.job, "p", 2);
  long long r = param_int(ctx.job, "r", 3);
  if (!is_prime_i64(p)) throw ConfigError("params.p", "must be prime");
  if (r < 1) throw ConfigError("params.r", "must be >= 1");
  PadicReport rep = sigma_p_estimate(sys, p, static_cast<int>(r), ctx.budget);
  CsvWriter w(ctx.csv, ctx.hash);
  w.row("p", "r", "N_r", "sigma_estimate");
  const int expo = sys.n1() + sys.n2() - sys.R();
  for (const auto& [rr, est] : rep.ladder) {
    // Reconstruct the exact residue count for each rung of the ladder.
    Rat exact = est * Rat(ipow(Int(p), static_cast<unsigned>(rr * expo)));
    Int N = numerator(exact) / denominator(exact);
    w.row(p, rr, N, est);
  }
  std::cout << "sigma_" << p << " ~ " << rep.sigma_estimate.convert_to<double>() << " (r="
            << rep.r << ", " << (rep.stabilized ? "stabilized" : "not stabilized") << ")\n";
  ctx.finish();
  return kOk;
}

inline int run_density_inf(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  double epsilon = param_double(ctx.job, "epsilon", 1.0 / 32);
  long long samples = param_int(ctx.job, "samples", 400000);
  if (samples < 1000) throw ConfigError("params.samples", "must be >= 1000");
  RealDensityReport rep = sigma_infty_mc(sys, epsilon, static_cast<u64>(samples), ctx.seed,
                                         ctx.budget, ctx.workers);
  CsvWriter w(ctx.csv, ctx.hash);
  w.row("epsilon", "estimate", "stderr", "samples", "seed");
  w.row(rep.epsilon, rep.estimate, rep.standard_error, rep.samples, rep.seed);
  std::cout << "sigma_inf ~ " << rep.estimate << " +- " << rep.standard_error << "\n";
  ctx.finish();
  return kOk;
}

inline int run_expsum(Ctx& ctx, const std::vector<long long>& yflag,
                      const std::vector<double>& alpha_flag, long long alpha_grid) {
  FormSystem sys = require_system(ctx);
  std::vector<i64> y = require_y(sys, yflag);
  long long p1 = param_int(ctx.job, "p1", 10);
  if (p1 < 1) throw ConfigError("params.p1", "must be >= 1");

  std::vector<std::vector<double>> alphas;
  std::vector<double> alpha =
      alpha_flag.empty() ? param_double_list(ctx.job, "alpha", {}) : alpha_flag;
  long long K = alpha_grid > 0 ? alpha_grid : param_int(ctx.job, "alpha_grid", 0);
  if (K > 0) {
    if (sys.R() != 1)
      throw ConfigError("params.alpha_grid", "grid scans need a single form (R = 1)");
    for (long long j = 0; j < K; ++j)
      alphas.push_back({static_cast<double>(j) / static_cast<double>(K)});
  } else {
    if (static_cast<int>(alpha.size()) != sys.R())
      throw ConfigError("params.alpha",
                        "expected " + std::to_string(sys.R()) + " phase entries");
    alphas.push_back(alpha);
  }

  CsvWriter w(ctx.csv, ctx.hash);
  {
    std::vector<std::string> head;
    for (int i = 1; i <= sys.R(); ++i) head.push_back("alpha" + std::to_string(i));
    std::ostringstream line;
    for (const std::string& h : head) line << h << ",";
    ctx.csv << line.str() << "re,im\n";
  }
  std::complex<double> last{0.0, 0.0};
  for (const std::vector<double>& a : alphas) {
    last = weyl_sum(sys, y, Rat(p1), a, ctx.budget, nullptr, ctx.workers);
    std::ostringstream line;
    for (double v : a) line << csv_double(v) << ",";
    ctx.csv << line.str() << csv_double(last.real()) << "," << csv_double(last.imag())
            << "\n";
  }
  std::cout << "|S| = " << std::abs(last) << "\n";
  ctx.finish();
  return kOk;
}

inline int run_series(Ctx& ctx, const std::vector<long long>& yflag) {
  FormSystem sys = require_system(ctx);
  std::vector<i64> y = require_y(sys, yflag);
  long long Q = param_int(ctx.job, "qmax", 20);
  if (Q < 1) throw ConfigError("params.qmax", "must be >= 1");
  SeriesReport rep = truncated_singular_series(sys, y, Q, ctx.budget);
  CsvWriter w(ctx.csv, ctx.hash);
  w.row("q", "partial_series");
  for (const auto& [q, partial] : rep.partials) w.row(q, partial);
  std::cout << "series(Q=" << rep.Q << ") = " << rep.value << "\n";
  ctx.finish();
  return kOk;
}

inline int run_hyperbola(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  const bool fit_mode = param_bool(ctx.job, "fit", false);
  std::vector<i64> grid = grid_param(ctx.job, "grid", {100, 316, 1000, 3162, 10000});
  double mu = param_double(ctx.job, "mu", 0.25);
  if (!(mu > 0.0 && mu < 0.5)) throw ConfigError("params.mu", "must lie in (0, 0.5)");
  ShellTable shells(sys, PredicatePair::all_points(), &ctx.budget, ctx.workers);
  shells.prepare(Int(grid.back()));
  CsvWriter w(ctx.csv, ctx.hash);
  if (fit_mode) {
    w.row("P", "C_fit", "B_fit");
    std::vector<double> Pd, yd;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Pd.push_back(static_cast<double>(grid[i]));
      Rat q = moebius_assembly(shells, Rat(grid[i]));
      yd.push_back(q.convert_to<double>());
      if (i + 1 >= 4) {  // fit_points wants four points for a stable fit
        HyperbolaFit f = fit_points(Pd, yd);
        w.row(grid[i], f.C_fit, f.B_fit);
        if (i + 1 == grid.size())
          std::cout << "C_fit=" << f.C_fit << "  B_fit=" << f.B_fit << "\n";
      }
    }
  } else {
    w.row("P", "T1", "T2", "corner", "total", "upsilon_direct");
    for (i64 P : grid) {
      DecompositionReport rep = decompose(shells, Rat(P), mu);
      Int m_heavy = rep.T1 + rep.T2;
      Int l_heavy = rep.T1_sym + rep.T2_sym;
      Int direct = upsilon_direct(shells, Rat(P));
      w.row(P, m_heavy, l_heavy, rep.corner, rep.total, direct);
      std::cout << "P=" << P << "  total=" << rep.total << "  direct=" << direct << "\n";
    }
  }
  ctx.finish();
  return kOk;
}

inline int run_peyre(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  if (sys.R() != 1)
    throw ConfigError("forms", "the leading-constant assembly needs a single form");
  long long p_max = param_int(ctx.job, "p_max", 30);
  double sigma_inf = param_double(ctx.job, "sigma_inf", 0.0);
  double eps = param_double(ctx.job, "epsilon", 1.0 / 32);
  long long samples = param_int(ctx.job, "samples", 400000);
  if (sigma_inf <= 0.0) {
    RealDensityReport real = sigma_infty_mc(sys, eps, static_cast<u64>(samples), ctx.seed,
                                            ctx.budget, ctx.workers);
    sigma_inf = real.estimate;
  }
  EulerProductReport euler = euler_product(sys, p_max, ctx.budget);
  std::vector<std::pair<i64, double>> sigma_p;
  for (const EulerFactor& f : euler.factors)
    sigma_p.push_back({f.p, f.sigma.convert_to<double>()});
  PeyreReport rep = peyre_constant(sigma_inf, sigma_p, sys.n1(), sys.n2(), sys.d1(),
                                   sys.d2());
  CsvWriter w(ctx.csv, ctx.hash);
  w.comment("primes up to " + std::to_string(p_max));
  w.row("sigma_inf", "euler", "alpha", "tau_inf", "tau_finite", "c_pey", "collapsed",
        "leading_constant");
  w.row(rep.sigma_inf, rep.euler, rep.alpha, rep.tau_inf, rep.tau_finite, rep.c_pey,
        rep.collapsed, rep.leading_constant);
  std::cout << "alpha=" << rep.alpha << "  beta=" << rep.beta << "  L_limit=" << rep.L_limit
            << "\n"
            << "sigma_inf=" << rep.sigma_inf << "  euler(p<=" << p_max << ")=" << rep.euler
            << "\n"
            << "c_pey=" << rep.c_pey << "  collapsed=" << rep.collapsed
            << "  leading_constant=" << rep.leading_constant << "\n";
  ctx.finish();
  return kOk;
}

inline int run_manin_report(Ctx& ctx) {
  FormSystem sys = require_system(ctx);
  std::vector<i64> grid = grid_param(ctx.job, "grid", {100, 316, 1000, 3162, 10000});
  ManinConfig cfg;
  cfg.p_max = param_int(ctx.job, "p_max", 30);
  cfg.mc_samples = static_cast<u64>(param_int(ctx.job, "samples", 400000));
  cfg.mc_epsilon = param_double(ctx.job, "epsilon", 1.0 / 32);
  cfg.seed = ctx.seed;
  cfg.workers = ctx.workers;
  ManinReport rep = manin_report(sys, PredicatePair::all_points(), grid, cfg, ctx.budget);
  CsvWriter w(ctx.csv, ctx.hash);
  w.comment("sigma_inf " + csv_double(rep.sigma_inf) + " (se " +
            csv_double(rep.sigma_inf_stderr) + ")");
  w.comment("euler " + csv_double(rep.euler));
  w.comment("predicted_C " + csv_double(rep.predicted_C));
  w.comment("C_fit " + csv_double(rep.C_fit) + "  B_fit " + csv_double(rep.B_fit) +
            "  C_over_predicted " + csv_double(rep.C_over_predicted));
  w.row("P", "count", "main_term", "ratio");
  for (const ManinRow& r : rep.rows) w.row(r.P, r.count, r.main_term, r.ratio);
  std::cout << rep.summary();
  ctx.finish();
  return kOk;
}

inline int run_subvariety(Ctx& ctx) {
  long long n = param_int(ctx.job, "n", 4);
  long long d1 = param_int(ctx.job, "d1", 2);
  long long d2 = param_int(ctx.job, "d2", 2);
  std::vector<i64> grid =
      grid_param(ctx.job, "grid", {100, 1000, 10000, 100000, 1000000});
  SubvarietyReport rep = subvariety_growth(n, d1, d2, grid);
  CsvWriter w(ctx.csv, ctx.hash);
  w.comment("slope " + csv_double(rep.slope) + " (se " + csv_double(rep.slope_stderr) +
            ")  target " + csv_double(rep.target));
  w.row("P", "count");
  for (std::size_t i = 0; i < rep.P_grid.size(); ++i) w.row(rep.P_grid[i], rep.counts[i]);
  std::cout << "slope=" << rep.slope << " (se " << rep.slope_stderr
            << ")  target=" << rep.target << "\n";
  ctx.finish();
  return kOk;
}

inline int run_hypothesis(Ctx& ctx) {
  long long d1 = param_int(ctx.job, "d1", 2);
  long long d2 = param_int(ctx.job, "d2", 2);
  long long R = param_int(ctx.job, "R", 1);
  long long dimv1 = param_int(ctx.job, "dimv1", 0);
  long long dimv2 = param_int(ctx.job, "dimv2", 0);
  double delta = param_double(ctx.job, "delta", 0.01);
  HypothesisReport rep =
      hypothesis_check(ctx.job.n1, ctx.job.n2, d1, d2, R, dimv1, dimv2, delta);
  CsvWriter w(ctx.csv, ctx.hash);
  w.row("check", "lhs", "rhs", "margin", "ok", "applicable");
  const std::pair<const char*, const TheoremCheck*> checks[] = {
      {"skew", &rep.skew},
      {"boxes", &rep.boxes},
      {"anticanonical", &rep.anticanonical},
      {"hypersurface", &rep.hypersurface},
  };
  for (const auto& [slug, c] : checks)
    w.row(slug, c->lhs, c->rhs, c->margin(), c->ok ? 1 : 0, c->applicable ? 1 : 0);
  std::cout << rep.summary();
  ctx.finish();
  return kOk;
}

}  // namespace detail

// Parses argv, dispatches one subcommand, maps errors to contractual exit
// codes.  Configuration problems (bad flags, bad config file, bad forms,
// precondition violations) exit 2; an exhausted work budget exits 3.
inline int run(int argc, char** argv) {
  using namespace detail;

  CLI::App app{"lattice-point counts and leading-constant diagnostics for systems of "
               "bihomogeneous forms"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  struct SubState {
    CLI::App* sub = nullptr;
    CommonFlags cf;
  };
  auto make_sub = [&](const std::string& name, const std::string& desc) {
    auto st = std::make_shared<SubState>();
    st->sub = app.add_subcommand(name, desc);
    add_common(st->sub, st->cf);
    return st;
  };

  int code = kOk;

  // validate
  {
    auto st = make_sub("validate", "parse the forms and report bidegree and rank");
    st->sub->callback([st, &code]() {
      Ctx ctx(effective_job(st->sub, st->cf, "validate"));
      code = run_validate(ctx);
    });
  }

  // count
  {
    auto st = make_sub("count", "exact box count N'(P1, P2)");
    auto p1 = std::make_shared<long long>(0);
    auto p2 = std::make_shared<long long>(0);
    auto grid = std::make_shared<std::vector<long long>>();
    st->sub->add_option("--p1", *p1, "x-height");
    st->sub->add_option("--p2", *p2, "y-height (default: same as --p1)");
    st->sub->add_option("--grid", *grid, "symmetric heights P1 = P2 = P")->delimiter(',');
    st->sub->callback([st, p1, p2, grid, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "count");
      if (st->sub->count("--p1")) job.params["p1"] = *p1;
      if (st->sub->count("--p2")) job.params["p2"] = *p2;
      if (st->sub->count("--grid")) job.params["grid"] = *grid;
      Ctx ctx(std::move(job));
      code = run_count(ctx);
    });
  }

  // fiber
  {
    auto st = make_sub("fiber", "exact x-count over a fixed y");
    auto y = std::make_shared<std::vector<long long>>();
    auto p1 = std::make_shared<long long>(0);
    auto grid = std::make_shared<std::vector<long long>>();
    st->sub->add_option("--y", *y, "fixed y vector (comma separated)")->delimiter(',');
    st->sub->add_option("--p1", *p1, "x-height");
    st->sub->add_option("--grid", *grid, "x-height grid")->delimiter(',');
    st->sub->callback([st, y, p1, grid, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "fiber");
      if (st->sub->count("--p1")) job.params["p1"] = *p1;
      if (st->sub->count("--grid")) job.params["grid"] = *grid;
      if (st->sub->count("--y")) job.params["y"] = *y;
      Ctx ctx(std::move(job));
      std::vector<long long> yv = param_int_list(ctx.job, "y", {});
      code = run_fiber(ctx, yv);
    });
  }

  // density-p
  {
    auto st = make_sub("density-p", "p-adic density ladder sigma_p");
    auto p = std::make_shared<long long>(0);
    auto r = std::make_shared<long long>(0);
    st->sub->add_option("--p", *p, "prime modulus");
    st->sub->add_option("--r", *r, "prime-power exponent ladder height");
    st->sub->callback([st, p, r, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "density-p");
      if (st->sub->count("--p")) job.params["p"] = *p;
      if (st->sub->count("--r")) job.params["r"] = *r;
      Ctx ctx(std::move(job));
      code = run_density_p(ctx);
    });
  }

  // density-inf
  {
    auto st = make_sub("density-inf", "real density by slab sampling");
    auto eps = std::make_shared<double>(0.0);
    auto samples = std::make_shared<long long>(0);
    st->sub->add_option("--epsilon", *eps, "slab half-width");
    st->sub->add_option("--samples", *samples, "Monte Carlo sample count");
    st->sub->callback([st, eps, samples, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "density-inf");
      if (st->sub->count("--epsilon")) job.params["epsilon"] = *eps;
      if (st->sub->count("--samples")) job.params["samples"] = *samples;
      Ctx ctx(std::move(job));
      code = run_density_inf(ctx);
    });
  }

  // expsum
  {
    auto st = make_sub("expsum", "exponential sum over the x-box at fixed y");
    auto y = std::make_shared<std::vector<long long>>();
    auto p1 = std::make_shared<long long>(0);
    auto alpha = std::make_shared<std::vector<double>>();
    auto agrid = std::make_shared<long long>(0);
    st->sub->add_option("--y", *y, "fixed y vector (comma separated)")->delimiter(',');
    st->sub->add_option("--p1", *p1, "x-height");
    st->sub->add_option("--alpha", *alpha, "phase vector (comma separated)")->delimiter(',');
    st->sub->add_option("--alpha-grid", *agrid, "scan j/K for j = 0..K-1 (R = 1 only)");
    st->sub->callback([st, y, p1, alpha, agrid, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "expsum");
      if (st->sub->count("--p1")) job.params["p1"] = *p1;
      if (st->sub->count("--y")) job.params["y"] = *y;
      if (st->sub->count("--alpha")) job.params["alpha"] = *alpha;
      if (st->sub->count("--alpha-grid")) job.params["alpha_grid"] = *agrid;
      Ctx ctx(std::move(job));
      std::vector<long long> yv = param_int_list(ctx.job, "y", {});
      code = run_expsum(ctx, yv, *alpha, *agrid);
    });
  }

  // series
  {
    auto st = make_sub("series", "truncated singular series at fixed y");
    auto y = std::make_shared<std::vector<long long>>();
    auto qmax = std::make_shared<long long>(0);
    st->sub->add_option("--y", *y, "fixed y vector (comma separated)")->delimiter(',');
    st->sub->add_option("--qmax", *qmax, "series truncation Q");
    st->sub->callback([st, y, qmax, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "series");
      if (st->sub->count("--y")) job.params["y"] = *y;
      if (st->sub->count("--qmax")) job.params["qmax"] = *qmax;
      Ctx ctx(std::move(job));
      std::vector<long long> yv = param_int_list(ctx.job, "y", {});
      code = run_series(ctx, yv);
    });
  }

  // hyperbola
  {
    auto st = make_sub("hyperbola", "two-region height-ball decomposition or (C, B) fit");
    auto grid = std::make_shared<std::vector<long long>>();
    auto mu = std::make_shared<double>(0.0);
    auto fit = std::make_shared<bool>(false);
    st->sub->add_option("--grid", *grid, "height grid")->delimiter(',');
    st->sub->add_option("--mu", *mu, "split exponent in (0, 0.5)");
    st->sub->add_flag("--fit", *fit, "emit (P, C_fit, B_fit) rows instead");
    st->sub->callback([st, grid, mu, fit, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "hyperbola");
      if (st->sub->count("--grid")) job.params["grid"] = *grid;
      if (st->sub->count("--mu")) job.params["mu"] = *mu;
      if (st->sub->count("--fit")) job.params["fit"] = true;
      Ctx ctx(std::move(job));
      code = run_hyperbola(ctx);
    });
  }

  // peyre
  {
    auto st = make_sub("peyre", "leading-constant assembly from computed densities");
    auto p_max = std::make_shared<long long>(0);
    auto sigma_inf = std::make_shared<double>(0.0);
    auto eps = std::make_shared<double>(0.0);
    auto samples = std::make_shared<long long>(0);
    st->sub->add_option("--p-max", *p_max, "local-density prime cutoff");
    st->sub->add_option("--sigma-inf", *sigma_inf, "real density (skip Monte Carlo)");
    st->sub->add_option("--epsilon", *eps, "slab half-width for Monte Carlo");
    st->sub->add_option("--samples", *samples, "Monte Carlo sample count");
    st->sub->callback([st, p_max, sigma_inf, eps, samples, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "peyre");
      if (st->sub->count("--p-max")) job.params["p_max"] = *p_max;
      if (st->sub->count("--sigma-inf")) job.params["sigma_inf"] = *sigma_inf;
      if (st->sub->count("--epsilon")) job.params["epsilon"] = *eps;
      if (st->sub->count("--samples")) job.params["samples"] = *samples;
      Ctx ctx(std::move(job));
      code = run_peyre(ctx);
    });
  }

  // manin-report
  {
    auto st = make_sub("manin-report", "side-by-side predicted vs exact projective counts");
    auto grid = std::make_shared<std::vector<long long>>();
    auto p_max = std::make_shared<long long>(0);
    auto eps = std::make_shared<double>(0.0);
    auto samples = std::make_shared<long long>(0);
    st->sub->add_option("--grid", *grid, "height grid (>= 4 points)")->delimiter(',');
    st->sub->add_option("--p-max", *p_max, "local-density prime cutoff");
    st->sub->add_option("--epsilon", *eps, "slab half-width for Monte Carlo");
    st->sub->add_option("--samples", *samples, "Monte Carlo sample count");
    st->sub->callback([st, grid, p_max, eps, samples, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "manin-report");
      if (st->sub->count("--grid")) job.params["grid"] = *grid;
      if (st->sub->count("--p-max")) job.params["p_max"] = *p_max;
      if (st->sub->count("--epsilon")) job.params["epsilon"] = *eps;
      if (st->sub->count("--samples")) job.params["samples"] = *samples;
      Ctx ctx(std::move(job));
      code = run_manin_report(ctx);
    });
  }

  // subvariety
  {
    auto st = make_sub("subvariety", "accumulating-subvariety growth on the diagonal family");
    auto n = std::make_shared<long long>(0);
    auto d1 = std::make_shared<long long>(0);
    auto d2 = std::make_shared<long long>(0);
    auto grid = std::make_shared<std::vector<long long>>();
    st->sub->add_option("--n", *n, "variables per side of the diagonal family");
    st->sub->add_option("--d1", *d1, "x-degree");
    st->sub->add_option("--d2", *d2, "y-degree");
    st->sub->add_option("--grid", *grid, "height grid")->delimiter(',');
    st->sub->callback([st, n, d1, d2, grid, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "subvariety");
      if (st->sub->count("--n")) job.params["n"] = *n;
      if (st->sub->count("--d1")) job.params["d1"] = *d1;
      if (st->sub->count("--d2")) job.params["d2"] = *d2;
      if (st->sub->count("--grid")) job.params["grid"] = *grid;
      Ctx ctx(std::move(job));
      code = run_subvariety(ctx);
    });
  }

  // hypothesis
  {
    auto st = make_sub("hypothesis", "sufficient-condition margins for the counting theorems");
    auto d1 = std::make_shared<long long>(0);
    auto d2 = std::make_shared<long long>(0);
    auto R = std::make_shared<long long>(0);
    auto dimv1 = std::make_shared<long long>(0);
    auto dimv2 = std::make_shared<long long>(0);
    auto delta = std::make_shared<double>(0.0);
    st->sub->add_option("--d1", *d1, "x-degree");
    st->sub->add_option("--d2", *d2, "y-degree");
    st->sub->add_option("--R", *R, "number of forms");
    st->sub->add_option("--dimv1", *dimv1, "singular-locus dimension, x side");
    st->sub->add_option("--dimv2", *dimv2, "singular-locus dimension, y side");
    st->sub->add_option("--delta", *delta, "slack parameter in (0, 1)");
    st->sub->callback([st, d1, d2, R, dimv1, dimv2, delta, &code]() {
      JobConfig job = effective_job(st->sub, st->cf, "hypothesis");
      if (st->sub->count("--d1")) job.params["d1"] = *d1;
      if (st->sub->count("--d2")) job.params["d2"] = *d2;
      if (st->sub->count("--R")) job.params["R"] = *R;
      if (st->sub->count("--dimv1")) job.params["dimv1"] = *dimv1;
      if (st->sub->count("--dimv2")) job.params["dimv2"] = *dimv2;
      if (st->sub->count("--delta")) job.params["delta"] = *delta;
      Ctx ctx(std::move(job));
      code = run_hypothesis(ctx);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);  // prints help or the flag error
    return r == 0 ? kOk : kConfigError;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBudgetError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return code;
}

}  // namespace bihom::cli
