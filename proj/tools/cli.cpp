#include "cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "harness.hpp"

namespace capa::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string methods;
  std::optional<double> epsilon;
  std::optional<int> max_iters;
  std::string init = "matched-filter";
  bool no_rescale = false;
  double spacing = 0.0;
  int nf = -1;
  bool plot = false;
  int parallel = 1;
  int reps = 3;
  bool no_timing = false;
};

fs::path output_dir(const Options& o) {
  fs::path dir = o.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("CAPA_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  fs::create_directories(dir);
  return dir;
}

MethodOptions method_options(const Options& o) {
  MethodOptions m;
  if (o.epsilon) m.solver.epsilon = *o.epsilon;
  if (o.max_iters) m.solver.max_iters = *o.max_iters;
  if (o.init == "random" || o.init == "random-gaussian") {
    m.solver.init = InitKind::RandomGaussian;
  } else if (o.init == "matched-filter") {
    m.solver.init = InitKind::MatchedFilter;
  } else {
    throw ConfigError("--init: expected random-gaussian or matched-filter");
  }
  m.solver.rescale_inactive = !o.no_rescale;
  try {
    m.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  m.spacing = o.spacing;
  m.nf = o.nf;
  return m;
}

Scenario load_scenario(const Options& o) {
  Scenario s = o.config.empty() ? desk_scenario(o.seed.value_or(1)) : read_scenario(o.config);
  if (o.seed) {
    if (o.config.empty()) {
      s = desk_scenario(*o.seed);
    } else {
      // re-read so that a "placement" block is redrawn from the new seed
      auto j = read_json(o.config);
      j["seed"] = *o.seed;
      s = scenario_from_json(j);
    }
  }
  return s;
}

std::string bits(double nats) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", nats / std::numbers::ln2);
  return buf;
}

int cmd_solve(const Options& o, std::ostream& out) {
  const Scenario s = load_scenario(o);
  const MethodOptions mo = method_options(o);
  const fs::path dir = output_dir(o);

  const ChannelSet ch = build_channel_set(s);
  const RunResult rr = run(ch, s.streams, s.budget, s.noise_variance, mo.solver, s.seed);
  const RateReport se = evaluate_se(rr.state.v, ch, s.noise_variance);

  std::ofstream trace(dir / "trace.csv");
  write_trace_csv(rr.trace, trace);
  if (o.plot) {
    Series line{"sum SE", {}, {}};
    for (std::size_t i = 0; i < rr.trace.size(); ++i) {
      line.x.push_back(static_cast<double>(i + 1));
      line.y.push_back(rr.trace.sum_se[i] / std::numbers::ln2);
    }
    std::ofstream svg(dir / "trace.svg");
    write_svg_plot({line}, "Convergence", "iteration", "sum SE (bit/s/Hz)", svg);
  }

  out << "sum SE: " << bits(se.sum) << " bit/s/Hz\n";
  for (std::size_t k = 0; k < se.per_user.size(); ++k) {
    out << "  user " << k << ": " << bits(se.per_user[k]) << "\n";
  }
  out << "iterations: " << rr.iterations << (rr.converged ? " (converged)" : " (max_iters reached)")
      << "\n";
  out << "seconds: " << (rr.trace.seconds.empty() ? 0.0 : rr.trace.seconds.back()) << "\n";
  out << "trace: " << (dir / "trace.csv").string() << "\n";
  return rr.converged ? kOk : kNotConverged;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw ConfigError("sweep: --config <sweep.json> is required");
  const fs::path path = o.config;
  SweepSpec spec = sweep_from_json(read_json(path), path.parent_path());
  if (!o.methods.empty()) spec.methods = parse_methods(o.methods);
  const MethodOptions mo = method_options(o);
  const std::uint64_t seed0 = o.seed.value_or(base_seed(spec));
  const fs::path dir = output_dir(o);

  struct Job {
    std::size_t value_index;
    std::string method;
    int rep;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (const auto& m : spec.methods) {
      for (int r = 0; r < spec.repetitions; ++r) jobs.push_back({v, m, r});
    }
  }
  std::vector<ResultRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const double value = spec.values[job.value_index];
      const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(job.rep);
      MethodOutcome outcome;
      outcome.method = job.method;
      try {
        const Scenario s = sweep_scenario(spec, value, seed);
        const ChannelSet eval = build_channel_set(s);
        outcome = run_method(job.method, s, eval, mo);
      } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.error = e.what();
      }
      rows[i] = to_row(outcome, seed, value);
    }
  };
  const int threads = std::max(1, o.parallel);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::ofstream csv(dir / "results.csv", std::ios::binary);
  write_results_csv(rows, csv, !o.no_timing);

  int failed = 0;
  std::map<std::string, Series> by_method;
  for (const auto& m : spec.methods) by_method[m].name = m;
  out << "value      method       mean_sum_se_bits  ok/runs\n";
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (const auto& m : spec.methods) {
      double acc = 0.0;
      int ok = 0, total = 0;
      for (const auto& r : rows) {
        if (r.method != m || r.value != spec.values[v]) continue;
        ++total;
        if (r.ok) {
          acc += r.sum_bits;
          ++ok;
        } else {
          ++failed;
        }
      }
      const double mean = ok ? acc / ok : std::nan("");
      by_method[m].x.push_back(spec.values[v]);
      by_method[m].y.push_back(mean);
      char line[128];
      std::snprintf(line, sizeof(line), "%-10g %-12s %16.4f  %d/%d\n", spec.values[v], m.c_str(),
                    mean, ok, total);
      out << line;
    }
  }
  if (o.plot) {
    std::vector<Series> series;
    for (const auto& m : spec.methods) series.push_back(by_method[m]);
    std::ofstream svg(dir / "sweep.svg");
    write_svg_plot(series, "Sum SE vs " + spec.variable, spec.variable, "mean sum SE (bit/s/Hz)",
                   svg);
  }
  out << "results: " << (dir / "results.csv").string() << "\n";
  if (failed) {
    out << failed << " run(s) failed\n";
    return kPartialFailure;
  }
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const Scenario s = load_scenario(o);
  const MethodOptions mo = method_options(o);
  const auto methods = parse_methods(o.methods.empty() ? "proposed,fourier,spda" : o.methods);
  const fs::path dir = output_dir(o);
  const ChannelSet eval = build_channel_set(s);

  std::vector<ResultRow> rows;
  out << "method       sum_se_bits  iterations  seconds\n";
  int failed = 0;
  for (const auto& m : methods) {
    const MethodOutcome r = run_method(m, s, eval, mo);
    rows.push_back(to_row(r, s.seed, 0.0));
    char line[160];
    if (r.ok) {
      std::snprintf(line, sizeof(line), "%-12s %11s  %10d  %7.3f\n", m.c_str(),
                    bits(r.sum).c_str(), r.iterations, r.seconds);
    } else {
      ++failed;
      std::snprintf(line, sizeof(line), "%-12s failed: %s\n", m.c_str(), r.error.c_str());
    }
    out << line;
  }
  std::ofstream csv(dir / "compare.csv", std::ios::binary);
  write_results_csv(rows, csv, true);
  return failed ? kPartialFailure : kOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const Scenario s = load_scenario(o);
  const MethodOptions mo = method_options(o);
  const auto methods = parse_methods(o.methods.empty() ? "proposed,fourier,spda-wmmse" : o.methods);
  if (o.reps < 1) throw ConfigError("--reps must be >= 1");
  const fs::path dir = output_dir(o);
  const ChannelSet eval = build_channel_set(s);

  std::ofstream csv(dir / "bench.csv", std::ios::binary);
  csv << "method,reps,median_seconds,min_seconds,max_seconds,sum_se_bits\r\n";
  out << "method       reps  median_s   min_s      max_s      sum_se_bits\n";
  int failed = 0;
  for (const auto& m : methods) {
    const MethodOutcome warm = run_method(m, s, eval, mo);  // excluded
    std::vector<double> times;
    MethodOutcome last = warm;
    for (int r = 0; r < o.reps && warm.ok; ++r) {
      last = run_method(m, s, eval, mo);
      if (!last.ok) break;
      times.push_back(last.seconds);
    }
    if (!last.ok) {
      ++failed;
      out << m << " failed: " << last.error << "\n";
      continue;
    }
    const double med = median(times);
    const double lo = *std::min_element(times.begin(), times.end());
    const double hi = *std::max_element(times.begin(), times.end());
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %4d  %-9.4f  %-9.4f  %-9.4f  %s\n", m.c_str(), o.reps,
                  med, lo, hi, bits(last.sum).c_str());
    out << line;
    std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f,%.6f,%s\r\n", m.c_str(), o.reps, med, lo,
                  hi, bits(last.sum).c_str());
    csv << line;
  }
  return failed ? kPartialFailure : kOk;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "override the scenario seed");
  cmd->add_option("--out", o.out_dir, "output directory (default $CAPA_OUT_DIR or .)");
  cmd->add_option("--epsilon", o.epsilon, "convergence tolerance on sum logdet W");
  cmd->add_option("--max-iters", o.max_iters, "iteration cap");
  cmd->add_option("--init", o.init, "random-gaussian | matched-filter");
  cmd->add_flag("--no-rescale", o.no_rescale, "keep the literal v-update when the budget is slack");
}

void add_methods(CLI::App* cmd, Options& o) {
  cmd->add_option("--methods", o.methods, "comma list of proposed,fourier,spda,spda-wmmse");
  cmd->add_option("--spacing", o.spacing, "SPDA element spacing in meters (default lambda/2)");
  cmd->add_option("--nf", o.nf, "Fourier truncation (default ceil(L_B/lambda))");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"CAPA beamforming experiments"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "run the WMMSE solver on one scenario");
  add_common(solve, o);
  solve->add_flag("--plot", o.plot, "also write trace.svg");

  auto* sweep = app.add_subcommand("sweep", "sweep budget or aperture size");
  add_common(sweep, o);
  add_methods(sweep, o);
  sweep->add_flag("--plot", o.plot, "also write sweep.svg");
  sweep->add_option("--parallel", o.parallel, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--no-timing", o.no_timing, "write 0 for seconds (byte-stable output)");

  auto* bench = app.add_subcommand("bench", "median wall time per method");
  add_common(bench, o);
  add_methods(bench, o);
  bench->add_option("--reps", o.reps, "timed repetitions after one warm-up");

  auto* compare = app.add_subcommand("compare", "run each method once");
  add_common(compare, o);
  add_methods(compare, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*solve) return cmd_solve(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*bench) return cmd_bench(o, out);
    return cmd_compare(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace capa::cli
