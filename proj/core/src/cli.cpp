#include "cavityqfi/cli.hpp"

#include <filesystem>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "cavityqfi/harness.hpp"
#include "cavityqfi/oracle.hpp"
#include "cavityqfi/version.hpp"

namespace cavityqfi {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir);
}

int cmd_simulate(const std::string& probe_name, int n, double kappa, double gamma,
                 const std::string& target, double t_end, int samples, int threads,
                 double fd_delta, double rtol, double atol, const std::string& out_dir) {
  SweepConfig config;
  config.probes = {probe_name};
  config.n_values = {n};
  config.regimes = {{kappa, gamma}};
  config.target = target;
  config.t_end = t_end;
  config.n_samples = samples;
  config.threads = threads;
  config.fd_delta_rel = fd_delta;
  config.rtol = rtol;
  config.atol = atol;
  config.validate();

  const ProbeSpec probe = ProbeSpec::parse(probe_name);
  const PipelineSettings settings = config.pipeline_settings();
  const QfiTrace trace = run_point(probe, n, kappa, gamma, settings);

  ensure_dir(out_dir);
  write_file(out_dir + "/trace.csv", trace_csv(trace));
  write_file(out_dir + "/metadata.json", metadata_json(config, "simulate"));
  std::cout << "max_qfi=" << format_double(trace.max_value)
            << " t_at_max=" << format_double(trace.t_at_max)
            << " steps=" << trace.stats.accepted << "\n";
  if (trace.max_at_horizon) {
    std::cerr << "warning: maximum at the final grid time; consider a longer --t-end\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int threads_override) {
  SweepConfig config = SweepConfig::load(config_path);
  if (threads_override > 0) config.threads = threads_override;
  config.validate();
  const SweepOutcome outcome = run_sweep(config);
  ensure_dir(out_dir);
  write_file(out_dir + "/results.csv", results_csv(outcome.rows));
  write_file(out_dir + "/fits.csv", fits_csv(outcome.fits));
  write_file(out_dir + "/errors.csv", errors_csv(outcome.errors));
  write_file(out_dir + "/metadata.json", metadata_json(config, "sweep"));
  std::cout << outcome.rows.size() << " rows, " << outcome.fits.size() << " fits, "
            << outcome.errors.size() << " errors -> " << out_dir << "\n";
  if (!outcome.errors.empty()) {
    std::cerr << outcome.errors.size() << " point(s) failed; see errors.csv\n";
    return 2;
  }
  return 0;
}

int cmd_map(const std::string& config_path, const std::string& out_dir, int threads_override) {
  SweepConfig config = SweepConfig::load(config_path);
  if (threads_override > 0) config.threads = threads_override;
  config.validate(/*for_map=*/true);
  const std::vector<MapRow> rows = run_map(config);
  ensure_dir(out_dir);
  write_file(out_dir + "/map.csv", map_csv(rows));
  write_file(out_dir + "/metadata.json", metadata_json(config, "map"));
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.error.empty()) ++failed;
  }
  std::cout << rows.size() << " map rows -> " << out_dir << "\n";
  if (failed > 0) {
    std::cerr << failed << " grid point(s) failed\n";
    return 2;
  }
  return 0;
}

int cmd_fit(const std::string& path, const std::string& n_col, const std::string& v_col) {
  const auto [ns, ys] = read_csv_columns(path, n_col, v_col);
  const ScalingFit fit = fit_power_law(ns, ys);
  if (!fit.converged) {
    std::cout << "fit did not converge on " << ns.size() << " points\n";
    return 2;
  }
  std::cout << "a = " << format_double(fit.a) << "\n"
            << "b = " << format_double(fit.b) << " (stderr " << format_double(fit.stderr_b)
            << ")\n"
            << "c = " << format_double(fit.c) << "\n"
            << "residual_norm = " << format_double(fit.residual_norm) << "\n";
  return 0;
}

int cmd_oracle_check(int n_max, double t_end, int samples, double tol, double rtol, double atol,
                     const std::vector<std::string>& probe_names) {
  if (n_max < 1 || n_max > FullSystem::kMaxQubits) {
    throw ConfigError("oracle-check supports N in 1.." +
                      std::to_string(FullSystem::kMaxQubits));
  }
  const std::vector<RegimePoint> corners = {{0.8, 0.8}, {3.0, 0.2}, {0.2, 3.0}, {3.0, 3.0}};
  const TimeGrid grid{t_end, samples};
  QfiOptions opts;
  opts.integrator.rtol = rtol;
  opts.integrator.atol = atol;
  opts.collect_observables = true;
  opts.refine_max = false;
  opts.fd_check = false;
  opts.quiet = true;

  double worst = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    for (const auto& name : probe_names) {
      const ProbeState probe = ProbeSpec::parse(name).resolve(n);
      for (const auto& corner : corners) {
        const SystemParams params =
            SystemParams::resonant(n, 1.0, corner.kappa_over_g, corner.gamma_over_g);
        const EstimationTarget target{TargetKind::Coupling, 1e-4};
        const QfiTrace sym = compute_qfi_trace(params, probe, target, grid, opts);
        const FullRunResult full = full_evolve_and_qfi(params, probe, target, grid, opts);
        double f_scale = 1e-12, dev_f = 0.0, dev_obs = 0.0;
        for (std::size_t k = 0; k < sym.values.size(); ++k) {
          f_scale = std::max(f_scale, std::abs(full.qfi[k]));
          dev_f = std::max(dev_f, std::abs(sym.values[k] - full.qfi[k]));
          dev_obs = std::max({dev_obs, std::abs(sym.jz[k] - full.jz[k]),
                              std::abs(sym.photons[k] - full.photons[k]),
                              std::abs(sym.purity[k] - full.purity[k])});
        }
        const double rel_f = dev_f / f_scale;
        const double dev = std::max(rel_f, dev_obs);
        worst = std::max(worst, dev);
        std::cout << "N=" << n << " probe=" << name << " kappa/g=" << corner.kappa_over_g
                  << " gamma/g=" << corner.gamma_over_g << " qfi_rel_dev=" << rel_f
                  << " obs_dev=" << dev_obs << "\n";
      }
    }
  }
  std::cout << "max deviation = " << worst << " (tolerance " << tol << ")\n";
  return worst < tol ? 0 : 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"qubits-cavity quantum Fisher information simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run one parameter point and emit F(t)");
  std::string sim_probe = "x";
  int sim_n = 4;
  double sim_kappa = 0.8, sim_gamma = 0.8;
  std::string sim_target = "coupling";
  double sim_t_end = 20.0;
  int sim_samples = 1000;
  std::string sim_out = "simulate-out";
  double sim_fd_delta = 1e-4;
  double sim_rtol = 1e-8;
  double sim_atol = 1e-10;
  int threads = 0;
  simulate->add_option("--probe", sim_probe, "ghz, x, ground, excited, dicke-<n>, dicke-half");
  simulate->add_option("--n", sim_n, "number of qubits")->required();
  simulate->add_option("--kappa", sim_kappa, "cavity decay kappa/g")->required();
  simulate->add_option("--gamma", sim_gamma, "qubit decay gamma/g")->required();
  simulate->add_option("--target", sim_target, "coupling or detuning");
  simulate->add_option("--t-end", sim_t_end, "horizon in units of 1/g");
  simulate->add_option("--samples", sim_samples, "grid samples");
  simulate->add_option("--out", sim_out, "output directory");
  simulate->add_option("--fd-delta", sim_fd_delta, "finite-difference step relative to g");
  simulate->add_option("--rtol", sim_rtol, "integrator relative tolerance");
  simulate->add_option("--atol", sim_atol, "integrator absolute tolerance");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a probe x N x regime sweep from a JSON config");
  std::string sweep_config, sweep_out = "sweep-out";
  sweep->add_option("--config", sweep_config, "JSON config path")->required();
  sweep->add_option("--out", sweep_out, "output directory");

  // map
  auto* map = app.add_subcommand("map", "scaling-exponent map over a decay-rate grid");
  std::string map_config, map_out = "map-out";
  map->add_option("--config", map_config, "JSON config path")->required();
  map->add_option("--out", map_out, "output directory");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a N^b + c to a CSV of (N, value)");
  std::string fit_in, fit_ncol = "n", fit_vcol = "value";
  fit->add_option("--in", fit_in, "input CSV path")->required();
  fit->add_option("--n-col", fit_ncol, "column holding N");
  fit->add_option("--value-col", fit_vcol, "column holding the fitted values");

  // oracle-check
  auto* oracle = app.add_subcommand("oracle-check",
                                    "compare the symmetric-basis pipeline to the full-basis "
                                    "reference at small N");
  int oc_nmax = 3;
  double oc_t_end = 8.0;
  int oc_samples = 81;
  double oc_tol = 1e-5;
  double oc_rtol = 1e-10;
  double oc_atol = 1e-12;
  std::vector<std::string> oc_probes = {"ghz", "x", "dicke-half", "excited", "ground"};
  oracle->add_option("--n-max", oc_nmax, "largest N to check (<= 5)");
  oracle->add_option("--t-end", oc_t_end, "horizon in units of 1/g");
  oracle->add_option("--samples", oc_samples, "grid samples");
  oracle->add_option("--tol", oc_tol, "pass threshold on the worst deviation");
  oracle->add_option("--rtol", oc_rtol, "integrator relative tolerance");
  oracle->add_option("--atol", oc_atol, "integrator absolute tolerance");
  oracle->add_option("--probes", oc_probes, "probe names");

  app.add_option("--threads", threads, "worker threads (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(sim_probe, sim_n, sim_kappa, sim_gamma, sim_target, sim_t_end,
                          sim_samples, threads > 0 ? threads : 1, sim_fd_delta, sim_rtol,
                          sim_atol, sim_out);
    }
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_out, threads);
    if (map->parsed()) return cmd_map(map_config, map_out, threads);
    if (fit->parsed()) return cmd_fit(fit_in, fit_ncol, fit_vcol);
    if (oracle->parsed()) {
      return cmd_oracle_check(oc_nmax, oc_t_end, oc_samples, oc_tol, oc_rtol, oc_atol,
                              oc_probes);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cavityqfi
