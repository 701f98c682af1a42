#include "cavityqfi/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cavityqfi/parallel.hpp"

namespace cavityqfi {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct FitState {
  Vec3 p;          // (a, b, c)
  double rss = 0;  // sum of squared residuals
};

double residual_sum(const Vec3& p, std::span<const double> ns, std::span<const double> ys) {
  double rss = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double r = p(0) * std::pow(ns[i], p(1)) + p(2) - ys[i];
    rss += r * r;
  }
  return rss;
}

// single Levenberg-Marquardt run from one start; returns converged flag
bool lm_run(Vec3& p, std::span<const double> ns, std::span<const double> ys,
            const FitOptions& opts, int& iterations, double& rss_out) {
  const std::size_t n = ns.size();
  double rss = residual_sum(p, ns, ys);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Mat3 jtj = Mat3::Zero();
    Vec3 jtr = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double nb = std::pow(ns[i], p(1));
      const double r = p(0) * nb + p(2) - ys[i];
      const Vec3 jrow(nb, p(0) * nb * std::log(ns[i]), 1.0);
      jtj += jrow * jrow.transpose();
      jtr += jrow * r;
    }
    bool stepped = false;
    for (int tries = 0; tries < 40; ++tries) {
      Mat3 damped = jtj;
      for (int k = 0; k < 3; ++k) {
        damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
      }
      const Vec3 dp = damped.ldlt().solve(-jtr);
      if (!dp.allFinite()) {
        lambda *= 10;
        continue;
      }
      const Vec3 trial = p + dp;
      const double trial_rss = residual_sum(trial, ns, ys);
      if (trial_rss <= rss) {
        const double step = dp.norm() / std::max(p.norm(), 1e-30);
        const double drop = (rss - trial_rss) / std::max(rss, 1e-300);
        p = trial;
        rss = trial_rss;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (step < opts.step_tol || drop < opts.residual_tol || rss == 0.0) converged = true;
        break;
      }
      lambda *= 10;
      if (lambda > 1e12) break;
    }
    if (converged || !stepped) break;
  }
  iterations = it;
  rss_out = rss;
  return converged;
}

}  // namespace

ScalingFit fit_power_law(std::span<const double> ns, std::span<const double> values,
                         const FitOptions& opts) {
  if (ns.size() != values.size()) throw ConfigError("fit inputs differ in length");
  std::set<double> distinct(ns.begin(), ns.end());
  if (distinct.size() < 4) throw ConfigError("power-law fit needs at least 4 distinct N values");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0)) throw ConfigError("fit requires positive N");
    if (!(values[i] > 0)) throw ConfigError("fit requires positive values");
  }

  const double y_min = *std::min_element(values.begin(), values.end());
  const auto [n_lo_it, n_hi_it] = std::minmax_element(ns.begin(), ns.end());
  const double n_lo = *n_lo_it, n_hi = *n_hi_it;
  const double y_first = values[static_cast<std::size_t>(n_lo_it - ns.begin())];
  const double y_last = values[static_cast<std::size_t>(n_hi_it - ns.begin())];

  ScalingFit best;
  double best_rss = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const double b0 : opts.b_starts) {
    const double denom = std::pow(n_hi, b0) - std::pow(n_lo, b0);
    const double a0 = std::abs(denom) > 1e-12 ? (y_last - y_first) / denom : 1.0;
    Vec3 p(a0 != 0.0 ? a0 : 1.0, b0, y_min);
    int iterations = 0;
    double rss = 0.0;
    const bool ok = lm_run(p, ns, values, opts, iterations, rss);
    if (!ok) continue;
    const bool better =
        rss < best_rss * (1 - 1e-12) ||
        (std::abs(rss - best_rss) <= 1e-12 * std::max(rss, best_rss) &&
         std::abs(p(1)) < std::abs(best.b));
    if (!any || better) {
      best.a = p(0);
      best.b = p(1);
      best.c = p(2);
      best.iterations = iterations;
      best_rss = rss;
      any = true;
    }
  }
  if (!any) {
    best.converged = false;
    return best;
  }
  best.converged = true;
  best.residual_norm = std::sqrt(best_rss);

  // linearized standard errors from the final Jacobian
  const std::size_t n = ns.size();
  if (n > 3) {
    Mat3 jtj = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double nb = std::pow(ns[i], best.b);
      const Vec3 jrow(nb, best.a * nb * std::log(ns[i]), 1.0);
      jtj += jrow * jrow.transpose();
    }
    const double s2 = best_rss / static_cast<double>(n - 3);
    const Mat3 cov = s2 * jtj.inverse();
    best.stderr_a = std::sqrt(std::max(cov(0, 0), 0.0));
    best.stderr_b = std::sqrt(std::max(cov(1, 1), 0.0));
    best.stderr_c = std::sqrt(std::max(cov(2, 2), 0.0));
  }
  return best;
}

SystemParams params_for_point(int n_qubits, double kappa_over_g, double gamma_over_g,
                              const PipelineSettings& settings) {
  SystemParams p = SystemParams::resonant(n_qubits, settings.g, kappa_over_g, gamma_over_g,
                                          settings.n_cav_extra);
  if (settings.target.kind == TargetKind::Detuning) {
    p.omega_q = settings.detuning_over_g * settings.g;
    p.omega_c = 0.0;
  }
  return p;
}

QfiTrace run_point(const ProbeSpec& probe, int n_qubits, double kappa_over_g,
                   double gamma_over_g, const PipelineSettings& settings) {
  const SystemParams params = params_for_point(n_qubits, kappa_over_g, gamma_over_g, settings);
  const ProbeState state = probe.resolve(n_qubits);
  return compute_qfi_trace(params, state, settings.target, settings.grid, settings.qfi);
}

ExponentMap exponent_map(const ProbeSpec& probe, std::span<const double> kappa_grid,
                         std::span<const double> gamma_grid, std::span<const int> n_values,
                         const PipelineSettings& settings, const MapBounds& bounds,
                         const FitOptions& fit_opts) {
  if (kappa_grid.empty() || gamma_grid.empty()) throw ConfigError("empty decay-rate grid");
  if (n_values.size() < 4) throw ConfigError("exponent map needs at least 4 N values");
  for (const double k : kappa_grid) {
    if (k < bounds.lo || k > bounds.hi) throw ConfigError("kappa/g grid point outside bounds");
  }
  for (const double g : gamma_grid) {
    if (g < bounds.lo || g > bounds.hi) throw ConfigError("gamma/g grid point outside bounds");
  }

  ExponentMap map;
  map.probe = probe.name();
  map.entries.resize(kappa_grid.size() * gamma_grid.size());

  struct Task {
    std::size_t entry;
    std::size_t n_index;
  };
  std::vector<Task> tasks;
  for (std::size_t ik = 0; ik < kappa_grid.size(); ++ik) {
    for (std::size_t ig = 0; ig < gamma_grid.size(); ++ig) {
      const std::size_t e = ik * gamma_grid.size() + ig;
      map.entries[e].kappa_over_g = kappa_grid[ik];
      map.entries[e].gamma_over_g = gamma_grid[ig];
      for (std::size_t in = 0; in < n_values.size(); ++in) tasks.push_back({e, in});
    }
  }

  std::vector<std::vector<double>> max_qfi(map.entries.size(),
                                           std::vector<double>(n_values.size(), 0.0));
  std::vector<std::vector<std::string>> errors(map.entries.size(),
                                               std::vector<std::string>(n_values.size()));
  parallel_for(tasks.size(), settings.threads, [&](std::size_t i) {
    const Task& task = tasks[i];
    const auto& entry = map.entries[task.entry];
    try {
      const QfiTrace trace = run_point(probe, n_values[task.n_index], entry.kappa_over_g,
                                       entry.gamma_over_g, settings);
      max_qfi[task.entry][task.n_index] = trace.max_value;
    } catch (const std::exception& e) {
      errors[task.entry][task.n_index] = e.what();
    }
  });

  for (std::size_t e = 0; e < map.entries.size(); ++e) {
    auto& entry = map.entries[e];
    std::string first_error;
    for (const auto& msg : errors[e]) {
      if (!msg.empty()) {
        first_error = msg;
        break;
      }
    }
    if (!first_error.empty()) {
      entry.ok = false;
      entry.error = first_error;
      continue;
    }
    std::vector<double> ns(n_values.size());
    for (std::size_t i = 0; i < n_values.size(); ++i) ns[i] = n_values[i];
    try {
      entry.fit = fit_power_law(ns, max_qfi[e], fit_opts);
      entry.ok = true;
      entry.n_points = static_cast<int>(ns.size());
    } catch (const std::exception& e2) {
      entry.ok = false;
      entry.error = e2.what();
    }
  }
  return map;
}

}  // namespace cavityqfi
