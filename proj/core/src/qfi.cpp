#include "cavityqfi/qfi.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace cavityqfi {

namespace {

// Blocks whose derivative norm is below this bound cannot contribute more
// than 2*norm^2/pair_cutoff ~ 2e-14 to the pair sum and are skipped.
constexpr double kNegligibleDerivative = 1e-13;

double qfi_pair_sum(const RealVector& lam, const DenseMatrix& m, double pair_cutoff) {
  double f = 0.0;
  const Eigen::Index n = lam.size();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double s = lam(a) + lam(b);
      if (s > pair_cutoff) f += 2.0 * std::norm(m(a, b)) / s;
    }
  }
  return f;
}

struct BlockSums {
  double qfi = 0.0;
  double min_raw = std::numeric_limits<double>::infinity();
};

// Core blockwise evaluation on flat storage. When full_decomposition is set,
// every block is decomposed (needed for min-eigenvalue reporting); otherwise
// blocks with negligible derivative are skipped.
BlockSums qfi_blocks(const StateLayout& layout, const DenseVector& central,
                     const DenseVector& derivative, double eps_eig_rel, double pair_cutoff,
                     bool full_decomposition) {
  BlockSums out;
  for (int i = 0; i < layout.n_blocks(); ++i) {
    const auto& b = layout.block(i);
    const std::int64_t len = static_cast<std::int64_t>(b.dim) * b.dim;
    Eigen::Map<const DenseMatrix> mc(central.data() + b.offset, b.dim, b.dim);
    Eigen::Map<const DenseMatrix> md(derivative.data() + b.offset, b.dim, b.dim);
    const double dnorm = md.norm();
    if (!full_decomposition && dnorm < kNegligibleDerivative) continue;
    (void)len;
    DenseMatrix rho = 0.5 * (mc + mc.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(rho);
    RealVector lam = es.eigenvalues();
    out.min_raw = std::min(out.min_raw, lam.minCoeff());
    const double floor = eps_eig_rel * std::max(rho.trace().real(), 0.0);
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (lam(k) < floor) lam(k) = 0.0;
    }
    if (dnorm < kNegligibleDerivative) continue;
    DenseMatrix drho = 0.5 * (md + md.adjoint());
    const DenseMatrix m = es.eigenvectors().adjoint() * drho * es.eigenvectors();
    out.qfi += qfi_pair_sum(lam, m, pair_cutoff);
  }
  return out;
}

void check_hermitian(const HybridState& x, const char* what) {
  double scale = 0.0;
  for (int i = 0; i < x.layout().n_blocks(); ++i) {
    scale = std::max(scale, x.block(i).cwiseAbs().maxCoeff());
  }
  if (x.hermiticity_error() > 1e-6 * std::max(1.0, scale)) {
    throw ConfigError(std::string(what) + " is not Hermitian");
  }
}

struct PointContext {
  DickeSpace space;
  Liouvillian central, plus, minus;
  HybridState rho0_central, rho0_plus, rho0_minus;
  double delta = 0.0;

  PointContext(const SystemParams& params, const ProbeState& probe,
               const EstimationTarget& target)
      : space(enumerate_sectors(params.n_qubits)),
        central(params, space),
        plus(shifted_params(params, target, params.coupling * target.delta_rel), space),
        minus(shifted_params(params, target, -params.coupling * target.delta_rel), space),
        rho0_central(prepare_probe(probe, params, space)),
        rho0_plus(prepare_probe(probe, shifted_params(params, target, 0.0), space)),
        rho0_minus(prepare_probe(probe, shifted_params(params, target, 0.0), space)),
        delta(params.coupling * target.delta_rel) {
    if (!(target.delta_rel > 0)) throw ConfigError("finite-difference step must be positive");
  }
};

Dopri5 make_stepper(const Liouvillian& l, const HybridState& rho0, const IntegratorOptions& opts) {
  Dopri5 s([&l](const DenseVector& y, DenseVector& dy) { l.apply(y, dy); }, rho0.data().size(),
           opts);
  if (opts.check_guard) {
    s.set_accept_callback(make_guard_callback(rho0.layout_ptr(), opts.guard_threshold));
  }
  return s;
}

}  // namespace

SpectralDecomp decompose(const HybridState& state, double eps_eig_rel) {
  SpectralDecomp d;
  d.min_raw_eigenvalue = std::numeric_limits<double>::infinity();
  for (int i = 0; i < state.layout().n_blocks(); ++i) {
    DenseMatrix rho = state.block(i);
    rho = 0.5 * (rho + rho.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(rho);
    RealVector lam = es.eigenvalues();
    d.min_raw_eigenvalue = std::min(d.min_raw_eigenvalue, lam.minCoeff());
    const double floor = eps_eig_rel * std::max(rho.trace().real(), 0.0);
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (lam(k) < floor) lam(k) = 0.0;
    }
    d.eigenvalues.push_back(std::move(lam));
    d.eigenvectors.push_back(es.eigenvectors());
  }
  return d;
}

double qfi_from_decomp(const SpectralDecomp& decomp, const HybridState& drho,
                       double pair_cutoff) {
  double f = 0.0;
  for (int i = 0; i < drho.layout().n_blocks(); ++i) {
    const auto md = drho.block(i);
    if (md.norm() < kNegligibleDerivative) continue;
    const DenseMatrix sym = 0.5 * (md + md.adjoint());
    const auto& v = decomp.eigenvectors[static_cast<std::size_t>(i)];
    const DenseMatrix m = v.adjoint() * sym * v;
    f += qfi_pair_sum(decomp.eigenvalues[static_cast<std::size_t>(i)], m, pair_cutoff);
  }
  return f;
}

double qfi_at_time(const HybridState& rho, const HybridState& drho, double eps_eig_rel,
                   double pair_cutoff) {
  if (!rho.layout().compatible(drho.layout())) {
    throw ConfigError("rho and drho have different block structure");
  }
  check_hermitian(rho, "rho");
  check_hermitian(drho, "drho");
  return qfi_blocks(rho.layout(), rho.data(), drho.data(), eps_eig_rel, pair_cutoff, false).qfi;
}

double qfi_spectral_dense(const DenseMatrix& rho, const DenseMatrix& drho, double eps_eig_rel,
                          double pair_cutoff) {
  const DenseMatrix sym = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym);
  RealVector lam = es.eigenvalues();
  const double floor = eps_eig_rel * std::max(sym.trace().real(), 0.0);
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam(k) < floor) lam(k) = 0.0;
  }
  const DenseMatrix dsym = 0.5 * (drho + drho.adjoint());
  const DenseMatrix m = es.eigenvectors().adjoint() * dsym * es.eigenvectors();
  return qfi_pair_sum(lam, m, pair_cutoff);
}

std::pair<int, bool> argmax_samples(std::span<const double> values) {
  if (values.size() < 3) throw ConfigError("argmax needs at least 3 samples");
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k) {
    if (values[static_cast<std::size_t>(k)] > values[static_cast<std::size_t>(best)]) best = k;
  }
  return {best, best == static_cast<int>(values.size()) - 1};
}

double crb_variance(double fisher_information, long experiments) {
  if (!(fisher_information > 0)) throw ConfigError("Cramer-Rao bound needs F > 0");
  if (experiments < 1) throw ConfigError("Cramer-Rao bound needs M >= 1");
  return 1.0 / (static_cast<double>(experiments) * fisher_information);
}

SystemParams shifted_params(const SystemParams& params, const EstimationTarget& target,
                            double shift) {
  SystemParams p = params;
  if (target.kind == TargetKind::Coupling) {
    p.coupling += shift;
  } else {
    p.omega_q += shift;
  }
  return p;
}

DerivativeTrajectory drho_dtheta(const SystemParams& params, const ProbeState& probe,
                                 const EstimationTarget& target, const TimeGrid& grid,
                                 const QfiOptions& opts) {
  params.validate();
  const double delta = params.coupling * target.delta_rel;
  const DickeSpace space = enumerate_sectors(params.n_qubits);
  const Liouvillian lp(shifted_params(params, target, delta), space);
  const Liouvillian lm(shifted_params(params, target, -delta), space);
  const HybridState rho0 = prepare_probe(probe, params, space);
  Trajectory plus = integrate(lp, rho0, grid, opts.integrator);
  Trajectory minus = integrate(lm, rho0, grid, opts.integrator);

  DerivativeTrajectory out;
  out.times = plus.times;
  out.stats = plus.stats;
  out.stats += minus.stats;
  out.derivatives.reserve(plus.states.size());
  for (std::size_t k = 0; k < plus.states.size(); ++k) {
    HybridState d(rho0.layout_ptr());
    d.data() = (plus.states[k].data() - minus.states[k].data()) / (2.0 * delta);
    out.derivatives.push_back(std::move(d));
  }
  return out;
}

QfiTrace compute_qfi_trace(const SystemParams& params, const ProbeState& probe,
                           const EstimationTarget& target, const TimeGrid& grid,
                           const QfiOptions& opts) {
  params.validate();
  grid.validate();
  PointContext ctx(params, probe, target);
  const auto layout = ctx.rho0_central.layout_ptr();
  const double two_delta = 2.0 * ctx.delta;

  Dopri5 sc = make_stepper(ctx.central, ctx.rho0_central, opts.integrator);
  Dopri5 sp = make_stepper(ctx.plus, ctx.rho0_plus, opts.integrator);
  Dopri5 sm = make_stepper(ctx.minus, ctx.rho0_minus, opts.integrator);
  sc.reset(0.0, ctx.rho0_central.data());
  sp.reset(0.0, ctx.rho0_plus.data());
  sm.reset(0.0, ctx.rho0_minus.data());

  QfiTrace trace;
  trace.times = grid.times();
  const int n = static_cast<int>(trace.times.size());
  trace.values.resize(static_cast<std::size_t>(n));

  DenseVector yc = ctx.rho0_central.data();
  DenseVector yp = ctx.rho0_plus.data();
  DenseVector ym = ctx.rho0_minus.data();
  DenseVector deriv(yc.size());

  const bool full_decomp = opts.collect_invariants;
  int best_k = 0;
  double best_f = -1.0;
  DenseVector best_c, best_p, best_m;
  DenseVector bracket_c, bracket_p, bracket_m;
  double bracket_t = 0.0;
  DenseVector prev_c, prev_p, prev_m;

  HybridState view(layout);  // scratch for observable evaluation
  for (int k = 0; k < n; ++k) {
    const double t = trace.times[static_cast<std::size_t>(k)];
    if (k > 0) {
      sc.state_at(t, yc);
      sp.state_at(t, yp);
      sm.state_at(t, ym);
    }
    deriv = (yp - ym) / two_delta;
    const BlockSums sums =
        qfi_blocks(*layout, yc, deriv, opts.eps_eig_rel, opts.pair_cutoff, full_decomp);
    trace.values[static_cast<std::size_t>(k)] = sums.qfi;

    if (opts.collect_observables || opts.collect_invariants) {
      view.data() = yc;
      trace.jz.push_back(expectation_jz(view));
      trace.photons.push_back(expectation_photons(view));
      trace.purity.push_back(view.purity());
      trace.trace.push_back(view.trace());
      trace.excitations.push_back(total_excitations(view));
      if (opts.collect_invariants) trace.min_eig.push_back(sums.min_raw);
    }

    if (sums.qfi > best_f) {
      best_f = sums.qfi;
      best_k = k;
      best_c = yc; best_p = yp; best_m = ym;
      if (k > 0) {
        bracket_t = trace.times[static_cast<std::size_t>(k - 1)];
        bracket_c = prev_c; bracket_p = prev_p; bracket_m = prev_m;
      } else {
        bracket_t = t;
        bracket_c = yc; bracket_p = yp; bracket_m = ym;
      }
    }
    prev_c = yc; prev_p = yp; prev_m = ym;
  }
  trace.stats += sc.stats();
  trace.stats += sp.stats();
  trace.stats += sm.stats();

  trace.max_value = best_f;
  trace.t_at_max = trace.times[static_cast<std::size_t>(best_k)];
  trace.max_at_horizon = best_k == n - 1;
  if (trace.max_at_horizon && !opts.quiet) {
    std::cerr << "warning: QFI maximum sits at the final grid time t=" << trace.t_at_max
              << "; the horizon may be too short\n";
  }

  // golden-section refinement on re-integrated F inside the bracketing interval
  if (opts.refine_max && n >= 2) {
    const double lo0 = bracket_t;
    const double hi0 =
        trace.times[static_cast<std::size_t>(std::min(best_k + 1, n - 1))];
    if (hi0 > lo0) {
      auto eval = [&](double t, DenseVector& oc, DenseVector& op, DenseVector& om) {
        Dopri5 ec = make_stepper(ctx.central, ctx.rho0_central, opts.integrator);
        Dopri5 ep = make_stepper(ctx.plus, ctx.rho0_plus, opts.integrator);
        Dopri5 em = make_stepper(ctx.minus, ctx.rho0_minus, opts.integrator);
        ec.reset(lo0, bracket_c);
        ep.reset(lo0, bracket_p);
        em.reset(lo0, bracket_m);
        ec.advance(t);
        ep.advance(t);
        em.advance(t);
        trace.stats += ec.stats();
        trace.stats += ep.stats();
        trace.stats += em.stats();
        oc = ec.state();
        op = ep.state();
        om = em.state();
        deriv = (op - om) / two_delta;
        return qfi_blocks(*layout, oc, deriv, opts.eps_eig_rel, opts.pair_cutoff, false).qfi;
      };
      auto consider = [&](double t, double f, const DenseVector& oc, const DenseVector& op,
                          const DenseVector& om) {
        if (f > trace.max_value || (f == trace.max_value && t < trace.t_at_max)) {
          trace.max_value = f;
          trace.t_at_max = t;
          best_c = oc; best_p = op; best_m = om;
        }
      };
      constexpr double kInvPhi = 0.6180339887498949;
      double lo = lo0, hi = hi0;
      double x1 = hi - kInvPhi * (hi - lo);
      double x2 = lo + kInvPhi * (hi - lo);
      DenseVector c1, p1, m1, c2, p2, m2;
      double f1 = eval(x1, c1, p1, m1);
      double f2 = eval(x2, c2, p2, m2);
      consider(x1, f1, c1, p1, m1);
      consider(x2, f2, c2, p2, m2);
      while (hi - lo > opts.refine_time_tol) {
        if (f1 >= f2) {
          hi = x2;
          x2 = x1; f2 = f1; c2.swap(c1); p2.swap(p1); m2.swap(m1);
          x1 = hi - kInvPhi * (hi - lo);
          f1 = eval(x1, c1, p1, m1);
          consider(x1, f1, c1, p1, m1);
        } else {
          lo = x1;
          x1 = x2; f1 = f2; c1.swap(c2); p1.swap(p2); m1.swap(m2);
          x2 = lo + kInvPhi * (hi - lo);
          f2 = eval(x2, c2, p2, m2);
          consider(x2, f2, c2, p2, m2);
        }
      }
    }
  }

  // step-halving cross-check of the central difference at the peak
  if (opts.fd_check) {
    const double half = 0.5 * ctx.delta;
    const Liouvillian lph(shifted_params(params, target, half), ctx.space);
    const Liouvillian lmh(shifted_params(params, target, -half), ctx.space);
    Dopri5 eph = make_stepper(lph, ctx.rho0_plus, opts.integrator);
    Dopri5 emh = make_stepper(lmh, ctx.rho0_minus, opts.integrator);
    eph.reset(0.0, ctx.rho0_plus.data());
    emh.reset(0.0, ctx.rho0_minus.data());
    if (trace.t_at_max > 0) {
      eph.advance(trace.t_at_max);
      emh.advance(trace.t_at_max);
    }
    trace.stats += eph.stats();
    trace.stats += emh.stats();
    deriv = (eph.state() - emh.state()) / (2.0 * half);
    const double f_half =
        qfi_blocks(*layout, best_c, deriv, opts.eps_eig_rel, opts.pair_cutoff, false).qfi;
    trace.fd_check_performed = true;
    trace.fd_value = trace.max_value;
    trace.fd_value_half = f_half;
    const double scale = std::max({std::abs(trace.fd_value), std::abs(f_half), 1e-12});
    trace.fd_rel_diff = std::abs(trace.fd_value - f_half) / scale;
    trace.fd_check_ok = trace.fd_rel_diff <= opts.fd_check_rel_tol;
    if (!trace.fd_check_ok && !opts.quiet) {
      std::cerr << "warning: derivative step-halving check at t=" << trace.t_at_max
                << " disagrees: F(delta)=" << trace.fd_value << ", F(delta/2)=" << f_half
                << ", rel diff " << trace.fd_rel_diff << "\n";
    }
  }

  return trace;
}

}  // namespace cavityqfi
