#include "cavityqfi/oracle.hpp"

#include <cmath>

namespace cavityqfi {

namespace {

int popcount(unsigned v) { return __builtin_popcount(v); }

// binomial small enough for N <= 6
double binom(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

FullSystem::FullSystem(const SystemParams& params, bool allow_large) : params_(params) {
  params.validate();
  const int cap = allow_large ? kMaxQubits + 1 : kMaxQubits;
  if (params.n_qubits > cap) {
    throw ConfigError("full-basis oracle capped at N=" + std::to_string(cap));
  }
  const int n = params.n_qubits;
  fock_ = params.n_cav_max + 1;
  const Eigen::Index qdim = Eigen::Index(1) << n;
  dim_ = qdim * fock_;

  // qubit basis: bit l of the index set means qubit l excited; |0..0> = index 0
  using T = Eigen::Triplet<Complex>;
  std::vector<T> ta;
  for (Eigen::Index q = 0; q < qdim; ++q) {
    for (int f = 1; f < fock_; ++f) {
      ta.emplace_back(q * fock_ + f - 1, q * fock_ + f, std::sqrt(double(f)));
    }
  }
  a_.resize(dim_, dim_);
  a_.setFromTriplets(ta.begin(), ta.end());

  sigma_minus_.reserve(static_cast<std::size_t>(n));
  for (int l = 0; l < n; ++l) {
    std::vector<T> ts;
    const Eigen::Index bit = Eigen::Index(1) << l;
    for (Eigen::Index q = 0; q < qdim; ++q) {
      if (!(q & bit)) continue;
      for (int f = 0; f < fock_; ++f) {
        ts.emplace_back((q ^ bit) * fock_ + f, q * fock_ + f, 1.0);
      }
    }
    SpMatrix s(dim_, dim_);
    s.setFromTriplets(ts.begin(), ts.end());
    sigma_minus_.push_back(std::move(s));
  }

  std::vector<T> th, tdecay, tjz, tnum;
  for (Eigen::Index q = 0; q < qdim; ++q) {
    const int exc = popcount(static_cast<unsigned>(q));
    const double jz = exc - 0.5 * n;  // (1/2) sum sigma_z with |1> = +1
    for (int f = 0; f < fock_; ++f) {
      const Eigen::Index idx = q * fock_ + f;
      th.emplace_back(idx, idx, params.omega_q * jz + params.omega_c * f);
      tdecay.emplace_back(idx, idx, double(exc));
      tjz.emplace_back(idx, idx, jz);
      tnum.emplace_back(idx, idx, double(f));
    }
  }
  // coupling g sum_l (a^dag sigma_-^l + a sigma_+^l)
  for (int l = 0; l < n; ++l) {
    const Eigen::Index bit = Eigen::Index(1) << l;
    for (Eigen::Index q = 0; q < qdim; ++q) {
      if (!(q & bit)) continue;
      for (int f = 0; f + 1 < fock_; ++f) {
        const double amp = params.coupling * std::sqrt(double(f + 1));
        th.emplace_back((q ^ bit) * fock_ + f + 1, q * fock_ + f, amp);
        th.emplace_back(q * fock_ + f, (q ^ bit) * fock_ + f + 1, amp);
      }
    }
  }
  h_.resize(dim_, dim_);
  h_.setFromTriplets(th.begin(), th.end());
  decay_diag_.resize(dim_, dim_);
  decay_diag_.setFromTriplets(tdecay.begin(), tdecay.end());
  jz_.resize(dim_, dim_);
  jz_.setFromTriplets(tjz.begin(), tjz.end());
  a_dag_a_.resize(dim_, dim_);
  a_dag_a_.setFromTriplets(tnum.begin(), tnum.end());
}

void FullSystem::rhs(const Eigen::Ref<const DenseMatrix>& rho, Eigen::Ref<DenseMatrix> out) const {
  out.noalias() = Complex(0, -1) * (h_ * rho);
  out.noalias() += Complex(0, 1) * (rho * h_);
  if (params_.kappa > 0) {
    out.noalias() += params_.kappa * (a_ * rho * a_.adjoint());
    out.noalias() -= (0.5 * params_.kappa) * (a_dag_a_ * rho);
    out.noalias() -= (0.5 * params_.kappa) * (rho * a_dag_a_);
  }
  if (params_.gamma > 0) {
    for (const auto& s : sigma_minus_) {
      out.noalias() += params_.gamma * (s * rho * s.adjoint());
    }
    out.noalias() -= (0.5 * params_.gamma) * (decay_diag_ * rho);
    out.noalias() -= (0.5 * params_.gamma) * (rho * decay_diag_);
  }
}

DenseMatrix FullSystem::prepare_probe(const ProbeState& probe) const {
  const int n = params_.n_qubits;
  if (probe.kind == ProbeKind::Dicke && (probe.excitations < 0 || probe.excitations > n)) {
    throw ConfigError("Dicke excitation outside 0..N");
  }
  const Eigen::Index qdim = Eigen::Index(1) << n;
  DenseVector psi = DenseVector::Zero(qdim);
  switch (probe.kind) {
    case ProbeKind::Ghz:
      psi(0) = 1.0 / std::sqrt(2.0);
      psi(qdim - 1) = 1.0 / std::sqrt(2.0);
      break;
    case ProbeKind::XPolarized:
      psi.setConstant(std::pow(2.0, -0.5 * n));
      break;
    case ProbeKind::Dicke: {
      const double amp = 1.0 / std::sqrt(binom(n, probe.excitations));
      for (Eigen::Index q = 0; q < qdim; ++q) {
        if (popcount(static_cast<unsigned>(q)) == probe.excitations) psi(q) = amp;
      }
      break;
    }
    case ProbeKind::Excited:
      psi(qdim - 1) = 1.0;
      break;
    case ProbeKind::Ground:
      psi(0) = 1.0;
      break;
  }
  return prepare_from_qubit_state(psi);
}

DenseMatrix FullSystem::prepare_from_qubit_state(const DenseVector& psi_qubits) const {
  const Eigen::Index qdim = Eigen::Index(1) << params_.n_qubits;
  if (psi_qubits.size() != qdim) throw ConfigError("qubit state has wrong dimension");
  DenseVector full = DenseVector::Zero(dim_);
  for (Eigen::Index q = 0; q < qdim; ++q) full(q * fock_) = psi_qubits(q);  // cavity vacuum
  return full * full.adjoint();
}

double FullSystem::expectation_jz(const DenseMatrix& rho) const {
  return (jz_ * rho).eval().trace().real();
}

double FullSystem::expectation_photons(const DenseMatrix& rho) const {
  return (a_dag_a_ * rho).eval().trace().real();
}

FullSystem full_liouvillian(const SystemParams& params, bool allow_large) {
  return FullSystem(params, allow_large);
}

namespace {

// flat-vector adapter around the matrix-valued RHS
Dopri5 make_full_stepper(const FullSystem& sys, const IntegratorOptions& opts) {
  const Eigen::Index d = sys.dim();
  return Dopri5(
      [&sys, d](const DenseVector& y, DenseVector& dy) {
        Eigen::Map<const DenseMatrix> rho(y.data(), d, d);
        dy.resize(d * d);
        Eigen::Map<DenseMatrix> out(dy.data(), d, d);
        sys.rhs(rho, out);
      },
      d * d, opts);
}

DenseVector flatten(const DenseMatrix& m) {
  return Eigen::Map<const DenseVector>(m.data(), m.size());
}

}  // namespace

FullRunResult full_evolve_and_qfi(const SystemParams& params, const ProbeState& probe,
                                  const EstimationTarget& target, const TimeGrid& grid,
                                  const QfiOptions& opts) {
  grid.validate();
  const double delta = params.coupling * target.delta_rel;
  FullSystem sys_c(params);
  FullSystem sys_p(shifted_params(params, target, delta));
  FullSystem sys_m(shifted_params(params, target, -delta));
  const DenseMatrix rho0 = sys_c.prepare_probe(probe);
  const Eigen::Index d = sys_c.dim();

  Dopri5 sc = make_full_stepper(sys_c, opts.integrator);
  Dopri5 sp = make_full_stepper(sys_p, opts.integrator);
  Dopri5 sm = make_full_stepper(sys_m, opts.integrator);
  sc.reset(0.0, flatten(rho0));
  sp.reset(0.0, flatten(rho0));
  sm.reset(0.0, flatten(rho0));

  FullRunResult out;
  out.times = grid.times();
  DenseVector yc = flatten(rho0), yp = yc, ym = yc;
  for (int k = 0; k < static_cast<int>(out.times.size()); ++k) {
    const double t = out.times[static_cast<std::size_t>(k)];
    if (k > 0) {
      sc.state_at(t, yc);
      sp.state_at(t, yp);
      sm.state_at(t, ym);
    }
    Eigen::Map<const DenseMatrix> rho(yc.data(), d, d);
    DenseMatrix drho = Eigen::Map<const DenseMatrix>(yp.data(), d, d);
    drho -= Eigen::Map<const DenseMatrix>(ym.data(), d, d);
    drho /= 2.0 * delta;
    const double f = qfi_spectral_dense(rho, drho, opts.eps_eig_rel, opts.pair_cutoff);
    out.qfi.push_back(f);
    out.jz.push_back(sys_c.expectation_jz(rho));
    out.photons.push_back(sys_c.expectation_photons(rho));
    out.purity.push_back(FullSystem::purity(rho));
    out.trace.push_back(rho.trace().real());
    if (f > out.max_qfi) {
      out.max_qfi = f;
      out.t_at_max = t;
    }
  }
  out.stats += sc.stats();
  out.stats += sp.stats();
  out.stats += sm.stats();
  return out;
}

FullObservableTrajectory full_evolve_observables(const FullSystem& system,
                                                 const DenseMatrix& rho0, const TimeGrid& grid,
                                                 const IntegratorOptions& opts) {
  grid.validate();
  const Eigen::Index d = system.dim();
  Dopri5 stepper = make_full_stepper(system, opts);
  stepper.reset(0.0, flatten(rho0));
  FullObservableTrajectory out;
  out.times = grid.times();
  DenseVector y = flatten(rho0);
  for (int k = 0; k < static_cast<int>(out.times.size()); ++k) {
    if (k > 0) stepper.state_at(out.times[static_cast<std::size_t>(k)], y);
    Eigen::Map<const DenseMatrix> rho(y.data(), d, d);
    out.jz.push_back(system.expectation_jz(rho));
    out.photons.push_back(system.expectation_photons(rho));
    out.purity.push_back(FullSystem::purity(rho));
  }
  out.stats = stepper.stats();
  return out;
}

}  // namespace cavityqfi
