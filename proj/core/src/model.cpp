#include "cavityqfi/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cavityqfi {

namespace {

SpMatrixReal identity_real(int n) {
  SpMatrixReal id(n, n);
  id.setIdentity();
  return id;
}

// annihilation operator on the Fock factor
SpMatrixReal fock_annihilation(int fock_dim) {
  SpMatrixReal a(fock_dim, fock_dim);
  std::vector<Eigen::Triplet<double>> trips;
  for (int n = 1; n < fock_dim; ++n) trips.emplace_back(n - 1, n, std::sqrt(double(n)));
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

SpMatrixReal fock_number(int fock_dim) {
  SpMatrixReal n(fock_dim, fock_dim);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k < fock_dim; ++k) trips.emplace_back(k, k, double(k));
  n.setFromTriplets(trips.begin(), trips.end());
  return n;
}

SpMatrixReal to_sparse(const RealMatrix& m) {
  return m.sparseView(1.0, 0.0);
}

SpMatrix complexify(const SpMatrixReal& m) {
  return m.cast<Complex>();
}

// superoperator of X rho X^dag for real X
SpMatrix jump_super(const SpMatrixReal& x) {
  return complexify(kron_sparse(x, x));
}

// superoperator of -1/2 {P, rho} for real symmetric P
SpMatrix anticommutator_super(const SpMatrixReal& p) {
  const SpMatrixReal id = identity_real(static_cast<int>(p.rows()));
  SpMatrixReal s = kron_sparse(id, p) + kron_sparse(SpMatrixReal(p.transpose()), id);
  return complexify(SpMatrixReal(-0.5 * s));
}

// within-sector lowering amplitudes of the local emission channel, as a
// spin-space matrix (m -> m-1 with amplitude sqrt(w.same))
SpMatrixReal emission_same_spin(int n_qubits, int two_j) {
  const int dim = two_j + 1;
  SpMatrixReal op(dim, dim);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k < dim; ++k) {
    const int two_m = -two_j + 2 * k;
    const auto w = local_emission_coefficients(n_qubits, two_j, two_m);
    if (w.same > 0) trips.emplace_back(k - 1, k, std::sqrt(w.same));
  }
  op.setFromTriplets(trips.begin(), trips.end());
  return op;
}

// sector-changing amplitudes: rows live in the target sector two_j + 2*dir
SpMatrixReal emission_transfer_spin(int n_qubits, int two_j, int dir) {
  const int two_j_t = two_j + 2 * dir;
  const int dim_s = two_j + 1;
  const int dim_t = two_j_t + 1;
  SpMatrixReal op(dim_t, dim_s);
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < dim_s; ++k) {
    const int two_m = -two_j + 2 * k;
    const auto w = local_emission_coefficients(n_qubits, two_j, two_m);
    const double weight = dir < 0 ? w.down : w.up;
    if (weight <= 0) continue;
    // target row index for m-1 in sector j': k_t = (m-1) + j'
    const int k_t = (two_m - 2 + two_j_t) / 2;
    if (k_t < 0 || k_t >= dim_t) continue;
    trips.emplace_back(k_t, k, std::sqrt(weight));
  }
  op.setFromTriplets(trips.begin(), trips.end());
  return op;
}

}  // namespace

void SystemParams::validate() const {
  if (n_qubits < 1) throw ConfigError("n_qubits must be at least 1");
  if (!(coupling > 0)) throw ConfigError("coupling g must be positive");
  if (kappa < 0 || gamma < 0) throw ConfigError("decay rates must be nonnegative");
  if (n_cav_max < n_qubits) {
    throw ConfigError("n_cav_max=" + std::to_string(n_cav_max) +
                      " is below n_qubits=" + std::to_string(n_qubits) +
                      "; the Fock truncation cannot hold all initial excitations");
  }
}

SystemParams SystemParams::resonant(int n_qubits, double g, double kappa_over_g,
                                    double gamma_over_g, int n_cav_extra) {
  SystemParams p;
  p.n_qubits = n_qubits;
  p.coupling = g;
  p.kappa = kappa_over_g * g;
  p.gamma = gamma_over_g * g;
  p.omega_q = 0.0;
  p.omega_c = 0.0;
  p.n_cav_max = n_qubits + n_cav_extra;
  return p;
}

std::string ProbeState::name() const {
  switch (kind) {
    case ProbeKind::Ghz: return "ghz";
    case ProbeKind::XPolarized: return "x";
    case ProbeKind::Dicke: return "dicke-" + std::to_string(excitations);
    case ProbeKind::Excited: return "excited";
    case ProbeKind::Ground: return "ground";
  }
  return "?";
}

ProbeState ProbeSpec::resolve(int n_qubits) const {
  switch (family) {
    case Family::Ghz: return ProbeState::ghz();
    case Family::XPolarized: return ProbeState::x_polarized();
    case Family::DickeN: return ProbeState::dicke(excitations);
    case Family::DickeHalf: return ProbeState::dicke(n_qubits / 2);
    case Family::Excited: return ProbeState::excited();
    case Family::Ground: return ProbeState::ground();
  }
  return ProbeState::ground();
}

std::string ProbeSpec::name() const {
  switch (family) {
    case Family::Ghz: return "ghz";
    case Family::XPolarized: return "x";
    case Family::DickeN: return "dicke-" + std::to_string(excitations);
    case Family::DickeHalf: return "dicke-half";
    case Family::Excited: return "excited";
    case Family::Ground: return "ground";
  }
  return "?";
}

ProbeSpec ProbeSpec::parse(const std::string& text) {
  ProbeSpec spec;
  if (text == "ghz") {
    spec.family = Family::Ghz;
  } else if (text == "x" || text == "x-polarized") {
    spec.family = Family::XPolarized;
  } else if (text == "excited") {
    spec.family = Family::Excited;
  } else if (text == "ground") {
    spec.family = Family::Ground;
  } else if (text == "dicke-half") {
    spec.family = Family::DickeHalf;
  } else if (text.rfind("dicke-", 0) == 0) {
    spec.family = Family::DickeN;
    try {
      spec.excitations = std::stoi(text.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("unparseable probe name: " + text);
    }
    if (spec.excitations < 0) throw ConfigError("negative Dicke excitation in: " + text);
  } else {
    throw ConfigError("unknown probe name: " + text +
                      " (expected ghz, x, ground, excited, dicke-<n> or dicke-half)");
  }
  return spec;
}

StateLayout::StateLayout(const DickeSpace& space, int n_cav_max)
    : n_qubits_(space.n_qubits()), n_cav_max_(n_cav_max) {
  if (n_cav_max < 0) throw ConfigError("n_cav_max must be nonnegative");
  const int fock = n_cav_max + 1;
  std::int64_t offset = 0;
  for (const auto& s : space.sectors()) {
    Block b;
    b.two_j = s.two_j;
    b.spin_dim = s.dim;
    b.dim = s.dim * fock;
    b.offset = offset;
    b.degeneracy = s.degeneracy;
    offset += static_cast<std::int64_t>(b.dim) * b.dim;
    blocks_.push_back(b);
  }
  total_size_ = offset;
}

bool StateLayout::compatible(const StateLayout& other) const {
  return n_qubits_ == other.n_qubits_ && n_cav_max_ == other.n_cav_max_;
}

std::shared_ptr<const StateLayout> make_layout(const SystemParams& params,
                                               const DickeSpace& space) {
  return std::make_shared<StateLayout>(space, params.n_cav_max);
}

HybridState::HybridState(std::shared_ptr<const StateLayout> layout)
    : layout_(std::move(layout)), data_(DenseVector::Zero(layout_->total_size())) {}

Eigen::Map<DenseMatrix> HybridState::block(int i) {
  const auto& b = layout_->block(i);
  return Eigen::Map<DenseMatrix>(data_.data() + b.offset, b.dim, b.dim);
}

Eigen::Map<const DenseMatrix> HybridState::block(int i) const {
  const auto& b = layout_->block(i);
  return Eigen::Map<const DenseMatrix>(data_.data() + b.offset, b.dim, b.dim);
}

double HybridState::trace() const {
  double tr = 0.0;
  for (int i = 0; i < layout_->n_blocks(); ++i) tr += block(i).trace().real();
  return tr;
}

double HybridState::purity() const {
  double p = 0.0;
  for (int i = 0; i < layout_->n_blocks(); ++i) {
    const auto b = block(i);
    p += (b * b).trace().real() / static_cast<double>(layout_->block(i).degeneracy);
  }
  return p;
}

double HybridState::min_eigenvalue() const {
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < layout_->n_blocks(); ++i) {
    DenseMatrix m = block(i);
    m = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

double HybridState::hermiticity_error() const {
  double err = 0.0;
  for (int i = 0; i < layout_->n_blocks(); ++i) {
    const auto b = block(i);
    err = std::max(err, (b - b.adjoint()).cwiseAbs().maxCoeff());
  }
  return err;
}

void HybridState::hermitize() {
  for (int i = 0; i < layout_->n_blocks(); ++i) {
    auto b = block(i);
    b = 0.5 * (b + b.adjoint().eval());
  }
}

std::vector<SpMatrix> build_hamiltonian(const SystemParams& params, const DickeSpace& space) {
  params.validate();
  const int fock = params.n_cav_max + 1;
  const SpMatrixReal a = fock_annihilation(fock);
  const SpMatrixReal adag = SpMatrixReal(a.transpose());
  const SpMatrixReal nhat = fock_number(fock);
  const SpMatrixReal id_f = identity_real(fock);

  std::vector<SpMatrix> blocks;
  blocks.reserve(space.sectors().size());
  for (const auto& s : space.sectors()) {
    const auto ops = sector_operators(s.two_j);
    const SpMatrixReal jm = to_sparse(ops.j_minus);
    const SpMatrixReal jp = to_sparse(ops.j_plus);
    const SpMatrixReal jz = to_sparse(ops.j_z);
    const SpMatrixReal id_s = identity_real(s.dim);
    SpMatrixReal h = params.omega_q * kron_sparse(jz, id_f) +
                     params.omega_c * kron_sparse(id_s, nhat) +
                     params.coupling * SpMatrixReal(kron_sparse(jm, adag) + kron_sparse(jp, a));
    h.prune(0.0);
    blocks.push_back(complexify(h));
  }
  return blocks;
}

Liouvillian::Liouvillian(const SystemParams& params, const DickeSpace& space) : params_(params) {
  params.validate();
  layout_ = make_layout(params, space);
  const int fock = params.n_cav_max + 1;
  const SpMatrixReal a = fock_annihilation(fock);
  const SpMatrixReal nhat = fock_number(fock);
  const SpMatrixReal id_f = identity_real(fock);
  const auto hamiltonian = build_hamiltonian(params, space);

  for (int i = 0; i < layout_->n_blocks(); ++i) {
    const auto& blk = layout_->block(i);
    const int dim = blk.dim;
    const SpMatrixReal id_s = identity_real(blk.spin_dim);
    const SpMatrix id_d = complexify(identity_real(dim));

    // coherent part: -i (1 (x) H - H^T (x) 1)
    const SpMatrix& h = hamiltonian[static_cast<std::size_t>(i)];
    SpMatrix l = Complex(0, -1) * (kron_sparse(SpMatrix(id_d), h) -
                                   kron_sparse(SpMatrix(h.transpose()), id_d));

    if (params.kappa > 0) {
      const SpMatrixReal af = kron_sparse(id_s, a);
      const SpMatrixReal af_num = kron_sparse(id_s, nhat);  // a^dag a on the block
      l += params.kappa * SpMatrix(jump_super(af) + anticommutator_super(af_num));
    }

    if (params.gamma > 0) {
      // within-sector emission jump + the collective anticommutator
      // -1/2 {N/2 + Jz, .} (sum_l sigma+^l sigma-^l is the collective N/2 + Jz)
      const auto ops = sector_operators(blk.two_j);
      RealMatrix q_spin = ops.j_z;
      for (int k = 0; k < blk.spin_dim; ++k) q_spin(k, k) += 0.5 * params.n_qubits;
      const SpMatrixReal qf = kron_sparse(to_sparse(q_spin), id_f);
      const SpMatrixReal a0 = kron_sparse(emission_same_spin(params.n_qubits, blk.two_j), id_f);
      l += params.gamma * SpMatrix(jump_super(a0) + anticommutator_super(qf));
    }

    l.makeCompressed();
    diagonal_.push_back(std::move(l));

    if (params.gamma > 0) {
      for (int dir : {-1, +1}) {
        // sector order is j descending: j-1 lives at index i+1, j+1 at i-1
        const int target_index = i + (dir < 0 ? 1 : -1);
        if (target_index < 0 || target_index >= layout_->n_blocks()) continue;
        const SpMatrixReal t_spin = emission_transfer_spin(params.n_qubits, blk.two_j, dir);
        if (t_spin.nonZeros() == 0) continue;
        const SpMatrixReal t_full = kron_sparse(t_spin, id_f);
        Transfer tr;
        tr.source = i;
        tr.target = target_index;
        tr.op = params.gamma * SpMatrix(jump_super(t_full));
        tr.op.makeCompressed();
        transfers_.push_back(std::move(tr));
      }
    }
  }
}

void Liouvillian::apply(const DenseVector& x, DenseVector& out) const {
  out.resize(x.size());
  for (int i = 0; i < layout_->n_blocks(); ++i) {
    const auto& b = layout_->block(i);
    const std::int64_t len = static_cast<std::int64_t>(b.dim) * b.dim;
    out.segment(b.offset, len).noalias() =
        diagonal_[static_cast<std::size_t>(i)] * x.segment(b.offset, len);
  }
  for (const auto& tr : transfers_) {
    const auto& bs = layout_->block(tr.source);
    const auto& bt = layout_->block(tr.target);
    out.segment(bt.offset, static_cast<std::int64_t>(bt.dim) * bt.dim).noalias() +=
        tr.op * x.segment(bs.offset, static_cast<std::int64_t>(bs.dim) * bs.dim);
  }
}

HybridState Liouvillian::apply(const HybridState& state) const {
  HybridState out(state.layout_ptr());
  apply(state.data(), out.data());
  return out;
}

std::int64_t Liouvillian::nonzeros() const {
  std::int64_t nnz = 0;
  for (const auto& d : diagonal_) nnz += d.nonZeros();
  for (const auto& t : transfers_) nnz += t.op.nonZeros();
  return nnz;
}

Liouvillian build_liouvillian(const SystemParams& params, const DickeSpace& space) {
  return Liouvillian(params, space);
}

HybridState prepare_probe(const ProbeState& probe, const SystemParams& params,
                          const DickeSpace& space) {
  params.validate();
  if (probe.kind == ProbeKind::Dicke &&
      (probe.excitations < 0 || probe.excitations > params.n_qubits)) {
    throw ConfigError("Dicke excitation n=" + std::to_string(probe.excitations) +
                      " outside 0.." + std::to_string(params.n_qubits));
  }
  const int n = params.n_qubits;
  HybridState state(make_layout(params, space));

  // all probes live in the maximal sector j = N/2 (block 0), m = k - N/2
  const int spin_dim = n + 1;
  RealVector amp = RealVector::Zero(spin_dim);
  switch (probe.kind) {
    case ProbeKind::Ghz:
      amp(0) = 1.0 / std::sqrt(2.0);
      amp(spin_dim - 1) = 1.0 / std::sqrt(2.0);
      break;
    case ProbeKind::XPolarized: {
      // sqrt(C(N,k))/2^(N/2); build binomials iteratively to stay stable
      double binom = 1.0;
      const double scale = std::pow(2.0, -0.5 * n);
      for (int k = 0; k < spin_dim; ++k) {
        amp(k) = std::sqrt(binom) * scale;
        binom = binom * (n - k) / (k + 1);
      }
      break;
    }
    case ProbeKind::Dicke:
      amp(probe.excitations) = 1.0;
      break;
    case ProbeKind::Excited:
      amp(spin_dim - 1) = 1.0;
      break;
    case ProbeKind::Ground:
      amp(0) = 1.0;
      break;
  }

  const int fock = params.n_cav_max + 1;
  DenseVector psi = DenseVector::Zero(static_cast<std::int64_t>(spin_dim) * fock);
  for (int k = 0; k < spin_dim; ++k) psi(static_cast<std::int64_t>(k) * fock) = amp(k);  // vacuum
  state.block(0).noalias() = psi * psi.adjoint();
  return state;
}

double truncation_guard(const HybridState& state) {
  const auto& layout = state.layout();
  const int fock = layout.fock_dim();
  double pop = 0.0;
  for (int i = 0; i < layout.n_blocks(); ++i) {
    const auto b = state.block(i);
    for (int s = 0; s < layout.block(i).spin_dim; ++s) {
      for (int f = std::max(0, fock - 2); f < fock; ++f) {
        const int idx = s * fock + f;
        pop += b(idx, idx).real();
      }
    }
  }
  return pop;
}

double expectation_jz(const HybridState& state) {
  const auto& layout = state.layout();
  const int fock = layout.fock_dim();
  double val = 0.0;
  for (int i = 0; i < layout.n_blocks(); ++i) {
    const auto b = state.block(i);
    const double j = 0.5 * layout.block(i).two_j;
    for (int s = 0; s < layout.block(i).spin_dim; ++s) {
      const double m = -j + s;
      for (int f = 0; f < fock; ++f) {
        const int idx = s * fock + f;
        val += m * b(idx, idx).real();
      }
    }
  }
  return val;
}

double expectation_photons(const HybridState& state) {
  const auto& layout = state.layout();
  const int fock = layout.fock_dim();
  double val = 0.0;
  for (int i = 0; i < layout.n_blocks(); ++i) {
    const auto b = state.block(i);
    for (int s = 0; s < layout.block(i).spin_dim; ++s) {
      for (int f = 1; f < fock; ++f) {
        const int idx = s * fock + f;
        val += f * b(idx, idx).real();
      }
    }
  }
  return val;
}

double total_excitations(const HybridState& state) {
  return expectation_jz(state) + 0.5 * state.layout().n_qubits() + expectation_photons(state);
}

}  // namespace cavityqfi
