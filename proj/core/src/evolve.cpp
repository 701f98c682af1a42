#include "cavityqfi/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cavityqfi {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - bhat, for the embedded 4th-order error estimate
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output weights (Hairer, Norsett & Wanner)
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

}  // namespace

std::vector<double> TimeGrid::times() const {
  validate();
  std::vector<double> ts(static_cast<std::size_t>(n_samples));
  for (int k = 0; k < n_samples; ++k) ts[static_cast<std::size_t>(k)] = t_end * k / (n_samples - 1);
  return ts;
}

void TimeGrid::validate() const {
  if (!(t_end > 0)) throw ConfigError("time grid needs t_end > 0");
  if (n_samples < 2) throw ConfigError("time grid needs at least 2 samples");
}

Dopri5::Dopri5(RhsFn rhs, Eigen::Index dim, IntegratorOptions opts)
    : rhs_(std::move(rhs)), opts_(opts), dim_(dim) {
  y_ = DenseVector::Zero(dim);
  k1_.resize(dim); k2_.resize(dim); k3_.resize(dim); k4_.resize(dim);
  k5_.resize(dim); k6_.resize(dim); k7_.resize(dim);
  y_stage_.resize(dim); y_prev_.resize(dim); err_.resize(dim);
}

void Dopri5::reset(double t0, const DenseVector& y0) {
  if (y0.size() != dim_) throw ConfigError("state dimension mismatch in integrator reset");
  t_ = t0;
  t_prev_ = t0;
  y_ = y0;
  h_ = opts_.initial_step;
  have_first_stage_ = false;
  have_dense_ = false;
  started_ = true;
  mode_ = 0;
}

double Dopri5::scaled_error_norm(const DenseVector& err, const DenseVector& y0,
                                 const DenseVector& y1) const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double sc =
        opts_.atol + opts_.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double e = std::abs(err(i)) / sc;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(dim_));
}

double Dopri5::initial_step_size(double t_limit) {
  // standard heuristic from the reference DOPRI5 implementation
  rhs_(y_, k1_);
  ++stats_.rhs_evals;
  have_first_stage_ = true;
  double dnf = 0.0, dny = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double sc = opts_.atol + opts_.rtol * std::abs(y_(i));
    dnf += std::norm(k1_(i)) / (sc * sc);
    dny += std::norm(y_(i)) / (sc * sc);
  }
  double h0;
  if (dnf <= 1e-10 || dny <= 1e-10) {
    h0 = 1e-6;
  } else {
    h0 = 0.01 * std::sqrt(dny / dnf);
  }
  const double span = t_limit - t_;
  h0 = std::min(h0, span);
  y_stage_ = y_ + h0 * k1_;
  rhs_(y_stage_, k2_);
  ++stats_.rhs_evals;
  double der2 = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double sc = opts_.atol + opts_.rtol * std::abs(y_(i));
    der2 += std::norm(k2_(i) - k1_(i)) / (sc * sc);
  }
  der2 = std::sqrt(der2) / h0;
  const double der12 = std::max(std::sqrt(dnf), der2);
  double h1;
  if (der12 <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / der12, 0.2);
  }
  return std::min({100 * h0, h1, span});
}

void Dopri5::take_step(double t_limit, bool clamp) {
  if (stats_.accepted + stats_.rejected >= opts_.max_steps) {
    throw NumericalError("integrator exceeded max_steps at t=" + std::to_string(t_));
  }
  if (h_ <= 0.0) h_ = initial_step_size(t_limit);
  if (opts_.max_step > 0) h_ = std::min(h_, opts_.max_step);

  const double h_floor = opts_.min_step > 0
                             ? opts_.min_step
                             : 16.0 * std::numeric_limits<double>::epsilon() *
                                   std::max(1.0, std::abs(t_));

  for (;;) {
    double h = h_;
    bool final_step = false;
    if (clamp && t_ + h >= t_limit) {
      h = t_limit - t_;
      final_step = true;
    }
    if (!final_step && t_ + h > t_limit) {
      // never let a free-running step stop just short by rounding
      final_step = t_limit - t_ <= h_floor;
      if (final_step) h = t_limit - t_;
    }
    if (h < h_floor && !final_step) {
      std::ostringstream msg;
      msg << "step size underflow at t=" << t_ << " (h=" << h << ")";
      throw NumericalError(msg.str());
    }

    if (!have_first_stage_) {
      rhs_(y_, k1_);
      ++stats_.rhs_evals;
      have_first_stage_ = true;
    }

    y_stage_ = y_ + h * (a21 * k1_);
    rhs_(y_stage_, k2_);
    y_stage_ = y_ + h * (a31 * k1_ + a32 * k2_);
    rhs_(y_stage_, k3_);
    y_stage_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(y_stage_, k4_);
    y_stage_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(y_stage_, k5_);
    y_stage_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(y_stage_, k6_);
    y_stage_ = y_ + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
    rhs_(y_stage_, k7_);
    stats_.rhs_evals += 6;

    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    const double err = scaled_error_norm(err_, y_, y_stage_);

    if (err <= 1.0) {
      ++stats_.accepted;
      y_prev_.swap(y_);
      y_.swap(y_stage_);
      t_prev_ = t_;
      t_ = final_step ? t_limit : t_ + h;
      have_dense_ = false;
      // FSAL: k7 at the accepted point is k1 of the next step
      k1_.swap(k7_);
      double factor = kSafety * std::pow(err > 0 ? err : 1e-16, -0.2);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      h_ = h * factor;
      if (on_accept_) on_accept_(t_, y_);
      return;
    }

    ++stats_.rejected;
    const double factor = std::max(kMinFactor, kSafety * std::pow(err, -0.2));
    h_ = h * factor;
    if (h_ < h_floor) {
      std::ostringstream msg;
      msg << "step size underflow at t=" << t_ << " (h=" << h_ << ", err=" << err << ")";
      throw NumericalError(msg.str());
    }
  }
}

void Dopri5::build_dense_coefficients() {
  // note: after acceptance k1_ holds the FSAL derivative at the step END and
  // k7_ holds the derivative at the step START (they were swapped)
  const double h = t_ - t_prev_;
  rcont1_ = y_prev_;
  rcont2_ = y_ - y_prev_;
  rcont3_ = h * k7_ - rcont2_;
  rcont4_ = rcont2_ - h * k1_ - rcont3_;
  rcont5_ = h * (d1 * k7_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k1_);
  have_dense_ = true;
}

void Dopri5::interpolate(double t, DenseVector& out) const {
  const double h = t_ - t_prev_;
  const double theta = h > 0 ? (t - t_prev_) / h : 1.0;
  const double theta1 = 1.0 - theta;
  out = rcont1_ +
        theta * (rcont2_ + theta1 * (rcont3_ + theta * (rcont4_ + theta1 * rcont5_)));
}

void Dopri5::state_at(double t, DenseVector& out) {
  if (!started_) throw ConfigError("integrator used before reset()");
  if (mode_ == 2) throw ConfigError("state_at() after advance() on the same integrator");
  mode_ = 1;
  if (t < t_prev_ - 1e-12 * std::max(1.0, std::abs(t_prev_))) {
    throw ConfigError("dense-output queries must be nondecreasing in time");
  }
  while (t_ < t) take_step(t, /*clamp=*/false);
  if (t == t_ || t >= t_) {
    out = y_;
    return;
  }
  if (t <= t_prev_) {
    out = y_prev_;
    return;
  }
  if (!have_dense_) build_dense_coefficients();
  interpolate(t, out);
}

void Dopri5::advance(double t_target) {
  if (!started_) throw ConfigError("integrator used before reset()");
  if (mode_ == 1) throw ConfigError("advance() after state_at() on the same integrator");
  mode_ = 2;
  if (t_target < t_) throw ConfigError("advance() cannot integrate backwards");
  while (t_ < t_target) take_step(t_target, /*clamp=*/true);
}

namespace {

StepStats run_grid(const Liouvillian& liouvillian, const HybridState& rho0, const TimeGrid& grid,
                   const IntegratorOptions& opts,
                   const std::function<void(int, double, const HybridState&)>& on_sample) {
  grid.validate();
  if (!rho0.layout().compatible(*liouvillian.layout())) {
    throw ConfigError("state layout does not match the Liouvillian");
  }
  auto layout = rho0.layout_ptr();
  Dopri5 stepper([&liouvillian](const DenseVector& y, DenseVector& dy) { liouvillian.apply(y, dy); },
                 rho0.data().size(), opts);
  stepper.reset(0.0, rho0.data());
  if (opts.check_guard) {
    stepper.set_accept_callback(make_guard_callback(layout, opts.guard_threshold));
  }
  const auto ts = grid.times();
  HybridState sample(layout);
  for (int k = 0; k < static_cast<int>(ts.size()); ++k) {
    if (k == 0) {
      sample.data() = rho0.data();
    } else {
      stepper.state_at(ts[static_cast<std::size_t>(k)], sample.data());
    }
    on_sample(k, ts[static_cast<std::size_t>(k)], sample);
  }
  return stepper.stats();
}

}  // namespace

Trajectory integrate(const Liouvillian& liouvillian, const HybridState& rho0, const TimeGrid& grid,
                     const IntegratorOptions& opts) {
  Trajectory traj;
  traj.times = grid.times();
  traj.states.reserve(traj.times.size());
  traj.stats = run_grid(liouvillian, rho0, grid, opts,
                        [&traj](int, double, const HybridState& s) { traj.states.push_back(s); });
  return traj;
}

StepStats integrate_samples(const Liouvillian& liouvillian, const HybridState& rho0,
                            const TimeGrid& grid, const IntegratorOptions& opts,
                            const std::function<void(int, double, const HybridState&)>& on_sample) {
  return run_grid(liouvillian, rho0, grid, opts, on_sample);
}

AcceptFn make_guard_callback(std::shared_ptr<const StateLayout> layout, double threshold) {
  return [layout, threshold](double t, const DenseVector& y) {
    const int fock = layout->fock_dim();
    double pop = 0.0;
    for (int i = 0; i < layout->n_blocks(); ++i) {
      const auto& b = layout->block(i);
      for (int s = 0; s < b.spin_dim; ++s) {
        for (int f = std::max(0, fock - 2); f < fock; ++f) {
          const std::int64_t idx = b.offset + static_cast<std::int64_t>(s * fock + f) * (b.dim + 1);
          pop += y(idx).real();
        }
      }
    }
    if (pop > threshold) {
      std::ostringstream msg;
      msg << "Fock truncation guard tripped at t=" << t << ": top-two-level population " << pop
          << " exceeds " << threshold << " (raise n_cav_max)";
      throw NumericalError(msg.str());
    }
  };
}

}  // namespace cavityqfi
