#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "cavityqfi/common.hpp"
#include "cavityqfi/model.hpp"

namespace cavityqfi {

/// Uniform sampling grid on [0, t_end] with n_samples points (both endpoints
/// included). Times are in units of 1/g.
struct TimeGrid {
  double t_end = 20.0;
  int n_samples = 1000;

  std::vector<double> times() const;
  double dt() const { return t_end / (n_samples - 1); }
  void validate() const;
};

struct IntegratorOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 = automatic
  double max_step = 0.0;      // 0 = unlimited
  double min_step = 0.0;      // 0 = machine-precision floor
  long max_steps = 50'000'000;
  double guard_threshold = 1e-8;  // truncation-guard population limit
  bool check_guard = true;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;

  StepStats& operator+=(const StepStats& o) {
    accepted += o.accepted;
    rejected += o.rejected;
    rhs_evals += o.rhs_evals;
    return *this;
  }
};

using RhsFn = std::function<void(const DenseVector&, DenseVector&)>;
using AcceptFn = std::function<void(double, const DenseVector&)>;

/// Adaptive Dormand-Prince 5(4) integrator for dy/dt = rhs(y) on a flat
/// complex vector, with the classic 4th-order dense-output interpolant.
///
/// Two usage modes per instance:
///  - sampling: repeated state_at(t) with nondecreasing t; the solver
///    free-runs and evaluates the continuous extension at each query.
///  - stepping: advance(t) lands exactly on t (final step clamped); useful
///    to continue an integration or to hit a checkpoint exactly.
/// state_at() and advance() must not be mixed on one instance.
class Dopri5 {
 public:
  Dopri5(RhsFn rhs, Eigen::Index dim, IntegratorOptions opts = {});

  void reset(double t0, const DenseVector& y0);

  /// Dense-output state at time t (sampling mode); t must be >= the previous
  /// query. Writes into out (resized as needed).
  void state_at(double t, DenseVector& out);

  /// Integrates from the current time to exactly t_target (stepping mode).
  void advance(double t_target);

  double time() const { return t_; }
  const DenseVector& state() const { return y_; }
  const StepStats& stats() const { return stats_; }

  /// Called with (t, y) after every accepted step; may throw to abort.
  void set_accept_callback(AcceptFn cb) { on_accept_ = std::move(cb); }

 private:
  void take_step(double t_limit, bool clamp);
  double scaled_error_norm(const DenseVector& err, const DenseVector& y0,
                           const DenseVector& y1) const;
  double initial_step_size(double t_limit);
  void build_dense_coefficients();
  void interpolate(double t, DenseVector& out) const;

  RhsFn rhs_;
  IntegratorOptions opts_;
  Eigen::Index dim_;
  double t_ = 0.0;
  DenseVector y_;
  double h_ = 0.0;
  bool have_first_stage_ = false;  // FSAL
  bool started_ = false;
  int mode_ = 0;  // 0 unset, 1 sampling, 2 stepping
  StepStats stats_;
  AcceptFn on_accept_;

  // last accepted step [t_prev_, t_] and its dense coefficients
  double t_prev_ = 0.0;
  DenseVector k1_, k2_, k3_, k4_, k5_, k6_, k7_;
  DenseVector y_stage_, y_prev_, err_;
  DenseVector rcont1_, rcont2_, rcont3_, rcont4_, rcont5_;
  bool have_dense_ = false;
};

/// Time-resolved block states plus integrator statistics.
struct Trajectory {
  std::vector<double> times;
  std::vector<HybridState> states;
  StepStats stats;
};

/// Integrates drho/dt = L(rho) and stores the state at every grid time.
/// The truncation guard is checked after every accepted step and a violation
/// raises NumericalError naming the offending time.
Trajectory integrate(const Liouvillian& liouvillian, const HybridState& rho0, const TimeGrid& grid,
                     const IntegratorOptions& opts = {});

/// Streaming variant: on_sample(sample_index, t, state) per grid time, no
/// storage. Returns the step statistics.
StepStats integrate_samples(const Liouvillian& liouvillian, const HybridState& rho0,
                            const TimeGrid& grid, const IntegratorOptions& opts,
                            const std::function<void(int, double, const HybridState&)>& on_sample);

/// Wires the truncation guard of `layout` into an accept callback.
AcceptFn make_guard_callback(std::shared_ptr<const StateLayout> layout, double threshold);

}  // namespace cavityqfi
