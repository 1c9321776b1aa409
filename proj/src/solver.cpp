#include "chpsim/solver.hpp"

#include <algorithm>
#include <cmath>

namespace chpsim {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                 kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                 kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
constexpr double kB1 = 35.0 / 384.0, kB3 = 500.0 / 1113.0, kB4 = 125.0 / 192.0,
                 kB5 = -2187.0 / 6784.0, kB6 = 11.0 / 84.0;
constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                 kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;

constexpr double kSafety = 0.9;
constexpr double kMinGrow = 0.2;
constexpr double kMaxGrow = 5.0;

void check_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite()) {
    throw DivergenceError(
        "state diverged (non-finite component) at t = " + std::to_string(t), t);
  }
}

class Runner {
 public:
  Runner(const Engine& engine, const Eigen::VectorXd& x0, const SimParams& params,
         const DisturbanceSchedule& schedule, bool detect_steady)
      : engine_(engine),
        params_(params),
        schedule_(schedule),
        detect_(detect_steady),
        dim_(engine.layout().dim),
        t_last_event_(schedule.last_event_time(params.t0)) {
    if (params.t_end < params.t0) throw std::invalid_argument("t_end < t0");
    if (params.dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (params.sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
    if (x0.size() != dim_) throw std::invalid_argument("initial state dimension mismatch");
    xe_ = Eigen::VectorXd::Zero(engine.extended_dim());
    xe_.head(dim_) = x0;
  }

  Trajectory go() {
    t_ = params_.t0;
    loads_ = engine_.loads_at(schedule_, t_);
    record();

    if (detect_ && t_last_event_ <= params_.t0 &&
        rhs_norm(engine_.rhs_extended(xe_, loads_)) < params_.steady_eps) {
      traj_.reached_steady = true;
      traj_.steady_time = t_;
      return traj_;
    }

    std::vector<double> boundaries = schedule_.event_times_after(params_.t0);
    boundaries.erase(std::remove_if(boundaries.begin(), boundaries.end(),
                                    [&](double t) { return t >= params_.t_end; }),
                     boundaries.end());
    boundaries.push_back(params_.t_end);

    h_adaptive_ = params_.dt;
    for (double boundary : boundaries) {
      if (t_ >= boundary) continue;
      const bool done = params_.method == Method::rk4 ? run_rk4(boundary)
                                                      : run_dp45(boundary);
      if (done) return traj_;
      // Samples at a boundary reflect the loads active from that instant
      // on, so the step change is applied before recording.
      if (boundary < params_.t_end) loads_ = engine_.loads_at(schedule_, boundary);
      record();
    }
    return traj_;
  }

 private:
  double rhs_norm(const Eigen::VectorXd& deriv) const {
    return deriv.head(dim_).lpNorm<Eigen::Infinity>();
  }

  void record() {
    if (!traj_.times.empty() && traj_.times.back() == t_) return;
    traj_.times.push_back(t_);
    traj_.states.push_back(xe_.head(dim_));
    traj_.heat_integrals.push_back(xe_.tail(engine_.index().n_areas));
    traj_.outputs.push_back(engine_.outputs(xe_.head(dim_), loads_));
    if (traj_.outputs.back().security) traj_.security_excursion = true;
  }

  // True once the rhs norm has stayed below steady_eps for steady_hold
  // seconds.  Armed only after the last disturbance instant, and never at
  // a segment boundary where the loads are about to change.
  bool steady_reached(double boundary, const Eigen::VectorXd& deriv) {
    if (!detect_ || t_ < t_last_event_ || (t_ == boundary && boundary < params_.t_end)) {
      return false;
    }
    if (rhs_norm(deriv) < params_.steady_eps) {
      if (std::isnan(below_since_)) below_since_ = t_;
      if (t_ - below_since_ >= params_.steady_hold) {
        record();
        traj_.reached_steady = true;
        traj_.steady_time = t_;
        return true;
      }
    } else {
      below_since_ = std::numeric_limits<double>::quiet_NaN();
    }
    return false;
  }

  Eigen::VectorXd f(const Eigen::VectorXd& x) const {
    return engine_.rhs_extended(x, loads_);
  }

  Eigen::VectorXd rk4_step(const Eigen::VectorXd& x, double h) const {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + (h / 2.0) * k1);
    const Eigen::VectorXd k3 = f(x + (h / 2.0) * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Returns true if steady state was detected inside the segment.
  bool run_rk4(double boundary) {
    const double span = boundary - t_;
    const long n_steps =
        std::max<long>(1, static_cast<long>(std::ceil(span / params_.dt - 1e-12)));
    const double t_start = t_;
    for (long k = 0; k < n_steps; ++k) {
      const double t_next = (k + 1 == n_steps) ? boundary : t_start + (k + 1) * params_.dt;
      xe_ = rk4_step(xe_, t_next - t_);
      t_ = t_next;
      check_finite(xe_, t_);
      ++step_count_;
      if (step_count_ % params_.sample_every == 0 && t_ != boundary) record();
      if (detect_ && t_ >= t_last_event_ && steady_reached(boundary, f(xe_))) return true;
    }
    return false;
  }

  bool run_dp45(double boundary) {
    Eigen::VectorXd k1 = f(xe_);  // refreshed per segment: loads changed
    while (t_ < boundary) {
      const double h = std::min(h_adaptive_, boundary - t_);
      const bool lands_on_boundary = h >= boundary - t_;

      const Eigen::VectorXd k2 = f(xe_ + h * (kA21 * k1));
      const Eigen::VectorXd k3 = f(xe_ + h * (kA31 * k1 + kA32 * k2));
      const Eigen::VectorXd k4 = f(xe_ + h * (kA41 * k1 + kA42 * k2 + kA43 * k3));
      const Eigen::VectorXd k5 =
          f(xe_ + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4));
      const Eigen::VectorXd k6 =
          f(xe_ + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
      Eigen::VectorXd x_new =
          xe_ + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
      const Eigen::VectorXd k7 = f(x_new);
      const Eigen::VectorXd e =
          h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);

      double err = 0.0;
      for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double scale = params_.atol + params_.rtol * std::max(std::abs(xe_(i)),
                                                                    std::abs(x_new(i)));
        err = std::max(err, std::abs(e(i)) / scale);
      }

      const bool accept = std::isfinite(err) && err <= 1.0;
      if (accept) {
        t_ = lands_on_boundary ? boundary : t_ + h;
        xe_ = std::move(x_new);
        k1 = k7;
        check_finite(xe_, t_);
        ++step_count_;
        if (step_count_ % params_.sample_every == 0 && t_ != boundary) record();
        if (steady_reached(boundary, k1)) return true;
      }
      const double grow = !std::isfinite(err) ? kMinGrow
                          : err == 0.0
                              ? kMaxGrow
                              : std::clamp(kSafety * std::pow(err, -0.2), kMinGrow, kMaxGrow);
      h_adaptive_ = h * grow;
      if (h_adaptive_ < 1e-14 * std::max(1.0, std::abs(t_))) {
        throw NumericError("adaptive step size underflow at t = " + std::to_string(t_));
      }
    }
    return false;
  }

  const Engine& engine_;
  const SimParams& params_;
  const DisturbanceSchedule& schedule_;
  const bool detect_;
  const int dim_;
  const double t_last_event_;

  Trajectory traj_;
  Eigen::VectorXd xe_;
  Loads loads_;
  double t_ = 0.0;
  long step_count_ = 0;
  double h_adaptive_ = 0.0;
  double below_since_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace

Trajectory integrate(const Engine& engine, const Eigen::VectorXd& x0,
                     const SimParams& params, const DisturbanceSchedule& schedule) {
  return Runner(engine, x0, params, schedule, false).go();
}

Trajectory integrate_to_steady(const Engine& engine, const Eigen::VectorXd& x0,
                               const SimParams& params,
                               const DisturbanceSchedule& schedule) {
  return Runner(engine, x0, params, schedule, true).go();
}

}  // namespace chpsim
