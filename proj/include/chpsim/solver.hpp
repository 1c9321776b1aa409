#pragma once

#include "chpsim/dynamics.hpp"

#include <limits>
#include <vector>

/// Deterministic time integration.  Disturbance instants are always step
/// boundaries, so the integrator never steps across a load discontinuity;
/// loads are constant inside every step.
namespace chpsim {

enum class Method { rk4, rk45 };

struct SimParams {
  double t0 = 0.0;
  double t_end = 100.0;
  Method method = Method::rk4;
  double dt = 0.01;        // step size (rk4) / initial step size (rk45)
  double rtol = 1e-8;      // rk45 relative tolerance
  double atol = 1e-10;     // rk45 absolute tolerance
  int sample_every = 1;    // record every n-th accepted step
  double steady_eps = 1e-8;
  double steady_hold = 1.0;
};

/// Recorded samples.  `heat_integrals` carries the per-area running
/// integral of the total heat injection, integrated by the same
/// Runge-Kutta stages as the state, so the aggregate-energy identity
/// total_volume * delta(Tbar) = integral(1^T h) holds to rounding.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> heat_integrals;  // per area
  std::vector<AlgebraicOutputs> outputs;
  bool reached_steady = false;
  double steady_time = std::numeric_limits<double>::quiet_NaN();
  bool security_excursion = false;  // some sample had |eta| >= pi/2

  const Eigen::VectorXd& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

/// Integrates from params.t0 to params.t_end.  Throws DivergenceError if
/// the state leaves the finite range, NumericError if the adaptive step
/// size underflows.  Bit-identical across runs for identical inputs.
Trajectory integrate(const Engine& engine, const Eigen::VectorXd& x0,
                     const SimParams& params, const DisturbanceSchedule& schedule);

/// Same, but stops once past the last disturbance instant the rhs norm
/// stays below params.steady_eps for params.steady_hold seconds.  If the
/// initial state is already stationary and nothing is scheduled, returns
/// immediately.  reached_steady reports whether detection fired before
/// t_end.
Trajectory integrate_to_steady(const Engine& engine, const Eigen::VectorXd& x0,
                               const SimParams& params,
                               const DisturbanceSchedule& schedule);

}  // namespace chpsim
