#include "chpsim/solver.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

using namespace chpsim;
using testing::two_bus_system;

namespace {

CombinedSystem one_bus_system() {
  CombinedSystem s;
  PowerBus bus;
  bus.id = "b1";
  bus.kind = BusKind::load;
  bus.inertia = 2.0;
  bus.damping = 0.5;
  s.buses = {bus};
  return s;
}

Engine make_engine(CombinedSystem& s) {
  finalize(s);
  REQUIRE(validate(s).ok());
  return Engine(s);
}

int sample_at(const Trajectory& traj, double t) {
  for (size_t k = 0; k < traj.times.size(); ++k) {
    if (std::abs(traj.times[k] - t) < 1e-12) return static_cast<int>(k);
  }
  return -1;
}

double exact_one_bus_omega(double t) {
  // M w' = -0.4 - D w with M = 2, D = 0.5.
  return -0.8 * (1.0 - std::exp(-0.25 * t));
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("fixed-step integration matches the scalar exponential response") {
  CombinedSystem s = one_bus_system();
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({0.0, true, 0, 0.4});
  SimParams params;
  params.t_end = 4.0;
  params.dt = 0.01;
  const Trajectory traj = integrate(engine, engine.initial_state(), params, schedule);
  CHECK(traj.final_time() == doctest::Approx(4.0));
  CHECK(traj.final_state()(0) ==
        doctest::Approx(exact_one_bus_omega(4.0)).epsilon(1e-10));
  CHECK_FALSE(traj.reached_steady);
  CHECK_FALSE(traj.security_excursion);
}

TEST_CASE("fixed-step integration converges at fourth order") {
  CombinedSystem s = one_bus_system();
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({0.0, true, 0, 0.4});
  auto error_at = [&](double dt) {
    SimParams params;
    params.t_end = 4.0;
    params.dt = dt;
    const Trajectory traj = integrate(engine, engine.initial_state(), params, schedule);
    return std::abs(traj.final_state()(0) - exact_one_bus_omega(4.0));
  };
  const double e1 = error_at(0.2);
  const double e2 = error_at(0.1);
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("adaptive integration meets its tolerance and adapts its step") {
  CombinedSystem s = one_bus_system();
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({0.0, true, 0, 0.4});
  SimParams params;
  params.t_end = 4.0;
  params.method = Method::rk45;
  params.dt = 0.01;
  params.rtol = 1e-10;
  params.atol = 1e-12;
  const Trajectory traj = integrate(engine, engine.initial_state(), params, schedule);
  CHECK(std::abs(traj.final_state()(0) - exact_one_bus_omega(4.0)) < 1e-8);
  double min_gap = 1e30;
  double max_gap = 0.0;
  for (size_t k = 1; k < traj.times.size(); ++k) {
    const double gap = traj.times[k] - traj.times[k - 1];
    min_gap = std::min(min_gap, gap);
    max_gap = std::max(max_gap, gap);
  }
  CHECK(max_gap > 2.0 * min_gap);
}

TEST_CASE("disturbance instants are exact sample boundaries with post-step loads") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({1.0, true, 1, 0.4});
  SimParams params;
  params.t_end = 2.0;
  params.dt = 0.03;  // does not divide the boundary offset
  const Trajectory traj = integrate(engine, engine.initial_state(), params, schedule);
  const int k = sample_at(traj, 1.0);
  REQUIRE(k >= 0);
  CHECK(traj.outputs[k].omega(1) == doctest::Approx(-0.2));
  // The sample just before the boundary still sees the old loads.
  CHECK(traj.outputs[k - 1].omega(1) == doctest::Approx(0.0));
}

TEST_CASE("sample thinning keeps boundaries and the final sample") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({1.0, true, 1, 0.4});
  SimParams params;
  params.t_end = 2.0;
  params.dt = 0.01;
  params.sample_every = 10;
  const Trajectory traj = integrate(engine, engine.initial_state(), params, schedule);
  CHECK(traj.times.front() == doctest::Approx(0.0));
  CHECK(traj.times.back() == doctest::Approx(2.0));
  CHECK(sample_at(traj, 1.0) >= 0);
  CHECK(traj.times.size() <= 25);
}

TEST_CASE("steady-state detection stops immediately at a stationary start") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  SimParams params;
  params.t_end = 50.0;
  const Trajectory traj =
      integrate_to_steady(engine, engine.initial_state(), params, DisturbanceSchedule{});
  CHECK(traj.reached_steady);
  CHECK(traj.times.size() == 1);
  CHECK(traj.steady_time == doctest::Approx(0.0));
}

TEST_CASE("steady-state detection settles after the step") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({1.0, true, 1, 0.4});
  SimParams params;
  params.t_end = 500.0;
  params.dt = 0.02;
  const Trajectory traj =
      integrate_to_steady(engine, engine.initial_state(), params, schedule);
  CHECK(traj.reached_steady);
  CHECK(traj.steady_time > 1.0);
  CHECK(traj.steady_time < 500.0);
  CHECK(traj.final_time() == doctest::Approx(traj.steady_time));
  const Eigen::VectorXd rest = engine.rhs(
      traj.final_state(), engine.loads_at(schedule, traj.final_time()));
  CHECK(rest.cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("aggregate thermal energy matches the quadrature channel") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({0.5, true, 1, 0.4});
  schedule.steps.push_back({1.0, false, 2, -0.2});
  SimParams params;
  params.t_end = 5.0;
  params.dt = 0.01;
  const Trajectory traj = integrate(engine, engine.initial_state(), params, schedule);
  const HeatArea& area = engine.system().areas[0];
  const double t0_avg = average_temperature(area, traj.states.front().segment(
                                                      engine.layout().area(0), 6));
  const double t1_avg = average_temperature(area, traj.states.back().segment(
                                                      engine.layout().area(0), 6));
  const double lhs = area.total_volume * (t1_avg - t0_avg);
  const double rhs = traj.heat_integrals.back()(0) - traj.heat_integrals.front()(0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("instability is reported as divergence") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({0.0, true, 1, 0.4});
  SimParams params;
  params.t_end = 5000.0;
  params.dt = 20.0;  // far outside the fixed-step stability region
  CHECK_THROWS_AS(integrate(engine, engine.initial_state(), params, schedule),
                  DivergenceError);
}

TEST_CASE("integration is deterministic") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({1.0, true, 1, 0.4});
  SimParams params;
  params.t_end = 10.0;
  params.method = Method::rk45;
  const Trajectory a = integrate(engine, engine.initial_state(), params, schedule);
  const Trajectory b = integrate(engine, engine.initial_state(), params, schedule);
  REQUIRE(a.states.size() == b.states.size());
  CHECK((a.final_state() - b.final_state()).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE
