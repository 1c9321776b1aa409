#include "chpsim/dynamics.hpp"

#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <vector>

using namespace chpsim;
using testing::two_bus_system;

namespace {

Engine make_engine(CombinedSystem& s) {
  finalize(s);
  REQUIRE(validate(s).ok());
  return Engine(s);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) {
    grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  }
  return grid;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("controller block algebra") {
  SUBCASE("first-order lag") {
    LtiBlock b{2.0, 0.5, 0.0};
    CHECK(block_output(b, 0.3, 7.0) == doctest::Approx(0.3));
    CHECK(block_xdot(b, 0.3, 0.1) == doctest::Approx((-0.3 - 0.5 * 0.1) / 2.0));
    const double xs = block_equilibrium_state(b, 0.2);
    CHECK(xs == doctest::Approx(-0.1));
    CHECK(block_xdot(b, xs, 0.2) == doctest::Approx(0.0));
    CHECK(block_output(b, xs, 0.2) == doctest::Approx(-0.5 * 0.2));
    CHECK(block_storage_weight(b) == doctest::Approx(2.0 / 0.5));
  }
  SUBCASE("lead-lag keeps the same dc gain") {
    LtiBlock b{0.8, 1.0, 0.6};
    const double xs = block_equilibrium_state(b, -0.3);
    CHECK(block_xdot(b, xs, -0.3) == doctest::Approx(0.0));
    CHECK(block_output(b, xs, -0.3) == doctest::Approx(0.3));
    CHECK(block_storage_weight(b) == doctest::Approx(0.8 / 1.6));
  }
  SUBCASE("make_block maps specs") {
    const LtiBlock g = make_block(GeneratorSpec{0.5, 2.0, BlockKind::lead_lag, 0.7});
    CHECK(g.tau == doctest::Approx(0.5));
    CHECK(g.gain == doctest::Approx(0.5));
    CHECK(g.alpha == doctest::Approx(0.7));
    const LtiBlock f = make_block(HeatSourceSpec{1.5, 4.0, BlockKind::first_order, 0.9});
    CHECK(f.alpha == doctest::Approx(0.0));
    CHECK(f.gain == doctest::Approx(0.25));
  }
}

TEST_CASE("block passivity identity for the quadratic storage") {
  // d/dt [w/2 (x - x*)^2] + (u - u*)(y - y*) must be nonpositive along the
  // block dynamics for any input; checked pointwise on random samples.
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    LtiBlock b{testing::uniform(rng, 0.2, 2.0), testing::uniform(rng, 0.3, 2.5),
               trial % 4 == 0 ? 0.0 : testing::uniform(rng, 0.1, 1.9)};
    const double u_star = testing::uniform(rng, -1.0, 1.0);
    const double x_star = block_equilibrium_state(b, u_star);
    const double y_star = block_output(b, x_star, u_star);
    const double x = testing::uniform(rng, -2.0, 2.0);
    const double u = testing::uniform(rng, -2.0, 2.0);
    const double w = block_storage_weight(b);
    const double vdot = w * (x - x_star) * block_xdot(b, x, u) +
                        (u - u_star) * (block_output(b, x, u) - y_star);
    CHECK(vdot <= 1e-12);
  }
}

TEST_CASE("passivity margin respects the lead-lag floor") {
  const std::vector<double> grid = log_grid(1e-3, 1e3, 121);
  LtiBlock first{1.0, 1.0, 0.0};
  CHECK(passivity_margin(first, grid) >= 0.0);
  LtiBlock lead{0.8, 0.5, 0.6};
  CHECK(passivity_margin(lead, grid) >= 0.5 * 0.6 - 1e-12);
  LtiBlock boost{1.2, 0.5, 1.5};
  CHECK(passivity_margin(boost, grid) >= 0.5 - 1e-12);
}

TEST_CASE("state layout of the two-bus system") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  const StateLayout& layout = engine.layout();
  CHECK(layout.n_eta == 1);
  CHECK(layout.dim == 10);
  REQUIRE(layout.omega_bus.size() == 1);
  CHECK(layout.omega_bus[0] == 0);
  CHECK(layout.bus_omega[1] == -1);
  CHECK(layout.area_blocks[0].size == 6);
  CHECK(engine.extended_dim() == 11);
}

TEST_CASE("loads accumulate and apply from their instant on") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  DisturbanceSchedule schedule;
  schedule.steps.push_back({1.0, true, 1, 0.4});
  schedule.steps.push_back({5.0, true, 1, -0.1});
  schedule.steps.push_back({2.0, false, 2, 0.2});
  CHECK(engine.loads_at(schedule, 0.99).bus_p(1) == doctest::Approx(0.0));
  CHECK(engine.loads_at(schedule, 1.0).bus_p(1) == doctest::Approx(0.4));
  CHECK(engine.loads_at(schedule, 5.0).bus_p(1) == doctest::Approx(0.3));
  CHECK(engine.loads_at(schedule, 2.0).edge_h(2) == doctest::Approx(0.2));
  CHECK(schedule.event_times_after(0.0) == std::vector<double>{1.0, 2.0, 5.0});
  CHECK(schedule.event_times_after(1.0) == std::vector<double>{2.0, 5.0});
  CHECK(schedule.last_event_time(0.0) == doctest::Approx(5.0));
}

TEST_CASE("algebraic frequency of the zero-inertia pump bus") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  Loads loads = engine.zero_loads();
  loads.bus_p(1) = 0.4;
  const Eigen::VectorXd x = engine.initial_state();
  const Eigen::VectorXd omega = engine.algebraic_frequencies(x, loads);
  // Balance at bus2: line inflow 0 = load 0.4 + (D + a1) omega.
  CHECK(omega(1) == doctest::Approx(-0.2));
  CHECK(omega(0) == doctest::Approx(0.0));
}

TEST_CASE("converter frequency tracks the area average temperature") {
  CombinedSystem s = two_bus_system(true);
  const Engine engine = make_engine(s);
  Eigen::VectorXd x = engine.initial_state();
  const int t0 = engine.layout().area(0);
  for (int i = 0; i < 6; ++i) x(t0 + i) = 0.5;
  const Eigen::VectorXd omega = engine.algebraic_frequencies(x, engine.zero_loads());
  CHECK(omega(1) == doctest::Approx(0.5));
}

TEST_CASE("pump power by mode") {
  SUBCASE("mode 1 draws proportionally to its bus frequency") {
    CombinedSystem s = two_bus_system(false);
    const Engine engine = make_engine(s);
    Loads loads = engine.zero_loads();
    loads.bus_p(1) = 0.4;
    const auto [p, h] = engine.pump_power(engine.initial_state(), 0, loads);
    CHECK(p == doctest::Approx(-0.2));
    CHECK(h == doctest::Approx(-0.6));
  }
  SUBCASE("mode 2 absorbs the converter's net electric inflow") {
    CombinedSystem s = two_bus_system(true);
    const Engine engine = make_engine(s);
    Eigen::VectorXd x = engine.initial_state();
    x(0) = 0.1;  // line angle toward the converter
    const auto [p, h] = engine.pump_power(x, 0, engine.zero_loads());
    CHECK(p == doctest::Approx(5.0 * std::sin(0.1)));
    CHECK(h == doctest::Approx(15.0 * std::sin(0.1)));
  }
}

TEST_CASE("heat injection stacks sources, pumps and loads") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  Loads loads = engine.zero_loads();
  loads.bus_p(1) = 0.4;   // moves the pump via omega_2 = -0.2
  loads.edge_h(2) = 0.1;  // heat load step on e3
  Eigen::VectorXd x = engine.initial_state();
  x(engine.layout().heat(0)) = 0.25;  // source state = output for a lag
  const Eigen::VectorXd h = engine.heat_injection(0, x, loads);
  REQUIRE(h.size() == 6);
  CHECK(h(0) == doctest::Approx(-0.6));   // pump edge: 3 * (-0.2)
  CHECK(h(1) == doctest::Approx(0.25));   // source output
  CHECK(h(2) == doctest::Approx(-0.1));   // load edge draws
  CHECK(h.tail(3).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("swing acceleration after a step at an inertial pump bus") {
  CombinedSystem s = two_bus_system(false);
  s.buses[1].inertia = 2.0;  // promote the pump bus to an inertial bus
  const Engine engine = make_engine(s);
  Loads loads = engine.zero_loads();
  loads.bus_p(1) = 0.4;
  const Eigen::VectorXd xdot = engine.rhs(engine.initial_state(), loads);
  const int slot = engine.layout().omega_offset + 1;
  CHECK(xdot(slot) == doctest::Approx(-0.4 / 2.0));
}

TEST_CASE("line flows and the security flag") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  Eigen::VectorXd x = engine.initial_state();
  x(0) = 0.3;
  CHECK(engine.line_flows(x)(0) == doctest::Approx(5.0 * std::sin(0.3)));
  CHECK_FALSE(engine.outputs(x, engine.zero_loads()).security);
  x(0) = 1.6;
  CHECK(engine.outputs(x, engine.zero_loads()).security);
}

TEST_CASE("thermal transport follows the stacked network equation") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  Eigen::VectorXd x = engine.initial_state();
  const int t0 = engine.layout().area(0);
  Eigen::VectorXd T(6);
  T << 0.3, -0.1, 0.2, 0.05, -0.4, 0.15;
  x.segment(t0, 6) = T;
  const Eigen::VectorXd xdot = engine.rhs(x, engine.zero_loads());
  const Eigen::VectorXd expected =
      s.areas[0].volumes.cwiseInverse().asDiagonal() *
      (engine.heat_injection(0, x, engine.zero_loads()) - s.areas[0].A_h * T);
  CHECK((xdot.segment(t0, 6) - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("uniform temperature shifts are invariant directions") {
  // A_h * 1 = 0: a uniform offset creates no transport, only the sources
  // and pumps react through the average.
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  Eigen::VectorXd x = engine.initial_state();
  const int t0 = engine.layout().area(0);
  x.segment(t0, 6).setConstant(0.7);
  const Eigen::VectorXd xdot = engine.rhs(x, engine.zero_loads());
  CHECK(xdot.segment(t0, 6).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("quadrature channels integrate the total heat injection") {
  CombinedSystem s = two_bus_system(false);
  const Engine engine = make_engine(s);
  Loads loads = engine.zero_loads();
  loads.bus_p(1) = 0.4;
  Eigen::VectorXd xe = Eigen::VectorXd::Zero(engine.extended_dim());
  xe.head(engine.layout().dim) = engine.initial_state();
  const Eigen::VectorXd rdot = engine.rhs_extended(xe, loads);
  CHECK(rdot(engine.layout().dim) ==
        doctest::Approx(engine.heat_injection(0, engine.initial_state(), loads).sum()));
}

TEST_CASE("area alpha is the mode-2 thermal weight") {
  CombinedSystem s = two_bus_system(true);
  const Engine engine = make_engine(s);
  CHECK(engine.area_alpha(0) == doctest::Approx(1.0 / 3.0));
  CombinedSystem m1 = two_bus_system(false);
  const Engine e1 = make_engine(m1);
  CHECK_THROWS_AS(e1.area_alpha(0), ValidationError);
}

}  // TEST_SUITE
