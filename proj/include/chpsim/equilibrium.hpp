#pragma once

#include "chpsim/dynamics.hpp"

#include <string>
#include <vector>

/// Post-disturbance equilibria.  The closed-form oracles use only aggregate
/// balances; the optimization route solves the equivalent diagonal
/// quadratic programs.  Agreement of the two is the core correctness
/// check of the steady-state theory.
namespace chpsim {

/// min 1/2 sum_i cost_i x_i^2  s.t.  sum_i coeff_i x_i = rhs.
/// Stationarity: cost_i x_i + coeff_i lambda = 0.
struct QpVariable {
  std::string label;
  double cost = 1.0;   // > 0
  double coeff = 1.0;  // +-1 or a scaled coupling coefficient
};

struct QpSpec {
  std::vector<QpVariable> vars;
  double rhs = 0.0;
};

struct QpSolution {
  Eigen::VectorXd x;
  double lambda = 0.0;
};

/// Analytic KKT solution: x_i = -lambda * coeff_i / cost_i with lambda
/// = -rhs / sum(coeff_i^2 / cost_i).
QpSolution solve_qp(const QpSpec& spec);

/// Independent route: bisection on the scalar multiplier until the
/// balance residual is below tol.  Used to cross-check solve_qp.
QpSolution solve_qp_numeric(const QpSpec& spec, double tol = 1e-10);

struct EquilibriumSolution {
  double omega_star = 0.0;
  double lambda = 0.0;          // electric balance multiplier (= omega_star)
  Eigen::VectorXd mu;           // per area heat balance multiplier
  Eigen::VectorXd Tbar_star;    // per area
  Eigen::VectorXd pG_star;      // per generator
  Eigen::VectorXd hG_star;      // per source
  Eigen::VectorXd pP_star;      // per pump coupling
  Eigen::VectorXd hP_star;
  Eigen::VectorXd pU_star;      // per bus, D_j * omega_star
  Eigen::VectorXd T_star;       // stacked per-area temperature vectors
  Eigen::VectorXd theta_star;   // per bus, first bus as angle reference
  Eigen::VectorXd eta_star;     // per line
  bool security_ok = true;      // all |eta_star| < pi/2
};

struct EquilibriumOptions {
  /// Solve the network power flow for the equilibrium angles.  Skipping it
  /// leaves theta_star / eta_star empty (aggregate quantities only).
  bool with_flows = true;
};

/// Closed-form equilibrium of a Mode-1 system under constant loads
/// (loads.bus_p = electric steps, loads.edge_h = heat steps on load
/// edges).  Throws ValidationError on a Mode-2 or mixed system and
/// NumericError if no generator, damping, or pump balances the system.
EquilibriumSolution mode1_equilibrium(const Engine& engine, const Loads& loads,
                                      const EquilibriumOptions& opts = {});

/// Closed-form equilibrium of a Mode-2 system (one pump per area).
/// The converter frequencies synchronize, so Tbar*_a = omega*/m_a.
EquilibriumSolution mode2_equilibrium(const Engine& engine, const Loads& loads,
                                      const EquilibriumOptions& opts = {});

/// Electric dispatch QP of a Mode-1 system: variables p^G per generator
/// (coeff +1), p^P per pump (coeff -1), p^U per damped bus (coeff -1);
/// rhs = total electric step.
QpSpec qp_electric_mode1(const Engine& engine, const Loads& loads);

/// Heat dispatch QP of one area: variables h^G per source, rhs = total
/// heat step minus the pump heat already fixed by the electric side.
QpSpec qp_heat_mode1(const Engine& engine, int area, const Loads& loads,
                     double pump_heat_total);

/// Combined Mode-2 QP with the costless pump variables eliminated through
/// the per-area heat balances: variables p^G (coeff +1), h^G per source
/// (coeff 1/C_o of its area, cost alpha_area * Q_h), p^U (coeff -1);
/// rhs = total electric step + sum_a (area heat step)/C_o,a.
QpSpec qp_mode2(const Engine& engine, const Loads& loads);

/// Temperature profile solving A_h T = h anchored by the volume-weighted
/// average: least squares on the bordered system [A_h; v^T/V_total].
/// Requires |1^T h| <= 1e-9 (injections must balance); the solved profile
/// must fit with residual below 1e-10.
Eigen::VectorXd temperature_profile(const HeatArea& area, const Eigen::VectorXd& h_star,
                                    double Tbar_star);

/// Full state vector at the equilibrium (requires eq solved with flows).
Eigen::VectorXd equilibrium_state(const Engine& engine, const EquilibriumSolution& eq);

}  // namespace chpsim
