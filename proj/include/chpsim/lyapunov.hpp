#pragma once

#include "chpsim/equilibrium.hpp"
#include "chpsim/solver.hpp"

#include <span>
#include <string>
#include <vector>

/// Storage-function evaluation along trajectories.  Three functions are
/// shipped:
///   v1e  electric storage (kinetic + line potential + generator blocks);
///        non-increasing along every Mode-1 trajectory between disturbances.
///   v1h  per-area thermal storage; non-increasing only while the pump
///        heat injection is constant, and it decays to zero on every
///        converging Mode-1 run.
///   v2   combined storage with the per-area thermal parts weighted by
///        alpha = m/C_o; non-increasing along Mode-2 trajectories.
namespace chpsim {

struct StorageBreakdown {
  double kinetic = 0.0;    // 1/2 sum M (omega - omega*)^2
  double line = 0.0;       // sum B [(cos eta* - cos eta) - sin eta* (eta - eta*)]
  double generator = 0.0;  // block storages, weight tau/(gain*(1+alpha))
  double thermal = 0.0;    // 1/2 V_total (Tbar - Tbar*)^2, weighted in v2
  double source = 0.0;     // heat-source block storages, weighted in v2
  double total() const { return kinetic + line + generator + thermal + source; }
};

/// Electric part; requires eq solved with flows (eta*).
StorageBreakdown v1e(const Engine& engine, const Eigen::VectorXd& x,
                     const EquilibriumSolution& eq);

/// Thermal storage of one area.
StorageBreakdown v1h(const Engine& engine, const Eigen::VectorXd& x,
                     const EquilibriumSolution& eq, int area);

/// Combined Mode-2 storage.  Throws ValidationError on a system that is
/// not Mode 2.
StorageBreakdown v2(const Engine& engine, const Eigen::VectorXd& x,
                    const EquilibriumSolution& eq);

struct MonotoneReport {
  std::vector<int> violations;  // sample indices k with V(k+1) > V(k) + slack
  bool pass() const { return violations.empty(); }
};

/// Flags every index where V(t_{k+1}) - V(t_k) > tol * max(1, V(t_k)).
MonotoneReport check_monotone(std::span<const double> series, double tol = 1e-9);

struct AuditSeries {
  std::string name;            // "v1e", "v1h:<area>", "v2"
  std::vector<double> values;  // one per trajectory sample
  MonotoneReport monotone;     // checked within inter-disturbance segments
  double final_value = 0.0;
  bool require_monotone = true;  // v1h on general runs only needs decay
};

/// Evaluates the storage functions fitting the system's pump mode along a
/// trajectory.  The equilibrium baseline restarts at each disturbance
/// instant: every inter-disturbance segment is checked against the
/// equilibrium for the loads active in it.  v1h is marked
/// require_monotone only when no electric disturbance ever moves the pump
/// (constant-injection case).
std::vector<AuditSeries> audit_trajectory(const Engine& engine, const Trajectory& traj,
                                          const DisturbanceSchedule& schedule,
                                          double tol = 1e-9);

}  // namespace chpsim
