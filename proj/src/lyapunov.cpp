#include "chpsim/lyapunov.hpp"

#include <algorithm>
#include <cmath>

namespace chpsim {

namespace {

double line_potential(const Engine& engine, const Eigen::VectorXd& x,
                      const EquilibriumSolution& eq) {
  const auto& ix = engine.index();
  const auto& layout = engine.layout();
  if (eq.eta_star.size() != ix.n_lines) {
    throw std::invalid_argument("storage evaluation needs an equilibrium with solved flows");
  }
  double sum = 0.0;
  for (int l = 0; l < ix.n_lines; ++l) {
    const double eta = x(layout.eta(l));
    const double eta_star = eq.eta_star(l);
    sum += engine.system().lines[l].susceptance *
           ((std::cos(eta_star) - std::cos(eta)) - std::sin(eta_star) * (eta - eta_star));
  }
  return sum;
}

}  // namespace

StorageBreakdown v1e(const Engine& engine, const Eigen::VectorXd& x,
                     const EquilibriumSolution& eq) {
  const auto& layout = engine.layout();
  const auto& system = engine.system();
  StorageBreakdown v;
  for (size_t k = 0; k < layout.omega_bus.size(); ++k) {
    const double M = system.buses[layout.omega_bus[k]].inertia;
    const double w = x(layout.omega_offset + static_cast<int>(k)) - eq.omega_star;
    v.kinetic += 0.5 * M * w * w;
  }
  v.line = line_potential(engine, x, eq);
  for (size_t g = 0; g < engine.index().generators.size(); ++g) {
    const LtiBlock& block = engine.generator_block(g);
    const double d = x(layout.gen(static_cast<int>(g))) -
                     block_equilibrium_state(block, eq.omega_star);
    v.generator += 0.5 * block_storage_weight(block) * d * d;
  }
  return v;
}

StorageBreakdown v1h(const Engine& engine, const Eigen::VectorXd& x,
                     const EquilibriumSolution& eq, int area) {
  const auto& layout = engine.layout();
  const auto& a = engine.system().areas[area];
  StorageBreakdown v;
  const double Tbar =
      a.volumes.dot(x.segment(layout.area(area), layout.area_blocks[area].size)) /
      a.total_volume;
  const double dT = Tbar - eq.Tbar_star(area);
  v.thermal = 0.5 * a.total_volume * dT * dT;
  for (size_t s = 0; s < engine.index().sources.size(); ++s) {
    if (engine.index().sources[s].area != area) continue;
    const LtiBlock& block = engine.source_block(s);
    const double d = x(layout.heat(static_cast<int>(s))) -
                     block_equilibrium_state(block, eq.Tbar_star(area));
    v.source += 0.5 * block_storage_weight(block) * d * d;
  }
  return v;
}

StorageBreakdown v2(const Engine& engine, const Eigen::VectorXd& x,
                    const EquilibriumSolution& eq) {
  if (system_mode(engine.system()) != SystemMode::mode2) {
    throw ValidationError("v2 is defined for Mode-2 systems");
  }
  StorageBreakdown v = v1e(engine, x, eq);
  for (int a = 0; a < engine.index().n_areas; ++a) {
    const double alpha = engine.area_alpha(a);
    const StorageBreakdown h = v1h(engine, x, eq, a);
    v.thermal += alpha * h.thermal;
    v.source += alpha * h.source;
  }
  return v;
}

MonotoneReport check_monotone(std::span<const double> series, double tol) {
  MonotoneReport report;
  for (size_t k = 0; k + 1 < series.size(); ++k) {
    if (series[k + 1] - series[k] > tol * std::max(1.0, series[k])) {
      report.violations.push_back(static_cast<int>(k));
    }
  }
  return report;
}

std::vector<AuditSeries> audit_trajectory(const Engine& engine, const Trajectory& traj,
                                          const DisturbanceSchedule& schedule,
                                          double tol) {
  const SystemMode mode = system_mode(engine.system());
  if (mode == SystemMode::mixed) {
    throw ValidationError("storage audit is defined for pure Mode-1 or Mode-2 systems");
  }
  if (traj.times.empty()) throw std::invalid_argument("empty trajectory");

  const double t0 = traj.times.front();
  const std::vector<double> bounds = schedule.event_times_after(t0);

  // Equilibrium baseline per inter-disturbance segment; a sample exactly at
  // a disturbance instant belongs to the new segment (loads are applied
  // from that instant on).
  std::vector<EquilibriumSolution> eqs;
  for (size_t seg = 0; seg <= bounds.size(); ++seg) {
    const double t_seg = seg == 0 ? t0 : bounds[seg - 1];
    const Loads loads = engine.loads_at(schedule, t_seg);
    eqs.push_back(mode == SystemMode::mode2 ? mode2_equilibrium(engine, loads)
                                            : mode1_equilibrium(engine, loads));
  }
  std::vector<int> segment_of(traj.times.size(), 0);
  for (size_t k = 0; k < traj.times.size(); ++k) {
    int seg = 0;
    while (seg < static_cast<int>(bounds.size()) && traj.times[k] >= bounds[seg]) ++seg;
    segment_of[k] = seg;
  }

  const bool electric_steps = std::any_of(
      schedule.steps.begin(), schedule.steps.end(),
      [](const DisturbanceStep& s) { return s.on_bus && s.delta != 0.0; });
  const bool pump_injection_constant = engine.index().pumps.empty() || !electric_steps;

  std::vector<AuditSeries> out;
  auto evaluate = [&](const std::string& name, bool require_monotone, auto&& fn) {
    AuditSeries series;
    series.name = name;
    series.require_monotone = require_monotone;
    series.values.reserve(traj.times.size());
    for (size_t k = 0; k < traj.times.size(); ++k) {
      series.values.push_back(fn(traj.states[k], eqs[segment_of[k]]));
    }
    for (size_t k = 0; k + 1 < series.values.size(); ++k) {
      if (segment_of[k] != segment_of[k + 1]) continue;  // baseline restarts
      if (series.values[k + 1] - series.values[k] >
          tol * std::max(1.0, series.values[k])) {
        series.monotone.violations.push_back(static_cast<int>(k));
      }
    }
    series.final_value = series.values.back();
    out.push_back(std::move(series));
  };

  if (mode == SystemMode::mode2) {
    evaluate("v2", true, [&](const Eigen::VectorXd& x, const EquilibriumSolution& eq) {
      return v2(engine, x, eq).total();
    });
  } else {
    evaluate("v1e", true, [&](const Eigen::VectorXd& x, const EquilibriumSolution& eq) {
      return v1e(engine, x, eq).total();
    });
    for (int a = 0; a < engine.index().n_areas; ++a) {
      evaluate("v1h:" + engine.system().areas[a].id, pump_injection_constant,
               [&](const Eigen::VectorXd& x, const EquilibriumSolution& eq) {
                 return v1h(engine, x, eq, a).total();
               });
    }
  }
  return out;
}

}  // namespace chpsim
