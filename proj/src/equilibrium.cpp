#include "chpsim/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace chpsim {

namespace {

constexpr double kBalanceTol = 1e-10;

double weight_sum(const QpSpec& spec) {
  double sum = 0.0;
  for (const auto& v : spec.vars) {
    if (v.cost <= 0.0) throw std::invalid_argument("qp cost must be positive");
    sum += v.coeff * v.coeff / v.cost;
  }
  if (sum <= 0.0) throw NumericError("qp has no variable coupled to the balance");
  return sum;
}

Eigen::VectorXd allocation(const QpSpec& spec, double lambda) {
  Eigen::VectorXd x(spec.vars.size());
  for (size_t i = 0; i < spec.vars.size(); ++i) {
    x(i) = -lambda * spec.vars[i].coeff / spec.vars[i].cost;
  }
  return x;
}

double residual(const QpSpec& spec, double lambda) {
  const Eigen::VectorXd x = allocation(spec, lambda);
  double r = -spec.rhs;
  for (size_t i = 0; i < spec.vars.size(); ++i) r += spec.vars[i].coeff * x(i);
  return r;
}

}  // namespace

QpSolution solve_qp(const QpSpec& spec) {
  const double lambda = -spec.rhs / weight_sum(spec);
  return {allocation(spec, lambda), lambda};
}

QpSolution solve_qp_numeric(const QpSpec& spec, double tol) {
  weight_sum(spec);  // validates costs and coupling
  // residual(lambda) is affine and strictly decreasing; expand a bracket,
  // then bisect on the multiplier until the balance closes.
  double lo = -1.0;
  double hi = 1.0;
  for (int k = 0; k < 200 && !(residual(spec, lo) > 0.0 && residual(spec, hi) < 0.0);
       ++k) {
    lo *= 2.0;
    hi *= 2.0;
    if (k == 199) throw NumericError("qp bisection failed to bracket the multiplier");
  }
  double mid = 0.0;
  for (int k = 0; k < 300; ++k) {
    mid = (lo + hi) / 2.0;
    const double r = residual(spec, mid);
    if (std::abs(r) < tol) return {allocation(spec, mid), mid};
    (r > 0.0 ? lo : hi) = mid;
  }
  throw NumericError("qp bisection did not reach the requested tolerance");
}

namespace {

double area_heat_step(const Engine& engine, int area, const Loads& loads) {
  const auto& ix = engine.index();
  const auto& edges = engine.system().areas[area].edges;
  double sum = 0.0;
  for (int j = 0; j < static_cast<int>(edges.size()); ++j) {
    sum += loads.edge_h(ix.area_edge_offset[area] + j);
  }
  return sum;
}

double source_cost_sum(const Engine& engine, int area) {
  double sum = 0.0;
  for (size_t s = 0; s < engine.index().sources.size(); ++s) {
    if (engine.index().sources[s].area == area) sum += engine.source_block(s).gain;
  }
  return sum;
}

// Mode-2 pump of an area; validated to be unique by the callers.
const SystemIndex::PumpRef& area_pump(const Engine& engine, int area) {
  const SystemIndex::PumpRef* found = nullptr;
  for (const auto& p : engine.index().pumps) {
    if (p.area != area || !p.mode2) continue;
    if (found != nullptr) {
      throw ValidationError("area '" + engine.system().areas[area].id +
                            "' has more than one mode-2 pump; its equilibrium heat "
                            "split is not determined by the aggregate balances");
    }
    found = &p;
  }
  if (found == nullptr) {
    throw ValidationError("area '" + engine.system().areas[area].id +
                          "' has no mode-2 pump");
  }
  return *found;
}

// Equilibrium bus angles from the per-bus power balances, first bus as
// reference.  rhs_j is the net power each bus must import.
void solve_flows(const Engine& engine, const Eigen::VectorXd& bus_rhs,
                 EquilibriumSolution& eq) {
  const auto& ix = engine.index();
  const auto& lines = engine.system().lines;
  const int n = ix.n_buses;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  auto net = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int l = 0; l < ix.n_lines; ++l) {
      const double p = lines[l].susceptance * std::sin(th(ix.line_from[l]) - th(ix.line_to[l]));
      out(ix.line_to[l]) += p;
      out(ix.line_from[l]) -= p;
    }
    return out;
  };

  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::VectorXd r = net(theta) - bus_rhs;
    if (r.lpNorm<Eigen::Infinity>() < 1e-13) {
      eq.theta_star = theta;
      eq.eta_star.resize(ix.n_lines);
      eq.security_ok = true;
      for (int l = 0; l < ix.n_lines; ++l) {
        eq.eta_star(l) = theta(ix.line_from[l]) - theta(ix.line_to[l]);
        if (std::abs(eq.eta_star(l)) >= std::numbers::pi / 2.0) eq.security_ok = false;
      }
      return;
    }
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int l = 0; l < ix.n_lines; ++l) {
      const int a = ix.line_from[l];
      const int b = ix.line_to[l];
      const double w = lines[l].susceptance * std::cos(theta(a) - theta(b));
      // d net_to / d theta_from etc.
      J(b, a) += w;
      J(b, b) -= w;
      J(a, a) -= w;
      J(a, b) += w;
    }
    // Reference bus pinned: drop its equation and unknown.
    Eigen::MatrixXd Jr = J.bottomRightCorner(n - 1, n - 1);
    Eigen::VectorXd rr = r.tail(n - 1);
    Eigen::VectorXd step = Jr.partialPivLu().solve(rr);
    if (!step.allFinite()) throw NumericError("equilibrium power flow Jacobian is singular");
    theta.tail(n - 1) -= step;
  }
  throw NumericError("equilibrium power flow did not converge");
}

// Fills T_star by stacking the per-area anchored profiles, and solves the
// line flows if requested.
void finish_solution(const Engine& engine, const Loads& loads, EquilibriumSolution& eq,
                     const EquilibriumOptions& opts) {
  const auto& ix = engine.index();
  const auto& system = engine.system();

  eq.pU_star.resize(ix.n_buses);
  for (int j = 0; j < ix.n_buses; ++j) {
    eq.pU_star(j) = system.buses[j].damping * eq.omega_star;
  }

  int total = 0;
  for (const auto& area : system.areas) total += area.state_dim();
  eq.T_star.resize(total);
  int cursor = 0;
  for (int a = 0; a < ix.n_areas; ++a) {
    const auto& area = system.areas[a];
    Eigen::VectorXd h = Eigen::VectorXd::Zero(area.state_dim());
    for (size_t s = 0; s < ix.sources.size(); ++s) {
      if (ix.sources[s].area == a) h(ix.sources[s].edge) += eq.hG_star(s);
    }
    for (size_t p = 0; p < ix.pumps.size(); ++p) {
      if (ix.pumps[p].area == a) h(ix.pumps[p].edge) += eq.hP_star(p);
    }
    for (int j = 0; j < static_cast<int>(area.edges.size()); ++j) {
      if (area.edges[j].role == EdgeRole::load) {
        h(j) -= loads.edge_h(ix.area_edge_offset[a] + j);
      }
    }
    eq.T_star.segment(cursor, area.state_dim()) =
        temperature_profile(area, h, eq.Tbar_star(a));
    cursor += area.state_dim();
  }

  if (!opts.with_flows) return;

  // Power each bus must import at equilibrium.
  Eigen::VectorXd bus_rhs = loads.bus_p + eq.pU_star;
  for (size_t g = 0; g < ix.generators.size(); ++g) {
    bus_rhs(ix.generators[g].bus) -= eq.pG_star(g);
  }
  for (size_t p = 0; p < ix.pumps.size(); ++p) {
    bus_rhs(ix.pumps[p].bus) += eq.pP_star(p);
  }
  solve_flows(engine, bus_rhs, eq);
}

void check_balances(const Engine& engine, const Loads& loads,
                    const EquilibriumSolution& eq) {
  const auto& ix = engine.index();
  double electric = loads.bus_p.sum() - eq.pG_star.sum() + eq.pP_star.sum() +
                    eq.pU_star.sum();
  if (std::abs(electric) > kBalanceTol) {
    throw NumericError("equilibrium electric balance residual " + std::to_string(electric));
  }
  for (int a = 0; a < ix.n_areas; ++a) {
    double heat = -area_heat_step(engine, a, loads);
    for (size_t s = 0; s < ix.sources.size(); ++s) {
      if (ix.sources[s].area == a) heat += eq.hG_star(s);
    }
    for (size_t p = 0; p < ix.pumps.size(); ++p) {
      if (ix.pumps[p].area == a) heat += eq.hP_star(p);
    }
    if (std::abs(heat) > kBalanceTol) {
      throw NumericError("equilibrium heat balance residual " + std::to_string(heat) +
                         " in area '" + engine.system().areas[a].id + "'");
    }
  }
}

}  // namespace

EquilibriumSolution mode1_equilibrium(const Engine& engine, const Loads& loads,
                                      const EquilibriumOptions& opts) {
  const auto& ix = engine.index();
  const auto& system = engine.system();
  const SystemMode mode = system_mode(system);
  if (mode == SystemMode::mode2 || mode == SystemMode::mixed) {
    throw ValidationError("mode1_equilibrium requires a Mode-1 system");
  }

  double denom = 0.0;
  for (size_t g = 0; g < ix.generators.size(); ++g) denom += engine.generator_block(g).gain;
  for (const auto& bus : system.buses) denom += bus.damping;
  std::vector<double> a1(ix.pumps.size(), 0.0);
  for (size_t p = 0; p < ix.pumps.size(); ++p) {
    a1[p] = std::get<PumpMode1>(system.pumps[p].mode).a1;
    denom += a1[p];
  }
  if (denom <= 0.0) {
    throw NumericError(
        "unbalanced system: no generator, damping, or pump absorbs the electric step");
  }

  EquilibriumSolution eq;
  eq.omega_star = -loads.bus_p.sum() / denom;
  eq.lambda = eq.omega_star;

  eq.pG_star.resize(ix.generators.size());
  for (size_t g = 0; g < ix.generators.size(); ++g) {
    eq.pG_star(g) = -engine.generator_block(g).gain * eq.omega_star;
  }
  eq.pP_star.resize(ix.pumps.size());
  eq.hP_star.resize(ix.pumps.size());
  for (size_t p = 0; p < ix.pumps.size(); ++p) {
    eq.pP_star(p) = a1[p] * eq.omega_star;
    eq.hP_star(p) = system.pumps[p].cop * eq.pP_star(p);
  }

  eq.Tbar_star.resize(ix.n_areas);
  eq.mu.resize(ix.n_areas);
  eq.hG_star.resize(ix.sources.size());
  for (int a = 0; a < ix.n_areas; ++a) {
    double pump_heat = 0.0;
    for (size_t p = 0; p < ix.pumps.size(); ++p) {
      if (ix.pumps[p].area == a) pump_heat += eq.hP_star(p);
    }
    const double cost_sum = source_cost_sum(engine, a);
    eq.Tbar_star(a) = -(area_heat_step(engine, a, loads) - pump_heat) / cost_sum;
    eq.mu(a) = eq.Tbar_star(a);
  }
  for (size_t s = 0; s < ix.sources.size(); ++s) {
    eq.hG_star(s) = -engine.source_block(s).gain * eq.Tbar_star(ix.sources[s].area);
  }

  finish_solution(engine, loads, eq, opts);
  check_balances(engine, loads, eq);
  return eq;
}

EquilibriumSolution mode2_equilibrium(const Engine& engine, const Loads& loads,
                                      const EquilibriumOptions& opts) {
  const auto& ix = engine.index();
  const auto& system = engine.system();
  if (system_mode(system) != SystemMode::mode2) {
    throw ValidationError("mode2_equilibrium requires a Mode-2 system");
  }

  // Scalar balance for omega*: generators and damping respond to omega*,
  // each area's pump power follows its heat balance at Tbar*_a = omega*/m_a.
  double denom = 0.0;
  for (size_t g = 0; g < ix.generators.size(); ++g) denom += engine.generator_block(g).gain;
  for (const auto& bus : system.buses) denom += bus.damping;
  double rhs = -loads.bus_p.sum();
  std::vector<double> m_of(ix.n_areas, 0.0);
  std::vector<double> cop_of(ix.n_areas, 0.0);
  for (int a = 0; a < ix.n_areas; ++a) {
    const auto& pump_ref = area_pump(engine, a);
    const auto& pump = system.pumps[pump_ref.pump];
    m_of[a] = std::get<PumpMode2>(pump.mode).m;
    cop_of[a] = pump.cop;
    denom += source_cost_sum(engine, a) / (m_of[a] * cop_of[a]);
    rhs -= area_heat_step(engine, a, loads) / cop_of[a];
  }
  if (denom <= 0.0) {
    throw NumericError(
        "unbalanced system: no generator, damping, or pump absorbs the electric step");
  }

  EquilibriumSolution eq;
  eq.omega_star = rhs / denom;
  eq.lambda = eq.omega_star;

  eq.pG_star.resize(ix.generators.size());
  for (size_t g = 0; g < ix.generators.size(); ++g) {
    eq.pG_star(g) = -engine.generator_block(g).gain * eq.omega_star;
  }

  eq.Tbar_star.resize(ix.n_areas);
  eq.mu.resize(ix.n_areas);
  eq.pP_star = Eigen::VectorXd::Zero(ix.pumps.size());
  eq.hP_star = Eigen::VectorXd::Zero(ix.pumps.size());
  eq.hG_star.resize(ix.sources.size());
  for (int a = 0; a < ix.n_areas; ++a) {
    eq.Tbar_star(a) = eq.omega_star / m_of[a];
    eq.mu(a) = eq.omega_star / cop_of[a];
    const auto& pump_ref = area_pump(engine, a);
    const double pump_heat =
        area_heat_step(engine, a, loads) + source_cost_sum(engine, a) * eq.Tbar_star(a);
    eq.hP_star(pump_ref.pump) = pump_heat;
    eq.pP_star(pump_ref.pump) = pump_heat / cop_of[a];
  }
  for (size_t s = 0; s < ix.sources.size(); ++s) {
    eq.hG_star(s) = -engine.source_block(s).gain * eq.Tbar_star(ix.sources[s].area);
  }

  finish_solution(engine, loads, eq, opts);
  check_balances(engine, loads, eq);
  return eq;
}

QpSpec qp_electric_mode1(const Engine& engine, const Loads& loads) {
  const auto& ix = engine.index();
  const auto& system = engine.system();
  QpSpec spec;
  for (size_t g = 0; g < ix.generators.size(); ++g) {
    const auto& bus = system.buses[ix.generators[g].bus];
    spec.vars.push_back({"pG:" + bus.id, bus.generator->Q_e, +1.0});
  }
  for (const auto& p : ix.pumps) {
    const double a1 = std::get<PumpMode1>(system.pumps[p.pump].mode).a1;
    spec.vars.push_back({"pP:" + system.pumps[p.pump].bus, 1.0 / a1, -1.0});
  }
  for (const auto& bus : system.buses) {
    if (bus.damping > 0.0) {
      spec.vars.push_back({"pU:" + bus.id, 1.0 / bus.damping, -1.0});
    }
  }
  spec.rhs = loads.bus_p.sum();
  return spec;
}

QpSpec qp_heat_mode1(const Engine& engine, int area, const Loads& loads,
                     double pump_heat_total) {
  const auto& ix = engine.index();
  const auto& system = engine.system();
  QpSpec spec;
  for (size_t s = 0; s < ix.sources.size(); ++s) {
    if (ix.sources[s].area != area) continue;
    const auto& edge = system.areas[area].edges[ix.sources[s].edge];
    spec.vars.push_back({"hG:" + edge.id, edge.source->Q_h, +1.0});
  }
  spec.rhs = area_heat_step(engine, area, loads) - pump_heat_total;
  return spec;
}

QpSpec qp_mode2(const Engine& engine, const Loads& loads) {
  const auto& ix = engine.index();
  const auto& system = engine.system();
  QpSpec spec;
  for (size_t g = 0; g < ix.generators.size(); ++g) {
    const auto& bus = system.buses[ix.generators[g].bus];
    spec.vars.push_back({"pG:" + bus.id, bus.generator->Q_e, +1.0});
  }
  spec.rhs = loads.bus_p.sum();
  for (int a = 0; a < ix.n_areas; ++a) {
    const auto& pump = system.pumps[area_pump(engine, a).pump];
    const double cop = pump.cop;
    const double alpha = std::get<PumpMode2>(pump.mode).m / cop;
    for (size_t s = 0; s < ix.sources.size(); ++s) {
      if (ix.sources[s].area != a) continue;
      const auto& edge = system.areas[a].edges[ix.sources[s].edge];
      spec.vars.push_back({"hG:" + edge.id, alpha * edge.source->Q_h, 1.0 / cop});
    }
    spec.rhs += area_heat_step(engine, a, loads) / cop;
  }
  for (const auto& bus : system.buses) {
    if (bus.damping > 0.0) {
      spec.vars.push_back({"pU:" + bus.id, 1.0 / bus.damping, -1.0});
    }
  }
  return spec;
}

Eigen::VectorXd temperature_profile(const HeatArea& area, const Eigen::VectorXd& h_star,
                                    double Tbar_star) {
  const int n = area.state_dim();
  if (h_star.size() != n) {
    throw std::invalid_argument("temperature_profile: injection dimension mismatch");
  }
  if (std::abs(h_star.sum()) > 1e-9) {
    throw NumericError("temperature_profile: injections do not balance in area '" +
                       area.id + "' (sum " + std::to_string(h_star.sum()) + ")");
  }
  Eigen::MatrixXd M(n + 1, n);
  M.topRows(n) = area.A_h;
  M.bottomRows(1) = area.volumes.transpose() / area.total_volume;
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = h_star;
  rhs(n) = Tbar_star;
  const Eigen::VectorXd T = M.colPivHouseholderQr().solve(rhs);
  const double resid = (M * T - rhs).lpNorm<Eigen::Infinity>();
  if (resid > 1e-10) {
    throw NumericError("temperature_profile: anchored solve residual " +
                       std::to_string(resid) + " in area '" + area.id + "'");
  }
  return T;
}

Eigen::VectorXd equilibrium_state(const Engine& engine, const EquilibriumSolution& eq) {
  const auto& layout = engine.layout();
  const auto& ix = engine.index();
  if (eq.eta_star.size() != ix.n_lines) {
    throw std::invalid_argument("equilibrium_state needs a solution with solved flows");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.dim);
  for (int l = 0; l < ix.n_lines; ++l) x(layout.eta(l)) = eq.eta_star(l);
  for (size_t k = 0; k < layout.omega_bus.size(); ++k) {
    x(layout.omega_offset + static_cast<int>(k)) = eq.omega_star;
  }
  for (size_t g = 0; g < ix.generators.size(); ++g) {
    x(layout.gen(static_cast<int>(g))) =
        block_equilibrium_state(engine.generator_block(g), eq.omega_star);
  }
  int cursor = 0;
  for (int a = 0; a < ix.n_areas; ++a) {
    const int size = layout.area_blocks[a].size;
    x.segment(layout.area(a), size) = eq.T_star.segment(cursor, size);
    cursor += size;
  }
  for (size_t s = 0; s < ix.sources.size(); ++s) {
    x(layout.heat(static_cast<int>(s))) = block_equilibrium_state(
        engine.source_block(s), eq.Tbar_star(ix.sources[s].area));
  }
  return x;
}

}  // namespace chpsim
