#include "chpsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>

namespace chpsim {

LtiBlock make_block(const GeneratorSpec& g) {
  return {g.tau_e, 1.0 / g.Q_e, g.block == BlockKind::lead_lag ? g.alpha : 0.0};
}

LtiBlock make_block(const HeatSourceSpec& h) {
  return {h.tau_h, 1.0 / h.Q_h, h.block == BlockKind::lead_lag ? h.alpha : 0.0};
}

double block_output(const LtiBlock& b, double x, double u) {
  return x - b.gain * b.alpha * u;
}

double block_xdot(const LtiBlock& b, double x, double u) {
  return (-x - b.gain * (1.0 - b.alpha) * u) / b.tau;
}

double block_equilibrium_state(const LtiBlock& b, double u_star) {
  return -b.gain * (1.0 - b.alpha) * u_star;
}

// With deviations u~ = u - u*, x~ = x - x*, y~ = x~ - gain*alpha*u~ and
// storage V = 1/2 * w * x~^2, the choice w = tau / (gain*(1+alpha)) gives
//
//   Vdot + u~ y~ = -[x~ u~] P [x~ u~]^T,
//   P = [ 1/(gain*(1+alpha))   -alpha/(1+alpha) ]
//       [ -alpha/(1+alpha)       gain*alpha     ]
//
// det P = alpha/(1+alpha)^2 >= 0 and trace P > 0, so P is positive
// semidefinite for every alpha >= 0 and Vdot <= -u~ y~: the block is
// passive from -u to y with this quadratic storage.  At alpha = 0 it
// reduces to the familiar 1/2 * (tau/gain) * (y - y*)^2 of the plain lag.
double block_storage_weight(const LtiBlock& b) {
  return b.tau / (b.gain * (1.0 + b.alpha));
}

double passivity_margin(const LtiBlock& b, std::span<const double> freq_grid) {
  if (freq_grid.empty()) throw std::invalid_argument("passivity_margin: empty grid");
  double margin = std::numeric_limits<double>::infinity();
  for (double nu : freq_grid) {
    const std::complex<double> s(0.0, nu);
    const std::complex<double> g =
        b.gain * (1.0 + b.alpha * b.tau * s) / (1.0 + b.tau * s);
    margin = std::min(margin, g.real());
  }
  return margin;
}

std::vector<double> DisturbanceSchedule::event_times_after(double t0) const {
  std::set<double> times;
  for (const auto& s : steps) {
    if (s.time > t0) times.insert(s.time);
  }
  return {times.begin(), times.end()};
}

double DisturbanceSchedule::last_event_time(double fallback) const {
  double last = fallback;
  for (const auto& s : steps) last = std::max(last, s.time);
  return last;
}

Engine::Engine(const CombinedSystem& system) : system_(&system), ix_(index_system(system)) {
  layout_.n_eta = ix_.n_lines;
  layout_.omega_offset = layout_.n_eta;
  layout_.bus_omega.assign(ix_.n_buses, -1);
  for (int i = 0; i < ix_.n_buses; ++i) {
    if (system.buses[i].inertia > 0.0) {
      layout_.bus_omega[i] = layout_.omega_offset + static_cast<int>(layout_.omega_bus.size());
      layout_.omega_bus.push_back(i);
    }
  }
  layout_.gen_offset = layout_.omega_offset + static_cast<int>(layout_.omega_bus.size());
  int cursor = layout_.gen_offset + static_cast<int>(ix_.generators.size());
  for (int a = 0; a < ix_.n_areas; ++a) {
    const int size = system.areas[a].state_dim();
    if (system.areas[a].A_h.rows() != size) {
      throw ValidationError("area '" + system.areas[a].id + "' is not finalized");
    }
    layout_.area_blocks.push_back({cursor, size});
    cursor += size;
  }
  layout_.heat_offset = cursor;
  layout_.dim = cursor + static_cast<int>(ix_.sources.size());

  for (const auto& g : ix_.generators) {
    gen_blocks_.push_back(make_block(*system.buses[g.bus].generator));
  }
  for (const auto& s : ix_.sources) {
    src_blocks_.push_back(make_block(*system.areas[s.area].edges[s.edge].source));
  }
  for (const auto& area : system.areas) {
    inv_volumes_.push_back(area.volumes.cwiseInverse());
  }
}

Eigen::VectorXd Engine::initial_state() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout_.dim);
  for (int l = 0; l < ix_.n_lines; ++l) x(layout_.eta(l)) = system_->lines[l].eta0;
  return x;
}

Loads Engine::zero_loads() const {
  return {Eigen::VectorXd::Zero(ix_.n_buses), Eigen::VectorXd::Zero(ix_.n_edges)};
}

Loads Engine::base_loads() const {
  Loads loads = zero_loads();
  for (int a = 0; a < ix_.n_areas; ++a) {
    const auto& area = system_->areas[a];
    for (int j = 0; j < static_cast<int>(area.edges.size()); ++j) {
      if (area.edges[j].role == EdgeRole::load) {
        loads.edge_h(ix_.area_edge_offset[a] + j) = area.edges[j].load_base;
      }
    }
  }
  return loads;
}

Loads Engine::loads_at(const DisturbanceSchedule& schedule, double t) const {
  Loads loads = base_loads();
  for (const auto& s : schedule.steps) {
    if (s.time > t) continue;
    if (s.on_bus) {
      loads.bus_p(s.index) += s.delta;
    } else {
      loads.edge_h(s.index) += s.delta;
    }
  }
  return loads;
}

Eigen::VectorXd Engine::line_flows(const Eigen::VectorXd& x) const {
  Eigen::VectorXd flows(ix_.n_lines);
  for (int l = 0; l < ix_.n_lines; ++l) {
    flows(l) = system_->lines[l].susceptance * std::sin(x(layout_.eta(l)));
  }
  return flows;
}

double Engine::area_alpha(int area) const {
  const SystemIndex::PumpRef* found = nullptr;
  for (const auto& p : ix_.pumps) {
    if (p.area != area || !p.mode2) continue;
    if (found != nullptr) {
      throw ValidationError("area '" + system_->areas[area].id +
                            "' has more than one mode-2 pump; the thermal weight m/C_o "
                            "is defined for a single pump per area");
    }
    found = &p;
  }
  if (found == nullptr) {
    throw ValidationError("area '" + system_->areas[area].id + "' has no mode-2 pump");
  }
  const auto& pump = system_->pumps[found->pump];
  return std::get<PumpMode2>(pump.mode).m / pump.cop;
}

struct Engine::Core {
  Eigen::VectorXd flows;
  Eigen::VectorXd net;
  Eigen::VectorXd Tbar;
  Eigen::VectorXd omega;
  Eigen::VectorXd gen_p;
  Eigen::VectorXd src_h;
  Eigen::VectorXd pump_p;
  Eigen::VectorXd pump_h;
};

Engine::Core Engine::core(const Eigen::VectorXd& x, const Loads& loads) const {
  if (x.size() != layout_.dim) throw std::invalid_argument("state dimension mismatch");
  if (loads.bus_p.size() != ix_.n_buses || loads.edge_h.size() != ix_.n_edges) {
    throw std::invalid_argument("loads dimension mismatch");
  }
  Core c;
  c.flows = line_flows(x);

  c.net = Eigen::VectorXd::Zero(ix_.n_buses);
  for (int j = 0; j < ix_.n_buses; ++j) {
    for (const auto& end : ix_.bus_lines[j]) c.net(j) += end.sign * c.flows(end.line);
  }

  c.Tbar.resize(ix_.n_areas);
  for (int a = 0; a < ix_.n_areas; ++a) {
    c.Tbar(a) = system_->areas[a].volumes.dot(
                    x.segment(layout_.area(a), layout_.area_blocks[a].size)) /
                system_->areas[a].total_volume;
  }

  c.omega.resize(ix_.n_buses);
  for (int j = 0; j < ix_.n_buses; ++j) {
    const PowerBus& bus = system_->buses[j];
    const int slot = layout_.bus_omega[j];
    if (slot >= 0) {
      c.omega(j) = x(slot);
      continue;
    }
    if (bus.kind == BusKind::pump_converter) {
      const auto& pump = system_->pumps[ix_.pump_at_bus[j]];
      const int a = ix_.pumps[ix_.pump_at_bus[j]].area;
      c.omega(j) = std::get<PumpMode2>(pump.mode).m * c.Tbar(a);
      continue;
    }
    // Zero-inertia bus: solve the bus power balance for omega.  A mode-1
    // pump adds a1 to the effective damping.
    double denom = bus.damping;
    if (const int p = ix_.pump_at_bus[j]; p >= 0 && !ix_.pumps[p].mode2) {
      denom += std::get<PumpMode1>(system_->pumps[p].mode).a1;
    }
    c.omega(j) = (c.net(j) - loads.bus_p(j)) / denom;
  }

  c.gen_p.resize(ix_.generators.size());
  for (size_t g = 0; g < ix_.generators.size(); ++g) {
    c.gen_p(g) = block_output(gen_blocks_[g], x(layout_.gen(static_cast<int>(g))),
                              c.omega(ix_.generators[g].bus));
  }

  c.src_h.resize(ix_.sources.size());
  for (size_t s = 0; s < ix_.sources.size(); ++s) {
    c.src_h(s) = block_output(src_blocks_[s], x(layout_.heat(static_cast<int>(s))),
                              c.Tbar(ix_.sources[s].area));
  }

  c.pump_p.resize(ix_.pumps.size());
  c.pump_h.resize(ix_.pumps.size());
  for (size_t p = 0; p < ix_.pumps.size(); ++p) {
    const auto& ref = ix_.pumps[p];
    const auto& pump = system_->pumps[ref.pump];
    if (ref.mode2) {
      c.pump_p(p) = c.net(ref.bus);
    } else {
      c.pump_p(p) = std::get<PumpMode1>(pump.mode).a1 * c.omega(ref.bus);
    }
    c.pump_h(p) = pump.cop * c.pump_p(p);
  }
  return c;
}

Eigen::VectorXd Engine::algebraic_frequencies(const Eigen::VectorXd& x,
                                              const Loads& loads) const {
  return core(x, loads).omega;
}

std::pair<double, double> Engine::pump_power(const Eigen::VectorXd& x, int pump,
                                             const Loads& loads) const {
  Core c = core(x, loads);
  return {c.pump_p(pump), c.pump_h(pump)};
}

Eigen::VectorXd Engine::heat_injection(int area, const Eigen::VectorXd& x,
                                       const Loads& loads) const {
  Core c = core(x, loads);
  const auto& a = system_->areas[area];
  Eigen::VectorXd h = Eigen::VectorXd::Zero(a.state_dim());
  for (size_t s = 0; s < ix_.sources.size(); ++s) {
    if (ix_.sources[s].area == area) h(ix_.sources[s].edge) += c.src_h(s);
  }
  for (size_t p = 0; p < ix_.pumps.size(); ++p) {
    if (ix_.pumps[p].area == area) h(ix_.pumps[p].edge) += c.pump_h(p);
  }
  for (int j = 0; j < static_cast<int>(a.edges.size()); ++j) {
    if (a.edges[j].role == EdgeRole::load) {
      h(j) -= loads.edge_h(ix_.area_edge_offset[area] + j);
    }
  }
  return h;
}

Eigen::VectorXd Engine::rhs(const Eigen::VectorXd& x, const Loads& loads) const {
  Core c = core(x, loads);
  Eigen::VectorXd dx(layout_.dim);

  for (int l = 0; l < ix_.n_lines; ++l) {
    dx(layout_.eta(l)) = c.omega(ix_.line_from[l]) - c.omega(ix_.line_to[l]);
  }

  for (size_t k = 0; k < layout_.omega_bus.size(); ++k) {
    const int j = layout_.omega_bus[k];
    const PowerBus& bus = system_->buses[j];
    double power = -loads.bus_p(j) - bus.damping * c.omega(j) + c.net(j);
    if (const int p = ix_.pump_at_bus[j]; p >= 0) power -= c.pump_p(p);
    for (size_t g = 0; g < ix_.generators.size(); ++g) {
      if (ix_.generators[g].bus == j) power += c.gen_p(g);
    }
    dx(layout_.omega_offset + static_cast<int>(k)) = power / bus.inertia;
  }

  for (size_t g = 0; g < ix_.generators.size(); ++g) {
    dx(layout_.gen(static_cast<int>(g))) =
        block_xdot(gen_blocks_[g], x(layout_.gen(static_cast<int>(g))),
                   c.omega(ix_.generators[g].bus));
  }

  for (int a = 0; a < ix_.n_areas; ++a) {
    const auto& area = system_->areas[a];
    Eigen::VectorXd h = Eigen::VectorXd::Zero(area.state_dim());
    for (size_t s = 0; s < ix_.sources.size(); ++s) {
      if (ix_.sources[s].area == a) h(ix_.sources[s].edge) += c.src_h(s);
    }
    for (size_t p = 0; p < ix_.pumps.size(); ++p) {
      if (ix_.pumps[p].area == a) h(ix_.pumps[p].edge) += c.pump_h(p);
    }
    for (int j = 0; j < static_cast<int>(area.edges.size()); ++j) {
      if (area.edges[j].role == EdgeRole::load) {
        h(j) -= loads.edge_h(ix_.area_edge_offset[a] + j);
      }
    }
    const auto T = x.segment(layout_.area(a), layout_.area_blocks[a].size);
    dx.segment(layout_.area(a), layout_.area_blocks[a].size) =
        inv_volumes_[a].cwiseProduct(h - area.A_h * T);
  }

  for (size_t s = 0; s < ix_.sources.size(); ++s) {
    dx(layout_.heat(static_cast<int>(s))) =
        block_xdot(src_blocks_[s], x(layout_.heat(static_cast<int>(s))),
                   c.Tbar(ix_.sources[s].area));
  }
  return dx;
}

Eigen::VectorXd Engine::rhs_extended(const Eigen::VectorXd& xe, const Loads& loads) const {
  if (xe.size() != extended_dim()) {
    throw std::invalid_argument("extended state dimension mismatch");
  }
  const Eigen::VectorXd x = xe.head(layout_.dim);
  Eigen::VectorXd dxe(extended_dim());
  dxe.head(layout_.dim) = rhs(x, loads);
  for (int a = 0; a < ix_.n_areas; ++a) {
    dxe(layout_.dim + a) = heat_injection(a, x, loads).sum();
  }
  return dxe;
}

AlgebraicOutputs Engine::outputs(const Eigen::VectorXd& x, const Loads& loads) const {
  Core c = core(x, loads);
  AlgebraicOutputs out;
  out.omega = std::move(c.omega);
  out.flows = std::move(c.flows);
  out.gen_p = std::move(c.gen_p);
  out.source_h = std::move(c.src_h);
  out.pump_p = std::move(c.pump_p);
  out.pump_h = std::move(c.pump_h);
  out.Tbar = std::move(c.Tbar);
  out.security = false;
  for (int l = 0; l < ix_.n_lines; ++l) {
    if (std::abs(x(layout_.eta(l))) >= std::numbers::pi / 2.0) out.security = true;
  }
  return out;
}

}  // namespace chpsim
