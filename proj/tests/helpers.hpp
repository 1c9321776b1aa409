#pragma once

#include "chpsim/dynamics.hpp"
#include "chpsim/netmodel.hpp"

#include <algorithm>
#include <random>
#include <string>

/// Shared builders for the test binaries: the two-bus reference system in
/// both pump modes, and seeded random systems whose heating areas conserve
/// mass by construction.
namespace chpsim::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(CHPSIM_FIXTURE_DIR) + "/" + name;
}

/// Two buses joined by one line; a three-edge ring heating area whose pump
/// edge is driven from the second bus.  Matches the bundled fixture files.
inline CombinedSystem two_bus_system(bool converter) {
  CombinedSystem s;
  PowerBus bus1;
  bus1.id = "bus1";
  bus1.kind = BusKind::generator;
  bus1.inertia = 10.0;
  bus1.damping = 1.0;
  bus1.generator = GeneratorSpec{1.0, 1.0, BlockKind::first_order, 1.0};
  PowerBus bus2;
  bus2.id = "bus2";
  if (converter) {
    bus2.kind = BusKind::pump_converter;
  } else {
    bus2.kind = BusKind::pump_mode1;
    bus2.damping = 1.0;
  }
  s.buses = {bus1, bus2};
  s.lines = {{"bus1", "bus2", 5.0, 0.0}};

  HeatArea area;
  area.id = "ring3";
  area.nodes = {{"n1", 1.0}, {"n2", 1.0}, {"n3", 1.0}};
  HeatEdge e1{"e1", "n3", "n1", 1.0, 1.0, EdgeRole::pump, std::nullopt, 0.0};
  HeatEdge e2{"e2", "n1", "n2", 1.0, 1.0, EdgeRole::source,
              HeatSourceSpec{1.0, 1.0, BlockKind::first_order, 1.0}, 0.0};
  HeatEdge e3{"e3", "n2", "n3", 1.0, 1.0, EdgeRole::load, std::nullopt, 0.0};
  area.edges = {e1, e2, e3};
  s.areas = {area};

  PumpCoupling pump;
  pump.bus = "bus2";
  pump.area = "ring3";
  pump.edge = "e1";
  pump.cop = 3.0;
  if (converter) {
    pump.mode = PumpMode2{1.0};
  } else {
    pump.mode = PumpMode1{1.0};
  }
  s.pumps = {pump};
  return s;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Ring of nodes with one edge per hop, plus up to two antiparallel chord
/// pairs; per-node flow conservation holds by construction.  Exactly one
/// pump edge when `with_pump`, one or two source edges, one load edge.
inline HeatArea random_area(std::mt19937_64& rng, const std::string& id, bool with_pump) {
  HeatArea area;
  area.id = id;
  const int n = uniform_int(rng, 3, 6);
  for (int i = 0; i < n; ++i) {
    area.nodes.push_back({id + "_n" + std::to_string(i), uniform(rng, 0.5, 2.0)});
  }
  const double q0 = uniform(rng, 0.5, 2.0);
  for (int i = 0; i < n; ++i) {
    HeatEdge e;
    e.id = id + "_e" + std::to_string(i);
    e.from = area.nodes[i].id;
    e.to = area.nodes[(i + 1) % n].id;
    e.volume = uniform(rng, 0.5, 2.0);
    e.flow = q0;
    e.role = EdgeRole::pipe;
    area.edges.push_back(e);
  }
  const int n_chord_pairs = uniform_int(rng, 0, 2);
  for (int c = 0; c < n_chord_pairs; ++c) {
    const int i = uniform_int(rng, 0, n - 1);
    int j = uniform_int(rng, 0, n - 1);
    if (j == i) j = (i + 1) % n;
    const double qc = uniform(rng, 0.3, 1.0);
    for (int dir = 0; dir < 2; ++dir) {
      HeatEdge e;
      e.id = id + "_c" + std::to_string(c) + (dir ? "b" : "a");
      e.from = area.nodes[dir ? j : i].id;
      e.to = area.nodes[dir ? i : j].id;
      e.volume = uniform(rng, 0.5, 2.0);
      e.flow = qc;
      e.role = EdgeRole::pipe;
      area.edges.push_back(e);
    }
  }
  size_t next = 0;
  if (with_pump) {
    area.edges[next++].role = EdgeRole::pump;
  }
  const int max_sources = static_cast<int>(area.edges.size() - next) - 1;
  const int n_sources = std::min(uniform_int(rng, 1, 2), max_sources);
  for (int k = 0; k < n_sources; ++k) {
    HeatEdge& e = area.edges[next++];
    e.role = EdgeRole::source;
    const bool lead = uniform_int(rng, 0, 1) == 1;
    e.source = HeatSourceSpec{uniform(rng, 0.3, 1.5), uniform(rng, 0.5, 3.0),
                              lead ? BlockKind::lead_lag : BlockKind::first_order,
                              lead ? uniform(rng, 0.2, 1.8) : 1.0};
  }
  area.edges[next].role = EdgeRole::load;
  return area;
}

/// Chain of buses with one closing chord when long enough.  Bus 0 always
/// carries a generator; the final `n_pumps` buses carry the pump couplings.
/// `converter` selects the pump mode for every pump.
inline CombinedSystem random_system(std::mt19937_64& rng, bool converter) {
  CombinedSystem s;
  const int n_pumps = uniform_int(rng, 1, 2);
  const int n_mid = uniform_int(rng, 1, 3);
  const int n_gens = uniform_int(rng, 1, 2);
  int idx = 0;
  for (int g = 0; g < n_gens; ++g) {
    PowerBus b;
    b.id = "g" + std::to_string(idx++);
    b.kind = BusKind::generator;
    b.inertia = uniform(rng, 2.0, 10.0);
    b.damping = uniform(rng, 0.2, 1.5);
    const bool lead = uniform_int(rng, 0, 1) == 1;
    b.generator = GeneratorSpec{uniform(rng, 0.3, 1.5), uniform(rng, 0.5, 3.0),
                                lead ? BlockKind::lead_lag : BlockKind::first_order,
                                lead ? uniform(rng, 0.2, 1.8) : 1.0};
    s.buses.push_back(b);
  }
  for (int m = 0; m < n_mid; ++m) {
    PowerBus b;
    b.id = "l" + std::to_string(idx++);
    b.kind = BusKind::load;
    b.inertia = uniform_int(rng, 0, 1) == 1 ? uniform(rng, 1.0, 5.0) : 0.0;
    b.damping = uniform(rng, 0.3, 2.0);
    s.buses.push_back(b);
  }
  for (int p = 0; p < n_pumps; ++p) {
    PowerBus b;
    b.id = "p" + std::to_string(idx++);
    if (converter) {
      b.kind = BusKind::pump_converter;
    } else {
      b.kind = BusKind::pump_mode1;
      b.damping = uniform(rng, 0.1, 1.0);
    }
    s.buses.push_back(b);
  }
  const int n_buses = static_cast<int>(s.buses.size());
  for (int i = 0; i + 1 < n_buses; ++i) {
    s.lines.push_back({s.buses[i].id, s.buses[i + 1].id, uniform(rng, 2.0, 8.0), 0.0});
  }
  if (n_buses >= 4) {
    s.lines.push_back({s.buses[0].id, s.buses[n_buses - 1].id, uniform(rng, 2.0, 8.0), 0.0});
  }
  for (int p = 0; p < n_pumps; ++p) {
    const std::string area_id = "h" + std::to_string(p);
    HeatArea area = random_area(rng, area_id, true);
    s.areas.push_back(area);
    PumpCoupling pump;
    pump.bus = s.buses[static_cast<size_t>(n_buses - n_pumps + p)].id;
    pump.area = area_id;
    for (const HeatEdge& e : s.areas.back().edges) {
      if (e.role == EdgeRole::pump) pump.edge = e.id;
    }
    pump.cop = uniform(rng, 1.5, 3.5);
    if (converter) {
      pump.mode = PumpMode2{uniform(rng, 0.2, 1.0)};
    } else {
      pump.mode = PumpMode1{uniform(rng, 0.3, 1.2)};
    }
    s.pumps.push_back(pump);
  }
  return s;
}

/// Random step loads: electric steps on a few buses (never converters),
/// heat steps on every load edge.
inline Loads random_loads(std::mt19937_64& rng, const Engine& engine) {
  const CombinedSystem& s = engine.system();
  Loads loads = engine.zero_loads();
  for (int b = 0; b < static_cast<int>(s.buses.size()); ++b) {
    if (s.buses[b].kind == BusKind::pump_converter) continue;
    if (uniform_int(rng, 0, 1) == 1) loads.bus_p(b) = uniform(rng, -0.5, 0.5);
  }
  if (loads.bus_p.isZero()) loads.bus_p(0) = 0.3;
  int offset = 0;
  for (const HeatArea& area : s.areas) {
    for (size_t e = 0; e < area.edges.size(); ++e) {
      if (area.edges[e].role == EdgeRole::load) {
        loads.edge_h(offset + static_cast<int>(e)) = uniform(rng, -0.3, 0.3);
      }
    }
    offset += static_cast<int>(area.edges.size());
  }
  return loads;
}

}  // namespace chpsim::testing
