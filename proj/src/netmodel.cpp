#include "chpsim/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace chpsim {

namespace {

// Flow imbalance below this (relative to the flow magnitude at the node)
// counts as conserved.
constexpr double kFlowTol = 1e-12;

std::map<std::string, int> index_by_id(const std::vector<HeatNode>& nodes) {
  std::map<std::string, int> out;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) out[nodes[i].id] = i;
  return out;
}

}  // namespace

std::string render(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& v : report.violations) os << "error " << v.code << ": " << v.message << "\n";
  return os.str();
}

void build_incidence(HeatArea& area) {
  const int n = static_cast<int>(area.nodes.size());
  const int e = static_cast<int>(area.edges.size());
  auto node_of = index_by_id(area.nodes);

  area.B_h = Eigen::MatrixXd::Zero(n, e);
  for (int j = 0; j < e; ++j) {
    const HeatEdge& edge = area.edges[j];
    auto from = node_of.find(edge.from);
    auto to = node_of.find(edge.to);
    if (from == node_of.end() || to == node_of.end()) {
      throw ValidationError("area '" + area.id + "': edge '" + edge.id +
                            "' references a node that does not exist");
    }
    area.B_h(to->second, j) += 1.0;
    area.B_h(from->second, j) -= 1.0;
  }
  area.B_th = (area.B_h.cwiseAbs() + area.B_h) / 2.0;
  area.B_sh = (area.B_h.cwiseAbs() - area.B_h) / 2.0;
}

void build_Ah(HeatArea& area) {
  const int n = static_cast<int>(area.nodes.size());
  const int e = static_cast<int>(area.edges.size());
  if (area.B_h.rows() != n || area.B_h.cols() != e) {
    throw ValidationError("area '" + area.id + "': incidence not built");
  }

  Eigen::VectorXd q(e);
  for (int j = 0; j < e; ++j) q(j) = area.edges[j].flow;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(e + n, e + n);
  A.topLeftCorner(e, e) = q.asDiagonal();
  A.topRightCorner(e, n) = -(q.asDiagonal() * area.B_sh.transpose());
  A.bottomLeftCorner(n, e) = -(area.B_th * q.asDiagonal());
  A.bottomRightCorner(n, n) = Eigen::MatrixXd((area.B_th * q).asDiagonal());
  area.A_h = std::move(A);

  area.volumes.resize(e + n);
  for (int j = 0; j < e; ++j) area.volumes(j) = area.edges[j].volume;
  for (int k = 0; k < n; ++k) area.volumes(e + k) = area.nodes[k].volume;
  area.total_volume = area.volumes.sum();
}

void finalize(CombinedSystem& system) {
  for (auto& area : system.areas) {
    build_incidence(area);
    build_Ah(area);
  }
}

double average_temperature(const HeatArea& area, const Eigen::VectorXd& T) {
  if (T.size() != area.state_dim() || area.volumes.size() != area.state_dim()) {
    throw std::invalid_argument("average_temperature: dimension mismatch for area '" +
                                area.id + "'");
  }
  return area.volumes.dot(T) / area.total_volume;
}

SystemMode system_mode(const CombinedSystem& system) {
  bool any1 = false;
  bool any2 = false;
  for (const auto& p : system.pumps) {
    if (std::holds_alternative<PumpMode1>(p.mode)) any1 = true;
    if (std::holds_alternative<PumpMode2>(p.mode)) any2 = true;
  }
  if (any1 && any2) return SystemMode::mixed;
  if (any1) return SystemMode::mode1;
  if (any2) return SystemMode::mode2;
  return SystemMode::none;
}

namespace {

void check_buses(const CombinedSystem& s, std::vector<Violation>& out) {
  std::set<std::string> seen;
  for (const auto& b : s.buses) {
    if (!seen.insert(b.id).second) {
      out.push_back({"bus.duplicate-id", "duplicate bus id '" + b.id + "'"});
    }
    if (b.inertia < 0.0) {
      out.push_back({"bus.negative-inertia", "bus '" + b.id + "' has M < 0"});
    }
    if (b.damping < 0.0) {
      out.push_back({"bus.negative-damping", "bus '" + b.id + "' has D < 0"});
    }
    const bool converter = b.kind == BusKind::pump_converter;
    if (converter) {
      if (b.inertia != 0.0 || b.damping != 0.0) {
        out.push_back({"bus.converter-dynamics",
                       "converter bus '" + b.id + "' must have M = 0 and D = 0"});
      }
      if (b.generator) {
        out.push_back({"bus.converter-generator",
                       "converter bus '" + b.id + "' cannot host a generator"});
      }
    } else if (b.inertia <= 0.0 && b.damping <= 0.0) {
      out.push_back({"bus.underdetermined",
                     "bus '" + b.id +
                         "' is algebraically underdetermined: M = 0 and D = 0 on a "
                         "non-converter bus"});
    }
    if (b.generator) {
      if (b.kind == BusKind::load || converter) {
        out.push_back({"bus.kind-generator",
                       "bus '" + b.id + "' hosts a generator but is not a generator or "
                                        "mode-1 pump bus"});
      }
      if (b.inertia <= 0.0) {
        out.push_back({"bus.generator-inertia",
                       "generator-hosting bus '" + b.id + "' must have M > 0"});
      }
      if (b.generator->tau_e <= 0.0 || b.generator->Q_e <= 0.0) {
        out.push_back({"bus.generator-params",
                       "generator at bus '" + b.id + "' needs tau_e > 0 and Q_e > 0"});
      }
      if (b.generator->block == BlockKind::lead_lag && b.generator->alpha <= 0.0) {
        out.push_back({"bus.generator-params",
                       "lead-lag generator at bus '" + b.id + "' needs alpha > 0"});
      }
    } else if (b.kind == BusKind::generator) {
      out.push_back({"bus.kind-generator",
                     "bus '" + b.id + "' is marked generator but hosts none"});
    }
  }
}

void check_lines(const CombinedSystem& s, const std::map<std::string, int>& bus_of,
                 std::vector<Violation>& out) {
  for (size_t l = 0; l < s.lines.size(); ++l) {
    const auto& line = s.lines[l];
    const std::string label = "line " + std::to_string(l) + " (" + line.from + " -> " +
                              line.to + ")";
    if (!bus_of.count(line.from) || !bus_of.count(line.to)) {
      out.push_back({"line.bad-endpoint", label + " references a missing bus"});
      continue;
    }
    if (line.from == line.to) {
      out.push_back({"line.self-loop", label + " is a self loop"});
    }
    if (line.susceptance <= 0.0) {
      out.push_back({"line.bad-susceptance", label + " needs B > 0"});
    }
    if (std::abs(line.eta0) >= std::numbers::pi / 2.0) {
      out.push_back({"line.initial-angle", label + " needs |eta0| < pi/2"});
    }
  }
}

void check_power_connectivity(const CombinedSystem& s,
                              const std::map<std::string, int>& bus_of,
                              std::vector<Violation>& out) {
  if (s.buses.empty()) {
    out.push_back({"power.empty", "system has no buses"});
    return;
  }
  std::vector<std::vector<int>> adj(s.buses.size());
  for (const auto& line : s.lines) {
    auto a = bus_of.find(line.from);
    auto b = bus_of.find(line.to);
    if (a == bus_of.end() || b == bus_of.end()) continue;
    adj[a->second].push_back(b->second);
    adj[b->second].push_back(a->second);
  }
  std::vector<bool> seen(s.buses.size(), false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  for (size_t j = 0; j < seen.size(); ++j) {
    if (!seen[j]) {
      out.push_back({"power.disconnected",
                     "bus '" + s.buses[j].id + "' is not connected to bus '" +
                         s.buses[0].id + "'"});
    }
  }
}

void check_area(const HeatArea& area, std::vector<Violation>& out) {
  auto node_of = index_by_id(area.nodes);
  std::set<std::string> edge_ids;
  if (area.nodes.empty() || area.edges.empty()) {
    out.push_back({"area.empty", "area '" + area.id + "' needs nodes and edges"});
    return;
  }
  for (const auto& n : area.nodes) {
    if (n.volume <= 0.0) {
      out.push_back({"area.bad-volume",
                     "node '" + n.id + "' in area '" + area.id + "' needs volume > 0"});
    }
  }
  if (node_of.size() != area.nodes.size()) {
    out.push_back({"area.duplicate-id", "area '" + area.id + "' has duplicate node ids"});
  }

  int n_sources = 0;
  bool refs_ok = true;
  for (const auto& e : area.edges) {
    const std::string label = "edge '" + e.id + "' in area '" + area.id + "'";
    if (!edge_ids.insert(e.id).second) {
      out.push_back({"area.duplicate-id", "duplicate " + label});
    }
    if (!node_of.count(e.from) || !node_of.count(e.to)) {
      out.push_back({"area.bad-endpoint", label + " references a missing node"});
      refs_ok = false;
    }
    if (e.volume <= 0.0) out.push_back({"area.bad-volume", label + " needs volume > 0"});
    if (e.flow <= 0.0) out.push_back({"area.bad-flow", label + " needs flow > 0"});
    if ((e.role == EdgeRole::source) != e.source.has_value()) {
      out.push_back({"area.source-spec",
                     label + " must carry a source spec exactly when its role is source"});
    }
    if (e.source) {
      if (e.source->tau_h <= 0.0 || e.source->Q_h <= 0.0) {
        out.push_back({"area.source-params", label + " needs tau_h > 0 and Q_h > 0"});
      }
      if (e.source->block == BlockKind::lead_lag && e.source->alpha <= 0.0) {
        out.push_back({"area.source-params", label + " needs alpha > 0"});
      }
    }
    if (e.role != EdgeRole::load && e.load_base != 0.0) {
      out.push_back({"area.load-base", label + " carries load_base but is not a load"});
    }
    if (e.role == EdgeRole::source) ++n_sources;
  }
  if (n_sources == 0) {
    out.push_back({"area.no-source",
                   "area '" + area.id + "' has no heat source edge; its average "
                                        "temperature cannot rebalance"});
  }
  if (!refs_ok) return;

  // Connectivity over the undirected node graph.
  std::vector<std::vector<int>> adj(area.nodes.size());
  for (const auto& e : area.edges) {
    int a = node_of[e.from];
    int b = node_of[e.to];
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(area.nodes.size(), false);
  std::vector<int> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
  }
  for (size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      out.push_back({"area.disconnected",
                     "node '" + area.nodes[k].id + "' in area '" + area.id +
                         "' is not connected to node '" + area.nodes[0].id + "'"});
    }
  }

  // Mass-flow conservation node by node.
  for (size_t k = 0; k < area.nodes.size(); ++k) {
    double in = 0.0;
    double through = 0.0;
    for (const auto& e : area.edges) {
      if (node_of[e.to] == static_cast<int>(k)) in += e.flow;
      if (node_of[e.from] == static_cast<int>(k)) in -= e.flow;
      if (node_of[e.to] == static_cast<int>(k) || node_of[e.from] == static_cast<int>(k)) {
        through += std::abs(e.flow);
      }
    }
    if (std::abs(in) > kFlowTol * std::max(1.0, through)) {
      out.push_back({"area.flow-conservation",
                     "mass flow is not conserved at node '" + area.nodes[k].id +
                         "' in area '" + area.id + "' (imbalance " + std::to_string(in) +
                         ")"});
    }
  }
}

void check_pumps(const CombinedSystem& s, const std::map<std::string, int>& bus_of,
                 std::vector<Violation>& out) {
  std::map<std::string, int> area_of;
  for (int a = 0; a < static_cast<int>(s.areas.size()); ++a) area_of[s.areas[a].id] = a;

  std::set<std::string> used_buses;
  std::set<std::pair<std::string, std::string>> used_edges;
  std::map<std::string, double> area_m;  // mode-2 m per area

  for (size_t p = 0; p < s.pumps.size(); ++p) {
    const auto& pump = s.pumps[p];
    const std::string label = "pump coupling " + std::to_string(p) + " (bus '" +
                              pump.bus + "')";
    if (pump.cop <= 0.0) {
      out.push_back({"pump.bad-cop", label + " needs C_o > 0"});
    }
    auto bus_it = bus_of.find(pump.bus);
    if (bus_it == bus_of.end()) {
      out.push_back({"pump.bad-bus", label + " references a missing bus"});
    } else {
      const PowerBus& bus = s.buses[bus_it->second];
      if (std::holds_alternative<PumpMode1>(pump.mode)) {
        if (bus.kind != BusKind::pump_mode1) {
          out.push_back({"pump.kind-mismatch",
                         label + " is mode 1 but bus '" + bus.id +
                             "' is not a mode-1 pump bus"});
        }
        if (std::get<PumpMode1>(pump.mode).a1 <= 0.0) {
          out.push_back({"pump.bad-gain", label + " needs a1 > 0"});
        }
      } else {
        if (bus.kind != BusKind::pump_converter) {
          out.push_back({"pump.kind-mismatch",
                         label + " is mode 2 but bus '" + bus.id +
                             "' is not a converter bus"});
        }
        if (std::get<PumpMode2>(pump.mode).m <= 0.0) {
          out.push_back({"pump.bad-gain", label + " needs m > 0"});
        }
      }
      if (!used_buses.insert(pump.bus).second) {
        out.push_back({"pump.duplicate-bus",
                       "bus '" + pump.bus + "' is referenced by more than one pump"});
      }
    }
    auto area_it = area_of.find(pump.area);
    if (area_it == area_of.end()) {
      out.push_back({"pump.bad-area", label + " references a missing area"});
      continue;
    }
    const HeatArea& area = s.areas[area_it->second];
    const HeatEdge* edge = nullptr;
    for (const auto& e : area.edges)
      if (e.id == pump.edge) edge = &e;
    if (edge == nullptr) {
      out.push_back({"pump.bad-edge",
                     label + " references edge '" + pump.edge + "' missing from area '" +
                         pump.area + "'"});
      continue;
    }
    if (edge->role != EdgeRole::pump) {
      out.push_back({"pump.edge-role",
                     label + " targets edge '" + pump.edge + "' whose role is not pump"});
    }
    if (!used_edges.insert({pump.area, pump.edge}).second) {
      out.push_back({"pump.duplicate-edge",
                     "edge '" + pump.edge + "' in area '" + pump.area +
                         "' is driven by more than one pump"});
    }
    if (std::holds_alternative<PumpMode2>(pump.mode)) {
      double m = std::get<PumpMode2>(pump.mode).m;
      auto [it, fresh] = area_m.insert({pump.area, m});
      if (!fresh && it->second != m) {
        out.push_back({"pump.mode2-gain-mismatch",
                       "mode-2 pumps in area '" + pump.area +
                           "' must share the same temperature gain m"});
      }
    }
  }

  // Every pump edge and every pump-kind bus must be coupled.
  for (const auto& area : s.areas) {
    for (const auto& e : area.edges) {
      if (e.role == EdgeRole::pump && !used_edges.count({area.id, e.id})) {
        out.push_back({"pump.uncoupled-edge",
                       "pump edge '" + e.id + "' in area '" + area.id +
                           "' has no pump coupling"});
      }
    }
  }
  for (const auto& b : s.buses) {
    if ((b.kind == BusKind::pump_mode1 || b.kind == BusKind::pump_converter) &&
        !used_buses.count(b.id)) {
      out.push_back({"pump.uncoupled-bus",
                     "bus '" + b.id + "' is a pump bus but has no pump coupling"});
    }
  }
}

void check_global_heat_ids(const CombinedSystem& s, std::vector<Violation>& out) {
  std::set<std::string> area_ids;
  std::set<std::string> ids;
  for (const auto& area : s.areas) {
    if (!area_ids.insert(area.id).second) {
      out.push_back({"area.duplicate-id", "duplicate area id '" + area.id + "'"});
    }
    for (const auto& n : area.nodes) {
      if (!ids.insert(n.id).second) {
        out.push_back({"area.global-duplicate",
                       "node id '" + n.id + "' is reused across the system"});
      }
    }
    for (const auto& e : area.edges) {
      if (!ids.insert(e.id).second) {
        out.push_back({"area.global-duplicate",
                       "edge id '" + e.id + "' is reused across the system"});
      }
    }
  }
}

}  // namespace

ValidationReport validate(const CombinedSystem& system) {
  ValidationReport report;
  auto& out = report.violations;

  std::map<std::string, int> bus_of;
  for (int i = 0; i < static_cast<int>(system.buses.size()); ++i) {
    bus_of.emplace(system.buses[i].id, i);
  }

  check_buses(system, out);
  check_lines(system, bus_of, out);
  check_power_connectivity(system, bus_of, out);
  check_global_heat_ids(system, out);
  for (const auto& area : system.areas) check_area(area, out);
  check_pumps(system, bus_of, out);
  return report;
}

int SystemIndex::bus_index(const CombinedSystem& s, const std::string& id) const {
  for (int i = 0; i < static_cast<int>(s.buses.size()); ++i) {
    if (s.buses[i].id == id) return i;
  }
  return -1;
}

int SystemIndex::area_index(const CombinedSystem& s, const std::string& id) const {
  for (int i = 0; i < static_cast<int>(s.areas.size()); ++i) {
    if (s.areas[i].id == id) return i;
  }
  return -1;
}

std::pair<int, int> SystemIndex::edge_position(const CombinedSystem& s,
                                               const std::string& id) const {
  for (int a = 0; a < static_cast<int>(s.areas.size()); ++a) {
    const auto& edges = s.areas[a].edges;
    for (int j = 0; j < static_cast<int>(edges.size()); ++j) {
      if (edges[j].id == id) return {a, j};
    }
  }
  return {-1, -1};
}

SystemIndex index_system(const CombinedSystem& system) {
  SystemIndex ix;
  ix.n_buses = static_cast<int>(system.buses.size());
  ix.n_lines = static_cast<int>(system.lines.size());
  ix.n_areas = static_cast<int>(system.areas.size());

  std::map<std::string, int> bus_of;
  for (int i = 0; i < ix.n_buses; ++i) bus_of.emplace(system.buses[i].id, i);

  ix.bus_lines.resize(ix.n_buses);
  for (int l = 0; l < ix.n_lines; ++l) {
    const auto& line = system.lines[l];
    auto a = bus_of.find(line.from);
    auto b = bus_of.find(line.to);
    if (a == bus_of.end() || b == bus_of.end()) {
      throw ValidationError("line " + std::to_string(l) + " references a missing bus");
    }
    ix.line_from.push_back(a->second);
    ix.line_to.push_back(b->second);
    ix.bus_lines[a->second].push_back({l, -1.0});
    ix.bus_lines[b->second].push_back({l, +1.0});
  }

  for (int i = 0; i < ix.n_buses; ++i) {
    if (system.buses[i].generator) ix.generators.push_back({i});
  }

  ix.pump_at_bus.assign(ix.n_buses, -1);
  int edge_offset = 0;
  int node_offset = 0;
  for (int a = 0; a < ix.n_areas; ++a) {
    ix.area_edge_offset.push_back(edge_offset);
    ix.area_node_offset.push_back(node_offset);
    const auto& area = system.areas[a];
    for (int j = 0; j < static_cast<int>(area.edges.size()); ++j) {
      if (area.edges[j].role == EdgeRole::source) {
        ix.sources.push_back({a, j, edge_offset + j});
      }
    }
    edge_offset += static_cast<int>(area.edges.size());
    node_offset += static_cast<int>(area.nodes.size());
  }
  ix.n_edges = edge_offset;
  ix.n_nodes = node_offset;

  for (int p = 0; p < static_cast<int>(system.pumps.size()); ++p) {
    const auto& pump = system.pumps[p];
    SystemIndex::PumpRef ref;
    ref.pump = p;
    ref.bus = ix.bus_index(system, pump.bus);
    ref.area = ix.area_index(system, pump.area);
    if (ref.bus < 0 || ref.area < 0) {
      throw ValidationError("pump coupling " + std::to_string(p) +
                            " references a missing bus or area");
    }
    const auto& area = system.areas[ref.area];
    ref.edge = -1;
    for (int j = 0; j < static_cast<int>(area.edges.size()); ++j) {
      if (area.edges[j].id == pump.edge) ref.edge = j;
    }
    if (ref.edge < 0) {
      throw ValidationError("pump coupling " + std::to_string(p) +
                            " references a missing edge");
    }
    ref.global_edge = ix.area_edge_offset[ref.area] + ref.edge;
    ref.mode2 = std::holds_alternative<PumpMode2>(pump.mode);
    ix.pump_at_bus[ref.bus] = p;
    ix.pumps.push_back(ref);
  }
  return ix;
}

}  // namespace chpsim
