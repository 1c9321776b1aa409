#include "chpsim/config.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace chpsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

/// Typed, path-tracking view of one JSON object.  Every key access is
/// recorded; finish() rejects whatever was never asked for.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  ~Obj() = default;
  Obj(const Obj&) = delete;
  Obj& operator=(const Obj&) = delete;

  const std::string& path() const { return path_; }
  std::string key_path(const char* key) const { return path_ + "." + key; }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& require(const char* key) {
    const json* p = find(key);
    if (!p) fail(path_, std::string("missing key '") + key + "'");
    return *p;
  }

  double number(const char* key) { return to_number(require(key), key_path(key)); }
  double number(const char* key, double fallback) {
    const json* p = find(key);
    return p ? to_number(*p, key_path(key)) : fallback;
  }
  int integer(const char* key, int fallback) {
    const json* p = find(key);
    if (!p) return fallback;
    if (!p->is_number_integer()) fail(key_path(key), "expected an integer");
    return p->get<int>();
  }
  std::string text(const char* key) { return to_text(require(key), key_path(key)); }
  std::string text(const char* key, const std::string& fallback) {
    const json* p = find(key);
    return p ? to_text(*p, key_path(key)) : fallback;
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(path_ + "." + it.key(), "unknown key");
    }
  }

 private:
  static double to_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }
  static std::string to_text(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const json& element_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  return j;
}

std::string indexed(const std::string& path, size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

BlockKind parse_block_kind(const std::string& s, const std::string& path) {
  if (s == "first_order") return BlockKind::first_order;
  if (s == "lead_lag") return BlockKind::lead_lag;
  fail(path, "unknown block kind '" + s + "' (first_order, lead_lag)");
}

GeneratorSpec parse_generator(const json& j, const std::string& path) {
  Obj o(j, path);
  GeneratorSpec g;
  g.tau_e = o.number("tau");
  g.Q_e = o.number("Q");
  g.block = parse_block_kind(o.text("block", "first_order"), o.key_path("block"));
  g.alpha = o.number("alpha", g.alpha);
  o.finish();
  return g;
}

PowerBus parse_bus(const json& j, const std::string& path) {
  Obj o(j, path);
  PowerBus b;
  b.id = o.text("id");
  const std::string kind = o.text("kind", "load");
  if (kind == "generator") {
    b.kind = BusKind::generator;
  } else if (kind == "load") {
    b.kind = BusKind::load;
  } else if (kind == "pump_mode1") {
    b.kind = BusKind::pump_mode1;
  } else if (kind == "pump_converter") {
    b.kind = BusKind::pump_converter;
  } else {
    fail(o.key_path("kind"),
         "unknown bus kind '" + kind + "' (generator, load, pump_mode1, pump_converter)");
  }
  b.inertia = o.number("M", 0.0);
  b.damping = o.number("D", 0.0);
  if (const json* g = o.find("generator")) {
    b.generator = parse_generator(*g, o.key_path("generator"));
  }
  o.finish();
  return b;
}

PowerLine parse_line(const json& j, const std::string& path) {
  Obj o(j, path);
  PowerLine l;
  l.from = o.text("from");
  l.to = o.text("to");
  l.susceptance = o.number("B");
  l.eta0 = o.number("eta0", 0.0);
  o.finish();
  return l;
}

HeatNode parse_node(const json& j, const std::string& path) {
  Obj o(j, path);
  HeatNode n;
  n.id = o.text("id");
  n.volume = o.number("volume");
  o.finish();
  return n;
}

HeatSourceSpec parse_source(const json& j, const std::string& path) {
  Obj o(j, path);
  HeatSourceSpec s;
  s.tau_h = o.number("tau");
  s.Q_h = o.number("Q");
  s.block = parse_block_kind(o.text("block", "first_order"), o.key_path("block"));
  s.alpha = o.number("alpha", s.alpha);
  o.finish();
  return s;
}

HeatEdge parse_edge(const json& j, const std::string& path) {
  Obj o(j, path);
  HeatEdge e;
  e.id = o.text("id");
  e.from = o.text("from");
  e.to = o.text("to");
  e.volume = o.number("volume");
  e.flow = o.number("flow");
  const std::string role = o.text("role", "pipe");
  if (role == "pump") {
    e.role = EdgeRole::pump;
  } else if (role == "source") {
    e.role = EdgeRole::source;
  } else if (role == "load") {
    e.role = EdgeRole::load;
  } else if (role == "pipe") {
    e.role = EdgeRole::pipe;
  } else {
    fail(o.key_path("role"), "unknown edge role '" + role + "' (pump, source, load, pipe)");
  }
  if (const json* s = o.find("source")) {
    e.source = parse_source(*s, o.key_path("source"));
  }
  e.load_base = o.number("load_base", 0.0);
  o.finish();
  return e;
}

HeatArea parse_area(const json& j, const std::string& path) {
  Obj o(j, path);
  HeatArea a;
  a.id = o.text("id");
  const json& nodes = element_array(o.require("nodes"), o.key_path("nodes"));
  for (size_t i = 0; i < nodes.size(); ++i) {
    a.nodes.push_back(parse_node(nodes[i], indexed(o.key_path("nodes"), i)));
  }
  const json& edges = element_array(o.require("edges"), o.key_path("edges"));
  for (size_t i = 0; i < edges.size(); ++i) {
    a.edges.push_back(parse_edge(edges[i], indexed(o.key_path("edges"), i)));
  }
  o.finish();
  return a;
}

PumpCoupling parse_pump(const json& j, const std::string& path) {
  Obj o(j, path);
  PumpCoupling p;
  p.bus = o.text("bus");
  p.area = o.text("area");
  p.edge = o.text("edge");
  p.cop = o.number("cop");
  Obj m(o.require("mode"), o.key_path("mode"));
  const std::string type = m.text("type");
  if (type == "mode1") {
    PumpMode1 mode;
    mode.a1 = m.number("a1");
    p.mode = mode;
  } else if (type == "mode2") {
    PumpMode2 mode;
    mode.m = m.number("m");
    p.mode = mode;
  } else {
    fail(m.key_path("type"), "unknown pump mode '" + type + "' (mode1, mode2)");
  }
  m.finish();
  o.finish();
  return p;
}

DisturbanceEvent parse_event(const json& j, const std::string& path) {
  Obj o(j, path);
  DisturbanceEvent e;
  e.time = o.number("time");
  const std::string kind = o.text("kind");
  if (kind == "bus") {
    e.on_bus = true;
  } else if (kind == "edge") {
    e.on_bus = false;
  } else {
    fail(o.key_path("kind"), "unknown disturbance kind '" + kind + "' (bus, edge)");
  }
  e.id = o.text("id");
  e.delta = o.number("delta");
  o.finish();
  return e;
}

SimParams parse_sim(const json& j, const std::string& path) {
  Obj o(j, path);
  SimParams s;
  s.t0 = o.number("t0", s.t0);
  s.t_end = o.number("t_end", s.t_end);
  const std::string method = o.text("method", "rk4");
  if (method == "rk4") {
    s.method = Method::rk4;
  } else if (method == "rk45") {
    s.method = Method::rk45;
  } else {
    fail(o.key_path("method"), "unknown method '" + method + "' (rk4, rk45)");
  }
  s.dt = o.number("dt", s.dt);
  s.rtol = o.number("rtol", s.rtol);
  s.atol = o.number("atol", s.atol);
  s.sample_every = o.integer("sample_every", s.sample_every);
  if (s.sample_every < 1) fail(o.key_path("sample_every"), "must be >= 1");
  s.steady_eps = o.number("steady_eps", s.steady_eps);
  s.steady_hold = o.number("steady_hold", s.steady_hold);
  o.finish();
  return s;
}

OutputOptions parse_outputs(const json& j, const std::string& path) {
  Obj o(j, path);
  OutputOptions out;
  out.directory = o.text("directory", out.directory);
  out.decimation = o.integer("decimation", out.decimation);
  if (out.decimation < 1) fail(o.key_path("decimation"), "must be >= 1");
  o.finish();
  return out;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  Obj o(j, origin);
  const json& version = o.require("version");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    fail(o.key_path("version"), "expected schema version 1");
  }

  ScenarioConfig config;
  {
    Obj power(o.require("power"), o.key_path("power"));
    const json& buses = element_array(power.require("buses"), power.key_path("buses"));
    for (size_t i = 0; i < buses.size(); ++i) {
      config.system.buses.push_back(parse_bus(buses[i], indexed(power.key_path("buses"), i)));
    }
    if (const json* lines = power.find("lines")) {
      const json& arr = element_array(*lines, power.key_path("lines"));
      for (size_t i = 0; i < arr.size(); ++i) {
        config.system.lines.push_back(parse_line(arr[i], indexed(power.key_path("lines"), i)));
      }
    }
    power.finish();
  }
  if (const json* areas = o.find("areas")) {
    const json& arr = element_array(*areas, o.key_path("areas"));
    for (size_t i = 0; i < arr.size(); ++i) {
      config.system.areas.push_back(parse_area(arr[i], indexed(o.key_path("areas"), i)));
    }
  }
  if (const json* pumps = o.find("pumps")) {
    const json& arr = element_array(*pumps, o.key_path("pumps"));
    for (size_t i = 0; i < arr.size(); ++i) {
      config.system.pumps.push_back(parse_pump(arr[i], indexed(o.key_path("pumps"), i)));
    }
  }
  if (const json* events = o.find("disturbances")) {
    const json& arr = element_array(*events, o.key_path("disturbances"));
    for (size_t i = 0; i < arr.size(); ++i) {
      config.events.push_back(parse_event(arr[i], indexed(o.key_path("disturbances"), i)));
    }
  }
  if (const json* sim = o.find("sim")) {
    config.sim = parse_sim(*sim, o.key_path("sim"));
  }
  if (const json* outputs = o.find("outputs")) {
    config.outputs = parse_outputs(*outputs, o.key_path("outputs"));
  }
  o.finish();
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

DisturbanceSchedule resolve_events(const CombinedSystem& system, const SystemIndex& ix,
                                   const std::vector<DisturbanceEvent>& events) {
  DisturbanceSchedule schedule;
  for (size_t i = 0; i < events.size(); ++i) {
    const DisturbanceEvent& e = events[i];
    const std::string where = "disturbances[" + std::to_string(i) + "]";
    DisturbanceStep step;
    step.time = e.time;
    step.delta = e.delta;
    step.on_bus = e.on_bus;
    if (e.on_bus) {
      const int bus = ix.bus_index(system, e.id);
      if (bus < 0) fail(where, "unknown bus '" + e.id + "'");
      step.index = bus;
    } else {
      const auto [area, edge] = ix.edge_position(system, e.id);
      if (area < 0) fail(where, "unknown heat edge '" + e.id + "'");
      if (system.areas[area].edges[edge].role != EdgeRole::load) {
        fail(where, "heat disturbances require a load edge; '" + e.id + "' is not one");
      }
      step.index = ix.area_edge_offset[area] + edge;
    }
    schedule.steps.push_back(step);
  }
  return schedule;
}

namespace {

json block_json(BlockKind kind) {
  return kind == BlockKind::lead_lag ? "lead_lag" : "first_order";
}

json bus_json(const PowerBus& b) {
  json j;
  j["id"] = b.id;
  switch (b.kind) {
    case BusKind::generator: j["kind"] = "generator"; break;
    case BusKind::load: j["kind"] = "load"; break;
    case BusKind::pump_mode1: j["kind"] = "pump_mode1"; break;
    case BusKind::pump_converter: j["kind"] = "pump_converter"; break;
  }
  j["M"] = b.inertia;
  j["D"] = b.damping;
  if (b.generator) {
    j["generator"] = {{"tau", b.generator->tau_e},
                      {"Q", b.generator->Q_e},
                      {"block", block_json(b.generator->block)},
                      {"alpha", b.generator->alpha}};
  }
  return j;
}

json edge_json(const HeatEdge& e) {
  json j;
  j["id"] = e.id;
  j["from"] = e.from;
  j["to"] = e.to;
  j["volume"] = e.volume;
  j["flow"] = e.flow;
  switch (e.role) {
    case EdgeRole::pump: j["role"] = "pump"; break;
    case EdgeRole::source: j["role"] = "source"; break;
    case EdgeRole::load: j["role"] = "load"; break;
    case EdgeRole::pipe: j["role"] = "pipe"; break;
  }
  if (e.source) {
    j["source"] = {{"tau", e.source->tau_h},
                   {"Q", e.source->Q_h},
                   {"block", block_json(e.source->block)},
                   {"alpha", e.source->alpha}};
  }
  if (e.role == EdgeRole::load) j["load_base"] = e.load_base;
  return j;
}

}  // namespace

std::string canonical_config(const ScenarioConfig& config) {
  json j;
  j["version"] = 1;
  j["power"]["buses"] = json::array();
  for (const PowerBus& b : config.system.buses) j["power"]["buses"].push_back(bus_json(b));
  j["power"]["lines"] = json::array();
  for (const PowerLine& l : config.system.lines) {
    j["power"]["lines"].push_back(
        {{"from", l.from}, {"to", l.to}, {"B", l.susceptance}, {"eta0", l.eta0}});
  }
  j["areas"] = json::array();
  for (const HeatArea& a : config.system.areas) {
    json area;
    area["id"] = a.id;
    area["nodes"] = json::array();
    for (const HeatNode& n : a.nodes) {
      area["nodes"].push_back({{"id", n.id}, {"volume", n.volume}});
    }
    area["edges"] = json::array();
    for (const HeatEdge& e : a.edges) area["edges"].push_back(edge_json(e));
    j["areas"].push_back(area);
  }
  j["pumps"] = json::array();
  for (const PumpCoupling& p : config.system.pumps) {
    json pump;
    pump["bus"] = p.bus;
    pump["area"] = p.area;
    pump["edge"] = p.edge;
    pump["cop"] = p.cop;
    if (const PumpMode1* m1 = std::get_if<PumpMode1>(&p.mode)) {
      pump["mode"] = {{"type", "mode1"}, {"a1", m1->a1}};
    } else {
      pump["mode"] = {{"type", "mode2"}, {"m", std::get<PumpMode2>(p.mode).m}};
    }
    j["pumps"].push_back(pump);
  }
  j["disturbances"] = json::array();
  for (const DisturbanceEvent& e : config.events) {
    j["disturbances"].push_back({{"time", e.time},
                                 {"kind", e.on_bus ? "bus" : "edge"},
                                 {"id", e.id},
                                 {"delta", e.delta}});
  }
  j["sim"] = {{"t0", config.sim.t0},
              {"t_end", config.sim.t_end},
              {"method", config.sim.method == Method::rk45 ? "rk45" : "rk4"},
              {"dt", config.sim.dt},
              {"rtol", config.sim.rtol},
              {"atol", config.sim.atol},
              {"sample_every", config.sim.sample_every},
              {"steady_eps", config.sim.steady_eps},
              {"steady_hold", config.sim.steady_hold}};
  j["outputs"] = {{"directory", config.outputs.directory},
                  {"decimation", config.outputs.decimation}};
  return j.dump(2);
}

}  // namespace chpsim
