#include "chpsim/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace chpsim {

namespace {

void append_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

}  // namespace

std::vector<std::string> trajectory_columns(const Engine& engine) {
  const CombinedSystem& s = engine.system();
  const SystemIndex& ix = engine.index();
  std::vector<std::string> cols;
  cols.push_back("t");
  for (const PowerBus& b : s.buses) cols.push_back("omega_" + b.id);
  for (const auto& g : ix.generators) cols.push_back("pG_" + s.buses[g.bus].id);
  for (const auto& p : ix.pumps) cols.push_back("pP_" + s.buses[p.bus].id);
  for (const auto& p : ix.pumps) cols.push_back("hP_" + s.areas[p.area].edges[p.edge].id);
  for (const auto& src : ix.sources) {
    cols.push_back("hG_" + s.areas[src.area].edges[src.edge].id);
  }
  for (const HeatArea& a : s.areas) cols.push_back("Tbar_" + a.id);
  for (const HeatArea& a : s.areas) {
    for (const HeatEdge& e : a.edges) cols.push_back("TE_" + e.id);
  }
  for (const HeatArea& a : s.areas) {
    for (const HeatNode& n : a.nodes) cols.push_back("TN_" + n.id);
  }
  cols.push_back("flag_security");
  return cols;
}

void write_trajectory_csv(std::ostream& out, const Engine& engine, const Trajectory& traj,
                          int decimation) {
  if (decimation < 1) throw std::invalid_argument("decimation must be >= 1");
  const std::vector<std::string> cols = trajectory_columns(engine);
  std::string line;
  for (size_t c = 0; c < cols.size(); ++c) {
    if (c) line += ',';
    line += cols[c];
  }
  line += '\n';
  out << line;

  const StateLayout& layout = engine.layout();
  const size_t n = traj.times.size();
  for (size_t k = 0; k < n; ++k) {
    if (k % static_cast<size_t>(decimation) != 0 && k + 1 != n) continue;
    const Eigen::VectorXd& x = traj.states[k];
    const AlgebraicOutputs& o = traj.outputs[k];
    line.clear();
    append_number(line, traj.times[k]);
    for (int i = 0; i < o.omega.size(); ++i) {
      line += ',';
      append_number(line, o.omega(i));
    }
    for (int i = 0; i < o.gen_p.size(); ++i) {
      line += ',';
      append_number(line, o.gen_p(i));
    }
    for (int i = 0; i < o.pump_p.size(); ++i) {
      line += ',';
      append_number(line, o.pump_p(i));
    }
    for (int i = 0; i < o.pump_h.size(); ++i) {
      line += ',';
      append_number(line, o.pump_h(i));
    }
    for (int i = 0; i < o.source_h.size(); ++i) {
      line += ',';
      append_number(line, o.source_h(i));
    }
    for (int i = 0; i < o.Tbar.size(); ++i) {
      line += ',';
      append_number(line, o.Tbar(i));
    }
    for (size_t a = 0; a < engine.system().areas.size(); ++a) {
      const auto n_edges = engine.system().areas[a].edges.size();
      for (size_t e = 0; e < n_edges; ++e) {
        line += ',';
        append_number(line, x(layout.area(static_cast<int>(a)) + static_cast<int>(e)));
      }
    }
    for (size_t a = 0; a < engine.system().areas.size(); ++a) {
      const HeatArea& area = engine.system().areas[a];
      const int node0 = layout.area(static_cast<int>(a)) + static_cast<int>(area.edges.size());
      for (size_t i = 0; i < area.nodes.size(); ++i) {
        line += ',';
        append_number(line, x(node0 + static_cast<int>(i)));
      }
    }
    line += ',';
    append_number(line, o.security ? 1.0 : 0.0);
    line += '\n';
    out << line;
  }
}

void write_trajectory_csv_file(const std::string& path, const Engine& engine,
                               const Trajectory& traj, int decimation) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_trajectory_csv(out, engine, traj, decimation);
  out.flush();
  if (!out) throw Error("write failed: " + path);
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int CsvTable::require_column(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw Error("missing column '" + name + "'");
  return c;
}

std::vector<double> CsvTable::extract(int col) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.at(static_cast<size_t>(col)));
  return out;
}

CsvTable read_csv(std::istream& in, const std::string& origin) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(origin + ": empty file");
  std::stringstream header(line);
  std::string field;
  while (std::getline(header, field, ',')) table.columns.push_back(field);
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.columns.size());
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) {
        throw Error(origin + ":" + std::to_string(lineno) + ": malformed number");
      }
      row.push_back(v);
      p = end;
      if (*p == ',') {
        ++p;
      } else if (*p == '\0' || *p == '\r') {
        break;
      } else {
        throw Error(origin + ":" + std::to_string(lineno) + ": unexpected character");
      }
    }
    if (row.size() != table.columns.size()) {
      throw Error(origin + ":" + std::to_string(lineno) + ": wrong field count");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_csv(in, path);
}

}  // namespace chpsim
