#pragma once

#include "chpsim/dynamics.hpp"
#include "chpsim/solver.hpp"

#include <iosfwd>
#include <string>
#include <vector>

/// Trajectory CSV output and a small reader for post-processing.  Values
/// are written with 17 significant digits, so a write/read round trip is
/// exact for doubles.
namespace chpsim {

/// Column order: t, omega_<bus> for every bus, pG_<bus> per generator,
/// pP_<bus> per pump coupling, hP_<edge> per pump edge, hG_<edge> per
/// source edge, Tbar_<area>, TE_<edge> for every edge (area-major),
/// TN_<node> for every node, flag_security.
std::vector<std::string> trajectory_columns(const Engine& engine);

/// Writes every decimation-th sample plus, always, the final one.
void write_trajectory_csv(std::ostream& out, const Engine& engine, const Trajectory& traj,
                          int decimation = 1);

void write_trajectory_csv_file(const std::string& path, const Engine& engine,
                               const Trajectory& traj, int decimation = 1);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Column index or -1.
  int column(const std::string& name) const;
  /// Column index; throws Error if the column is absent.
  int require_column(const std::string& name) const;
  /// Copy of one column.
  std::vector<double> extract(int col) const;
};

CsvTable read_csv(std::istream& in, const std::string& origin);
CsvTable read_csv_file(const std::string& path);

}  // namespace chpsim
