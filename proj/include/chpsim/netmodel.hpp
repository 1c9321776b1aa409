#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

/// Static description of a combined electric power / district heating
/// network: buses, lines, heating areas, and the heat pump couplings that
/// tie the two sides together.  All quantities are per-unit deviations from
/// a nominal operating point.
namespace chpsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration input (bad JSON, unknown key, wrong type).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A system that fails the well-posedness checks, or an operation invoked
/// on a system of the wrong pump mode.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numeric procedure that failed to converge or produced an inconsistent
/// result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state encountered during integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double t) : Error(what), time(t) {}
  double time = 0.0;
};

enum class BusKind { generator, load, pump_mode1, pump_converter };

enum class BlockKind { first_order, lead_lag };

/// First-order or lead-lag droop controller attached to a generator bus.
/// The block maps the local frequency deviation to a power adjustment with
/// DC gain -1/Q_e.
struct GeneratorSpec {
  double tau_e = 1.0;             // time constant, s
  double Q_e = 1.0;               // cost coefficient (gain is 1/Q_e)
  BlockKind block = BlockKind::first_order;
  double alpha = 1.0;             // lead/lag ratio, lead_lag only
};

struct PowerBus {
  std::string id;
  BusKind kind = BusKind::load;
  double inertia = 0.0;           // M, s^2; 0 makes the bus algebraic
  double damping = 0.0;           // D, frequency-dependent load coefficient
  std::optional<GeneratorSpec> generator;
};

/// Lossless line between two buses; power flow is B*sin(eta) where eta is
/// the angle difference from -> to.
struct PowerLine {
  std::string from;
  std::string to;
  double susceptance = 1.0;       // B > 0
  double eta0 = 0.0;              // initial angle difference, |eta0| < pi/2
};

struct HeatNode {
  std::string id;
  double volume = 1.0;
};

enum class EdgeRole { pump, source, load, pipe };

/// Controller of a heat source edge; maps the area-average temperature
/// deviation to a heat adjustment with DC gain -1/Q_h.
struct HeatSourceSpec {
  double tau_h = 1.0;
  double Q_h = 1.0;
  BlockKind block = BlockKind::first_order;
  double alpha = 1.0;
};

/// Directed pipe segment.  Water flows from `from` to `to` at constant
/// volumetric rate `flow`; heat may be injected along the edge depending on
/// its role.
struct HeatEdge {
  std::string id;
  std::string from;
  std::string to;
  double volume = 1.0;
  double flow = 1.0;              // q > 0
  EdgeRole role = EdgeRole::pipe;
  std::optional<HeatSourceSpec> source;  // role == source only
  double load_base = 0.0;         // initial heat-load deviation, role == load only
};

/// One hydraulically decoupled heating network.  The derived matrices are
/// filled in by build_incidence / build_Ah and are valid only afterwards.
struct HeatArea {
  std::string id;
  std::vector<HeatNode> nodes;
  std::vector<HeatEdge> edges;

  // Derived, nodes x edges.  B_h(i,j) = +1 if edge j enters node i,
  // -1 if it leaves node i.  B_th keeps the +1 part, B_sh the -1 part.
  Eigen::MatrixXd B_h;
  Eigen::MatrixXd B_th;
  Eigen::MatrixXd B_sh;

  // Derived, (E+N) x (E+N), state ordered edges first then nodes.
  Eigen::MatrixXd A_h;

  // Derived: stacked volumes (edges then nodes) and their sum.
  Eigen::VectorXd volumes;
  double total_volume = 0.0;

  int state_dim() const { return static_cast<int>(edges.size() + nodes.size()); }
};

/// Mode 1: the pump tracks the local bus frequency, p^P = a1 * omega.
struct PumpMode1 {
  double a1 = 1.0;
};

/// Mode 2: the pump converter is its own zero-inertia bus whose frequency
/// is slaved to the area-average temperature, omega = m * Tbar.
struct PumpMode2 {
  double m = 1.0;
};

/// Couples one power bus to one pump edge of one heating area.  The heat
/// delivered to the edge is h^P = C_o * p^P.
struct PumpCoupling {
  std::string bus;
  std::string area;
  std::string edge;
  double cop = 1.0;               // C_o > 0
  std::variant<PumpMode1, PumpMode2> mode;
};

struct CombinedSystem {
  std::vector<PowerBus> buses;
  std::vector<PowerLine> lines;
  std::vector<HeatArea> areas;
  std::vector<PumpCoupling> pumps;
};

enum class SystemMode { mode1, mode2, mixed, none };

struct Violation {
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Renders the report one violation per line; byte-identical for equal
/// inputs.
std::string render(const ValidationReport& report);

/// Fills area.B_h, B_th, B_sh from the edge list.  Throws ValidationError
/// on a dangling node reference.
void build_incidence(HeatArea& area);

/// Fills area.A_h, volumes, total_volume.  Requires build_incidence first.
/// By construction every row of A_h sums to zero; columns sum to zero iff
/// the flows conserve mass at every node.
void build_Ah(HeatArea& area);

/// Runs build_incidence + build_Ah on every area in place.  Throws
/// ValidationError on dangling references.
void finalize(CombinedSystem& system);

/// Checks well-posedness of a finalized system.  The report lists every
/// violation; an empty report means the system is well-posed.
ValidationReport validate(const CombinedSystem& system);

/// Volume-weighted average temperature of one area; T is the stacked
/// (edges, nodes) temperature vector.
double average_temperature(const HeatArea& area, const Eigen::VectorXd& T);

/// Pump mode of the system: mode1/mode2 if all pumps agree, mixed
/// otherwise, none if there are no pumps.
SystemMode system_mode(const CombinedSystem& system);

/// Resolved integer indices for a validated system.  String ids are mapped
/// to positions in the owning vectors; derived lists (generators, sources,
/// per-bus line incidence) are precomputed here and shared by the dynamics
/// and equilibrium code.
struct SystemIndex {
  struct GeneratorRef {
    int bus = -1;
  };
  struct SourceRef {
    int area = -1;
    int edge = -1;       // index into area.edges
    int global_edge = -1;
  };
  struct PumpRef {
    int pump = -1;       // index into system.pumps
    int bus = -1;
    int area = -1;
    int edge = -1;       // index into area.edges
    int global_edge = -1;
    bool mode2 = false;
  };
  struct LineEnd {
    int line = -1;
    double sign = 1.0;   // +1: line delivers into the bus, -1: draws from it
  };

  int n_buses = 0;
  int n_lines = 0;
  int n_areas = 0;
  int n_edges = 0;               // total over areas
  int n_nodes = 0;

  std::vector<int> line_from;    // bus index per line
  std::vector<int> line_to;
  std::vector<std::vector<LineEnd>> bus_lines;  // per bus

  std::vector<GeneratorRef> generators;         // bus order
  std::vector<SourceRef> sources;               // area-major edge order
  std::vector<PumpRef> pumps;                   // config order
  std::vector<int> pump_at_bus;                 // bus -> pump index or -1

  std::vector<int> area_edge_offset;  // global edge index of each area's first edge
  std::vector<int> area_node_offset;

  /// -1 when the id is unknown.
  int bus_index(const CombinedSystem& s, const std::string& id) const;
  int area_index(const CombinedSystem& s, const std::string& id) const;
  /// (area, edge) position of an edge id, searching all areas; {-1, -1} when
  /// the id is unknown.
  std::pair<int, int> edge_position(const CombinedSystem& s, const std::string& id) const;
};

/// Builds the index of a finalized, validated system.  Throws
/// ValidationError on dangling references (which validate() also reports).
SystemIndex index_system(const CombinedSystem& system);

}  // namespace chpsim
