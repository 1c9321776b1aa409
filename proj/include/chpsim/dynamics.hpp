#pragma once

#include "chpsim/netmodel.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

/// Continuous-time dynamics of a validated combined system: swing equations
/// with algebraic zero-inertia buses, first-order / lead-lag controller
/// blocks, heating-network thermal transport, and the two pump coupling
/// modes.
namespace chpsim {

/// Single-state LTI controller with transfer function
///   G(s) = gain * (1 + alpha*tau*s) / (1 + tau*s)
/// from the negated input to the output (alpha = 0 gives the plain
/// first-order lag).  Realization:
///   tau * xdot = -x - gain*(1 - alpha)*u,   y = x - gain*alpha*u.
struct LtiBlock {
  double tau = 1.0;
  double gain = 1.0;   // DC gain from -u to y; 1/Q for droop blocks
  double alpha = 0.0;  // 0 for first-order
};

LtiBlock make_block(const GeneratorSpec& g);
LtiBlock make_block(const HeatSourceSpec& h);

double block_output(const LtiBlock& b, double x, double u);
double block_xdot(const LtiBlock& b, double x, double u);

/// Internal state at an equilibrium with constant input u_star.
double block_equilibrium_state(const LtiBlock& b, double u_star);

/// Weight w of the quadratic storage 1/2 * w * (x - x*)^2 certifying
/// passivity of the block from -u to y.  See dynamics.cpp for the
/// derivation; w = tau / (gain * (1 + alpha)).
double block_storage_weight(const LtiBlock& b);

/// Smallest real part of G(j*nu) over the frequency grid.  Positive for
/// every positive-parameter block; >= gain*min(1, alpha) for lead-lag
/// blocks with alpha > 0.
double passivity_margin(const LtiBlock& b, std::span<const double> freq_grid);

/// Current exogenous load deviations: electric per bus, heat per edge in
/// area-major edge order.
struct Loads {
  Eigen::VectorXd bus_p;
  Eigen::VectorXd edge_h;
};

/// One step change applied at `time`; deltas accumulate.
struct DisturbanceStep {
  double time = 0.0;
  bool on_bus = true;  // false: heat edge
  int index = 0;       // bus index, or area-major global edge index
  double delta = 0.0;
};

struct DisturbanceSchedule {
  std::vector<DisturbanceStep> steps;

  /// Event times strictly greater than t0, sorted and deduplicated.
  std::vector<double> event_times_after(double t0) const;
  double last_event_time(double fallback) const;
};

/// Layout of the flat state vector:
///   [eta per line | omega per inertial bus | generator states |
///    area temperatures (edges then nodes, per area) | source states]
struct StateLayout {
  int n_eta = 0;
  int omega_offset = 0;
  std::vector<int> omega_bus;   // bus index per omega state
  std::vector<int> bus_omega;   // per bus: omega state slot or -1
  int gen_offset = 0;           // one state per generator (SystemIndex order)
  struct Block {
    int offset = 0;
    int size = 0;
  };
  std::vector<Block> area_blocks;
  int heat_offset = 0;          // one state per source (SystemIndex order)
  int dim = 0;

  int eta(int line) const { return line; }
  int gen(int g) const { return gen_offset + g; }
  int area(int a) const { return area_blocks[a].offset; }
  int heat(int s) const { return heat_offset + s; }
};

/// Instantaneous outputs reconstructed from a state and the active loads.
struct AlgebraicOutputs {
  Eigen::VectorXd omega;     // per bus, algebraic buses included
  Eigen::VectorXd flows;     // per line
  Eigen::VectorXd gen_p;     // per generator
  Eigen::VectorXd source_h;  // per source
  Eigen::VectorXd pump_p;    // per pump coupling
  Eigen::VectorXd pump_h;
  Eigen::VectorXd Tbar;      // per area
  bool security = false;     // some |eta| >= pi/2 (angle security excursion)
};

/// Evaluates the vector field of a validated system.  The engine holds
/// only immutable precomputed structure; all evaluation methods are pure,
/// so one engine may be shared across threads.
class Engine {
 public:
  /// The system must be finalized and must have passed validate().
  explicit Engine(const CombinedSystem& system);

  const CombinedSystem& system() const { return *system_; }
  const SystemIndex& index() const { return ix_; }
  const StateLayout& layout() const { return layout_; }

  /// Zero deviations except the configured initial line angles.
  Eigen::VectorXd initial_state() const;

  Loads zero_loads() const;
  /// Initial loads: zero electric, load_base on load edges.
  Loads base_loads() const;
  Loads loads_at(const DisturbanceSchedule& schedule, double t) const;

  /// B*sin(eta) per line.
  Eigen::VectorXd line_flows(const Eigen::VectorXd& x) const;

  /// Frequencies of every bus: states for inertial buses, the eliminated
  /// power-balance solution for zero-inertia buses, m*Tbar for converter
  /// buses.
  Eigen::VectorXd algebraic_frequencies(const Eigen::VectorXd& x, const Loads& loads) const;

  /// Electric draw and heat delivery (p^P, h^P = C_o * p^P) of one pump.
  std::pair<double, double> pump_power(const Eigen::VectorXd& x, int pump,
                                       const Loads& loads) const;

  /// Stacked heat injection vector of one area (edges then nodes): sources
  /// inject their block output, pump edges h^P, load edges -h^L, all node
  /// entries zero.
  Eigen::VectorXd heat_injection(int area, const Eigen::VectorXd& x, const Loads& loads) const;

  /// Time derivative of the full state under the given loads.  Pure; the
  /// loads are constant between disturbance instants, so t enters only
  /// through them.
  Eigen::VectorXd rhs(const Eigen::VectorXd& x, const Loads& loads) const;

  AlgebraicOutputs outputs(const Eigen::VectorXd& x, const Loads& loads) const;

  /// Number of per-area quadrature channels appended by rhs_extended.
  int extended_dim() const { return layout_.dim + ix_.n_areas; }

  /// rhs of [x | per-area integral of total heat injection].  The extra
  /// channels integrate 1^T h and make aggregate-energy bookkeeping exact
  /// to rounding.
  Eigen::VectorXd rhs_extended(const Eigen::VectorXd& xe, const Loads& loads) const;

  const LtiBlock& generator_block(int g) const { return gen_blocks_[g]; }
  const LtiBlock& source_block(int s) const { return src_blocks_[s]; }
  /// Mode-2 thermal weight m/C_o of the single pump of an area.
  double area_alpha(int area) const;

 private:
  struct Core;
  Core core(const Eigen::VectorXd& x, const Loads& loads) const;

  const CombinedSystem* system_;
  SystemIndex ix_;
  StateLayout layout_;
  std::vector<LtiBlock> gen_blocks_;
  std::vector<LtiBlock> src_blocks_;
  std::vector<Eigen::VectorXd> inv_volumes_;  // per area
};

}  // namespace chpsim
