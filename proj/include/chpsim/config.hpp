#pragma once

#include "chpsim/dynamics.hpp"
#include "chpsim/netmodel.hpp"
#include "chpsim/solver.hpp"

#include <string>
#include <vector>

/// JSON scenario files: system description, disturbance schedule, solver
/// parameters, and output options.  Schema version 1; unknown keys are
/// rejected with their full key path.
namespace chpsim {

/// A step disturbance as written in a config file, before string ids are
/// resolved against the system.
struct DisturbanceEvent {
  double time = 0.0;
  bool on_bus = true;  // "kind": "bus" or "edge"
  std::string id;
  double delta = 0.0;
};

struct OutputOptions {
  std::string directory = "out";
  int decimation = 1;  // keep every n-th recorded sample (last always kept)
};

struct ScenarioConfig {
  CombinedSystem system;
  std::vector<DisturbanceEvent> events;
  SimParams sim;
  OutputOptions outputs;
};

/// Parses a scenario from JSON text.  `origin` names the source in error
/// messages.  Throws ConfigError on malformed input; the returned system is
/// not yet finalized or validated.
ScenarioConfig parse_config(const std::string& text, const std::string& origin);

ScenarioConfig load_config(const std::string& path);

/// Maps id-based events to index-based steps.  Bus events must name a
/// power bus, edge events a heat edge with role load.  Throws ConfigError
/// otherwise.  The system must be finalized.
DisturbanceSchedule resolve_events(const CombinedSystem& system, const SystemIndex& ix,
                                   const std::vector<DisturbanceEvent>& events);

/// Deterministic re-serialization of a parsed scenario with all defaults
/// made explicit.  Parsing the output yields the same scenario.
std::string canonical_config(const ScenarioConfig& config);

}  // namespace chpsim
