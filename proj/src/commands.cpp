#include "chpsim/commands.hpp"

#include "chpsim/analysis.hpp"
#include "chpsim/csv.hpp"
#include "chpsim/equilibrium.hpp"
#include "chpsim/lyapunov.hpp"
#include "chpsim/version.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace chpsim {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

const char* mode_name(SystemMode mode) {
  switch (mode) {
    case SystemMode::mode1: return "mode1";
    case SystemMode::mode2: return "mode2";
    case SystemMode::mixed: return "mixed";
    case SystemMode::none: return "none";
  }
  return "?";
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (t = " << fmt(e.time) << ")\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

struct Prepared {
  ScenarioConfig config;
  SystemIndex ix;
  DisturbanceSchedule schedule;
  SystemMode mode = SystemMode::none;
};

Prepared prepare(const std::string& path, bool allow_invalid, std::ostream& err) {
  Prepared p;
  p.config = load_config(path);
  finalize(p.config.system);
  const ValidationReport report = validate(p.config.system);
  if (!report.ok()) {
    err << render(report);
    if (!allow_invalid) {
      throw ValidationError(path + ": " + std::to_string(report.violations.size()) +
                            " validation violation(s)");
    }
    err << "proceeding despite validation violations\n";
  }
  p.ix = index_system(p.config.system);
  p.schedule = resolve_events(p.config.system, p.ix, p.config.events);
  p.mode = system_mode(p.config.system);
  return p;
}

long security_samples(const Trajectory& traj) {
  long n = 0;
  for (const AlgebraicOutputs& o : traj.outputs) {
    if (o.security) ++n;
  }
  return n;
}

double max_abs_omega(const Trajectory& traj) {
  double m = 0.0;
  for (const AlgebraicOutputs& o : traj.outputs) {
    if (o.omega.size() > 0) m = std::max(m, o.omega.cwiseAbs().maxCoeff());
  }
  return m;
}

void write_metadata(const std::string& path, const std::string& scenario,
                    const Prepared& p, const Engine& engine, const Trajectory& traj,
                    int decimation) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "tool: " << kToolName << " " << kToolVersion << "\n";
  out << "scenario: " << scenario << "\n";
  out << "mode: " << mode_name(p.mode) << "\n";
  out << "state dimension: " << engine.layout().dim << "\n";
  out << "method: " << (p.config.sim.method == Method::rk45 ? "rk45" : "rk4");
  if (p.config.sim.method == Method::rk45) {
    out << " (rtol " << fmt(p.config.sim.rtol) << ", atol " << fmt(p.config.sim.atol) << ")";
  } else {
    out << " (dt " << fmt(p.config.sim.dt) << ")";
  }
  out << "\n";
  out << "time span: " << fmt(traj.times.front()) << " .. " << fmt(traj.final_time()) << "\n";
  out << "samples recorded: " << traj.times.size() << " (csv decimation " << decimation
      << ")\n";
  out << "reached steady: "
      << (traj.reached_steady ? "yes (t = " + fmt(traj.steady_time) + ")" : "no") << "\n";
  out << "security excursion: " << (traj.security_excursion ? "yes" : "no") << "\n";
  const std::vector<std::string> cols = trajectory_columns(engine);
  out << "columns:";
  for (const std::string& c : cols) out << " " << c;
  out << "\n";
  out << "config (canonical):\n" << canonical_config(p.config) << "\n";
  out.flush();
  if (!out) throw Error("write failed: " + path);
}

struct SimulationFiles {
  fs::path csv;
  fs::path metadata;
};

SimulationFiles write_outputs(const fs::path& dir, const std::string& scenario,
                              const Prepared& p, const Engine& engine,
                              const Trajectory& traj) {
  fs::create_directories(dir);
  SimulationFiles files{dir / "trajectory.csv", dir / "metadata.txt"};
  write_trajectory_csv_file(files.csv.string(), engine, traj, p.config.outputs.decimation);
  write_metadata(files.metadata.string(), scenario, p, engine, traj,
                 p.config.outputs.decimation);
  return files;
}

}  // namespace

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    ScenarioConfig config = load_config(config_path);
    finalize(config.system);
    const ValidationReport report = validate(config.system);
    if (!report.ok()) {
      out << render(report);
      out << config_path << ": " << report.violations.size() << " violation(s)\n";
      return kExitInvalid;
    }
    const SystemIndex ix = index_system(config.system);
    resolve_events(config.system, ix, config.events);
    out << config_path << ": ok (" << ix.n_buses << " buses, " << ix.n_lines << " lines, "
        << ix.n_areas << " heat areas, " << ix.n_edges << " edges, " << ix.n_nodes
        << " nodes, " << config.system.pumps.size() << " pumps, mode "
        << mode_name(system_mode(config.system)) << ")\n";
    return kExitOk;
  });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const Prepared p = prepare(args.config_path, false, err);
    const Engine engine(p.config.system);
    const Trajectory traj =
        args.to_steady ? integrate_to_steady(engine, engine.initial_state(), p.config.sim,
                                             p.schedule)
                       : integrate(engine, engine.initial_state(), p.config.sim, p.schedule);
    const fs::path dir = args.out_dir ? fs::path(*args.out_dir)
                                      : fs::path(p.config.outputs.directory);
    const SimulationFiles files = write_outputs(dir, args.config_path, p, engine, traj);
    out << "scenario: " << args.config_path << " (mode " << mode_name(p.mode) << ", "
        << engine.layout().dim << " states)\n";
    out << "integrated t in [" << fmt(traj.times.front()) << ", " << fmt(traj.final_time())
        << "], " << traj.times.size() << " samples\n";
    out << "steady: "
        << (traj.reached_steady ? "reached at t = " + fmt(traj.steady_time) : "not reached")
        << "\n";
    out << "security flags: " << security_samples(traj) << " samples\n";
    out << "wrote " << files.csv.string() << "\n";
    out << "wrote " << files.metadata.string() << "\n";
    return kExitOk;
  });
}

int cmd_equilibrium(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const Prepared p = prepare(config_path, false, err);
    const Engine engine(p.config.system);
    const CombinedSystem& system = p.config.system;
    const Loads loads =
        engine.loads_at(p.schedule, p.schedule.last_event_time(p.config.sim.t0));
    const EquilibriumSolution eq = p.mode == SystemMode::mode2
                                       ? mode2_equilibrium(engine, loads)
                                       : mode1_equilibrium(engine, loads);

    out << "mode: " << mode_name(p.mode) << "\n";
    out << "omega*: " << fmt(eq.omega_star) << "  (electric multiplier " << fmt(eq.lambda)
        << ")\n";
    for (int a = 0; a < p.ix.n_areas; ++a) {
      out << "area " << system.areas[a].id << ": Tbar* " << fmt(eq.Tbar_star(a))
          << "  (heat multiplier " << fmt(eq.mu(a)) << ")\n";
    }
    for (size_t g = 0; g < p.ix.generators.size(); ++g) {
      out << "pG* " << system.buses[p.ix.generators[g].bus].id << ": "
          << fmt(eq.pG_star(static_cast<int>(g))) << "\n";
    }
    for (size_t k = 0; k < p.ix.pumps.size(); ++k) {
      const auto& pump = system.pumps[p.ix.pumps[k].pump];
      out << "pump " << pump.bus << " -> " << pump.edge << ": pP* "
          << fmt(eq.pP_star(static_cast<int>(k))) << ", hP* "
          << fmt(eq.hP_star(static_cast<int>(k))) << "\n";
    }
    for (size_t s = 0; s < p.ix.sources.size(); ++s) {
      const auto& src = p.ix.sources[s];
      out << "hG* " << system.areas[src.area].edges[src.edge].id << ": "
          << fmt(eq.hG_star(static_cast<int>(s))) << "\n";
    }
    for (int b = 0; b < p.ix.n_buses; ++b) {
      if (system.buses[b].damping > 0.0) {
        out << "pU* " << system.buses[b].id << ": " << fmt(eq.pU_star(b)) << "\n";
      }
    }
    for (int l = 0; l < p.ix.n_lines; ++l) {
      out << "line " << system.lines[l].from << " -> " << system.lines[l].to << ": eta* "
          << fmt(eq.eta_star(l)) << ", flow "
          << fmt(system.lines[l].susceptance * std::sin(eq.eta_star(l))) << "\n";
    }
    out << "security: " << (eq.security_ok ? "ok" : "angle limit exceeded") << "\n";

    // Cross-check the closed form against the shared-constraint solver and
    // its bisection-based twin.
    std::map<std::string, double> expected;
    for (size_t g = 0; g < p.ix.generators.size(); ++g) {
      expected["pG:" + system.buses[p.ix.generators[g].bus].id] =
          eq.pG_star(static_cast<int>(g));
    }
    for (size_t s = 0; s < p.ix.sources.size(); ++s) {
      const auto& src = p.ix.sources[s];
      expected["hG:" + system.areas[src.area].edges[src.edge].id] =
          eq.hG_star(static_cast<int>(s));
    }
    for (int b = 0; b < p.ix.n_buses; ++b) {
      if (system.buses[b].damping > 0.0) {
        expected["pU:" + system.buses[b].id] = eq.pU_star(b);
      }
    }
    std::vector<QpSpec> specs;
    if (p.mode == SystemMode::mode2) {
      specs.push_back(qp_mode2(engine, loads));
    } else {
      for (size_t k = 0; k < p.ix.pumps.size(); ++k) {
        expected["pP:" + system.pumps[p.ix.pumps[k].pump].bus] =
            eq.pP_star(static_cast<int>(k));
      }
      specs.push_back(qp_electric_mode1(engine, loads));
      for (int a = 0; a < p.ix.n_areas; ++a) {
        double pump_heat = 0.0;
        for (size_t k = 0; k < p.ix.pumps.size(); ++k) {
          if (p.ix.pumps[k].area == a) pump_heat += eq.hP_star(static_cast<int>(k));
        }
        specs.push_back(qp_heat_mode1(engine, a, loads, pump_heat));
      }
    }
    double diff_closed = 0.0;
    double diff_numeric = 0.0;
    for (const QpSpec& spec : specs) {
      const QpSolution sol = solve_qp(spec);
      const QpSolution num = solve_qp_numeric(spec);
      for (size_t i = 0; i < spec.vars.size(); ++i) {
        const auto it = expected.find(spec.vars[i].label);
        if (it != expected.end()) {
          diff_closed = std::max(diff_closed,
                                 std::abs(sol.x(static_cast<int>(i)) - it->second));
        }
        diff_numeric = std::max(
            diff_numeric, std::abs(sol.x(static_cast<int>(i)) - num.x(static_cast<int>(i))));
      }
    }
    out << "allocation cross-check: |closed form - qp| <= " << fmt(diff_closed, "%.3g")
        << ", |qp - bisection| <= " << fmt(diff_numeric, "%.3g") << "\n";
    return kExitOk;
  });
}

int cmd_audit(const AuditArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const Prepared p = prepare(args.config_path, args.force_invalid, err);
    const Engine engine(p.config.system);
    const Trajectory traj =
        integrate_to_steady(engine, engine.initial_state(), p.config.sim, p.schedule);
    const std::vector<AuditSeries> series =
        audit_trajectory(engine, traj, p.schedule, args.tol);

    bool failed = false;
    for (const AuditSeries& s : series) {
      out << "series " << s.name << ": samples " << s.values.size() << ", final "
          << fmt(s.final_value, "%.6g") << ", monotone "
          << (s.require_monotone ? "required" : "informative");
      if (s.monotone.pass()) {
        out << ", no increase";
      } else {
        const int k = s.monotone.violations.front();
        out << ", " << s.monotone.violations.size() << " increase(s), first at t = "
            << fmt(traj.times[static_cast<size_t>(k) + 1]);
      }
      out << "\n";
      if (s.require_monotone && !s.monotone.pass()) {
        failed = true;
        out << "  FAIL: storage increased along the trajectory\n";
      }
      if (traj.reached_steady && s.final_value > args.decay_tol) {
        failed = true;
        out << "  FAIL: storage did not decay (final " << fmt(s.final_value, "%.6g") << " > "
            << fmt(args.decay_tol, "%.3g") << ")\n";
      }
    }
    if (!traj.reached_steady) {
      out << "note: trajectory did not reach steady state before t_end; decay not checked\n";
    }
    out << (failed ? "audit: FAIL\n" : "audit: ok\n");
    return failed ? kExitAudit : kExitOk;
  });
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const CsvTable table = read_csv_file(args.csv_path);
    if (table.rows.empty()) throw Error(args.csv_path + ": no samples");
    const int tcol = table.require_column("t");
    double t_from = table.rows.front().at(static_cast<size_t>(tcol));
    SettlingSpec spec;
    spec.band = args.band;
    spec.hold = args.hold;

    if (args.config_path) {
      const Prepared p = prepare(*args.config_path, false, err);
      t_from = p.schedule.last_event_time(p.config.sim.t0);
      AnalysisReport report = analyze_table(table, t_from, spec);
      add_implied_sharing(report, table, p.config.system, p.ix);
      out << render(report);
    } else {
      out << render(analyze_table(table, t_from, spec));
    }
    return kExitOk;
  });
}

namespace {

struct BatchRow {
  std::string name;
  std::string path;
  int code = kExitOk;
  bool steady = false;
  double max_omega = 0.0;
  long security = 0;
  std::string message;
};

BatchRow run_batch_scenario(const std::string& path, const fs::path& out_root) {
  BatchRow row;
  row.path = path;
  row.name = fs::path(path).stem().string();
  std::ostringstream quiet;
  row.code = guarded(quiet, [&]() {
    const Prepared p = prepare(path, false, quiet);
    const Engine engine(p.config.system);
    const Trajectory traj =
        integrate(engine, engine.initial_state(), p.config.sim, p.schedule);
    write_outputs(out_root / row.name, path, p, engine, traj);
    row.steady = traj.reached_steady;
    row.max_omega = max_abs_omega(traj);
    row.security = security_samples(traj);
    return kExitOk;
  });
  if (row.code != kExitOk) {
    std::string msg = quiet.str();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    row.message = msg;
  }
  return row;
}

}  // namespace

int cmd_batch(const BatchArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    if (args.config_paths.empty()) throw ConfigError("batch: no scenario files given");
    std::vector<std::string> paths = args.config_paths;
    std::sort(paths.begin(), paths.end(), [](const std::string& a, const std::string& b) {
      return fs::path(a).stem().string() < fs::path(b).stem().string();
    });
    for (size_t i = 0; i + 1 < paths.size(); ++i) {
      if (fs::path(paths[i]).stem() == fs::path(paths[i + 1]).stem()) {
        throw ConfigError("batch: duplicate scenario name '" +
                          fs::path(paths[i]).stem().string() + "'");
      }
    }
    const fs::path out_root(args.out_root);
    fs::create_directories(out_root);

    std::vector<BatchRow> rows(paths.size());
    std::atomic<size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const size_t n_workers =
        std::min(paths.size(),
                 static_cast<size_t>(args.jobs > 0 ? static_cast<unsigned>(args.jobs) : hw));
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&]() {
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= paths.size()) break;
          rows[i] = run_batch_scenario(paths[i], out_root);
        }
      });
    }
    for (std::thread& w : workers) w.join();

    int worst = kExitOk;
    out << "batch results (" << rows.size() << " scenarios, outputs under "
        << out_root.string() << "):\n";
    for (const BatchRow& row : rows) {
      out << "  " << row.name << ": ";
      if (row.code == kExitOk) {
        out << "ok, steady " << (row.steady ? "yes" : "no") << ", max|omega| "
            << fmt(row.max_omega, "%.6g") << ", security samples " << row.security << "\n";
      } else {
        out << "failed (exit " << row.code << ") " << row.message << "\n";
      }
      worst = std::max(worst, row.code);
    }
    return worst;
  });
}

}  // namespace chpsim
