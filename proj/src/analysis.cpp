#include "chpsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace chpsim {

SettlingResult settling_time(std::span<const double> times, std::span<const double> values,
                             double t_from, const SettlingSpec& spec) {
  if (times.size() != values.size() || times.empty()) {
    throw std::invalid_argument("settling_time: empty or mismatched series");
  }
  const double target = values.back();
  size_t first = 0;
  while (first < times.size() && times[first] < t_from) ++first;
  if (first == times.size()) first = times.size() - 1;

  // Last index before the tail leaves the band, scanning backwards.
  size_t entry = times.size() - 1;
  for (size_t k = times.size(); k-- > first;) {
    if (std::abs(values[k] - target) > spec.band) break;
    entry = k;
  }
  if (std::abs(values[entry] - target) > spec.band) return {false, 0.0};

  SettlingResult r;
  r.settling = std::max(0.0, times[entry] - times[first]);
  if (entry == first) {
    r.settled = true;
    r.settling = 0.0;
  } else {
    r.settled = times.back() - times[entry] >= spec.hold;
  }
  return r;
}

namespace {

SignalSummary summarize(const CsvTable& table, int col, std::span<const double> times,
                        double t_from, const SettlingSpec& spec) {
  SignalSummary s;
  s.column = table.columns[col];
  std::vector<double> values = table.extract(col);
  s.final_value = values.back();
  for (size_t k = 0; k < values.size(); ++k) {
    if (times[k] >= t_from) s.max_abs = std::max(s.max_abs, std::abs(values[k]));
  }
  s.settling = settling_time(times, values, t_from, spec);
  return s;
}

double final_of(const CsvTable& table, const std::string& column) {
  return table.rows.back().at(static_cast<size_t>(table.require_column(column)));
}

void pairwise_sharing(std::vector<SharingRatio>& out, const CsvTable& table,
                      const std::vector<std::pair<std::string, double>>& columns_and_costs) {
  if (columns_and_costs.size() < 2) return;
  const auto& [ref_col, ref_cost] = columns_and_costs.front();
  const double ref = final_of(table, ref_col);
  if (std::abs(ref) < 1e-12) return;
  for (size_t i = 1; i < columns_and_costs.size(); ++i) {
    const auto& [col, cost] = columns_and_costs[i];
    SharingRatio r;
    r.numerator = col;
    r.denominator = ref_col;
    r.observed = final_of(table, col) / ref;
    r.implied = ref_cost / cost;
    out.push_back(r);
  }
}

}  // namespace

AnalysisReport analyze_table(const CsvTable& table, double t_from, const SettlingSpec& spec) {
  if (table.rows.empty()) throw Error("trajectory table has no rows");
  AnalysisReport report;
  const std::vector<double> times = table.extract(table.require_column("t"));
  report.t_from = std::max(t_from, times.front());
  report.t_end = times.back();

  for (size_t c = 0; c < table.columns.size(); ++c) {
    const std::string& name = table.columns[c];
    if (name.rfind("omega_", 0) == 0) {
      report.frequencies.push_back(
          summarize(table, static_cast<int>(c), times, report.t_from, spec));
    } else if (name.rfind("Tbar_", 0) == 0) {
      report.temperatures.push_back(
          summarize(table, static_cast<int>(c), times, report.t_from, spec));
    } else if (name.rfind("pP_", 0) == 0) {
      report.aggregate_pump_power += table.rows.back().at(c);
    } else if (name == "flag_security") {
      for (const auto& row : table.rows) {
        if (row.at(c) != 0.0) ++report.security_samples;
      }
    }
  }
  return report;
}

void add_implied_sharing(AnalysisReport& report, const CsvTable& table,
                         const CombinedSystem& system, const SystemIndex& ix) {
  std::vector<std::pair<std::string, double>> gens;
  for (const auto& g : ix.generators) {
    gens.emplace_back("pG_" + system.buses[g.bus].id, system.buses[g.bus].generator->Q_e);
  }
  pairwise_sharing(report.generator_sharing, table, gens);

  for (int a = 0; a < ix.n_areas; ++a) {
    std::vector<std::pair<std::string, double>> sources;
    for (const auto& src : ix.sources) {
      if (src.area != a) continue;
      const HeatEdge& e = system.areas[src.area].edges[src.edge];
      sources.emplace_back("hG_" + e.id, e.source->Q_h);
    }
    pairwise_sharing(report.source_sharing, table, sources);
  }
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void render_signals(std::ostringstream& out, const char* title,
                    const std::vector<SignalSummary>& signals) {
  if (signals.empty()) return;
  out << title << "\n";
  for (const SignalSummary& s : signals) {
    out << "  " << s.column << ": final " << num(s.final_value) << ", max|.| "
        << num(s.max_abs);
    if (s.settling.settled) {
      out << ", settles in " << num(s.settling.settling) << " s";
    } else {
      out << ", not settled";
    }
    out << "\n";
  }
}

void render_sharing(std::ostringstream& out, const char* title,
                    const std::vector<SharingRatio>& ratios) {
  if (ratios.empty()) return;
  out << title << "\n";
  for (const SharingRatio& r : ratios) {
    out << "  " << r.numerator << " / " << r.denominator << ": observed " << num(r.observed)
        << ", cost-implied " << num(r.implied) << "\n";
  }
}

}  // namespace

std::string render(const AnalysisReport& report) {
  std::ostringstream out;
  out << "window: t in [" << num(report.t_from) << ", " << num(report.t_end) << "]\n";
  render_signals(out, "frequencies", report.frequencies);
  render_signals(out, "average temperatures", report.temperatures);
  out << "aggregate pump power (final): " << num(report.aggregate_pump_power) << "\n";
  out << "security-flagged samples: " << report.security_samples << "\n";
  render_sharing(out, "generator sharing", report.generator_sharing);
  render_sharing(out, "heat source sharing", report.source_sharing);
  return out.str();
}

}  // namespace chpsim
