#pragma once

#include "chpsim/csv.hpp"
#include "chpsim/netmodel.hpp"

#include <span>
#include <string>
#include <vector>

/// Post-processing of trajectory tables: settling times, peak deviations,
/// steady-state sharing ratios, security flags.
namespace chpsim {

struct SettlingSpec {
  double band = 5e-4;  // absolute band around the final value
  double hold = 2.0;   // the tail must be at least this long to count
};

struct SettlingResult {
  bool settled = false;
  double settling = 0.0;  // entry time minus t_from
};

/// Earliest sample time t >= t_from from which the signal stays within
/// `band` of its final value to the end of the record.  Settling is that
/// time minus t_from; a signal in band from t_from on settles in 0.  The
/// in-band tail must last at least `hold`, except in the settled-from-the-
/// start case.
SettlingResult settling_time(std::span<const double> times, std::span<const double> values,
                             double t_from, const SettlingSpec& spec);

struct SignalSummary {
  std::string column;
  double final_value = 0.0;
  double max_abs = 0.0;  // over t >= t_from
  SettlingResult settling;
};

/// Observed steady-state sharing between two injections, against the ratio
/// their cost coefficients prescribe (x_i / x_j = Q_j / Q_i).
struct SharingRatio {
  std::string numerator;
  std::string denominator;
  double observed = 0.0;
  double implied = 0.0;
};

struct AnalysisReport {
  double t_from = 0.0;
  double t_end = 0.0;
  std::vector<SignalSummary> frequencies;   // omega_* columns
  std::vector<SignalSummary> temperatures;  // Tbar_* columns
  double aggregate_pump_power = 0.0;        // sum of pP_* at the final sample
  long security_samples = 0;
  std::vector<SharingRatio> generator_sharing;  // filled by add_implied_sharing
  std::vector<SharingRatio> source_sharing;
};

/// Scans a trajectory table.  t_from is where settling measurement starts
/// (the last disturbance instant when known, else the first sample).
AnalysisReport analyze_table(const CsvTable& table, double t_from, const SettlingSpec& spec);

/// Adds generator and heat-source sharing ratios, pairing each device with
/// the first one of its group (sources pair within their area).  Ratios
/// whose denominator is ~0 are skipped.
void add_implied_sharing(AnalysisReport& report, const CsvTable& table,
                         const CombinedSystem& system, const SystemIndex& ix);

std::string render(const AnalysisReport& report);

}  // namespace chpsim
