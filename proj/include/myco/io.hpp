#pragma once

#include <string>
#include <vector>

#include "myco/engine.hpp"
#include "myco/meanfield.hpp"

namespace myco {

// shortest decimal string that round-trips the exact double (replay contract)
std::string format_double(double v);

// one line per snapshot: {"t":...,"count":...,"positions":[[x,y],...],"labels":[...]}
std::string snapshots_to_ndjson(const std::vector<Snapshot>& snapshots);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// event log: one event per line with fields kind,t,actor,theta,child
std::string events_to_ndjson(const HistoryRecord& history);

// trajectory export: CSV label,birth,death,t,x,y (one row per stored sample)
std::string trajectories_to_csv(const HistoryRecord& history);

// replica statistics: CSV t,mean_count,var_count[,<observable columns>]
std::string replica_stats_to_csv(const ReplicaStats& stats,
                                 const std::vector<std::string>& observable_names = {},
                                 const std::vector<std::vector<double>>& observable_means = {});

// field snapshot, node-major with the grid spec in the header line
std::string field_to_csv(const GridSpec& grid, double t, const std::vector<double>& rho);

// monitor series: CSV t,mass,leak,clip (leak = heat leak + boundary flux)
std::string monitors_to_csv(const std::vector<StepMonitors>& monitors);

}  // namespace myco
