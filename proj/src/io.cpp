#include "myco/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace myco {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string snapshots_to_ndjson(const std::vector<Snapshot>& snapshots) {
    std::string out;
    for (const Snapshot& s : snapshots) {
        out += "{\"t\":" + format_double(s.t);
        out += ",\"count\":" + std::to_string(s.labels.size());
        out += ",\"positions\":[";
        for (std::size_t i = 0; i < s.positions.size(); ++i) {
            if (i) out += ',';
            out += '[' + format_double(s.positions[i].x) + ',' + format_double(s.positions[i].y) + ']';
        }
        out += "],\"labels\":[";
        for (std::size_t i = 0; i < s.labels.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(s.labels[i]);
        }
        out += "]}\n";
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

namespace {
const char* kind_name(EventKind k) {
    switch (k) {
        case EventKind::Apical:
            return "apical";
        case EventKind::Lateral:
            return "lateral";
        case EventKind::Death:
            return "death";
    }
    return "?";
}
}  // namespace

std::string events_to_ndjson(const HistoryRecord& history) {
    std::string out;
    for (const EventRecord& e : history.events()) {
        out += std::string("{\"kind\":\"") + kind_name(e.kind) + "\"";
        out += ",\"t\":" + format_double(e.time);
        out += ",\"actor\":" + std::to_string(e.actor);
        if (e.kind == EventKind::Lateral) out += ",\"theta\":" + format_double(e.theta);
        if (e.kind != EventKind::Death) out += ",\"child\":" + std::to_string(e.child);
        out += "}\n";
    }
    return out;
}

std::string trajectories_to_csv(const HistoryRecord& history) {
    std::string out = "label,birth,death,t,x,y\n";
    history.for_each_lineage([&](const Lineage& l) {
        const std::string death = l.death_time() ? format_double(*l.death_time()) : "";
        for (std::size_t i = 0; i < l.sample_count(); ++i) {
            out += std::to_string(l.label()) + ',' + format_double(l.birth_time()) + ',' + death +
                   ',' + format_double(l.sample_time(i)) + ',' +
                   format_double(l.sample_position(i).x) + ',' +
                   format_double(l.sample_position(i).y) + '\n';
        }
    });
    return out;
}

std::string replica_stats_to_csv(const ReplicaStats& stats,
                                 const std::vector<std::string>& observable_names,
                                 const std::vector<std::vector<double>>& observable_means) {
    std::string out = "t,mean_count,var_count";
    for (const std::string& n : observable_names) out += ',' + n;
    out += '\n';
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        auto [mean, se] = ReplicaStats::mean_se(stats.counts, k);
        const double var = se * se * static_cast<double>(stats.replicas());
        out += format_double(stats.times[k]) + ',' + format_double(mean) + ',' + format_double(var);
        for (const auto& col : observable_means) out += ',' + format_double(col[k]);
        out += '\n';
    }
    return out;
}

std::string field_to_csv(const GridSpec& grid, double t, const std::vector<double>& rho) {
    std::string out = "# extent=" + format_double(grid.extent) + " h=" + format_double(grid.h) +
                      " n=" + std::to_string(grid.n()) + " t=" + format_double(t) +
                      " order=node-major\n";
    for (double v : rho) out += format_double(v) + '\n';
    return out;
}

std::string monitors_to_csv(const std::vector<StepMonitors>& monitors) {
    std::string out = "t,mass,leak,clip\n";
    for (const StepMonitors& m : monitors)
        out += format_double(m.t) + ',' + format_double(m.mass) + ',' +
               format_double(m.leak + m.flux) + ',' + format_double(m.clip) + '\n';
    return out;
}

}  // namespace myco
