#include "trajprism/traj.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <numbers>
#include <set>
#include <sstream>

#include "trajprism/error.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

void validate_trajectory(const Trajectory& t, const RoadGraph& g, std::size_t min_len) {
    if (t.rid_list.size() != t.time_list.size()) {
        throw InvalidArgument("trajectory " + std::to_string(t.mm_id) +
                              ": rid_list and time_list lengths differ");
    }
    if (t.rid_list.size() < min_len) {
        throw InvalidArgument("trajectory " + std::to_string(t.mm_id) + " has fewer than " +
                              std::to_string(min_len) + " segments");
    }
    for (std::size_t i = 1; i < t.time_list.size(); ++i) {
        if (t.time_list[i] < t.time_list[i - 1]) {
            throw InvalidArgument("trajectory " + std::to_string(t.mm_id) +
                                  ": timestamps decrease at index " + std::to_string(i));
        }
    }
    std::vector<Rid> missing;
    for (Rid r : t.rid_list) {
        if (!g.contains(r)) missing.push_back(r);
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        throw UnresolvedSegmentError(std::move(missing));
    }
}

json trajectory_to_json(const Trajectory& t) {
    json obj;
    obj["mm_id"] = t.mm_id;
    obj["rid_list"] = t.rid_list;
    obj["time_list"] = t.time_list;
    return obj;
}

Trajectory trajectory_from_json(const json& obj) {
    Trajectory t;
    t.mm_id = obj.at("mm_id").get<TrajId>();
    t.rid_list = obj.at("rid_list").get<std::vector<Rid>>();
    t.time_list = obj.at("time_list").get<std::vector<std::int64_t>>();
    return t;
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
    std::vector<Trajectory> out;
    read_jsonl(path, [&](std::size_t line, const json& obj) {
        if (!obj.contains("mm_id") || !obj.contains("rid_list") || !obj.contains("time_list")) {
            throw ParseError("trajectory record needs mm_id, rid_list, time_list", line);
        }
        out.push_back(trajectory_from_json(obj));
    });
    return out;
}

void save_trajectories(const std::vector<Trajectory>& ts, const std::filesystem::path& path) {
    JsonlWriter out(path, "trajprism/trajectories");
    for (const auto& t : ts) out.write(trajectory_to_json(t));
}

std::vector<GeoPoint> trajectory_points(const Trajectory& t, const RoadGraph& g) {
    std::vector<GeoPoint> pts;
    if (t.rid_list.empty()) return pts;
    pts.reserve(t.rid_list.size() + 1);
    pts.push_back(g.segment(t.rid_list.front()).start);
    for (Rid r : t.rid_list) pts.push_back(g.segment(r).end);
    return pts;
}

GeoPoint trajectory_endpoint(const Trajectory& t, const RoadGraph& g) {
    if (t.rid_list.empty()) {
        throw InvalidArgument("empty trajectory has no endpoint");
    }
    return g.segment(t.rid_list.back()).end;
}

CellId dominant_cell(const RoadSegment& seg, const HexConfig& cfg) {
    return cell_of(midpoint(seg.start, seg.end), cfg);
}

std::vector<CellId> segment_cells(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg) {
    std::vector<CellId> out;
    out.reserve(t.rid_list.size());
    for (Rid r : t.rid_list) out.push_back(dominant_cell(g.segment(r), cfg));
    return out;
}

std::vector<CellId> visited_cells(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg) {
    std::vector<CellId> out;
    std::set<CellId> seen;
    for (const CellId& c : segment_cells(t, g, cfg)) {
        if (seen.insert(c).second) out.push_back(c);
    }
    return out;
}

std::map<CellId, std::vector<Rid>> segments_by_cell(const RoadGraph& g, const HexConfig& cfg) {
    std::map<CellId, std::vector<Rid>> out;
    for (const auto& seg : g.segments()) out[dominant_cell(seg, cfg)].push_back(seg.rid);
    return out;
}

std::string_view to_string(PhaseRole r) {
    switch (r) {
    case PhaseRole::Origin: return "O";
    case PhaseRole::Transit: return "T";
    case PhaseRole::Destination: return "D";
    }
    return "T";
}

namespace {

// Length-weighted circular mean of segment bearings.
Compass phase_heading(const Trajectory& t, const RoadGraph& g, std::size_t first, std::size_t n) {
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = first; i < first + n; ++i) {
        const auto& seg = g.segment(t.rid_list[i]);
        const double rad = seg.bearing * std::numbers::pi / 180.0;
        sx += seg.length_m * std::sin(rad);
        sy += seg.length_m * std::cos(rad);
    }
    double deg = std::atan2(sx, sy) * 180.0 / std::numbers::pi;
    if (deg < 0) deg += 360.0;
    return compass8(deg);
}

} // namespace

PhaseSeq compress(const Trajectory& t, const RoadGraph& g, const CellIndex& cells,
                  const HexConfig& cfg) {
    validate_trajectory(t, g, 1);
    const auto seg_cells = segment_cells(t, g, cfg);

    PhaseSeq ps;
    ps.traj_id = t.mm_id;
    ps.n_rids = t.rid_list.size();
    ps.start_time = t.time_list.front();
    ps.total_duration = t.duration();

    std::size_t i = 0;
    while (i < seg_cells.size()) {
        std::size_t j = i;
        while (j < seg_cells.size() && seg_cells[j] == seg_cells[i]) ++j;
        Phase ph;
        ph.cell = seg_cells[i];
        ph.first = i;
        ph.n = static_cast<int>(j - i);
        ph.dir = phase_heading(t, g, i, j - i);
        std::set<std::string> seen;
        for (std::size_t k = i; k < j; ++k) {
            const auto& name = g.segment(t.rid_list[k]).name;
            if (name && !name->empty() && seen.insert(*name).second) ph.road_names.push_back(*name);
        }
        if (const CellMeta* meta = cells.find(ph.cell)) ph.desc = meta->description;
        ps.phases.push_back(std::move(ph));
        i = j;
    }

    const std::size_t k_last = ps.phases.size() - 1;
    for (std::size_t k = 0; k < ps.phases.size(); ++k) {
        auto& ph = ps.phases[k];
        const std::int64_t begin = t.time_list[ph.first];
        const std::int64_t end =
            k < k_last ? t.time_list[ps.phases[k + 1].first] : t.time_list.back();
        ph.dt = end - begin;
        if (k == 0) {
            ph.role = PhaseRole::Origin;
        } else if (k == k_last) {
            ph.role = PhaseRole::Destination;
        } else {
            ph.role = PhaseRole::Transit;
        }
    }
    return ps;
}

std::string format_duration(std::int64_t seconds) {
    if (seconds < 0) seconds = 0;
    const std::int64_t h = seconds / 3600;
    const std::int64_t m = (seconds % 3600) / 60;
    const std::int64_t s = seconds % 60;
    std::ostringstream out;
    if (h > 0) {
        out << h << " hr " << m << " min " << s << " sec";
    } else if (m > 0) {
        out << m << " min " << s << " sec";
    } else {
        out << s << " sec";
    }
    return out.str();
}

std::string format_start_time(std::int64_t epoch_seconds) {
    static constexpr const char* kDays[] = {"Sunday",   "Monday", "Tuesday", "Wednesday",
                                            "Thursday", "Friday", "Saturday"};
    static constexpr const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    const std::time_t tt = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    int hour12 = tm.tm_hour % 12;
    if (hour12 == 0) hour12 = 12;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s, %s %d, %d at %d:%02d %s", kDays[tm.tm_wday],
                  kMonths[tm.tm_mon], tm.tm_mday, tm.tm_year + 1900, hour12, tm.tm_min,
                  tm.tm_hour < 12 ? "AM" : "PM");
    return buf;
}

ordered_json phase_seq_to_json(const PhaseSeq& ps) {
    ordered_json out;
    out["traj_id"] = ps.traj_id;
    ordered_json meta;
    meta["n_rids"] = ps.n_rids;
    meta["n_phases"] = ps.phases.size();
    meta["start_time"] = format_start_time(ps.start_time);
    meta["total_duration"] = format_duration(ps.total_duration);
    out["meta"] = meta;
    ordered_json phases = ordered_json::array();
    for (std::size_t k = 0; k < ps.phases.size(); ++k) {
        const auto& ph = ps.phases[k];
        ordered_json p;
        p["p"] = k;
        p["role"] = std::string(to_string(ph.role));
        p["dir"] = std::string(to_string(ph.dir));
        p["n"] = ph.n;
        p["duration"] = format_duration(ph.dt);
        p["road_names"] = ph.road_names;
        p["desc"] = ph.desc;
        phases.push_back(std::move(p));
    }
    out["phases"] = std::move(phases);
    return out;
}

double bearing_change(double a, double b) {
    double d = std::fmod(b - a, 360.0);
    if (d <= -180.0) d += 360.0;
    if (d > 180.0) d -= 360.0;
    return d;
}

StructuralFeatures structural_features(const Trajectory& t, const RoadGraph& g,
                                       const CellIndex& cells, const HexConfig& cfg) {
    const PhaseSeq ps = compress(t, g, cells, cfg);
    StructuralFeatures f;
    f.start_time = ps.start_time;
    f.total_duration = ps.total_duration;
    f.n_segments = t.rid_list.size();
    for (std::size_t i = 1; i < t.rid_list.size(); ++i) {
        const double d =
            bearing_change(g.segment(t.rid_list[i - 1]).bearing, g.segment(t.rid_list[i]).bearing);
        if (std::abs(d) >= kTurnThresholdDeg) f.bearing_changes.push_back(d);
    }
    std::set<std::string> seen;
    for (const auto& ph : ps.phases) {
        f.phase_headings.emplace_back(to_string(ph.dir));
        f.phase_points.push_back(g.segment(t.rid_list[ph.first]).start);
        for (const auto& n : ph.road_names) {
            if (seen.insert(n).second) f.road_names.push_back(n);
        }
    }
    f.phase_points.push_back(trajectory_endpoint(t, g));
    return f;
}

json features_to_json(const StructuralFeatures& f) {
    json obj;
    obj["start_time"] = f.start_time;
    obj["total_duration"] = f.total_duration;
    obj["n_segments"] = f.n_segments;
    obj["bearing_changes"] = f.bearing_changes;
    obj["phase_headings"] = f.phase_headings;
    obj["road_names"] = f.road_names;
    json pts = json::array();
    for (const auto& p : f.phase_points) pts.push_back({p.lat, p.lon});
    obj["phase_points"] = std::move(pts);
    return obj;
}

StructuralFeatures features_from_json(const json& obj) {
    StructuralFeatures f;
    f.start_time = obj.at("start_time").get<std::int64_t>();
    f.total_duration = obj.at("total_duration").get<std::int64_t>();
    f.n_segments = obj.at("n_segments").get<std::size_t>();
    f.bearing_changes = obj.at("bearing_changes").get<std::vector<double>>();
    f.phase_headings = obj.at("phase_headings").get<std::vector<std::string>>();
    f.road_names = obj.at("road_names").get<std::vector<std::string>>();
    for (const auto& p : obj.at("phase_points")) {
        f.phase_points.push_back(GeoPoint{p.at(0).get<double>(), p.at(1).get<double>()});
    }
    return f;
}

std::string features_to_text(const StructuralFeatures& f, bool include_names) {
    std::ostringstream out;
    out << "Start time: " << format_start_time(f.start_time) << "\n";
    out << "Total duration: " << format_duration(f.total_duration) << "\n";
    out << "Segments: " << f.n_segments << ", phases: " << f.phase_headings.size() << "\n";
    out << "Phase headings: " << join(f.phase_headings, " ") << "\n";
    out << "Bearing changes (deg):";
    if (f.bearing_changes.empty()) out << " none";
    for (std::size_t i = 0; i < f.bearing_changes.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%+.0f", f.bearing_changes[i]);
        out << (i == 0 ? " " : ", ") << buf;
    }
    out << "\n";
    out << "Coordinates:";
    for (const auto& p : f.phase_points) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), " (%.5f, %.5f)", p.lat, p.lon);
        out << buf;
    }
    out << "\n";
    if (include_names) {
        out << "Road names: " << (f.road_names.empty() ? "none" : join(f.road_names, " > ")) << "\n";
    }
    return out.str();
}

} // namespace trajprism
