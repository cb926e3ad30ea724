#ifndef TRAJPRISM_TRAJ_HPP
#define TRAJPRISM_TRAJ_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "trajprism/geo.hpp"
#include "trajprism/jsonl.hpp"
#include "trajprism/roadnet.hpp"

namespace trajprism {

using TrajId = std::int64_t;

/// Map-matched trip: rid_list[i] is entered at time_list[i] (epoch seconds).
struct Trajectory {
    TrajId mm_id = 0;
    std::vector<Rid> rid_list;
    std::vector<std::int64_t> time_list;

    std::size_t size() const { return rid_list.size(); }
    std::int64_t duration() const {
        return time_list.empty() ? 0 : time_list.back() - time_list.front();
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Checks the type invariants; min_len is 2 for recorded trips and 1 for
/// predictions, which may degenerate to the start segment.
void validate_trajectory(const Trajectory& t, const RoadGraph& g, std::size_t min_len = 2);

json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& obj);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);
void save_trajectories(const std::vector<Trajectory>& ts, const std::filesystem::path& path);

/// Start of the first segment followed by the end of every segment.
std::vector<GeoPoint> trajectory_points(const Trajectory& t, const RoadGraph& g);
GeoPoint trajectory_endpoint(const Trajectory& t, const RoadGraph& g);

/// The cell of the segment midpoint.
CellId dominant_cell(const RoadSegment& seg, const HexConfig& cfg);

std::vector<CellId> segment_cells(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg);

/// Distinct cells in first-visit order.
std::vector<CellId> visited_cells(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg);

/// Segments grouped by dominant cell, rids ascending.
std::map<CellId, std::vector<Rid>> segments_by_cell(const RoadGraph& g, const HexConfig& cfg);

enum class PhaseRole : std::uint8_t { Origin, Transit, Destination };
std::string_view to_string(PhaseRole r);

struct Phase {
    CellId cell;
    int n = 0;
    Compass dir = Compass::N;
    std::int64_t dt = 0;
    PhaseRole role = PhaseRole::Transit;
    std::vector<std::string> road_names;
    std::string desc;
    std::size_t first = 0; ///< index of the phase's first segment in the trajectory
};

struct PhaseSeq {
    TrajId traj_id = 0;
    std::vector<Phase> phases;
    std::size_t n_rids = 0;
    std::int64_t start_time = 0;
    std::int64_t total_duration = 0;
};

/// Run-length encodes the trajectory over dominant cells.
PhaseSeq compress(const Trajectory& t, const RoadGraph& g, const CellIndex& cells,
                  const HexConfig& cfg);

/// "8 min 15 sec", "55 sec", "1 hr 2 min 0 sec".
std::string format_duration(std::int64_t seconds);

/// "Saturday, Jun 14, 2014 at 4:11 AM" (UTC).
std::string format_start_time(std::int64_t epoch_seconds);

/// Compressed trajectory in the published listing schema: traj_id, meta
/// {n_rids, n_phases, start_time, total_duration}, phases [{p, role, dir,
/// n, duration, road_names, desc}].
ordered_json phase_seq_to_json(const PhaseSeq& ps);

/// Geometry and timing summary used by captioning prompts.
struct StructuralFeatures {
    std::int64_t start_time = 0;
    std::int64_t total_duration = 0;
    std::size_t n_segments = 0;
    std::vector<double> bearing_changes; ///< signed turns at junctions, degrees
    std::vector<std::string> phase_headings;
    std::vector<std::string> road_names; ///< distinct, first-occurrence order
    std::vector<GeoPoint> phase_points;  ///< start of each phase, then the trip end

    friend bool operator==(const StructuralFeatures&, const StructuralFeatures&) = default;
};

/// Turns smaller than this are treated as road curvature and not recorded.
inline constexpr double kTurnThresholdDeg = 20.0;

/// Signed difference b - a in (-180, 180].
double bearing_change(double a, double b);

StructuralFeatures structural_features(const Trajectory& t, const RoadGraph& g,
                                       const CellIndex& cells, const HexConfig& cfg);

json features_to_json(const StructuralFeatures& f);
StructuralFeatures features_from_json(const json& obj);

/// Deterministic text block. Names are left out when include_names is false.
std::string features_to_text(const StructuralFeatures& f, bool include_names);

} // namespace trajprism

#endif // TRAJPRISM_TRAJ_HPP
