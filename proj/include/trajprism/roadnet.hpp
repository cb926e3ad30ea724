#ifndef TRAJPRISM_ROADNET_HPP
#define TRAJPRISM_ROADNET_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trajprism/geo.hpp"

namespace trajprism {

using Rid = std::int64_t;

/// OSM highway tags accepted as road classes.
inline constexpr std::array<std::string_view, 20> kRoadClasses = {
    "motorway",     "motorway_link", "trunk",         "trunk_link",    "primary",
    "primary_link", "secondary",     "secondary_link", "tertiary",     "tertiary_link",
    "unclassified", "residential",   "living_street", "service",       "pedestrian",
    "track",        "road",          "footway",       "cycleway",      "path"};

bool is_road_class(std::string_view s);

struct RoadSegment {
    Rid rid = 0;
    GeoPoint start{};
    GeoPoint end{};
    std::optional<std::string> name;
    double length_m = 0.0;
    std::string road_class = "residential";
    double bearing = 0.0;

    friend bool operator==(const RoadSegment&, const RoadSegment&) = default;
};

/// Builds a validated segment. Without an explicit (polyline) length the
/// great-circle length of start-end is used.
RoadSegment make_segment(Rid rid, GeoPoint start, GeoPoint end, std::optional<std::string> name,
                         std::string road_class, std::optional<double> length_m = std::nullopt);

/// Directed segment graph: an edge u -> v means v may follow u.
/// Immutable after construction; rids are addressed densely in sorted order.
class RoadGraph {
public:
    RoadGraph() = default;

    /// Throws DanglingRidError when an adjacency entry names an unknown rid.
    RoadGraph(std::vector<RoadSegment> segments, const std::map<Rid, std::vector<Rid>>& adjacency);

    std::size_t size() const { return segments_.size(); }
    bool contains(Rid rid) const { return index_.count(rid) != 0; }

    const RoadSegment& segment(Rid rid) const;
    const RoadSegment* find(Rid rid) const;
    const std::vector<RoadSegment>& segments() const { return segments_; }

    std::vector<Rid> successors(Rid rid) const;

    std::size_t index_of(Rid rid) const;
    const std::vector<std::size_t>& successors_at(std::size_t i) const { return succ_[i]; }
    const std::vector<std::size_t>& undirected_at(std::size_t i) const { return undirected_[i]; }

    friend bool operator==(const RoadGraph& a, const RoadGraph& b) {
        return a.segments_ == b.segments_ && a.succ_ == b.succ_;
    }

private:
    std::vector<RoadSegment> segments_;
    std::vector<std::vector<std::size_t>> succ_;
    std::vector<std::vector<std::size_t>> undirected_;
    std::unordered_map<Rid, std::size_t> index_;
};

RoadGraph load_roadnet(const std::filesystem::path& path);
void save_roadnet(const RoadGraph& g, const std::filesystem::path& path);

/// Multiplicative edge biases. A segment's cost is
/// length_m * class_bias * (prefer_mult if in a preferred cell) * (avoid_mult if in an avoided cell),
/// where a segment's cell is the cell of its midpoint.
struct SoftWeights {
    std::set<CellId> prefer_cells;
    double prefer_mult = 0.7;
    std::set<CellId> avoid_cells;
    double avoid_mult = 1.5;
    std::map<std::string, double> class_bias;
    HexConfig hex{};
};

double edge_multiplier(const RoadSegment& seg, const SoftWeights& w);

/// Cost of traversing `path` after its first segment.
double path_cost(const RoadGraph& g, std::span<const Rid> path, const SoftWeights& w);
double path_length_m(const RoadGraph& g, std::span<const Rid> path);

/// True when every consecutive pair is an edge of g.
bool is_connected_path(const RoadGraph& g, std::span<const Rid> path);

struct Route {
    std::vector<Rid> path; ///< empty when unreachable
    double cost = 0.0;
    bool reachable() const { return !path.empty(); }
};

/// Minimum-cost directed path from src to dst; the cost of a path is the
/// weighted length of every segment entered after src. Equal-cost
/// alternatives resolve toward smaller predecessor rids.
Route dijkstra(const RoadGraph& g, Rid src, Rid dst, const SoftWeights& w = {});

struct ChainRoute {
    std::vector<Rid> path;
    double cost = 0.0;
    std::vector<Rid> dropped;             ///< waypoints that could not be reached
    std::vector<std::string> diagnostics; ///< one line per dropped waypoint
    bool reached_last = true;
};

/// Routes through the waypoints in order. An unreachable waypoint is
/// dropped and the next leg is planned from the last reached waypoint.
ChainRoute chain_dijkstra(const RoadGraph& g, std::span<const Rid> waypoints,
                          const SoftWeights& w = {});

/// Hop count on the undirected view of adjacency, or nullopt if beyond max_k.
std::optional<int> hop_distance(const RoadGraph& g, Rid a, Rid b, int max_k);

} // namespace trajprism

#endif // TRAJPRISM_ROADNET_HPP
