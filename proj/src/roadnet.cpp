#include "trajprism/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include "trajprism/error.hpp"
#include "trajprism/jsonl.hpp"

namespace trajprism {

bool is_road_class(std::string_view s) {
    return std::find(kRoadClasses.begin(), kRoadClasses.end(), s) != kRoadClasses.end();
}

RoadSegment make_segment(Rid rid, GeoPoint start, GeoPoint end, std::optional<std::string> name,
                         std::string road_class, std::optional<double> length_m) {
    if (!is_road_class(road_class)) {
        throw InvalidArgument("unknown road class '" + road_class + "'");
    }
    RoadSegment seg;
    seg.rid = rid;
    seg.start = make_point(start.lat, start.lon);
    seg.end = make_point(end.lat, end.lon);
    seg.name = std::move(name);
    seg.road_class = std::move(road_class);
    seg.length_m = length_m ? *length_m : haversine_km(seg.start, seg.end) * 1000.0;
    if (!(seg.length_m > 0.0) || !std::isfinite(seg.length_m)) {
        throw InvalidArgument("segment " + std::to_string(rid) + " has non-positive length");
    }
    seg.bearing = bearing_deg(seg.start, seg.end);
    return seg;
}

RoadGraph::RoadGraph(std::vector<RoadSegment> segments,
                     const std::map<Rid, std::vector<Rid>>& adjacency)
    : segments_(std::move(segments)) {
    std::sort(segments_.begin(), segments_.end(),
              [](const RoadSegment& a, const RoadSegment& b) { return a.rid < b.rid; });
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (!index_.emplace(segments_[i].rid, i).second) {
            throw InvalidArgument("duplicate rid " + std::to_string(segments_[i].rid));
        }
    }
    std::vector<Rid> dangling;
    succ_.assign(segments_.size(), {});
    undirected_.assign(segments_.size(), {});
    for (const auto& [from, targets] : adjacency) {
        auto fit = index_.find(from);
        if (fit == index_.end()) {
            dangling.push_back(from);
            continue;
        }
        for (Rid to : targets) {
            auto tit = index_.find(to);
            if (tit == index_.end()) {
                dangling.push_back(to);
                continue;
            }
            succ_[fit->second].push_back(tit->second);
        }
    }
    if (!dangling.empty()) {
        std::sort(dangling.begin(), dangling.end());
        dangling.erase(std::unique(dangling.begin(), dangling.end()), dangling.end());
        throw DanglingRidError(std::move(dangling));
    }
    for (std::size_t u = 0; u < succ_.size(); ++u) {
        auto& s = succ_[u];
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        for (std::size_t v : s) {
            undirected_[u].push_back(v);
            undirected_[v].push_back(u);
        }
    }
    for (auto& n : undirected_) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
}

const RoadSegment& RoadGraph::segment(Rid rid) const {
    return segments_[index_of(rid)];
}

const RoadSegment* RoadGraph::find(Rid rid) const {
    auto it = index_.find(rid);
    return it == index_.end() ? nullptr : &segments_[it->second];
}

std::vector<Rid> RoadGraph::successors(Rid rid) const {
    std::vector<Rid> out;
    for (std::size_t v : succ_[index_of(rid)]) out.push_back(segments_[v].rid);
    return out;
}

std::size_t RoadGraph::index_of(Rid rid) const {
    auto it = index_.find(rid);
    if (it == index_.end()) {
        throw InvalidArgument("unknown rid " + std::to_string(rid));
    }
    return it->second;
}

RoadGraph load_roadnet(const std::filesystem::path& path) {
    std::vector<RoadSegment> segs;
    std::map<Rid, std::vector<Rid>> adjacency;
    read_jsonl(path, [&](std::size_t line, const json& obj) {
        for (const char* key : {"rid", "start_lat", "start_lon", "end_lat", "end_lon", "road_class"}) {
            if (!obj.contains(key)) {
                throw ParseError(std::string("segment record missing '") + key + "'", line);
            }
        }
        const Rid rid = obj.at("rid").get<Rid>();
        std::optional<std::string> name;
        if (obj.contains("name") && !obj.at("name").is_null()) {
            name = obj.at("name").get<std::string>();
        }
        std::optional<double> length;
        if (obj.contains("length_m") && !obj.at("length_m").is_null()) {
            length = obj.at("length_m").get<double>();
        }
        try {
            segs.push_back(make_segment(
                rid, GeoPoint{obj.at("start_lat").get<double>(), obj.at("start_lon").get<double>()},
                GeoPoint{obj.at("end_lat").get<double>(), obj.at("end_lon").get<double>()},
                std::move(name), obj.at("road_class").get<std::string>(), length));
        } catch (const Error& e) {
            throw ParseError(e.what(), line);
        }
        if (adjacency.count(rid) != 0) {
            throw ParseError("duplicate rid " + std::to_string(rid), line);
        }
        adjacency[rid] = obj.value("successors", std::vector<Rid>{});
    });
    return RoadGraph(std::move(segs), adjacency);
}

void save_roadnet(const RoadGraph& g, const std::filesystem::path& path) {
    JsonlWriter out(path, "trajprism/roadnet");
    for (const auto& seg : g.segments()) {
        ordered_json obj;
        obj["rid"] = seg.rid;
        obj["start_lat"] = seg.start.lat;
        obj["start_lon"] = seg.start.lon;
        obj["end_lat"] = seg.end.lat;
        obj["end_lon"] = seg.end.lon;
        obj["name"] = seg.name ? ordered_json(*seg.name) : ordered_json(nullptr);
        obj["length_m"] = seg.length_m;
        obj["road_class"] = seg.road_class;
        obj["successors"] = g.successors(seg.rid);
        out.write(obj);
    }
}

// --- search ----------------------------------------------------------------

double edge_multiplier(const RoadSegment& seg, const SoftWeights& w) {
    double m = 1.0;
    if (auto it = w.class_bias.find(seg.road_class); it != w.class_bias.end()) {
        m *= it->second;
    }
    if (!w.prefer_cells.empty() || !w.avoid_cells.empty()) {
        const CellId c = cell_of(midpoint(seg.start, seg.end), w.hex);
        if (w.prefer_cells.count(c) != 0) m *= w.prefer_mult;
        if (w.avoid_cells.count(c) != 0) m *= w.avoid_mult;
    }
    return m;
}

namespace {

void check_weights(const SoftWeights& w) {
    auto ok = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!ok(w.prefer_mult) || !ok(w.avoid_mult)) {
        throw InvalidArgument("soft-weight multipliers must be finite and positive");
    }
    for (const auto& [cls, m] : w.class_bias) {
        if (!ok(m)) throw InvalidArgument("class bias for '" + cls + "' must be finite and positive");
    }
}

std::vector<double> edge_costs(const RoadGraph& g, const SoftWeights& w) {
    check_weights(w);
    std::vector<double> cost(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& seg = g.segments()[i];
        cost[i] = seg.length_m * edge_multiplier(seg, w);
    }
    return cost;
}

Route dijkstra_dense(const RoadGraph& g, std::size_t src, std::size_t dst,
                     const std::vector<double>& cost) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    Route route;
    if (src == dst) {
        route.path = {g.segments()[src].rid};
        return route;
    }
    std::vector<double> dist(g.size(), kInf);
    std::vector<std::size_t> pred(g.size(), kNone);
    std::vector<bool> done(g.size(), false);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[src] = 0.0;
    heap.emplace(0.0, src);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (done[u]) continue;
        done[u] = true;
        if (u == dst) break;
        for (std::size_t v : g.successors_at(u)) {
            if (done[v]) continue;
            const double nd = d + cost[v];
            if (nd < dist[v]) {
                dist[v] = nd;
                pred[v] = u;
                heap.emplace(nd, v);
            } else if (nd == dist[v] && u < pred[v]) {
                pred[v] = u;
            }
        }
    }
    if (!done[dst]) {
        return route;
    }
    route.cost = dist[dst];
    for (std::size_t v = dst; v != kNone; v = pred[v]) {
        route.path.push_back(g.segments()[v].rid);
        if (v == src) break;
    }
    std::reverse(route.path.begin(), route.path.end());
    return route;
}

} // namespace

double path_cost(const RoadGraph& g, std::span<const Rid> path, const SoftWeights& w) {
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const auto& seg = g.segment(path[i]);
        total += seg.length_m * edge_multiplier(seg, w);
    }
    return total;
}

double path_length_m(const RoadGraph& g, std::span<const Rid> path) {
    double total = 0.0;
    for (Rid r : path) total += g.segment(r).length_m;
    return total;
}

bool is_connected_path(const RoadGraph& g, std::span<const Rid> path) {
    for (std::size_t i = 1; i < path.size(); ++i) {
        const auto& s = g.successors_at(g.index_of(path[i - 1]));
        if (!std::binary_search(s.begin(), s.end(), g.index_of(path[i]))) return false;
    }
    return true;
}

Route dijkstra(const RoadGraph& g, Rid src, Rid dst, const SoftWeights& w) {
    const std::size_t s = g.index_of(src);
    const std::size_t d = g.index_of(dst);
    return dijkstra_dense(g, s, d, edge_costs(g, w));
}

ChainRoute chain_dijkstra(const RoadGraph& g, std::span<const Rid> waypoints, const SoftWeights& w) {
    if (waypoints.empty()) {
        throw InvalidArgument("chain_dijkstra needs at least one waypoint");
    }
    for (Rid r : waypoints) g.index_of(r);
    const auto cost = edge_costs(g, w);

    ChainRoute out;
    out.path.push_back(waypoints.front());
    std::size_t cur = g.index_of(waypoints.front());
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const std::size_t next = g.index_of(waypoints[i]);
        Route leg = dijkstra_dense(g, cur, next, cost);
        if (!leg.reachable()) {
            out.dropped.push_back(waypoints[i]);
            out.diagnostics.push_back("waypoint " + std::to_string(waypoints[i]) +
                                      " unreachable from " + std::to_string(g.segments()[cur].rid) +
                                      "; dropped");
            continue;
        }
        out.path.insert(out.path.end(), leg.path.begin() + 1, leg.path.end());
        out.cost += leg.cost;
        cur = next;
    }
    out.reached_last = g.segments()[cur].rid == waypoints.back();
    return out;
}

std::optional<int> hop_distance(const RoadGraph& g, Rid a, Rid b, int max_k) {
    if (max_k < 0) {
        throw InvalidArgument("max_k must be non-negative");
    }
    const std::size_t src = g.index_of(a);
    const std::size_t dst = g.index_of(b);
    if (src == dst) return 0;
    std::vector<int> depth(g.size(), -1);
    std::deque<std::size_t> queue{src};
    depth[src] = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        if (depth[u] >= max_k) continue;
        for (std::size_t v : g.undirected_at(u)) {
            if (depth[v] >= 0) continue;
            depth[v] = depth[u] + 1;
            if (v == dst) return depth[v];
            queue.push_back(v);
        }
    }
    return std::nullopt;
}

} // namespace trajprism
