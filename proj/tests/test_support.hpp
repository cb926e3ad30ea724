#ifndef TRAJPRISM_TEST_SUPPORT_HPP
#define TRAJPRISM_TEST_SUPPORT_HPP

#include <unistd.h>

#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "trajprism/rng.hpp"
#include "trajprism/roadnet.hpp"

namespace trajprism::testing {

/// Graph whose segments are the nodes of an n x n lattice; rid = row * n + col.
/// Each segment may be followed by its 4-neighbors. Lengths are drawn from
/// [lo, hi] meters, or all equal to `lo` when lo == hi.
inline RoadGraph lattice_graph(int n, Rng& rng, double lo = 50.0, double hi = 500.0) {
    std::vector<RoadSegment> segs;
    std::map<Rid, std::vector<Rid>> adj;
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const Rid rid = row * n + col;
            const GeoPoint start{41.15 + row * 0.002, -8.62 + col * 0.002};
            const GeoPoint end{start.lat, start.lon + 0.001};
            const double len = lo == hi ? lo : rng.uniform(lo, hi);
            segs.push_back(make_segment(rid, start, end, "Street " + std::to_string(row), "residential", len));
            auto& out = adj[rid];
            if (col + 1 < n) out.push_back(rid + 1);
            if (col > 0) out.push_back(rid - 1);
            if (row + 1 < n) out.push_back(rid + n);
            if (row > 0) out.push_back(rid - n);
        }
    }
    return RoadGraph(std::move(segs), adj);
}

/// Minimum cost over all simple paths from src to dst (exhaustive DFS).
inline double brute_force_cost(const RoadGraph& g, Rid src, Rid dst, const SoftWeights& w) {
    std::vector<double> cost(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        cost[i] = g.segments()[i].length_m * edge_multiplier(g.segments()[i], w);
    }
    const std::size_t s = g.index_of(src);
    const std::size_t d = g.index_of(dst);
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> on_path(g.size(), false);
    auto dfs = [&](auto&& self, std::size_t u, double acc) -> void {
        if (acc >= best) return;
        if (u == d) {
            best = acc;
            return;
        }
        on_path[u] = true;
        for (std::size_t v : g.successors_at(u)) {
            if (!on_path[v]) self(self, v, acc + cost[v]);
        }
        on_path[u] = false;
    };
    dfs(dfs, s, 0.0);
    return best;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("trajprism_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace trajprism::testing

#endif // TRAJPRISM_TEST_SUPPORT_HPP
