#ifndef TRAJPRISM_METRICS_HPP
#define TRAJPRISM_METRICS_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajprism/error.hpp"
#include "trajprism/geo.hpp"
#include "trajprism/jsonl.hpp"
#include "trajprism/roadnet.hpp"
#include "trajprism/traj.hpp"

namespace trajprism {

// ---- sequence distances ----
//
// The kernels take any random-access ranges and a ground-distance functor.

template <typename A, typename B, typename Dist>
double dtw(const A& a, const B& b, Dist d) {
    const std::size_t n = std::size(a);
    const std::size_t m = std::size(b);
    if (n == 0 || m == 0) throw InvalidArgument("dtw needs non-empty sequences");
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, kInf);
    std::vector<double> cur(m + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = kInf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = d(a[i - 1], b[j - 1]) + best;
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

template <typename A, typename B, typename Dist>
double hausdorff(const A& a, const B& b, Dist d) {
    if (std::size(a) == 0 || std::size(b) == 0) throw InvalidArgument("hausdorff needs non-empty sets");
    auto directed = [&](const auto& x, const auto& y) {
        double worst = 0.0;
        for (const auto& p : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : y) best = std::min(best, d(p, q));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

/// Edit distance where elements match (cost 0) when `matches` holds,
/// normalized by the longer length.
template <typename A, typename B, typename Match>
double edr(const A& a, const B& b, Match matches) {
    const std::size_t n = std::size(a);
    const std::size_t m = std::size(b);
    if (n == 0 && m == 0) return 0.0;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (matches(a[i - 1], b[j - 1]) ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

/// Default EDR matching threshold, roughly one cell width.
inline constexpr double kEdrEpsKm = 0.1;

double dtw_km(std::span<const GeoPoint> a, std::span<const GeoPoint> b);
double hausdorff_km(std::span<const GeoPoint> a, std::span<const GeoPoint> b);
double edr_km(std::span<const GeoPoint> a, std::span<const GeoPoint> b, double eps_km = kEdrEpsKm);

// ---- Task 1: route generation ----

int dest_hit(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, const HexConfig& cfg);
double endpoint_dist_km(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g);
int hit_at_k(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, int k);
double jaccard_cells(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, const HexConfig& cfg);

struct LengthFlags {
    int over = 0;
    int under = 0;
};

/// Over when the predicted length exceeds 1.5x the ground truth, under below 0.5x.
LengthFlags route_length_flags(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g);

/// Candidate whose endpoint is closest to the ground truth; first wins ties.
std::size_t oracle_select(std::span<const Trajectory> candidates, const Trajectory& gt, const RoadGraph& g);

inline const std::vector<int> kHitKs = {1, 3, 5, 10};

/// One query of a route-generation run.
struct RouteCase {
    Trajectory gt;
    Trajectory pred;
    std::vector<Trajectory> candidates; ///< pool for the oracle metrics; pred alone when empty
};

struct Task1Report {
    std::size_t n = 0;
    double dest_hit = 0, dist_km = 0, jaccard = 0, dtw_km = 0, hausdorff_km = 0, edr = 0;
    double over_rt = 0, under_rt = 0;
    std::map<int, double> h_at;
    double o_dest_hit = 0, o_dist_km = 0, o_jaccard = 0, o_dtw_km = 0, o_hausdorff_km = 0, o_edr = 0;
    std::map<int, double> o_h_at;
};

Task1Report route_report(std::span<const RouteCase> cases, const RoadGraph& g, const HexConfig& cfg,
                         double eps_km = kEdrEpsKm, const std::vector<int>& ks = kHitKs, int jobs = 1);

ordered_json task1_to_json(const Task1Report& r);

// ---- Task 2: retrieval ----

inline const std::vector<int> kRetrievalKs = {1, 5, 10};

enum class JaccardAggregate : std::uint8_t { Max, Mean };

struct RetrievalQuery {
    std::vector<TrajId> ranked;
    TrajId gt = 0;
};

struct Task2Report {
    std::size_t n = 0;
    std::map<int, double> j_at, sr_at, r_at;
    double mrr = 0;
};

/// J@K is the per-query max (or mean) of cell Jaccard against the ground
/// truth over the top K; SR@K the fraction whose max exceeds the threshold.
Task2Report retrieval_report(std::span<const RetrievalQuery> queries, const std::map<TrajId, Trajectory>& trajs,
                             const RoadGraph& g, const HexConfig& cfg, const std::vector<int>& ks = kRetrievalKs,
                             double jac_threshold = 0.8, JaccardAggregate agg = JaccardAggregate::Max,
                             int jobs = 1);

ordered_json task2_to_json(const Task2Report& r);

// ---- Task 3: captioning ----

/// Token-level LCS F-measure.
double rouge_l(std::string_view pred, std::string_view ref);

/// Exact-then-stem unigram alignment, F_mean * (1 - 0.5 * frag^3).
double meteor(std::string_view pred, std::string_view ref);

/// Suffix-stripping stem used by the METEOR stem stage.
std::string stem(std::string_view word);

struct PoiRecall {
    double recall = 1.0;
    std::size_t n_gt = 0;
};

PoiRecall poi_recall(std::string_view pred, const std::set<std::string>& gt_pois);

std::size_t named_location_count(std::string_view pred, const std::set<std::string>& gazetteer);

struct CaptionCase {
    TrajId traj_id = 0;
    std::string pred;
    std::string ref;
};

/// Scores a caption pair in [0, 1]; plugged in for the embedding F1 column.
using EmbeddingScorer = std::function<double(std::string_view, std::string_view)>;

struct Task3Report {
    std::size_t n = 0;
    std::optional<double> bs_f1;
    double rouge_l = 0, meteor = 0, poi_recall = 0, n_loc = 0;
    std::size_t poi_gt_total = 0;
};

/// gt POIs come from matching the reference against `pois`; N-Loc counts
/// distinct `gazetteer` entries in the prediction.
Task3Report caption_report(std::span<const CaptionCase> cases, const std::set<std::string>& pois,
                           const std::set<std::string>& gazetteer, const EmbeddingScorer& scorer = {},
                           int jobs = 1);

ordered_json task3_to_json(const Task3Report& r);

} // namespace trajprism

#endif // TRAJPRISM_METRICS_HPP
