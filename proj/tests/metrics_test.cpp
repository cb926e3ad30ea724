#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "trajprism/error.hpp"
#include "trajprism/metrics.hpp"
#include "trajprism/text.hpp"
#include "test_support.hpp"

using namespace trajprism;
using trajprism::testing::lattice_graph;

namespace {

const HexConfig kHex{{41.15, -8.62}, 174.0};

std::vector<GeoPoint> random_points(Rng& rng, std::size_t n) {
    std::vector<GeoPoint> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({41.15 + rng.uniform(0.0, 0.01), -8.62 + rng.uniform(0.0, 0.01)});
    return out;
}

// Minimum over every monotone warping path, enumerated explicitly.
double dtw_enumerate(const std::vector<GeoPoint>& a, const std::vector<GeoPoint>& b) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += haversine_km(a[i], b[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size()) walk(i + 1, j, acc);
        if (j + 1 < b.size()) walk(i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

// Straight recursion on the edit-distance definition.
int edr_recursive(const std::vector<GeoPoint>& a, std::size_t i, const std::vector<GeoPoint>& b, std::size_t j,
                  double eps) {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    const int sub = (haversine_km(a[i], b[j]) <= eps ? 0 : 1) + edr_recursive(a, i + 1, b, j + 1, eps);
    return std::min({sub, 1 + edr_recursive(a, i + 1, b, j, eps), 1 + edr_recursive(a, i, b, j + 1, eps)});
}

double hausdorff_brute(const std::vector<GeoPoint>& a, const std::vector<GeoPoint>& b) {
    double h = 0.0;
    for (const auto& p : a) {
        double m = 1e18;
        for (const auto& q : b) m = std::min(m, haversine_km(p, q));
        h = std::max(h, m);
    }
    for (const auto& q : b) {
        double m = 1e18;
        for (const auto& p : a) m = std::min(m, haversine_km(p, q));
        h = std::max(h, m);
    }
    return h;
}

Trajectory make_traj(TrajId id, std::vector<Rid> rids) {
    Trajectory t;
    t.mm_id = id;
    t.rid_list = std::move(rids);
    for (std::size_t i = 0; i < t.rid_list.size(); ++i) t.time_list.push_back(1402700000 + 30 * static_cast<int>(i));
    return t;
}

Trajectory lattice_walk(const RoadGraph& g, Rng& rng, TrajId id, std::size_t len) {
    std::vector<Rid> rids{g.segments()[rng.below(g.size())].rid};
    while (rids.size() < len) {
        const auto succ = g.successors(rids.back());
        rids.push_back(succ[rng.below(succ.size())]);
    }
    return make_traj(id, rids);
}

// Independent METEOR: same alignment rule, chunks counted from adjacent aligned pairs.
double meteor_reference(std::string_view pred, std::string_view ref) {
    const auto h = word_tokens(pred);
    const auto r = word_tokens(ref);
    if (h.empty() || r.empty()) return 0.0;
    std::vector<long> pos(h.size(), -1);
    std::vector<char> taken(r.size(), 0);
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (pos[i] >= 0) continue;
            for (std::size_t j = 0; j < r.size(); ++j) {
                const bool eq = pass == 0 ? h[i] == r[j] : stem(h[i]) == stem(r[j]);
                if (!taken[j] && eq) {
                    pos[i] = static_cast<long>(j);
                    taken[j] = 1;
                    break;
                }
            }
        }
    }
    double m = 0, adjacent = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (pos[i] < 0) continue;
        ++m;
        if (i + 1 < h.size() && pos[i + 1] == pos[i] + 1) ++adjacent;
    }
    if (m == 0) return 0.0;
    const double chunks = m - adjacent;
    const double p = m / h.size(), rc = m / r.size();
    const double f = 10 * p * rc / (rc + 9 * p);
    const double frag = chunks == 1 ? 0.0 : chunks / m;
    return f * (1 - 0.5 * frag * frag * frag);
}

} // namespace

// ---- sequence distances ----

TEST(Dtw, MatchesPathEnumeration) {
    Rng rng(11);
    const auto t0 = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_points(rng, 1 + rng.below(8));
        const auto b = random_points(rng, 1 + rng.below(8));
        EXPECT_NEAR(dtw_km(a, b), dtw_enumerate(a, b), 1e-9);
    }
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
}

TEST(Dtw, TrivialCases) {
    Rng rng(3);
    const auto a = random_points(rng, 6);
    EXPECT_DOUBLE_EQ(dtw_km(a, a), 0.0);
    const std::vector<GeoPoint> p{a[0]}, q{a[1]};
    EXPECT_DOUBLE_EQ(dtw_km(p, q), haversine_km(a[0], a[1]));
    EXPECT_THROW(dtw_km({}, a), InvalidArgument);
}

TEST(Dtw, GenericKernelOnScalars) {
    const std::vector<double> a{0, 1, 2}, b{0, 2};
    // Best path (0,0)(1,0 or 1,1)(2,1): 0 + 1 + 0.
    EXPECT_DOUBLE_EQ(dtw(a, b, [](double x, double y) { return std::abs(x - y); }), 1.0);
}

TEST(Hausdorff, MatchesBruteForce) {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_points(rng, 1 + rng.below(8));
        const auto b = random_points(rng, 1 + rng.below(8));
        EXPECT_NEAR(hausdorff_km(a, b), hausdorff_brute(a, b), 1e-9);
        EXPECT_DOUBLE_EQ(hausdorff_km(a, b), hausdorff_km(b, a));
    }
}

TEST(Hausdorff, TrivialCases) {
    Rng rng(4);
    const auto a = random_points(rng, 5);
    EXPECT_DOUBLE_EQ(hausdorff_km(a, a), 0.0);
    const std::vector<GeoPoint> p{a[0]}, q{a[3]};
    EXPECT_DOUBLE_EQ(hausdorff_km(p, q), haversine_km(a[0], a[3]));
}

TEST(Edr, MatchesRecursiveDefinition) {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_points(rng, 1 + rng.below(8));
        const auto b = random_points(rng, 1 + rng.below(8));
        const double eps = rng.uniform(0.05, 0.6);
        const double expect = static_cast<double>(edr_recursive(a, 0, b, 0, eps)) /
                               static_cast<double>(std::max(a.size(), b.size()));
        EXPECT_EQ(edr_km(a, b, eps), expect);
        EXPECT_EQ(edr_km(a, b, eps), edr_km(b, a, eps));
    }
}

TEST(Edr, TrivialCases) {
    Rng rng(5);
    const auto a = random_points(rng, 6);
    EXPECT_EQ(edr_km(a, a), 0.0);
    std::vector<GeoPoint> far;
    for (const auto& p : a) far.push_back({p.lat + 1.0, p.lon});
    EXPECT_EQ(edr_km(a, far), 1.0);
    EXPECT_THROW(edr_km(a, a, 0.0), InvalidArgument);
}

// ---- Task 1 ----

TEST(RouteMetrics, EchoIsPerfect) {
    Rng rng(21);
    const RoadGraph g = lattice_graph(5, rng);
    const Trajectory t = lattice_walk(g, rng, 1, 7);
    EXPECT_EQ(dest_hit(t, t, g, kHex), 1);
    EXPECT_EQ(endpoint_dist_km(t, t, g), 0.0);
    EXPECT_EQ(jaccard_cells(t, t, g, kHex), 1.0);
    EXPECT_EQ(hit_at_k(t, t, g, 0), 1);
    const auto f = route_length_flags(t, t, g);
    EXPECT_EQ(f.over, 0);
    EXPECT_EQ(f.under, 0);
}

TEST(RouteMetrics, DestHitAndDistance) {
    Rng rng(22);
    const RoadGraph g = lattice_graph(5, rng);
    const Trajectory a = make_traj(1, {0, 1, 2});
    const Trajectory b = make_traj(2, {20, 21, 22, 23, 24});
    EXPECT_EQ(dest_hit(a, b, g, kHex), 0);
    const double d = haversine_km(g.segment(2).end, g.segment(24).end);
    EXPECT_DOUBLE_EQ(endpoint_dist_km(a, b, g), d);
    EXPECT_DOUBLE_EQ(endpoint_dist_km(b, a, g), d);
    EXPECT_THROW(dest_hit(make_traj(3, {}), a, g, kHex), InvalidArgument);
}

TEST(RouteMetrics, HitAtKMatchesHops) {
    Rng rng(23);
    const RoadGraph g = lattice_graph(5, rng);
    // Lattice hop distance is the Manhattan distance of the node grid.
    for (int trial = 0; trial < 100; ++trial) {
        const Rid x = static_cast<Rid>(rng.below(25));
        const Rid y = static_cast<Rid>(rng.below(25));
        const int manhattan = std::abs(int(x / 5) - int(y / 5)) + std::abs(int(x % 5) - int(y % 5));
        const int k = static_cast<int>(rng.below(9));
        EXPECT_EQ(hit_at_k(make_traj(1, {x}), make_traj(2, {y}), g, k), manhattan <= k ? 1 : 0);
    }
    EXPECT_EQ(hit_at_k(make_traj(1, {0}), make_traj(2, {1}), g, 0), 0);
}

TEST(RouteMetrics, JaccardSetArithmetic) {
    // Segments centered on chosen cells: A, B for pred and B, C for gt gives 1/3.
    std::vector<RoadSegment> segs;
    const CellId cs[] = {{0, 0}, {3, 0}, {6, 0}};
    for (int i = 0; i < 3; ++i) {
        const GeoPoint m = cell_center(cs[i], kHex);
        segs.push_back(make_segment(i, {m.lat, m.lon - 0.0003}, {m.lat, m.lon + 0.0003}, "Rua", "residential"));
    }
    const RoadGraph g(std::move(segs), {{0, {1}}, {1, {2}}});
    EXPECT_DOUBLE_EQ(jaccard_cells(make_traj(1, {0, 1}), make_traj(2, {1, 2}), g, kHex), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(jaccard_cells(make_traj(1, {0}), make_traj(2, {2}), g, kHex), 0.0);
}

TEST(RouteMetrics, LengthFlags) {
    Rng rng(24);
    const RoadGraph g = lattice_graph(5, rng, 100.0, 100.0);
    const Trajectory gt = make_traj(1, {0, 1, 2, 3, 4});          // 500 m
    const auto f2 = route_length_flags(make_traj(2, {0, 1, 2, 3, 4, 9, 14, 19, 24, 23}), gt, g); // 1000 m
    EXPECT_EQ(f2.over, 1);
    EXPECT_EQ(f2.under, 0);
    const auto f04 = route_length_flags(make_traj(3, {0, 1}), gt, g); // 200 m
    EXPECT_EQ(f04.over, 0);
    EXPECT_EQ(f04.under, 1);
}

TEST(RouteMetrics, OracleSelectArgmin) {
    Rng rng(25);
    const RoadGraph g = lattice_graph(5, rng);
    const Trajectory gt = make_traj(9, {12, 13});
    std::vector<Trajectory> single{make_traj(1, {0})};
    EXPECT_EQ(oracle_select(single, gt, g), 0u);
    std::vector<Trajectory> pool{make_traj(1, {0}), gt, make_traj(2, {24})};
    EXPECT_EQ(oracle_select(pool, gt, g), 1u);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Trajectory> c;
        for (int i = 0; i < 6; ++i) c.push_back(make_traj(i, {static_cast<Rid>(rng.below(25))}));
        std::size_t best = 0;
        for (std::size_t i = 1; i < c.size(); ++i) {
            if (endpoint_dist_km(c[i], gt, g) < endpoint_dist_km(c[best], gt, g)) best = i;
        }
        EXPECT_EQ(oracle_select(c, gt, g), best);
    }
    EXPECT_THROW(oracle_select({}, gt, g), InvalidArgument);
}

TEST(RouteReport, EchoSentinelsAndOracleBound) {
    Rng rng(26);
    const RoadGraph g = lattice_graph(5, rng);
    std::vector<RouteCase> echo, noisy;
    for (int i = 0; i < 20; ++i) {
        const Trajectory t = lattice_walk(g, rng, i, 6);
        echo.push_back({t, t, {}});
        const Trajectory other = lattice_walk(g, rng, 100 + i, 6);
        noisy.push_back({t, other, {other, lattice_walk(g, rng, 200 + i, 6)}});
    }
    const Task1Report e = route_report(echo, g, kHex);
    EXPECT_EQ(e.n, 20u);
    EXPECT_EQ(e.dest_hit, 1.0);
    EXPECT_EQ(e.dist_km, 0.0);
    EXPECT_EQ(e.jaccard, 1.0);
    EXPECT_EQ(e.dtw_km, 0.0);
    EXPECT_EQ(e.hausdorff_km, 0.0);
    EXPECT_EQ(e.edr, 0.0);
    for (int k : kHitKs) EXPECT_EQ(e.h_at.at(k), 1.0);

    const Task1Report n = route_report(noisy, g, kHex, kEdrEpsKm, kHitKs, 3);
    EXPECT_LE(n.o_dist_km, n.dist_km + 1e-12);
    double prev = 0.0;
    for (int k : kHitKs) {
        EXPECT_GE(n.h_at.at(k), prev);
        prev = n.h_at.at(k);
    }
    // Parallel and serial reductions agree exactly.
    EXPECT_EQ(task1_to_json(n).dump(), task1_to_json(route_report(noisy, g, kHex)).dump());
}

TEST(RouteReport, JsonKeys) {
    const ordered_json j = task1_to_json(Task1Report{.h_at = {{1, 0.0}, {3, 0.0}, {5, 0.0}, {10, 0.0}},
                                                     .o_h_at = {{1, 0.0}, {3, 0.0}, {5, 0.0}, {10, 0.0}}});
    for (const char* k : {"h@1", "h@3", "h@5", "h@10", "dest_hit", "dist_km", "jac", "dtw", "haus", "edr",
                          "over_rt", "under_rt", "o_h@5", "o_dest_hit", "o_dist_km", "o_jac", "o_dtw", "o_haus",
                          "o_edr"}) {
        EXPECT_TRUE(j.contains(k)) << k;
    }
}

// ---- Task 2 ----

TEST(RetrievalReport, OracleRankerIsPerfect) {
    Rng rng(31);
    const RoadGraph g = lattice_graph(5, rng);
    std::map<TrajId, Trajectory> trajs;
    for (TrajId i = 0; i < 12; ++i) trajs[i] = lattice_walk(g, rng, i, 5);
    std::vector<RetrievalQuery> qs;
    for (TrajId i = 0; i < 12; ++i) {
        std::vector<TrajId> ranked{i};
        for (TrajId j = 0; j < 12; ++j) {
            if (j != i) ranked.push_back(j);
        }
        qs.push_back({ranked, i});
    }
    const Task2Report r = retrieval_report(qs, trajs, g, kHex);
    EXPECT_EQ(r.r_at.at(1), 1.0);
    EXPECT_EQ(r.mrr, 1.0);
    EXPECT_EQ(r.j_at.at(1), 1.0);
    EXPECT_EQ(r.sr_at.at(1), 1.0);
}

TEST(RetrievalReport, RankFourContributesQuarter) {
    Rng rng(32);
    const RoadGraph g = lattice_graph(5, rng);
    std::map<TrajId, Trajectory> trajs;
    for (TrajId i = 0; i < 5; ++i) trajs[i] = lattice_walk(g, rng, i, 5);
    std::vector<RetrievalQuery> qs{{{1, 2, 3, 0, 4}, 0}};
    const Task2Report r = retrieval_report(qs, trajs, g, kHex);
    EXPECT_DOUBLE_EQ(r.mrr, 0.25);
    EXPECT_EQ(r.r_at.at(1), 0.0);
    EXPECT_EQ(r.r_at.at(5), 1.0);
    std::vector<RetrievalQuery> missing{{{1, 2}, 0}};
    EXPECT_EQ(retrieval_report(missing, trajs, g, kHex).mrr, 0.0);
}

TEST(RetrievalReport, MatchesCountingOracle) {
    Rng rng(33);
    const RoadGraph g = lattice_graph(5, rng);
    std::map<TrajId, Trajectory> trajs;
    for (TrajId i = 0; i < 30; ++i) trajs[i] = lattice_walk(g, rng, i, 4 + rng.below(5));
    std::vector<RetrievalQuery> qs;
    for (int q = 0; q < 20; ++q) {
        std::vector<TrajId> ids(30);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);
        ids.resize(1 + rng.below(15));
        qs.push_back({ids, static_cast<TrajId>(rng.below(30))});
    }
    for (auto agg : {JaccardAggregate::Max, JaccardAggregate::Mean}) {
        const Task2Report r = retrieval_report(qs, trajs, g, kHex, kRetrievalKs, 0.8, agg, 4);
        double mrr = 0;
        for (const auto& q : qs) {
            for (std::size_t i = 0; i < q.ranked.size(); ++i) {
                if (q.ranked[i] == q.gt) mrr += 1.0 / (i + 1);
            }
        }
        EXPECT_NEAR(r.mrr, mrr / qs.size(), 1e-12);
        for (int k : kRetrievalKs) {
            double hits = 0, jac = 0, sr = 0;
            for (const auto& q : qs) {
                const std::size_t top = std::min<std::size_t>(k, q.ranked.size());
                double best = 0, sum = 0;
                bool found = false;
                for (std::size_t i = 0; i < top; ++i) {
                    const double j = jaccard_cells(trajs[q.ranked[i]], trajs[q.gt], g, kHex);
                    best = std::max(best, j);
                    sum += j;
                    found |= q.ranked[i] == q.gt;
                }
                hits += found;
                jac += agg == JaccardAggregate::Max ? best : sum / top;
                sr += best > 0.8;
            }
            EXPECT_NEAR(r.r_at.at(k), hits / qs.size(), 1e-12);
            EXPECT_NEAR(r.j_at.at(k), jac / qs.size(), 1e-12);
            EXPECT_NEAR(r.sr_at.at(k), sr / qs.size(), 1e-12);
        }
        if (agg == JaccardAggregate::Max) {
            EXPECT_LE(r.j_at.at(1), r.j_at.at(5));
            EXPECT_LE(r.j_at.at(5), r.j_at.at(10));
            EXPECT_LE(r.r_at.at(1), r.r_at.at(5));
            EXPECT_LE(r.sr_at.at(5), r.sr_at.at(10));
        }
    }
}

TEST(RetrievalReport, RejectsBadInput) {
    Rng rng(34);
    const RoadGraph g = lattice_graph(3, rng);
    std::map<TrajId, Trajectory> trajs{{0, make_traj(0, {0, 1})}};
    std::vector<RetrievalQuery> empty{{{}, 0}};
    EXPECT_THROW(retrieval_report(empty, trajs, g, kHex), InvalidArgument);
    std::vector<RetrievalQuery> unknown{{{7}, 0}};
    EXPECT_THROW(retrieval_report(unknown, trajs, g, kHex), InvalidArgument);
}

TEST(RetrievalReport, JsonKeys) {
    Task2Report r;
    for (int k : kRetrievalKs) r.j_at[k] = r.sr_at[k] = r.r_at[k] = 0;
    const ordered_json j = task2_to_json(r);
    for (const char* k : {"j@1", "j@5", "j@10", "sr@1", "sr@5", "sr@10", "r@1", "r@5", "r@10", "mrr"}) {
        EXPECT_TRUE(j.contains(k)) << k;
    }
}

// ---- Task 3 ----

TEST(RougeL, Examples) {
    EXPECT_DOUBLE_EQ(rouge_l("the cat sat", "the cat sat"), 1.0);
    EXPECT_DOUBLE_EQ(rouge_l("dog ran", "the cat sat"), 0.0);
    EXPECT_DOUBLE_EQ(rouge_l("the cat sat", "the cat"), 0.8);
    EXPECT_DOUBLE_EQ(rouge_l("", "the cat"), 0.0);
    EXPECT_DOUBLE_EQ(rouge_l("  The CAT sat ", "the cat sat"), 1.0);
}

TEST(Meteor, Examples) {
    EXPECT_DOUBLE_EQ(meteor("the trip ends near the park", "the trip ends near the park"), 1.0);
    EXPECT_DOUBLE_EQ(meteor("alpha beta", "gamma delta"), 0.0);
    EXPECT_DOUBLE_EQ(meteor("", "gamma"), 0.0);
    // Two single-word chunks: frag 1, penalty 0.5.
    EXPECT_DOUBLE_EQ(meteor("a b", "b a"), 0.5);
    EXPECT_DOUBLE_EQ(meteor("Heading NORTH", "heading north"), 1.0);
}

TEST(Meteor, StemStageMatches) {
    EXPECT_EQ(stem("turning"), "turn");
    EXPECT_EQ(stem("streets"), "street");
    EXPECT_EQ(stem("cities"), "city");
    EXPECT_EQ(stem("pass"), "pass");
    EXPECT_GT(meteor("turning streets", "turn street"), 0.99);
}

TEST(Meteor, MatchesReferenceImplementation) {
    Rng rng(41);
    const std::vector<std::string> vocab = {"the", "trip", "heads", "north", "turning", "turn", "streets", "street",
                                            "park", "ends", "near", "passes"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> a, b;
        for (std::size_t i = 0, n = rng.below(9); i < n; ++i) a.push_back(vocab[rng.below(vocab.size())]);
        for (std::size_t i = 0, n = rng.below(9); i < n; ++i) b.push_back(vocab[rng.below(vocab.size())]);
        const std::string pa = join(a, " "), pb = join(b, " ");
        const double s = meteor(pa, pb);
        EXPECT_NEAR(s, meteor_reference(pa, pb), 1e-12) << pa << " | " << pb;
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(PoiRecall, Counting) {
    const std::set<std::string> gt{normalize_name("Cafe Sol"), normalize_name("Torre Alta"),
                                   normalize_name("Mercado Norte")};
    EXPECT_DOUBLE_EQ(poi_recall("Ends near Cafe Sol, past Torre Alta and Mercado Norte.", gt).recall, 1.0);
    EXPECT_DOUBLE_EQ(poi_recall("Ends nowhere in particular.", gt).recall, 0.0);
    const PoiRecall empty = poi_recall("anything", {});
    EXPECT_DOUBLE_EQ(empty.recall, 1.0);
    EXPECT_EQ(empty.n_gt, 0u);

    Rng rng(42);
    const std::vector<std::string> names(gt.begin(), gt.end());
    for (int trial = 0; trial < 50; ++trial) {
        std::string text = "The trip";
        std::size_t hit = 0;
        for (const auto& n : names) {
            if (rng.below(2)) {
                text += ", near " + n;
                ++hit;
            }
        }
        EXPECT_DOUBLE_EQ(poi_recall(text, gt).recall, static_cast<double>(hit) / 3.0);
    }
}

TEST(NamedLocations, DistinctCount) {
    const std::set<std::string> gaz{normalize_name("Rua Sol"), normalize_name("Cafe Sol"), normalize_name("Baixa")};
    EXPECT_EQ(named_location_count("", gaz), 0u);
    EXPECT_EQ(named_location_count("Rua Sol, then Rua Sol again", gaz), 1u);
    EXPECT_EQ(named_location_count("From Rua Sol to Cafe Sol in Baixa", gaz), 3u);
}

TEST(CaptionReport, EchoIsPerfectAndKeysPresent) {
    const std::set<std::string> pois{normalize_name("Cafe Sol")};
    const std::set<std::string> gaz{normalize_name("Cafe Sol"), normalize_name("Rua Sol")};
    std::vector<CaptionCase> cases{{1, "Starts on Rua Sol and ends near Cafe Sol.", "Starts on Rua Sol and ends near Cafe Sol."},
                                   {2, "Heads north.", "Heads north."}};
    const Task3Report r = caption_report(cases, pois, gaz);
    EXPECT_DOUBLE_EQ(r.rouge_l, 1.0);
    EXPECT_DOUBLE_EQ(r.meteor, 1.0);
    EXPECT_DOUBLE_EQ(r.poi_recall, 1.0);
    EXPECT_DOUBLE_EQ(r.n_loc, 1.0);
    EXPECT_FALSE(r.bs_f1.has_value());
    const Task3Report s = caption_report(cases, pois, gaz, [](std::string_view, std::string_view) { return 0.5; });
    ASSERT_TRUE(s.bs_f1.has_value());
    EXPECT_DOUBLE_EQ(*s.bs_f1, 0.5);
    const ordered_json j = task3_to_json(s);
    for (const char* k : {"bs_f1", "rouge_l", "meteor", "poi_r", "n_loc"}) EXPECT_TRUE(j.contains(k)) << k;
}
