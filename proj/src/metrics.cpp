#include "trajprism/metrics.hpp"

#include <cmath>

#include "trajprism/annotate.hpp"
#include "trajprism/parallel.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

double dtw_km(std::span<const GeoPoint> a, std::span<const GeoPoint> b) {
    return dtw(a, b, haversine_km);
}

double hausdorff_km(std::span<const GeoPoint> a, std::span<const GeoPoint> b) {
    return hausdorff(a, b, haversine_km);
}

double edr_km(std::span<const GeoPoint> a, std::span<const GeoPoint> b, double eps_km) {
    if (!(eps_km > 0.0)) throw InvalidArgument("edr threshold must be positive");
    return edr(a, b, [eps_km](const GeoPoint& p, const GeoPoint& q) { return haversine_km(p, q) <= eps_km; });
}

namespace {

void require_nonempty(const Trajectory& t, const char* what) {
    if (t.rid_list.empty()) throw InvalidArgument(std::string(what) + " trajectory is empty");
}

} // namespace

int dest_hit(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, const HexConfig& cfg) {
    require_nonempty(pred, "predicted");
    require_nonempty(gt, "ground-truth");
    return dominant_cell(g.segment(pred.rid_list.back()), cfg) == dominant_cell(g.segment(gt.rid_list.back()), cfg);
}

double endpoint_dist_km(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g) {
    require_nonempty(pred, "predicted");
    require_nonempty(gt, "ground-truth");
    return haversine_km(trajectory_endpoint(pred, g), trajectory_endpoint(gt, g));
}

int hit_at_k(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, int k) {
    require_nonempty(pred, "predicted");
    require_nonempty(gt, "ground-truth");
    return hop_distance(g, pred.rid_list.back(), gt.rid_list.back(), k).has_value();
}

double jaccard_cells(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, const HexConfig& cfg) {
    require_nonempty(pred, "predicted");
    require_nonempty(gt, "ground-truth");
    const auto a = visited_cells(pred, g, cfg);
    const auto b = visited_cells(gt, g, cfg);
    const std::set<CellId> sa(a.begin(), a.end());
    const std::set<CellId> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto& c : sa) inter += sb.count(c);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

LengthFlags route_length_flags(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g) {
    const double gl = path_length_m(g, gt.rid_list);
    if (!(gl > 0.0)) throw InvalidArgument("ground-truth route has no length");
    const double ratio = path_length_m(g, pred.rid_list) / gl;
    return {ratio > 1.5 ? 1 : 0, ratio < 0.5 ? 1 : 0};
}

std::size_t oracle_select(std::span<const Trajectory> candidates, const Trajectory& gt, const RoadGraph& g) {
    if (candidates.empty()) throw InvalidArgument("oracle selection needs at least one candidate");
    std::size_t best = 0;
    double best_d = endpoint_dist_km(candidates[0], gt, g);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double d = endpoint_dist_km(candidates[i], gt, g);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

namespace {

struct RouteScores {
    double dest = 0, dist = 0, jac = 0, dtw = 0, haus = 0, edr = 0;
    std::vector<double> hits;
};

RouteScores score_route(const Trajectory& pred, const Trajectory& gt, const RoadGraph& g, const HexConfig& cfg,
                        double eps_km, const std::vector<int>& ks) {
    RouteScores s;
    s.dest = dest_hit(pred, gt, g, cfg);
    s.dist = endpoint_dist_km(pred, gt, g);
    s.jac = jaccard_cells(pred, gt, g, cfg);
    const auto pa = trajectory_points(pred, g);
    const auto pb = trajectory_points(gt, g);
    s.dtw = dtw_km(pa, pb);
    s.haus = hausdorff_km(pa, pb);
    s.edr = edr_km(pa, pb, eps_km);
    const int kmax = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());
    const auto hops = hop_distance(g, pred.rid_list.back(), gt.rid_list.back(), kmax);
    for (int k : ks) s.hits.push_back(hops && *hops <= k ? 1.0 : 0.0);
    return s;
}

} // namespace

Task1Report route_report(std::span<const RouteCase> cases, const RoadGraph& g, const HexConfig& cfg,
                         double eps_km, const std::vector<int>& ks, int jobs) {
    struct Row {
        RouteScores std_, oracle;
        LengthFlags flags;
    };
    std::vector<Row> rows(cases.size());
    parallel_for(cases.size(), jobs, [&](std::size_t i) {
        const RouteCase& c = cases[i];
        rows[i].std_ = score_route(c.pred, c.gt, g, cfg, eps_km, ks);
        rows[i].flags = route_length_flags(c.pred, c.gt, g);
        if (c.candidates.empty()) {
            rows[i].oracle = rows[i].std_;
        } else {
            const std::size_t k = oracle_select(c.candidates, c.gt, g);
            rows[i].oracle = score_route(c.candidates[k], c.gt, g, cfg, eps_km, ks);
        }
    });

    Task1Report r;
    r.n = rows.size();
    if (rows.empty()) return r;
    for (int k : ks) r.h_at[k] = r.o_h_at[k] = 0.0;
    for (const auto& row : rows) {
        r.dest_hit += row.std_.dest;
        r.dist_km += row.std_.dist;
        r.jaccard += row.std_.jac;
        r.dtw_km += row.std_.dtw;
        r.hausdorff_km += row.std_.haus;
        r.edr += row.std_.edr;
        r.over_rt += row.flags.over;
        r.under_rt += row.flags.under;
        r.o_dest_hit += row.oracle.dest;
        r.o_dist_km += row.oracle.dist;
        r.o_jaccard += row.oracle.jac;
        r.o_dtw_km += row.oracle.dtw;
        r.o_hausdorff_km += row.oracle.haus;
        r.o_edr += row.oracle.edr;
        for (std::size_t k = 0; k < ks.size(); ++k) {
            r.h_at[ks[k]] += row.std_.hits[k];
            r.o_h_at[ks[k]] += row.oracle.hits[k];
        }
    }
    const double n = static_cast<double>(rows.size());
    for (double* v : {&r.dest_hit, &r.dist_km, &r.jaccard, &r.dtw_km, &r.hausdorff_km, &r.edr, &r.over_rt,
                      &r.under_rt, &r.o_dest_hit, &r.o_dist_km, &r.o_jaccard, &r.o_dtw_km, &r.o_hausdorff_km,
                      &r.o_edr}) {
        *v /= n;
    }
    for (auto& [k, v] : r.h_at) v /= n;
    for (auto& [k, v] : r.o_h_at) v /= n;
    return r;
}

ordered_json task1_to_json(const Task1Report& r) {
    ordered_json j;
    j["n"] = r.n;
    for (const auto& [k, v] : r.h_at) j["h@" + std::to_string(k)] = v;
    j["dest_hit"] = r.dest_hit;
    j["dist_km"] = r.dist_km;
    j["jac"] = r.jaccard;
    j["dtw"] = r.dtw_km;
    j["haus"] = r.hausdorff_km;
    j["edr"] = r.edr;
    j["over_rt"] = r.over_rt;
    j["under_rt"] = r.under_rt;
    for (const auto& [k, v] : r.o_h_at) j["o_h@" + std::to_string(k)] = v;
    j["o_dest_hit"] = r.o_dest_hit;
    j["o_dist_km"] = r.o_dist_km;
    j["o_jac"] = r.o_jaccard;
    j["o_dtw"] = r.o_dtw_km;
    j["o_haus"] = r.o_hausdorff_km;
    j["o_edr"] = r.o_edr;
    return j;
}

Task2Report retrieval_report(std::span<const RetrievalQuery> queries, const std::map<TrajId, Trajectory>& trajs,
                             const RoadGraph& g, const HexConfig& cfg, const std::vector<int>& ks,
                             double jac_threshold, JaccardAggregate agg, int jobs) {
    if (ks.empty()) throw InvalidArgument("retrieval report needs at least one K");
    const int kmax = *std::max_element(ks.begin(), ks.end());
    struct Row {
        std::size_t rank = 0; // 1-based, 0 when absent
        std::vector<double> jac;
    };
    std::vector<Row> rows(queries.size());
    parallel_for(queries.size(), jobs, [&](std::size_t i) {
        const RetrievalQuery& q = queries[i];
        if (q.ranked.empty()) throw InvalidArgument("ranked list is empty");
        auto gt_it = trajs.find(q.gt);
        if (gt_it == trajs.end()) throw InvalidArgument("unknown ground-truth trajectory " + std::to_string(q.gt));
        for (std::size_t r = 0; r < q.ranked.size(); ++r) {
            if (q.ranked[r] == q.gt) {
                rows[i].rank = r + 1;
                break;
            }
        }
        const std::size_t top = std::min<std::size_t>(q.ranked.size(), static_cast<std::size_t>(kmax));
        for (std::size_t r = 0; r < top; ++r) {
            auto it = trajs.find(q.ranked[r]);
            if (it == trajs.end()) throw InvalidArgument("unknown ranked trajectory " + std::to_string(q.ranked[r]));
            rows[i].jac.push_back(jaccard_cells(it->second, gt_it->second, g, cfg));
        }
    });

    Task2Report rep;
    rep.n = rows.size();
    for (int k : ks) rep.j_at[k] = rep.sr_at[k] = rep.r_at[k] = 0.0;
    for (const auto& row : rows) {
        rep.mrr += row.rank ? 1.0 / static_cast<double>(row.rank) : 0.0;
        for (int k : ks) {
            const std::size_t top = std::min<std::size_t>(row.jac.size(), static_cast<std::size_t>(k));
            double best = 0.0, sum = 0.0;
            for (std::size_t r = 0; r < top; ++r) {
                best = std::max(best, row.jac[r]);
                sum += row.jac[r];
            }
            rep.j_at[k] += agg == JaccardAggregate::Max ? best : (top ? sum / static_cast<double>(top) : 0.0);
            rep.sr_at[k] += best > jac_threshold ? 1.0 : 0.0;
            rep.r_at[k] += (row.rank && row.rank <= static_cast<std::size_t>(k)) ? 1.0 : 0.0;
        }
    }
    if (rep.n) {
        const double n = static_cast<double>(rep.n);
        rep.mrr /= n;
        for (auto* m : {&rep.j_at, &rep.sr_at, &rep.r_at}) {
            for (auto& [k, v] : *m) v /= n;
        }
    }
    return rep;
}

ordered_json task2_to_json(const Task2Report& r) {
    ordered_json j;
    j["n"] = r.n;
    for (const auto& [k, v] : r.j_at) j["j@" + std::to_string(k)] = v;
    for (const auto& [k, v] : r.sr_at) j["sr@" + std::to_string(k)] = v;
    for (const auto& [k, v] : r.r_at) j["r@" + std::to_string(k)] = v;
    j["mrr"] = r.mrr;
    return j;
}

// ---- text metrics ----

double rouge_l(std::string_view pred, std::string_view ref) {
    const auto a = word_tokens(pred);
    const auto b = word_tokens(ref);
    if (a.empty() || b.empty()) return 0.0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[b.size()]);
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(a.size());
    const double r = lcs / static_cast<double>(b.size());
    return 2.0 * p * r / (p + r);
}

std::string stem(std::string_view word) {
    std::string w(word);
    auto ends = [&](std::string_view suf) { return w.size() >= suf.size() && w.ends_with(suf); };
    if (ends("ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    if (ends("ing") && w.size() > 5) return w.substr(0, w.size() - 3);
    if (ends("ed") && w.size() > 4) return w.substr(0, w.size() - 2);
    if (ends("ly") && w.size() > 4) return w.substr(0, w.size() - 2);
    if (ends("es") && w.size() > 4) return w.substr(0, w.size() - 2);
    if (ends("s") && !ends("ss") && w.size() > 3) return w.substr(0, w.size() - 1);
    return w;
}

double meteor(std::string_view pred, std::string_view ref) {
    const auto h = word_tokens(pred);
    const auto r = word_tokens(ref);
    if (h.empty() || r.empty()) return 0.0;
    std::vector<int> align(h.size(), -1);
    std::vector<bool> used(r.size(), false);
    auto stage = [&](auto&& key) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (align[i] >= 0) continue;
            const std::string hk = key(h[i]);
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (!used[j] && key(r[j]) == hk) {
                    align[i] = static_cast<int>(j);
                    used[j] = true;
                    break;
                }
            }
        }
    };
    stage([](const std::string& w) { return w; });
    stage([](const std::string& w) { return stem(w); });

    std::size_t matches = 0, chunks = 0;
    int prev = -2;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (align[i] < 0) {
            prev = -2;
            continue;
        }
        ++matches;
        if (align[i] != prev + 1) ++chunks;
        prev = align[i];
    }
    if (matches == 0) return 0.0;
    const double m = static_cast<double>(matches);
    const double p = m / static_cast<double>(h.size());
    const double rc = m / static_cast<double>(r.size());
    const double fmean = p * rc / (0.9 * p + 0.1 * rc);
    // A single contiguous chunk counts as unfragmented.
    const double frag = chunks <= 1 ? 0.0 : static_cast<double>(chunks) / m;
    return fmean * (1.0 - 0.5 * std::pow(frag, 3.0));
}

PoiRecall poi_recall(std::string_view pred, const std::set<std::string>& gt_pois) {
    PoiRecall out;
    out.n_gt = gt_pois.size();
    if (gt_pois.empty()) return out;
    const auto found = find_mentions(pred, gt_pois);
    const std::set<std::string> hit(found.begin(), found.end());
    out.recall = static_cast<double>(hit.size()) / static_cast<double>(gt_pois.size());
    return out;
}

std::size_t named_location_count(std::string_view pred, const std::set<std::string>& gazetteer) {
    const auto found = find_mentions(pred, gazetteer);
    return std::set<std::string>(found.begin(), found.end()).size();
}

Task3Report caption_report(std::span<const CaptionCase> cases, const std::set<std::string>& pois,
                           const std::set<std::string>& gazetteer, const EmbeddingScorer& scorer, int jobs) {
    struct Row {
        double rouge = 0, meteor = 0, poi = 0, nloc = 0, f1 = 0;
        std::size_t n_gt = 0;
    };
    std::vector<Row> rows(cases.size());
    parallel_for(cases.size(), jobs, [&](std::size_t i) {
        const CaptionCase& c = cases[i];
        rows[i].rouge = rouge_l(c.pred, c.ref);
        rows[i].meteor = meteor(c.pred, c.ref);
        const auto ref_pois = find_mentions(c.ref, pois);
        const PoiRecall pr = poi_recall(c.pred, std::set<std::string>(ref_pois.begin(), ref_pois.end()));
        rows[i].poi = pr.recall;
        rows[i].n_gt = pr.n_gt;
        rows[i].nloc = static_cast<double>(named_location_count(c.pred, gazetteer));
        if (scorer) rows[i].f1 = scorer(c.pred, c.ref);
    });
    Task3Report r;
    r.n = rows.size();
    if (rows.empty()) return r;
    double f1 = 0;
    for (const auto& row : rows) {
        r.rouge_l += row.rouge;
        r.meteor += row.meteor;
        r.poi_recall += row.poi;
        r.n_loc += row.nloc;
        r.poi_gt_total += row.n_gt;
        f1 += row.f1;
    }
    const double n = static_cast<double>(rows.size());
    r.rouge_l /= n;
    r.meteor /= n;
    r.poi_recall /= n;
    r.n_loc /= n;
    if (scorer) r.bs_f1 = f1 / n;
    return r;
}

ordered_json task3_to_json(const Task3Report& r) {
    ordered_json j;
    j["n"] = r.n;
    j["bs_f1"] = r.bs_f1 ? json(*r.bs_f1) : json(nullptr);
    j["rouge_l"] = r.rouge_l;
    j["meteor"] = r.meteor;
    j["poi_r"] = r.poi_recall;
    j["n_loc"] = r.n_loc;
    j["poi_gt_total"] = r.poi_gt_total;
    return j;
}

} // namespace trajprism
