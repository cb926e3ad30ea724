#include <gtest/gtest.h>

#include <chrono>
#include <set>

#include "trajprism/error.hpp"
#include "trajprism/harness.hpp"
#include "trajprism/text.hpp"
#include "test_support.hpp"

using namespace trajprism;
using trajprism::testing::TempDir;

namespace {

std::vector<TrajId> iota_ids(std::size_t n) {
    std::vector<TrajId> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<TrajId>(i + 1));
    return ids;
}

const CityBundle& small_city() {
    static const CityBundle b = [] {
        SynthConfig cfg;
        cfg.n = 5;
        cfg.n_traj = 40;
        cfg.seed = 5;
        return synth_city(cfg);
    }();
    return b;
}

} // namespace

// ---- split ----

TEST(Split, FloorSizes) {
    const Split a = split_ids(iota_ids(100), {});
    EXPECT_EQ(a.train.size(), 70u);
    EXPECT_EQ(a.val.size(), 10u);
    EXPECT_EQ(a.test.size(), 20u);
    const Split b = split_ids(iota_ids(10), {});
    EXPECT_EQ(b.train.size(), 7u);
    EXPECT_EQ(b.val.size(), 1u);
    EXPECT_EQ(b.test.size(), 2u);
    const Split c = split_ids(iota_ids(7), {});
    EXPECT_EQ(c.train.size(), 4u);
    EXPECT_EQ(c.val.size(), 0u);
    EXPECT_EQ(c.test.size(), 3u);
}

TEST(Split, DisjointExhaustiveAndSeeded) {
    SplitSpec spec;
    spec.seed = 9;
    const Split a = split_ids(iota_ids(57), spec);
    std::vector<TrajId> all;
    for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, iota_ids(57));
    const Split b = split_ids(iota_ids(57), spec);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    spec.seed = 10;
    EXPECT_NE(split_ids(iota_ids(57), spec).train, a.train);

    const Split back = split_from_json(json::parse(split_to_json(a).dump()));
    EXPECT_EQ(back.val, a.val);
    EXPECT_THROW(split_ids({}, {}), InvalidArgument);
    EXPECT_THROW(split_ids(iota_ids(3), {0.5, 0.5, 0.5, 0}), InvalidArgument);
}

// ---- synthetic city ----

TEST(SynthCity, TinyBundleRoundTripsThroughLoaders) {
    SynthConfig cfg;
    cfg.n = 3;
    cfg.n_traj = 5;
    cfg.seed = 1;
    const CityBundle b = synth_city(cfg);
    EXPECT_EQ(b.g.size(), 24u);
    ASSERT_EQ(b.trajs.size(), 5u);
    ASSERT_EQ(b.annotations.size(), 5u);
    for (const auto& t : b.trajs) {
        EXPECT_NO_THROW(validate_trajectory(t, b.g, 8));
        EXPECT_LE(t.rid_list.size(), 16u);
        EXPECT_TRUE(is_connected_path(b.g, t.rid_list));
    }

    TempDir dir;
    save_bundle(b, dir.path());
    const CityBundle back = load_bundle(dir.path());
    EXPECT_EQ(back.trajs.size(), b.trajs.size());
    EXPECT_EQ(back.annotations, b.annotations);
    EXPECT_EQ(back.g.segments(), b.g.segments());
    EXPECT_EQ(back.cells.gazetteer(), b.cells.gazetteer());
    EXPECT_EQ(back.hex.edge_m, b.hex.edge_m);
    EXPECT_EQ(back.config.at("grid_n"), 3);
    EXPECT_THROW(synth_city({2}), InvalidArgument);
}

TEST(SynthCity, DeterministicUnderSeed) {
    SynthConfig cfg;
    cfg.n = 4;
    cfg.n_traj = 12;
    cfg.seed = 3;
    TempDir a, b;
    save_bundle(synth_city(cfg), a.path());
    save_bundle(synth_city(cfg), b.path());
    for (const char* f : {"roadnet.jsonl", "cells.jsonl", "trajectories.jsonl", "annotations.jsonl", "config.json"}) {
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    }
    cfg.seed = 4;
    TempDir c;
    save_bundle(synth_city(cfg), c.path());
    EXPECT_NE(read_file(a / "trajectories.jsonl"), read_file(c / "trajectories.jsonl"));
}

TEST(SynthCity, TripsAreIn2014) {
    for (const auto& t : small_city().trajs) {
        EXPECT_GE(t.time_list.front(), 1388534400);
        EXPECT_LT(t.time_list.back(), 1420070400);
    }
}

TEST(SynthCity, GazetteerIsCleanAndUnique) {
    const CityBundle& b = small_city();
    std::set<std::string> pois, districts;
    std::size_t n_poi = 0;
    for (const auto& [id, meta] : b.cells.cells()) {
        n_poi += meta.poi_names.size();
        pois.insert(meta.poi_names.begin(), meta.poi_names.end());
        districts.insert(meta.district);
        const DescriptionFields f = parse_description(meta.description);
        EXPECT_FALSE(f.label.empty());
        EXPECT_FALSE(area_phrase(meta.description).empty()) << meta.description;
        EXPECT_EQ(f.district, meta.district);
    }
    EXPECT_EQ(pois.size(), n_poi);
    EXPECT_EQ(districts.size(), 4u);
    for (const auto& name : b.cells.gazetteer()) {
        for (const auto& w : word_tokens(name)) {
            for (const auto& [label, phrase] : default_terminology()) {
                for (const auto& lw : word_tokens(label + " " + phrase)) {
                    if (lw.size() > 3) EXPECT_NE(w, lw) << name;
                }
            }
        }
    }
}

TEST(SynthCity, AnnotationsAreCompleteAndGrounded) {
    const CityBundle& b = small_city();
    const auto phases = compress_all(b);
    HeuristicJudge judge;
    for (std::size_t i = 0; i < b.trajs.size(); ++i) {
        const auto& rec = b.annotations[i];
        EXPECT_EQ(rec.traj_id, b.trajs[i].mm_id);
        std::size_t instances = 0;
        for (const auto& s : rec.instructions()) instances += !s.empty();
        for (const auto& s : rec.queries()) instances += !s.empty();
        instances += !rec.trajectory_caption.empty();
        EXPECT_EQ(instances, 7u);
        const GroundingReport g = qc_grounding(rec, phases[i], b.cells);
        EXPECT_EQ(g.ungrounded_count(), 0u) << record_to_json(rec).dump();
        for (std::size_t f = 0; f < kUserFields.size(); ++f) {
            EXPECT_EQ(rec.field(f).find(';'), std::string::npos);
            EXPECT_EQ(rec.field(f).find("\xE2\x80\x94"), std::string::npos);
        }
    }
}

TEST(Pipeline, StagesComposeAndPlansRoundTrip) {
    const CityBundle& b = small_city();
    const auto phases = compress_all(b, 2);
    std::vector<IntentPlan> plans;
    for (const auto& t : b.trajs) plans.push_back(plan_intents(5, t.mm_id));
    const IntentPlan back = intent_plan_from_json(json::parse(intent_plan_to_json(plans[0]).dump()));
    EXPECT_EQ(back.profile.scenarios, plans[0].profile.scenarios);
    EXPECT_EQ(back.assignment, plans[0].assignment);
    EXPECT_EQ(back.style.persona, plans[0].style.persona);

    TemplateGenerator gen;
    HeuristicJudge judge;
    const auto raw = annotate_all(phases, plans, gen, 2);
    const QcResult qc = qc_all(judge, raw, phases, b.cells, 2);
    EXPECT_EQ(qc.records, b.annotations);
    const auto cards = judge_all(judge, qc, phases, b.cells, 2);
    ASSERT_EQ(cards.size(), b.trajs.size());
    for (const auto& c : cards) {
        EXPECT_TRUE(c.warnings.empty());
        for (int s : c.card.scores) {
            EXPECT_GE(s, 1);
            EXPECT_LE(s, 5);
        }
    }
    plans.pop_back();
    EXPECT_THROW(annotate_all(phases, plans, gen), InvalidArgument);
}

TEST(Benchmark, QueryDimensionsParse) {
    AnnotationRecord r;
    r.retrieval_planning = "Query 1 covers Dim 1 and Dim 3. Query 2 covers Dim 2. Query 3 covers Dim 4.";
    EXPECT_EQ(query_dimensions(r, 1), (std::vector<int>{1, 3}));
    EXPECT_EQ(query_dimensions(r, 2), (std::vector<int>{2}));
    EXPECT_EQ(query_dimensions(r, 3), (std::vector<int>{4}));
    EXPECT_TRUE(query_dimensions(r, 4).empty());
}

TEST(Benchmark, PerfectPredictionSentinels) {
    const CityBundle& b = small_city();
    BenchConfig cfg;
    cfg.seed = 2;
    const auto t1 = run_benchmark(b, 1, "echo", cfg).report["metrics"];
    EXPECT_EQ(t1["dest_hit"].get<double>(), 1.0);
    EXPECT_EQ(t1["dist_km"].get<double>(), 0.0);
    EXPECT_EQ(t1["jac"].get<double>(), 1.0);
    EXPECT_EQ(t1["dtw"].get<double>(), 0.0);
    EXPECT_EQ(t1["haus"].get<double>(), 0.0);
    EXPECT_EQ(t1["edr"].get<double>(), 0.0);

    const auto t2 = run_benchmark(b, 2, "oracle", cfg).report["metrics"];
    EXPECT_EQ(t2["r@1"].get<double>(), 1.0);
    EXPECT_EQ(t2["mrr"].get<double>(), 1.0);

    const auto t3 = run_benchmark(b, 3, "echo", cfg).report["metrics"];
    EXPECT_NEAR(t3["rouge_l"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(t3["meteor"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(t3["poi_r"].get<double>(), 1.0, 1e-12);
}

TEST(Benchmark, UnknownTaskOrMethodThrows) {
    const CityBundle& b = small_city();
    EXPECT_THROW(run_benchmark(b, 4, "echo", {}), InvalidArgument);
    EXPECT_THROW(run_benchmark(b, 1, "teleport", {}), InvalidArgument);
    EXPECT_THROW(run_benchmark(b, 2, "echo", {}), InvalidArgument);
    EXPECT_THROW(run_benchmark(b, 3, "oracle", {}), InvalidArgument);
}

TEST(Benchmark, FigureDataHasOneRowPerGroup) {
    const CityBundle& b = small_city();
    const auto r = run_benchmark(b, 1, "destsp-embed", {});
    EXPECT_EQ(std::count(r.csv.begin(), r.csv.end(), '\n'), 5); // header, all, three styles
    EXPECT_TRUE(r.csv.starts_with("task,method,group,"));
    EXPECT_EQ(figure_data(json::parse(r.report.dump())), r.csv);
}

TEST(Benchmark, ConfigOverridesAndRejects) {
    BenchConfig cfg;
    apply_bench_config(json::parse(R"({"seed": 9, "split": {"train": 0.5, "val": 0.2, "test": 0.3},
                                       "anchor": {"skeleton_m": 5, "start_filter": false},
                                       "fuse": {"epochs": 7, "lr": 0.1}, "shots": 2, "j_at_k": "mean"})"),
                       cfg);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.split.val, 0.2);
    EXPECT_EQ(cfg.anchor.skeleton_m, 5u);
    EXPECT_FALSE(cfg.anchor.start_filter);
    EXPECT_EQ(cfg.anchor.pool, AnchorConfig{}.pool);
    EXPECT_EQ(cfg.fuse.epochs, 7);
    EXPECT_EQ(cfg.fuse.lr, 0.1);
    EXPECT_EQ(cfg.shots, 2u);
    EXPECT_EQ(cfg.j_at_k, JaccardAggregate::Mean);

    for (const char* bad : {R"({"sede": 1})", R"({"fuse": {"epoch": 3}})", R"({"shots": "three"})",
                            R"({"shots": 0})", R"({"edr_eps_km": 0})", R"({"j_at_k": "median"})", R"([1, 2])"}) {
        BenchConfig c;
        EXPECT_THROW(apply_bench_config(json::parse(bad), c), ConfigError) << bad;
    }
}

TEST(Benchmark, MeanJaccardNeverExceedsMax) {
    const CityBundle& b = small_city();
    BenchConfig cfg;
    const auto mx = run_benchmark(b, 2, "embed", cfg).report["metrics"];
    cfg.j_at_k = JaccardAggregate::Mean;
    const auto mean = run_benchmark(b, 2, "embed", cfg).report["metrics"];
    EXPECT_DOUBLE_EQ(mean["j@1"].get<double>(), mx["j@1"].get<double>());
    for (const char* k : {"j@5", "j@10"}) EXPECT_LE(mean[k].get<double>(), mx[k].get<double>() + 1e-12) << k;
    EXPECT_EQ(mean["r@5"], mx["r@5"]);
}
