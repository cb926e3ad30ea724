// Command-line driver for the benchmark pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "trajprism/error.hpp"
#include "trajprism/harness.hpp"

namespace fs = std::filesystem;
using namespace trajprism;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    int jobs = 1;
};

BenchConfig bench_config(const Globals& g) {
    BenchConfig cfg;
    if (!g.config.empty()) {
        json obj;
        try {
            obj = json::parse(read_file(g.config));
        } catch (const json::parse_error& e) {
            throw ConfigError(g.config + ": " + e.what());
        }
        apply_bench_config(obj, cfg);
    }
    cfg.seed = g.seed;
    cfg.jobs = g.jobs;
    return cfg;
}

Split split_for(const CityBundle& b, const BenchConfig& cfg) {
    std::vector<TrajId> ids;
    for (const auto& t : b.trajs) ids.push_back(t.mm_id);
    SplitSpec spec = cfg.split;
    spec.seed = cfg.seed;
    return split_ids(ids, spec);
}

std::vector<IntentPlan> load_plans(const fs::path& path) {
    std::vector<IntentPlan> plans;
    read_jsonl(path, [&](std::size_t, const json& obj) { plans.push_back(intent_plan_from_json(obj)); });
    return plans;
}

std::vector<IntentPlan> plans_for(const CityBundle& b, const std::string& path, std::uint64_t seed) {
    if (!path.empty()) return load_plans(path);
    std::vector<IntentPlan> plans;
    for (const auto& t : b.trajs) plans.push_back(plan_intents(seed, t.mm_id));
    return plans;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajprism: trajectory-language benchmark toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--config", g.config, "JSON overrides for split, anchor, fuse, shots, embed_dim");
    app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    std::string bundle, out, plans_path, method, route_method = "trajanchor", mode_name = "rap", query, report_path, csv_path;
    std::string roadnet, cells_path, trajs_path;
    double origin_lat = 41.15, origin_lon = -8.62, edge_m = 174.0, block_m = 300.0;
    int n = 5, task = 1, k = 3, top = 0;
    std::size_t n_traj = 100;
    Eigen::Index embed_dim = 256;
    bool no_annotate = false;
    std::optional<int> epochs, batch;
    std::optional<double> lr;
    std::string out_params, out_db, db_path;

    auto* ingest = app.add_subcommand("ingest", "Validate raw files and write a bundle");
    ingest->add_option("--roadnet", roadnet)->required();
    ingest->add_option("--cells", cells_path)->required();
    ingest->add_option("--trajectories", trajs_path)->required();
    ingest->add_option("--origin-lat", origin_lat)->capture_default_str();
    ingest->add_option("--origin-lon", origin_lon)->capture_default_str();
    ingest->add_option("--edge-m", edge_m)->capture_default_str();
    ingest->add_option("--out", out, "Bundle directory")->required();

    auto* synth = app.add_subcommand("synth-city", "Generate a synthetic grid city bundle");
    synth->add_option("--n", n, "Intersections per side")->capture_default_str();
    synth->add_option("--n-traj", n_traj)->capture_default_str();
    synth->add_option("--block-m", block_m)->capture_default_str();
    synth->add_flag("--no-annotate", no_annotate);
    synth->add_option("--out", out, "Bundle directory")->required();

    auto* compress_cmd = app.add_subcommand("compress", "Phase sequences as JSONL");
    auto* intents = app.add_subcommand("sample-intents", "Intent profiles, personas and query assignments");
    auto* annotate = app.add_subcommand("annotate", "Generate the seven language instances per trajectory");
    annotate->add_option("--plans", plans_path, "Plans from sample-intents; sampled when absent");
    auto* qc = app.add_subcommand("qc", "Sanitize annotations in place and report QC outcomes");
    auto* judge = app.add_subcommand("judge", "Rubric scores per trajectory");
    judge->add_option("--top", top, "Also print the top N trajectory ids");
    auto* split = app.add_subcommand("split", "Train/val/test ids");
    auto* anchor = app.add_subcommand("anchor-run", "Route generation predictions on the test split");
    anchor->add_option("--mode,--method", route_method)->capture_default_str();
    std::string which_split = "test";
    anchor->add_option("--split", which_split, "Which split to route")
        ->capture_default_str()
        ->check(CLI::IsMember({"train", "val", "test"}));
    std::optional<std::size_t> pool, skeleton;
    anchor->add_option("--pool", pool, "Anchor retrieval pool size");
    anchor->add_option("--skeleton", skeleton, "Skeleton waypoints per anchor");
    auto* fuse_train = app.add_subcommand("fuse-train", "Train the fused retriever");
    fuse_train->add_option("--out-params", out_params)->required();
    fuse_train->add_option("--out-db", out_db, "Fused vectors of every trajectory");
    fuse_train->add_option("--epochs", epochs);
    fuse_train->add_option("--batch", batch);
    fuse_train->add_option("--lr", lr);
    auto* retrieve_cmd = app.add_subcommand("fuse-retrieve", "Rank a fused database for one query");
    retrieve_cmd->add_option("--db", db_path)->required();
    retrieve_cmd->add_option("--query", query)->required();
    retrieve_cmd->add_option("--k", k)->capture_default_str();
    retrieve_cmd->add_option("--embed-dim", embed_dim)->capture_default_str();
    auto* rap = app.add_subcommand("rap-run", "Caption the test split");
    rap->add_option("--mode", mode_name)->capture_default_str()->check(CLI::IsMember({"struct", "sem", "rap"}));
    rap->add_option("--k", k)->capture_default_str();
    auto* eval = app.add_subcommand("eval", "Run one task and method, write the report");
    eval->add_option("--task", task)->required()->check(CLI::Range(1, 3));
    eval->add_option("--method", method)->required();
    eval->add_option("--csv", csv_path, "Figure data; defaults next to the report");
    std::optional<double> edr_eps;
    eval->add_option("--edr-eps-km", edr_eps, "EDR match threshold");
    auto* figure = app.add_subcommand("figure-data", "CSV figure data from a report");
    figure->add_option("--report", report_path)->required();

    for (auto* cmd : {compress_cmd, intents, annotate, qc, judge, split, anchor, fuse_train, rap, eval}) {
        cmd->add_option("--bundle,--city", bundle, "Bundle directory")->required();
    }
    for (auto* cmd : {compress_cmd, intents, qc, judge, split, anchor, rap, eval, figure}) {
        cmd->add_option("--out", out)->required();
    }
    annotate->add_option("--out", out, "Annotations file; defaults to the bundle's");
    app.fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        const BenchConfig cfg = bench_config(g);
        if (*ingest) {
            CityBundle b;
            b.hex = HexConfig{make_point(origin_lat, origin_lon), edge_m};
            b.g = load_roadnet(roadnet);
            b.cells = CellIndex::load(cells_path);
            b.trajs = load_trajectories(trajs_path);
            for (const auto& t : b.trajs) validate_trajectory(t, b.g, 1);
            b.config["generator"] = "ingest";
            save_bundle(b, out);
            std::printf("%zu segments, %zu cells, %zu trajectories\n", b.g.size(), b.cells.cells().size(),
                        b.trajs.size());
        } else if (*synth) {
            SynthConfig sc;
            sc.n = n;
            sc.seed = g.seed;
            sc.n_traj = n_traj;
            sc.block_m = block_m;
            sc.annotate = !no_annotate;
            const CityBundle b = synth_city(sc);
            save_bundle(b, out);
            std::printf("%zu segments, %zu cells, %zu trajectories\n", b.g.size(), b.cells.cells().size(),
                        b.trajs.size());
        } else if (*figure) {
            json report;
            try {
                report = json::parse(read_file(report_path));
            } catch (const json::parse_error& e) {
                throw ParseError(report_path + ": " + e.what(), 1);
            }
            write_file(out, figure_data(report));
        } else if (*retrieve_cmd) {
            const FusedDb db = load_fused_db(db_path);
            const HashEmbedder emb(embed_dim);
            for (TrajId id : fuse_retrieve(query, db, emb, static_cast<std::size_t>(k))) std::printf("%lld\n", static_cast<long long>(id));
        } else {
            CityBundle b = load_bundle(bundle);
            if (*compress_cmd) {
                JsonlWriter w(out, "trajprism/phases");
                for (const auto& ps : compress_all(b, cfg.jobs)) w.write(phase_seq_to_json(ps));
            } else if (*intents) {
                JsonlWriter w(out, "trajprism/intents");
                for (const auto& p : plans_for(b, "", g.seed)) w.write(intent_plan_to_json(p));
            } else if (*annotate) {
                auto gen = make_generator();
                b.annotations = annotate_all(compress_all(b, cfg.jobs), plans_for(b, plans_path, g.seed), *gen, cfg.jobs);
                save_annotations(b.annotations, out.empty() ? fs::path(bundle) / "annotations.jsonl" : fs::path(out));
            } else if (*qc) {
                HeuristicJudge j;
                const auto phases = compress_all(b, cfg.jobs);
                const QcResult r = qc_all(j, b.annotations, phases, b.cells, cfg.jobs);
                save_annotations(r.records, fs::path(bundle) / "annotations.jsonl");
                JsonlWriter w(out, "trajprism/qc");
                std::size_t flagged = 0;
                for (std::size_t i = 0; i < r.records.size(); ++i) {
                    w.write(qc_outcome_to_json(r.records[i].traj_id, r.outcomes[i]));
                    flagged += r.outcomes[i].grounding.ungrounded_count() > 0 || r.outcomes[i].hallucination.flagged ||
                               !r.outcomes[i].diversity.pass;
                }
                std::printf("%zu records, %zu with findings\n", r.records.size(), flagged);
            } else if (*judge) {
                HeuristicJudge j;
                const auto phases = compress_all(b, cfg.jobs);
                const QcResult r = qc_all(j, b.annotations, phases, b.cells, cfg.jobs);
                const auto scored = judge_all(j, r, phases, b.cells, cfg.jobs);
                JsonlWriter w(out, "trajprism/scores");
                std::vector<std::pair<TrajId, ScoreCard>> cards;
                for (const auto& s : scored) {
                    w.write(scorecard_to_json(s.card));
                    for (const auto& warn : s.warnings) std::fprintf(stderr, "warning: %s\n", warn.c_str());
                    cards.emplace_back(s.card.item, s.card);
                }
                if (top > 0) {
                    for (TrajId id : select_top(cards, static_cast<std::size_t>(top))) std::printf("%lld\n", static_cast<long long>(id));
                }
            } else if (*split) {
                write_file(out, split_to_json(split_for(b, cfg)).dump(2) + "\n");
            } else if (*anchor) {
                BenchConfig rc = cfg;
                if (pool) rc.anchor.pool = *pool;
                if (skeleton) rc.anchor.skeleton_m = *skeleton;
                Split s = split_for(b, rc);
                if (which_split == "train") s.test = s.train;
                if (which_split == "val") s.test = s.val;
                std::vector<std::string> styles;
                std::vector<std::vector<std::string>> diags;
                const auto cases = route_cases(b, s, route_method, rc, &styles, &diags);
                JsonlWriter w(out, "trajprism/routes");
                for (std::size_t i = 0; i < cases.size(); ++i) {
                    ordered_json row;
                    row["traj_id"] = cases[i].gt.mm_id;
                    row["style"] = styles[i];
                    row["method"] = route_method;
                    row["rid_list"] = cases[i].pred.rid_list;
                    row["time_list"] = cases[i].pred.time_list;
                    row["diagnostics"] = diags[i];
                    w.write(row);
                }
            } else if (*fuse_train) {
                const HashEmbedder emb(cfg.embed_dim);
                const Split s = split_for(b, cfg);
                std::vector<std::pair<std::string, TrajId>> pairs;
                for (TrajId id : s.train) {
                    for (const auto& q : b.annotation(id).queries()) pairs.emplace_back(q, id);
                }
                const auto rows = static_cast<Eigen::Index>(pairs.size());
                Eigen::MatrixXd Q(rows, emb.dim()), X(rows, kGeoDim + emb.dim());
                for (Eigen::Index i = 0; i < rows; ++i) {
                    const auto& [text, id] = pairs[static_cast<std::size_t>(i)];
                    Q.row(i) = emb.embed(text);
                    X.row(i) = fuse_features(b.traj(id), b.g, b.hex, b.cells, emb);
                }
                TrainConfig tc = cfg.fuse;
                tc.seed = cfg.seed;
                if (epochs) tc.epochs = *epochs;
                if (batch) tc.batch = static_cast<std::size_t>(*batch);
                if (lr) tc.lr = *lr;
                tc.batch = std::min(tc.batch, pairs.size());
                const TrainResult r = train_fuse(Q, X, tc);
                save_params(r.params, out_params);
                if (!r.loss_curve.empty()) {
                    std::printf("loss %.4f -> %.4f over %zu epochs\n", r.loss_curve.front(), r.loss_curve.back(),
                                r.loss_curve.size());
                }
                if (!out_db.empty()) {
                    std::vector<TrajId> ids;
                    Eigen::MatrixXd all(static_cast<Eigen::Index>(b.trajs.size()), X.cols());
                    for (std::size_t i = 0; i < b.trajs.size(); ++i) {
                        ids.push_back(b.trajs[i].mm_id);
                        all.row(static_cast<Eigen::Index>(i)) = fuse_features(b.trajs[i], b.g, b.hex, b.cells, emb);
                    }
                    save_fused_db(build_fused_db(r.params, ids, all), out_db);
                }
            } else if (*rap) {
                const HashEmbedder emb(cfg.embed_dim);
                const Split s = split_for(b, cfg);
                const CaptionMode mode = parse_caption_mode(mode_name);
                CaptionIndex idx;
                if (mode == CaptionMode::Rap) {
                    std::vector<CaptionPair> train;
                    for (TrajId id : s.train) train.push_back({b.traj(id), b.annotation(id).trajectory_caption});
                    idx = build_caption_index(train, b.g, b.cells, b.hex, emb);
                }
                auto gen = make_generator();
                JsonlWriter w(out, "trajprism/captions");
                for (TrajId id : s.test) {
                    const Trajectory& t = b.traj(id);
                    std::vector<CaptionExample> ex;
                    if (mode == CaptionMode::Rap) ex = retrieve_examples(t, b.g, b.cells, b.hex, idx, emb, static_cast<std::size_t>(k));
                    ordered_json row;
                    row["traj_id"] = id;
                    row["mode"] = mode_name;
                    row["caption"] = caption(*gen, assemble_caption_prompt(t, b.g, b.cells, b.hex, ex, mode));
                    w.write(row);
                }
            } else if (*eval) {
                BenchConfig ec = cfg;
                if (edr_eps) ec.edr_eps_km = *edr_eps;
                if (!(ec.edr_eps_km > 0)) throw ConfigError("--edr-eps-km must be positive");
                const BenchmarkResult r = run_benchmark(b, task, method, ec);
                write_file(out, r.report.dump(2) + "\n");
                write_file(csv_path.empty() ? fs::path(out).replace_extension(".csv") : fs::path(csv_path), r.csv);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
