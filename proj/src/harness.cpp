#include "trajprism/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "trajprism/error.hpp"
#include "trajprism/parallel.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

// ---- splits ----

Split split_ids(std::vector<TrajId> ids, const SplitSpec& spec) {
    if (ids.empty()) throw InvalidArgument("cannot split an empty id list");
    if (spec.train < 0 || spec.val < 0 || spec.test < 0 || std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
        throw InvalidArgument("split ratios must be non-negative and sum to 1");
    }
    Rng rng(spec.seed);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    const double n = static_cast<double>(ids.size());
    // a small epsilon keeps 0.7 * 10 from flooring to 6
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * n + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val * n + 1e-9));
    Split s;
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                 ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    return s;
}

ordered_json split_to_json(const Split& s) {
    ordered_json j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j;
}

Split split_from_json(const json& obj) {
    Split s;
    s.train = obj.at("train").get<std::vector<TrajId>>();
    s.val = obj.at("val").get<std::vector<TrajId>>();
    s.test = obj.at("test").get<std::vector<TrajId>>();
    return s;
}

// ---- bundle ----

const Trajectory& CityBundle::traj(TrajId id) const {
    for (const auto& t : trajs) {
        if (t.mm_id == id) return t;
    }
    throw InvalidArgument("unknown trajectory " + std::to_string(id));
}

const AnnotationRecord& CityBundle::annotation(TrajId id) const {
    for (const auto& r : annotations) {
        if (r.traj_id == id) return r;
    }
    throw InvalidArgument("no annotation for trajectory " + std::to_string(id));
}

ordered_json hex_to_json(const HexConfig& h) {
    ordered_json j;
    j["origin_lat"] = h.origin.lat;
    j["origin_lon"] = h.origin.lon;
    j["edge_m"] = h.edge_m;
    return j;
}

HexConfig hex_from_json(const json& obj) {
    HexConfig h;
    h.origin = make_point(obj.at("origin_lat").get<double>(), obj.at("origin_lon").get<double>());
    h.edge_m = obj.value("edge_m", 174.0);
    if (!(h.edge_m > 0.0)) throw ConfigError("hex edge_m must be positive");
    return h;
}

void save_bundle(const CityBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_roadnet(b.g, dir / "roadnet.jsonl");
    b.cells.save(dir / "cells.jsonl");
    save_trajectories(b.trajs, dir / "trajectories.jsonl");
    save_annotations(b.annotations, dir / "annotations.jsonl");
    ordered_json cfg = b.config;
    cfg["hex"] = hex_to_json(b.hex);
    write_file(dir / "config.json", cfg.dump(2) + "\n");
}

CityBundle load_bundle(const std::filesystem::path& dir) {
    CityBundle b;
    json cfg;
    try {
        cfg = json::parse(read_file(dir / "config.json"));
    } catch (const json::parse_error& e) {
        throw ParseError((dir / "config.json").string() + ": " + e.what(), 1);
    }
    b.config = ordered_json::parse(cfg.dump());
    if (!cfg.contains("hex")) throw ConfigError("config.json has no hex section");
    b.hex = hex_from_json(cfg.at("hex"));
    b.g = load_roadnet(dir / "roadnet.jsonl");
    b.cells = CellIndex::load(dir / "cells.jsonl");
    b.trajs = load_trajectories(dir / "trajectories.jsonl");
    for (const auto& t : b.trajs) validate_trajectory(t, b.g, 1);
    if (std::filesystem::exists(dir / "annotations.jsonl")) b.annotations = load_annotations(dir / "annotations.jsonl");
    return b;
}

// ---- synthetic city ----

namespace {

const std::vector<std::string> kRowStreets = {"Foundry", "Chapel", "Cooper", "Mercer",  "Tanner",   "Weaver",
                                              "Saddler", "Bishop", "Carver", "Draper", "Fletcher", "Glover"};
const std::vector<std::string> kColStreets = {"Lantern", "Quarry", "Thistle", "Vesper", "Kiln",   "Barrow",
                                              "Cinder",  "Harrow", "Ledger",  "Mortar", "Pewter", "Rampart"};
const std::vector<std::string> kPoiWords = {"Amber",  "Birch",     "Cobalt", "Dorian", "Elm",    "Falcon",
                                            "Granite", "Hazel",    "Ivory",  "Juniper", "Kestrel", "Laurel",
                                            "Marlow",  "Nettle",   "Oakley", "Pemberton", "Quill", "Rowan",
                                            "Sable",   "Thorne",   "Umber",  "Wren",   "Yarrow", "Zephyr"};
const std::vector<std::string> kDistricts = {"Highfield", "Kingsbridge", "Ashford", "Millbrook"};

struct LabelSpec {
    std::string label;
    double weight;
    std::vector<std::string> kinds;
    std::vector<std::string> narratives;
};

const std::vector<LabelSpec>& label_specs() {
    static const std::vector<LabelSpec> specs = {
        {"URBAN",
         0.5,
         {"Market", "Library", "Theatre", "Bakery", "Arcade", "Gallery"},
         {"Dense blocks of shops and flats.", "Office towers over busy sidewalks.",
          "Old terraces with corner cafes."}},
        {"GREEN/PARK",
         0.25,
         {"Gardens", "Pavilion", "Fountain", "Arboretum"},
         {"Lawns and shaded paths.", "Tree-lined walks around a pond."}},
        {"WATERFRONT",
         0.25,
         {"Pier", "Quay", "Boathouse", "Lighthouse"},
         {"Quays along the water.", "Docks and a promenade by the water."}},
    };
    return specs;
}

std::string pooled_name(const std::vector<std::string>& pool, int i, std::string_view suffix) {
    const auto k = static_cast<std::size_t>(i);
    std::string s = pool[k % pool.size()];
    if (k >= pool.size()) s += " " + std::to_string(k / pool.size() + 1);
    return s + " " + std::string(suffix);
}

} // namespace

CityBundle synth_city(const SynthConfig& cfg) {
    if (cfg.n < 3) throw InvalidArgument("synthetic city needs n >= 3");
    if (cfg.min_len < 2 || cfg.max_len < cfg.min_len) throw InvalidArgument("bad trajectory length range");
    if (!(cfg.block_m > 0.0)) throw InvalidArgument("block size must be positive");

    CityBundle b;
    b.hex = cfg.hex;
    const int n = cfg.n;
    const double m_per_deg = kEarthRadiusKm * 1000.0 * std::numbers::pi / 180.0;
    const double dlat = cfg.block_m / m_per_deg;
    const double dlon = cfg.block_m / (m_per_deg * std::cos(cfg.hex.origin.lat * std::numbers::pi / 180.0));
    auto node_at = [&](int r, int c) { return GeoPoint{cfg.hex.origin.lat + r * dlat, cfg.hex.origin.lon + c * dlon}; };

    // Directed segments between neighboring intersections.
    std::vector<RoadSegment> segs;
    std::vector<std::pair<int, int>> ends; // (from node, to node)
    auto add = [&](int r0, int c0, int r1, int c1, const std::string& name, bool main) {
        segs.push_back(make_segment(static_cast<Rid>(segs.size()), node_at(r0, c0), node_at(r1, c1), name,
                                    main ? "secondary" : "residential"));
        ends.emplace_back(r0 * n + c0, r1 * n + c1);
    };
    for (int r = 0; r < n; ++r) {
        const std::string name = pooled_name(kRowStreets, r, "Street");
        for (int c = 0; c + 1 < n; ++c) {
            add(r, c, r, c + 1, name, r == n / 2);
            add(r, c + 1, r, c, name, r == n / 2);
        }
    }
    for (int c = 0; c < n; ++c) {
        const std::string name = pooled_name(kColStreets, c, "Avenue");
        for (int r = 0; r + 1 < n; ++r) {
            add(r, c, r + 1, c, name, c == n / 2);
            add(r + 1, c, r, c, name, c == n / 2);
        }
    }
    std::map<int, std::vector<Rid>> leaving;
    for (std::size_t i = 0; i < ends.size(); ++i) leaving[ends[i].first].push_back(static_cast<Rid>(i));
    std::map<Rid, std::vector<Rid>> adj;
    for (std::size_t i = 0; i < ends.size(); ++i) {
        auto& out = adj[static_cast<Rid>(i)];
        for (Rid next : leaving[ends[i].second]) {
            if (ends[static_cast<std::size_t>(next)].second != ends[i].first) out.push_back(next);
        }
    }
    b.g = RoadGraph(std::move(segs), adj);

    // Gazetteer.
    Rng crng = Rng::for_item(cfg.seed, 0);
    const GeoPoint mid = node_at(n - 1, n - 1);
    const double mid_lat = (cfg.hex.origin.lat + mid.lat) / 2.0;
    const double mid_lon = (cfg.hex.origin.lon + mid.lon) / 2.0;
    std::set<std::string> used_pois;
    for (const auto& [cell, rids] : segments_by_cell(b.g, b.hex)) {
        double u = crng.uniform();
        const LabelSpec* spec = &label_specs().back();
        for (const auto& s : label_specs()) {
            if (u < s.weight) {
                spec = &s;
                break;
            }
            u -= s.weight;
        }
        const std::string narrative = spec->narratives[crng.below(spec->narratives.size())];
        std::vector<std::string> pois;
        const std::size_t n_poi = 1 + crng.below(2);
        for (std::size_t k = 0; k < n_poi; ++k) {
            std::string name;
            for (int tries = 0; tries < 64; ++tries) {
                name = kPoiWords[crng.below(kPoiWords.size())] + " " + spec->kinds[crng.below(spec->kinds.size())];
                if (!used_pois.count(name)) break;
            }
            while (used_pois.count(name)) name += " " + std::to_string(used_pois.size());
            used_pois.insert(name);
            pois.push_back(name);
        }
        std::vector<std::string> roads;
        for (Rid r : rids) {
            const auto& nm = b.g.segment(r).name;
            if (nm && std::find(roads.begin(), roads.end(), *nm) == roads.end()) roads.push_back(*nm);
        }
        const GeoPoint cc = cell_center(cell, b.hex);
        const std::string district = kDistricts[(cc.lat >= mid_lat ? 0 : 2) + (cc.lon >= mid_lon ? 1 : 0)];
        const std::string desc = "GNN: " + spec->label + " | Narrative: " + narrative + " | POIs: " + join(pois, ", ") +
                                 " | District: " + district;
        b.cells.insert(cell, desc, pois, roads, district);
    }

    // Random-walk trips.
    constexpr std::int64_t kYear2014 = 1388534400;
    for (std::size_t i = 0; i < cfg.n_traj; ++i) {
        Rng rng = Rng::for_item(cfg.seed, 1 + i);
        const auto len = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.min_len),
                                                             static_cast<std::int64_t>(cfg.max_len)));
        Trajectory t;
        t.mm_id = static_cast<TrajId>(i + 1);
        t.rid_list.push_back(b.g.segments()[rng.below(b.g.size())].rid);
        std::set<Rid> seen{t.rid_list.back()};
        while (t.rid_list.size() < len) {
            const auto succ = b.g.successors(t.rid_list.back());
            std::vector<Rid> fresh;
            for (Rid s : succ) {
                if (!seen.count(s)) fresh.push_back(s);
            }
            const auto& pick = fresh.empty() ? succ : fresh;
            const Rid next = pick[rng.below(pick.size())];
            t.rid_list.push_back(next);
            seen.insert(next);
        }
        const double speed_ms = rng.uniform(18.0, 45.0) / 3.6;
        std::int64_t clock = kYear2014 + rng.between(0, 364 * 86400 - 1);
        for (Rid r : t.rid_list) {
            t.time_list.push_back(clock);
            clock += std::max<std::int64_t>(1, std::llround(b.g.segment(r).length_m / speed_ms));
        }
        b.trajs.push_back(std::move(t));
    }

    b.config["generator"] = "synth-city";
    b.config["grid_n"] = cfg.n;
    b.config["block_m"] = cfg.block_m;
    b.config["seed"] = cfg.seed;
    b.config["n_traj"] = cfg.n_traj;

    if (cfg.annotate) {
        const auto phases = compress_all(b);
        std::vector<IntentPlan> plans;
        for (const auto& t : b.trajs) plans.push_back(plan_intents(cfg.seed, t.mm_id));
        TemplateGenerator gen;
        HeuristicJudge judge;
        b.annotations = qc_all(judge, annotate_all(phases, plans, gen), phases, b.cells).records;
    }
    return b;
}

// ---- annotation pipeline ----

IntentPlan plan_intents(std::uint64_t seed, TrajId id) {
    return {sample_profile(seed, id), sample_persona_style(seed, id), sample_assignment(seed, id)};
}

ordered_json intent_plan_to_json(const IntentPlan& p) {
    ordered_json j;
    j["traj_id"] = p.profile.traj_id;
    j["profile"] = profile_to_json(p.profile);
    j["style"] = persona_style_to_json(p.style);
    ordered_json a = ordered_json::array();
    for (const auto& dims : p.assignment) a.push_back(dims);
    j["assignment"] = a;
    return j;
}

IntentPlan intent_plan_from_json(const json& obj) {
    IntentPlan p;
    p.profile = profile_from_json(obj.at("profile"));
    p.style = persona_style_from_json(obj.at("style"));
    const auto& a = obj.at("assignment");
    if (!a.is_array() || a.size() != 3) throw SchemaError("assignment must list three queries");
    for (std::size_t q = 0; q < 3; ++q) p.assignment[q] = a[q].get<std::vector<int>>();
    if (!covers_all_dimensions(p.assignment)) throw InvalidAssignment("assignment leaves a dimension uncovered");
    return p;
}

std::vector<PhaseSeq> compress_all(const CityBundle& b, int jobs) {
    std::vector<PhaseSeq> out(b.trajs.size());
    parallel_for(b.trajs.size(), jobs, [&](std::size_t i) { out[i] = compress(b.trajs[i], b.g, b.cells, b.hex); });
    return out;
}

std::vector<AnnotationRecord> annotate_all(const std::vector<PhaseSeq>& phases, const std::vector<IntentPlan>& plans,
                                           Generator& gen, int jobs) {
    if (phases.size() != plans.size()) throw InvalidArgument("one intent plan per trajectory is required");
    std::vector<AnnotationRecord> out(phases.size());
    parallel_for(phases.size(), jobs, [&](std::size_t i) {
        if (plans[i].profile.traj_id != phases[i].traj_id) {
            throw InvalidArgument("intent plan for " + std::to_string(plans[i].profile.traj_id) +
                                  " does not match trajectory " + std::to_string(phases[i].traj_id));
        }
        const auto prompt = build_prompt(phases[i], plans[i].profile, plans[i].style, plans[i].assignment);
        out[i] = generate(gen, prompt, phases[i].traj_id);
    });
    return out;
}

QcResult qc_all(Judge& judge, const std::vector<AnnotationRecord>& records, const std::vector<PhaseSeq>& phases,
                const CellIndex& cells, int jobs) {
    if (records.size() != phases.size()) throw InvalidArgument("one phase sequence per record is required");
    QcResult r;
    r.records.resize(records.size());
    r.outcomes.resize(records.size());
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        r.records[i] = qc_punctuation(qc_terminology(records[i]));
        r.outcomes[i] = run_qc(judge, r.records[i], phases[i], cells);
    });
    return r;
}

std::vector<JudgeResult> judge_all(Judge& judge, const QcResult& qc, const std::vector<PhaseSeq>& phases,
                                   const CellIndex& cells, int jobs) {
    std::vector<JudgeResult> out(qc.records.size());
    parallel_for(qc.records.size(), jobs, [&](std::size_t i) {
        out[i] = judge_score(judge, qc.records[i], phases[i], cells, qc.outcomes[i]);
    });
    return out;
}

// ---- benchmark ----

void apply_bench_config(const json& obj, BenchConfig& cfg) {
    if (!obj.is_object()) throw ConfigError("config must be a JSON object");
    auto check_keys = [](const json& o, std::initializer_list<std::string_view> allowed, std::string_view where) {
        if (!o.is_object()) throw ConfigError(std::string(where) + " must be an object");
        for (auto it = o.begin(); it != o.end(); ++it) {
            if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
                throw ConfigError("unknown config key " + std::string(where) + "." + it.key());
            }
        }
    };
    check_keys(obj, {"seed", "split", "anchor", "fuse", "shots", "embed_dim", "jobs", "j_at_k", "edr_eps_km"}, "config");
    try {
        if (obj.contains("seed")) cfg.seed = obj["seed"].get<std::uint64_t>();
        if (obj.contains("jobs")) cfg.jobs = obj["jobs"].get<int>();
        if (obj.contains("shots")) cfg.shots = obj["shots"].get<std::size_t>();
        if (obj.contains("embed_dim")) cfg.embed_dim = obj["embed_dim"].get<Eigen::Index>();
        if (obj.contains("edr_eps_km")) cfg.edr_eps_km = obj["edr_eps_km"].get<double>();
        if (obj.contains("j_at_k")) {
            const auto form = obj["j_at_k"].get<std::string>();
            if (form != "max" && form != "mean") throw ConfigError("j_at_k must be \"max\" or \"mean\"");
            cfg.j_at_k = form == "max" ? JaccardAggregate::Max : JaccardAggregate::Mean;
        }
        if (obj.contains("split")) {
            const auto& s = obj["split"];
            check_keys(s, {"train", "val", "test"}, "split");
            cfg.split.train = s.value("train", cfg.split.train);
            cfg.split.val = s.value("val", cfg.split.val);
            cfg.split.test = s.value("test", cfg.split.test);
        }
        if (obj.contains("anchor")) {
            const auto& a = obj["anchor"];
            check_keys(a, {"pool", "skeleton_m", "dest_top", "pref_top", "start_filter", "dest_rerank"}, "anchor");
            cfg.anchor.pool = a.value("pool", cfg.anchor.pool);
            cfg.anchor.skeleton_m = a.value("skeleton_m", cfg.anchor.skeleton_m);
            cfg.anchor.dest_top = a.value("dest_top", cfg.anchor.dest_top);
            cfg.anchor.pref_top = a.value("pref_top", cfg.anchor.pref_top);
            cfg.anchor.start_filter = a.value("start_filter", cfg.anchor.start_filter);
            cfg.anchor.dest_rerank = a.value("dest_rerank", cfg.anchor.dest_rerank);
        }
        if (obj.contains("fuse")) {
            const auto& f = obj["fuse"];
            check_keys(f, {"epochs", "batch", "lr"}, "fuse");
            cfg.fuse.epochs = f.value("epochs", cfg.fuse.epochs);
            cfg.fuse.batch = f.value("batch", cfg.fuse.batch);
            cfg.fuse.lr = f.value("lr", cfg.fuse.lr);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    if (cfg.embed_dim < 1 || cfg.shots < 1 || cfg.fuse.batch < 1 || cfg.fuse.epochs < 0 || !(cfg.edr_eps_km > 0)) {
        throw ConfigError("embed_dim, shots, fuse.batch and edr_eps_km must be positive");
    }
}

std::vector<int> query_dimensions(const AnnotationRecord& rec, int query) {
    static const std::regex kQuery(R"(Query (\d) covers ([^.]*)\.)");
    static const std::regex kDim(R"(Dim (\d))");
    for (auto it = std::sregex_iterator(rec.retrieval_planning.begin(), rec.retrieval_planning.end(), kQuery);
         it != std::sregex_iterator(); ++it) {
        if (std::stoi((*it)[1].str()) != query) continue;
        std::vector<int> dims;
        const std::string body = (*it)[2].str();
        for (auto d = std::sregex_iterator(body.begin(), body.end(), kDim); d != std::sregex_iterator(); ++d) {
            dims.push_back(std::stoi((*d)[1].str()));
        }
        return dims;
    }
    return {};
}

namespace {

std::unique_ptr<Generator> default_generator() {
    const std::string url = provider_url_from_env();
    if (!url.empty()) return std::make_unique<HttpGenerator>(url);
    return std::make_unique<TemplateGenerator>();
}

bool has_method(std::span<const std::string_view> methods, std::string_view m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::set<std::string> all_pois(const CellIndex& cells) {
    std::set<std::string> out;
    for (const auto& [id, meta] : cells.cells()) out.insert(meta.poi_names.begin(), meta.poi_names.end());
    return out;
}

ordered_json report_header(int task, std::string_view method, const BenchConfig& cfg, const Split& s) {
    ordered_json j;
    j["task"] = task;
    j["method"] = std::string(method);
    j["seed"] = cfg.seed;
    j["n_train"] = s.train.size();
    j["n_val"] = s.val.size();
    j["n_test"] = s.test.size();
    return j;
}

std::vector<TrajId> all_ids(const CityBundle& b) {
    std::vector<TrajId> ids;
    for (const auto& t : b.trajs) ids.push_back(t.mm_id);
    return ids;
}

BenchmarkResult run_task2(const CityBundle& b, const Split& split, std::string_view method, const BenchConfig& cfg) {
    const HashEmbedder emb(cfg.embed_dim);
    struct Q {
        std::string text;
        TrajId gt;
        std::vector<int> dims;
    };
    std::vector<Q> queries;
    for (TrajId id : split.test) {
        const auto& rec = b.annotation(id);
        const auto qs = rec.queries();
        for (int q = 0; q < 3; ++q) queries.push_back({qs[static_cast<std::size_t>(q)], id, query_dimensions(rec, q + 1)});
    }
    std::vector<TrajId> db_ids = split.test;
    std::sort(db_ids.begin(), db_ids.end());

    std::vector<RetrievalQuery> rq(queries.size());
    if (method == "oracle") {
        for (std::size_t i = 0; i < queries.size(); ++i) {
            rq[i].gt = queries[i].gt;
            rq[i].ranked = {queries[i].gt};
            for (TrajId id : db_ids) {
                if (id != queries[i].gt) rq[i].ranked.push_back(id);
            }
        }
    } else if (method == "embed") {
        Eigen::MatrixXd db(static_cast<Eigen::Index>(db_ids.size()), emb.dim());
        for (std::size_t i = 0; i < db_ids.size(); ++i) {
            db.row(static_cast<Eigen::Index>(i)) = emb.embed(trajectory_text(b.traj(db_ids[i]), b.g, b.cells, b.hex));
        }
        FusedDb text_db{db_ids, db};
        parallel_for(queries.size(), cfg.jobs, [&](std::size_t i) {
            rq[i].gt = queries[i].gt;
            rq[i].ranked = fuse_retrieve(queries[i].text, text_db, emb, db_ids.size());
        });
    } else {
        std::vector<std::pair<std::string, TrajId>> pairs;
        for (TrajId id : split.train) {
            for (const auto& q : b.annotation(id).queries()) pairs.emplace_back(q, id);
        }
        const auto n = static_cast<Eigen::Index>(pairs.size());
        Eigen::MatrixXd Qm(n, emb.dim());
        Eigen::MatrixXd X(n, kGeoDim + emb.dim());
        std::map<TrajId, Eigen::VectorXd> feats;
        auto features = [&](TrajId id) -> const Eigen::VectorXd& {
            auto it = feats.find(id);
            if (it == feats.end()) it = feats.emplace(id, fuse_features(b.traj(id), b.g, b.hex, b.cells, emb)).first;
            return it->second;
        };
        for (Eigen::Index i = 0; i < n; ++i) {
            Qm.row(i) = emb.embed(pairs[static_cast<std::size_t>(i)].first);
            X.row(i) = features(pairs[static_cast<std::size_t>(i)].second);
        }
        TrainConfig tc = cfg.fuse;
        tc.seed = cfg.seed;
        tc.batch = std::min<std::size_t>(tc.batch, pairs.size());
        const TrainResult trained = train_fuse(Qm, X, tc);
        Eigen::MatrixXd dbx(static_cast<Eigen::Index>(db_ids.size()), X.cols());
        for (std::size_t i = 0; i < db_ids.size(); ++i) dbx.row(static_cast<Eigen::Index>(i)) = features(db_ids[i]);
        const FusedDb db = build_fused_db(trained.params, db_ids, dbx);
        parallel_for(queries.size(), cfg.jobs, [&](std::size_t i) {
            rq[i].gt = queries[i].gt;
            rq[i].ranked = fuse_retrieve(queries[i].text, db, emb, db_ids.size());
        });
    }

    std::map<TrajId, Trajectory> trajs;
    for (TrajId id : db_ids) trajs.emplace(id, b.traj(id));
    BenchmarkResult res;
    res.report = report_header(2, method, cfg, split);
    res.report["metrics"] = task2_to_json(retrieval_report(rq, trajs, b.g, b.hex, kRetrievalKs, 0.8, cfg.j_at_k, cfg.jobs));
    ordered_json by_dim;
    for (int d = 1; d <= 4; ++d) {
        std::vector<RetrievalQuery> sub;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            if (std::find(queries[i].dims.begin(), queries[i].dims.end(), d) != queries[i].dims.end()) sub.push_back(rq[i]);
        }
        if (!sub.empty()) {
            by_dim["dim" + std::to_string(d)] =
                task2_to_json(retrieval_report(sub, trajs, b.g, b.hex, kRetrievalKs, 0.8, cfg.j_at_k, cfg.jobs));
        }
    }
    res.report["breakdown"] = by_dim;
    return res;
}

BenchmarkResult run_task3(const CityBundle& b, const Split& split, std::string_view method, const BenchConfig& cfg) {
    const HashEmbedder emb(cfg.embed_dim);
    std::vector<CaptionCase> cases(split.test.size());
    std::vector<std::size_t> prompt_chars(split.test.size(), 0);
    if (method == "echo") {
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            const auto& ref = b.annotation(split.test[i]).trajectory_caption;
            cases[i] = {split.test[i], ref, ref};
        }
    } else {
        const CaptionMode mode = parse_caption_mode(method);
        CaptionIndex idx;
        if (mode == CaptionMode::Rap) {
            std::vector<CaptionPair> train;
            for (TrajId id : split.train) train.push_back({b.traj(id), b.annotation(id).trajectory_caption});
            idx = build_caption_index(train, b.g, b.cells, b.hex, emb);
        }
        auto gen = default_generator();
        parallel_for(split.test.size(), cfg.jobs, [&](std::size_t i) {
            const Trajectory& t = b.traj(split.test[i]);
            std::vector<CaptionExample> ex;
            if (mode == CaptionMode::Rap) ex = retrieve_examples(t, b.g, b.cells, b.hex, idx, emb, cfg.shots);
            const PromptBundle p = assemble_caption_prompt(t, b.g, b.cells, b.hex, ex, mode);
            prompt_chars[i] = p.system.size() + p.user.size();
            cases[i] = {t.mm_id, caption(*gen, p), b.annotation(t.mm_id).trajectory_caption};
        });
    }
    const EmbeddingScorer scorer = [&emb](std::string_view p, std::string_view r) { return greedy_match_f1(p, r, emb); };
    BenchmarkResult res;
    res.report = report_header(3, method, cfg, split);
    res.report["metrics"] = task3_to_json(caption_report(cases, all_pois(b.cells), b.cells.gazetteer(), scorer, cfg.jobs));
    std::size_t total = 0;
    for (auto c : prompt_chars) total += c;
    ordered_json diag;
    diag["mean_prompt_chars"] = cases.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(cases.size());
    res.report["diagnostics"] = diag;
    ordered_json samples = ordered_json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, cases.size()); ++i) {
        ordered_json s;
        s["traj_id"] = cases[i].traj_id;
        s["pred"] = cases[i].pred;
        s["ref"] = cases[i].ref;
        samples.push_back(s);
    }
    res.report["samples"] = samples;
    return res;
}

} // namespace

std::vector<RouteCase> route_cases(const CityBundle& b, const Split& split, std::string_view method,
                                   const BenchConfig& cfg, std::vector<std::string>* styles,
                                   std::vector<std::vector<std::string>>* diagnostics) {
    if (!has_method(kRouteMethods, method)) throw InvalidArgument("unknown route method: " + std::string(method));
    std::vector<RouteCase> cases;
    std::vector<std::string> instr;
    for (TrajId id : split.test) {
        const auto ins = b.annotation(id).instructions();
        for (std::size_t s = 0; s < 3; ++s) {
            cases.push_back({b.traj(id), {}, {}});
            instr.push_back(ins[s]);
            if (styles) styles->emplace_back(kInstructionStyles[s]);
        }
    }
    if (diagnostics) diagnostics->assign(cases.size(), {});
    if (method == "echo") {
        for (auto& c : cases) c.pred = c.gt;
        return cases;
    }

    const HashEmbedder emb(cfg.embed_dim);
    const CellGrounder grounder(b.cells, b.g, b.hex, emb);
    std::vector<TrainPair> train;
    for (TrajId id : split.train) {
        for (const auto& s : b.annotation(id).instructions()) train.push_back({s, b.traj(id)});
    }
    const TrajIndex index = build_index(train, b.g, b.hex, emb);
    RuleExtractor rules;
    std::unique_ptr<Generator> gen;
    std::unique_ptr<ConstraintExtractor> provider;
    if (!provider_url_from_env().empty()) {
        gen = default_generator();
        provider = std::make_unique<ProviderExtractor>(*gen);
    }
    const AnchorContext ctx{b.g, grounder, index, emb, provider ? *provider : static_cast<ConstraintExtractor&>(rules)};
    AnchorConfig acfg = cfg.anchor;
    acfg.hex = b.hex;

    parallel_for(cases.size(), cfg.jobs, [&](std::size_t i) {
        const Trajectory& gt = cases[i].gt;
        const RouteQuery q{gt.mm_id, instr[i], gt.rid_list.front(), gt.time_list.front()};
        PipelineOutput out;
        if (method == "trajanchor") out = run_trajanchor(q, ctx, acfg);
        else if (method == "trajanchor-oracle") out = run_trajanchor(q, ctx, acfg, gt.rid_list.back());
        else if (method == "destsp-bm25") out = run_destsp(q, ctx, acfg, DestMode::Bm25);
        else if (method == "destsp-embed") out = run_destsp(q, ctx, acfg, DestMode::Embed);
        else out = run_constrsp(q, ctx, acfg);
        cases[i].pred = std::move(out.pred.traj);
        cases[i].candidates = std::move(out.candidates);
        if (diagnostics) {
            auto& d = (*diagnostics)[i];
            d = std::move(out.diagnostics);
            d.insert(d.end(), out.pred.diagnostics.begin(), out.pred.diagnostics.end());
        }
    });
    return cases;
}

BenchmarkResult run_benchmark(const CityBundle& b, int task, std::string_view method, const BenchConfig& cfg) {
    if (b.annotations.size() != b.trajs.size()) throw InvalidState("bundle is not fully annotated");
    SplitSpec spec = cfg.split;
    spec.seed = cfg.seed;
    const Split split = split_ids(all_ids(b), spec);
    if (split.train.empty() || split.test.empty()) throw InvalidState("split leaves no train or test items");

    BenchmarkResult res;
    if (task == 1) {
        std::vector<std::string> styles;
        const auto cases = route_cases(b, split, method, cfg, &styles);
        res.report = report_header(1, method, cfg, split);
        res.report["metrics"] = task1_to_json(route_report(cases, b.g, b.hex, cfg.edr_eps_km, kHitKs, cfg.jobs));
        ordered_json by_style;
        for (auto style : kInstructionStyles) {
            std::vector<RouteCase> sub;
            for (std::size_t i = 0; i < cases.size(); ++i) {
                if (styles[i] == style) sub.push_back(cases[i]);
            }
            by_style[std::string(style)] = task1_to_json(route_report(sub, b.g, b.hex, cfg.edr_eps_km, kHitKs, cfg.jobs));
        }
        res.report["breakdown"] = by_style;
    } else if (task == 2) {
        if (!has_method(kRetrievalMethods, method)) throw InvalidArgument("unknown retrieval method: " + std::string(method));
        res = run_task2(b, split, method, cfg);
    } else if (task == 3) {
        if (!has_method(kCaptionMethods, method)) throw InvalidArgument("unknown caption method: " + std::string(method));
        res = run_task3(b, split, method, cfg);
    } else {
        throw InvalidArgument("task must be 1, 2 or 3");
    }
    res.csv = figure_data(res.report);
    return res;
}

std::string figure_data(const json& report) {
    const json& m = report.at("metrics");
    std::ostringstream out;
    out << "task,method,group";
    for (auto it = m.begin(); it != m.end(); ++it) out << "," << it.key();
    out << "\n";
    auto cell = [](const json& v) -> std::string {
        if (v.is_null()) return "";
        if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", v.get<double>());
        return buf;
    };
    auto row = [&](const std::string& group, const json& vals) {
        out << report.at("task").get<int>() << "," << report.at("method").get<std::string>() << "," << group;
        for (auto it = m.begin(); it != m.end(); ++it) out << "," << (vals.contains(it.key()) ? cell(vals[it.key()]) : "");
        out << "\n";
    };
    row("all", m);
    if (report.contains("breakdown")) {
        for (auto it = report["breakdown"].begin(); it != report["breakdown"].end(); ++it) row(it.key(), it.value());
    }
    return out.str();
}

} // namespace trajprism
