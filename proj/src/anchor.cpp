#include "trajprism/anchor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "trajprism/error.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

namespace {

std::vector<std::size_t> order_by_score(const Eigen::VectorXd& s) {
    std::vector<std::size_t> order(static_cast<std::size_t>(s.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s[static_cast<Eigen::Index>(a)] > s[static_cast<Eigen::Index>(b)];
    });
    return order;
}

} // namespace

// ---- anchor retrieval ----

TrajIndex build_index(std::span<const TrainPair> train, const RoadGraph& g, const HexConfig& cfg,
                      const Embedder& embedder) {
    if (train.empty()) throw InvalidArgument("anchor index needs at least one training pair");
    TrajIndex idx;
    idx.emb.resize(static_cast<Eigen::Index>(train.size()), embedder.dim());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const Trajectory& t = train[i].traj;
        if (t.rid_list.empty()) throw InvalidArgument("training trajectory " + std::to_string(t.mm_id) + " is empty");
        IndexEntry e;
        e.traj_id = t.mm_id;
        e.emb = embedder.embed(train[i].instruction);
        e.start_cell = dominant_cell(g.segment(t.rid_list.front()), cfg);
        e.endpoint = trajectory_endpoint(t, g);
        e.traj = t;
        idx.emb.row(static_cast<Eigen::Index>(i)) = e.emb.transpose();
        idx.entries.push_back(std::move(e));
    }
    return idx;
}

AnchorResult retrieve_anchor(std::string_view instr, const TrajIndex& idx, const Embedder& embedder,
                             std::optional<CellId> start_cell, std::optional<GeoPoint> dest_hint,
                             std::size_t pool) {
    if (idx.empty()) throw InvalidState("anchor index is empty");
    if (pool == 0) throw InvalidArgument("anchor pool must be at least 1");
    const Eigen::VectorXd s = idx.emb * embedder.embed(instr);
    std::vector<std::size_t> order = order_by_score(s);

    AnchorResult res;
    if (start_cell) {
        std::vector<std::size_t> kept;
        for (std::size_t i : order) {
            if (idx.entries[i].start_cell == *start_cell) kept.push_back(i);
        }
        if (kept.empty()) {
            res.filter_fallback = true;
        } else {
            order = std::move(kept);
        }
    }
    order.resize(std::min(pool, order.size()));
    if (dest_hint) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return haversine_km(idx.entries[a].endpoint, *dest_hint) < haversine_km(idx.entries[b].endpoint, *dest_hint);
        });
    }
    for (std::size_t i : order) res.ranked.push_back({i, s[static_cast<Eigen::Index>(i)]});
    return res;
}

// ---- constraint extraction ----

namespace {

const std::string kBreak = "|";

std::vector<std::string> cue_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(normalize_name(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80 || ch == '\'' || ch == '&' || ch == '-') {
            cur += ch;
        } else {
            flush();
            if (std::string_view(",.;:!?()\"\n").find(ch) != std::string_view::npos) {
                if (out.empty() || out.back() != kBreak) out.push_back(kBreak);
            }
        }
    }
    flush();
    return out;
}

bool in(const std::set<std::string>& s, const std::string& w) { return s.count(w) != 0; }

const std::set<std::string> kCueWords = {"to",      "towards", "toward",   "via",     "through",  "past",
                                         "avoid",   "avoiding", "prefer",  "preferring", "along", "staying",
                                         "stay",    "stick",   "sticking", "ending",  "arriving", "passing",
                                         "starting", "heading", "from",    "leaving"};
const std::set<std::string> kStopWords = {"and", "but", "then", "around", "please", "thanks", "thank", "about",
                                          "with", "while", "so", "before", "after", "if", "now", "asap"};
const std::set<std::string> kLeading = {"the", "a", "an", "somewhere", "near", "by", "in", "on", "at", "over",
                                        "some", "my", "of"};
const std::set<std::string> kTrailing = {"in", "on", "at", "the", "a", "an", "of", "by", "to", "for"};
const std::set<std::string> kSkipVerbs = {"go", "get", "head", "drive", "be", "ride"};
const std::set<std::string> kFiller = {"hey", "hi", "hello", "ok", "okay", "now", "please", "thanks", "thank",
                                       "quick", "quickly", "asap", "yes", "so", "well", "just", "could", "you",
                                       "i", "i'd", "me", "take", "drive", "head", "go", "get", "would", "like"};

bool alphabetic_word(const std::string& w) {
    return w.size() >= 2 && std::any_of(w.begin(), w.end(), [](char c) {
               return std::isalpha(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
           });
}

std::string tidy(std::vector<std::string> words) {
    while (!words.empty() && in(kLeading, words.front())) words.erase(words.begin());
    while (!words.empty() && in(kTrailing, words.back())) words.pop_back();
    if (std::none_of(words.begin(), words.end(), alphabetic_word)) return {};
    return join(words, " ");
}

// Phrase starting at `i`, ending at a break, stop word or another cue.
std::string phrase_at(const std::vector<std::string>& t, std::size_t i) {
    std::vector<std::string> words;
    for (; i < t.size(); ++i) {
        const std::string& w = t[i];
        if (w == kBreak || in(kStopWords, w) || in(kCueWords, w)) break;
        words.push_back(w);
    }
    return tidy(std::move(words));
}

bool match_at(const std::vector<std::string>& t, std::size_t i, std::initializer_list<const char*> seq) {
    std::size_t k = i;
    for (const char* w : seq) {
        if (k >= t.size() || t[k] != w) return false;
        ++k;
    }
    return true;
}

} // namespace

ConstraintSet RuleExtractor::extract(std::string_view instr) {
    const auto t = cue_tokens(instr);
    ConstraintSet cs;
    auto add_waypoint = [&](std::string p) {
        if (!p.empty() && std::find(cs.waypoints.begin(), cs.waypoints.end(), p) == cs.waypoints.end()) {
            cs.waypoints.push_back(std::move(p));
        }
    };
    auto add_pref = [&](PreferenceKind k, std::string p) {
        if (p.empty()) return;
        Preference pref{k, std::move(p)};
        if (std::find(cs.preferences.begin(), cs.preferences.end(), pref) == cs.preferences.end()) {
            cs.preferences.push_back(std::move(pref));
        }
    };

    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string& w = t[i];
        if (cs.destination.empty()) {
            std::size_t after = 0;
            if (w == "to" || w == "towards" || w == "toward") {
                after = i + 1;
                while (after < t.size() && in(kSkipVerbs, t[after])) ++after;
            } else if (match_at(t, i, {"ending", "at"}) || match_at(t, i, {"ending", "on"}) ||
                       match_at(t, i, {"ending", "in"}) || match_at(t, i, {"arriving", "at"})) {
                after = i + 2;
            }
            if (after != 0) {
                cs.destination = phrase_at(t, after);
                if (!cs.destination.empty()) continue;
            }
        }
        if (w == "via" || w == "through" || w == "past") {
            add_waypoint(phrase_at(t, i + 1));
        } else if (match_at(t, i, {"passing", "through"})) {
            add_waypoint(phrase_at(t, i + 2));
        } else if (w == "avoid" || w == "avoiding") {
            add_pref(PreferenceKind::Avoid, phrase_at(t, i + 1));
        } else if (w == "prefer" || w == "preferring" || w == "along" || w == "staying" || w == "stay") {
            add_pref(PreferenceKind::Prefer, phrase_at(t, i + 1));
        } else if (match_at(t, i, {"stick", "to"}) || match_at(t, i, {"sticking", "to"})) {
            add_pref(PreferenceKind::Prefer, phrase_at(t, i + 2));
        }
    }

    if (cs.destination.empty()) {
        // First short fragment that is not filler.
        std::size_t i = 0;
        while (i < t.size() && cs.destination.empty()) {
            std::vector<std::string> words;
            std::size_t j = i;
            while (j < t.size() && t[j] != kBreak && !in(kStopWords, t[j]) && !in(kCueWords, t[j])) {
                words.push_back(t[j]);
                ++j;
            }
            while (!words.empty() && in(kFiller, words.front())) words.erase(words.begin());
            if (!words.empty() && words.size() <= 6) cs.destination = tidy(words);
            // Skip to the next fragment.
            while (j < t.size() && t[j] != kBreak) ++j;
            i = j + 1;
        }
    }
    if (cs.destination.empty()) throw ExtractionFailure("no destination found in \"" + std::string(instr) + "\"");
    std::erase(cs.waypoints, cs.destination);
    return cs;
}

ConstraintSet ProviderExtractor::extract(std::string_view instr) {
    PromptBundle p;
    p.system = "Extract routing constraints from a driving instruction. Reply with one JSON object with the keys "
               "destination (string), waypoints (list of strings, in order) and preferences (list of objects with "
               "kind \"prefer\" or \"avoid\" and phrase).";
    p.user = std::string(instr);
    try {
        const std::string reply = gen_.complete(p);
        const auto open = reply.find('{');
        const auto close = reply.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open) return fallback_.extract(instr);
        const json j = json::parse(reply.substr(open, close - open + 1));
        ConstraintSet cs;
        cs.destination = tidy(word_tokens(j.value("destination", std::string{})));
        if (cs.destination.empty()) return fallback_.extract(instr);
        for (const auto& w : j.value("waypoints", json::array())) {
            if (w.is_string()) cs.waypoints.push_back(normalize_name(w.get<std::string>()));
        }
        for (const auto& pr : j.value("preferences", json::array())) {
            if (!pr.is_object() || !pr.contains("phrase")) continue;
            const auto kind = pr.value("kind", std::string("prefer")) == "avoid" ? PreferenceKind::Avoid
                                                                                  : PreferenceKind::Prefer;
            cs.preferences.push_back({kind, normalize_name(pr.at("phrase").get<std::string>())});
        }
        return cs;
    } catch (const ProviderError&) {
        return fallback_.extract(instr);
    } catch (const json::exception&) {
        return fallback_.extract(instr);
    }
}

ConstraintSet extract_constraints(ConstraintExtractor& ex, std::string_view instr) {
    ConstraintSet cs = ex.extract(instr);
    if (cs.destination.empty()) throw ExtractionFailure("extractor returned an empty destination");
    return cs;
}

// ---- grounding ----

CellGrounder::CellGrounder(const CellIndex& cells, const RoadGraph& g, const HexConfig& cfg,
                           const Embedder& embedder)
    : embedder_(embedder) {
    std::vector<std::string> texts;
    for (const auto& [cell, rids] : segments_by_cell(g, cfg)) {
        if (!cells.contains(cell)) continue;
        GroundedCell gc;
        gc.cell = cell;
        gc.rids = rids;
        const GeoPoint center = cell_center(cell, cfg);
        double best = std::numeric_limits<double>::infinity();
        for (Rid r : rids) {
            const RoadSegment& s = g.segment(r);
            const double d = haversine_km(midpoint(s.start, s.end), center);
            if (d < best) {
                best = d;
                gc.representative = r;
            }
        }
        cells_.push_back(std::move(gc));
        texts.push_back(cells.grounding_text(cell));
    }
    emb_ = embedder.embed_rows(texts);
    bm25_ = std::make_unique<Bm25Index>(texts);
}

std::vector<GroundedCell> CellGrounder::ground(std::string_view phrase, std::size_t top) const {
    if (cells_.empty()) throw InvalidState("no groundable cells");
    const Eigen::VectorXd s = emb_ * embedder_.embed(phrase);
    std::vector<GroundedCell> out;
    for (std::size_t i : order_by_score(s)) {
        if (out.size() == top) break;
        out.push_back(cells_[i]);
        out.back().score = s[static_cast<Eigen::Index>(i)];
    }
    return out;
}

std::vector<GroundedCell> CellGrounder::ground_bm25(std::string_view phrase, std::size_t top) const {
    if (cells_.empty()) throw InvalidState("no groundable cells");
    const auto s = bm25_->scores(phrase);
    std::vector<GroundedCell> out;
    for (std::size_t i : bm25_->top(phrase, top)) {
        out.push_back(cells_[i]);
        out.back().score = s[i];
    }
    return out;
}

std::vector<GroundedCell> ground_phrase(std::string_view phrase, const CellGrounder& grounder, std::size_t top) {
    return grounder.ground(phrase, top);
}

// ---- route generation ----

std::vector<Rid> sample_skeleton(const Trajectory& anchor, std::size_t m) {
    std::vector<Rid> out;
    const std::size_t n = anchor.rid_list.size();
    if (m == 0 || n < 3) return out;
    std::size_t last = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t pos = std::clamp<std::size_t>(((i + 1) * (n - 1)) / (m + 1), 1, n - 2);
        if (!out.empty() && pos == last) continue;
        out.push_back(anchor.rid_list[pos]);
        last = pos;
    }
    return out;
}

std::vector<std::int64_t> synth_times(const RoadGraph& g, std::span<const Rid> path, std::int64_t start_time,
                                      double speed_kmh) {
    const double mps = speed_kmh / 3.6;
    std::vector<std::int64_t> out;
    double elapsed_m = 0.0;
    for (Rid r : path) {
        out.push_back(start_time + std::llround(elapsed_m / mps));
        elapsed_m += g.segment(r).length_m;
    }
    return out;
}

RoutePrediction generate_route(const RoadGraph& g, const RouteRequest& req, TrajId id, double speed_kmh) {
    if (!g.contains(req.start)) throw InvalidArgument("start segment " + std::to_string(req.start) + " not in graph");
    if (req.dest_candidates.empty()) throw InvalidArgument("no destination candidates");
    std::vector<Rid> chain{req.start};
    auto push = [&](Rid r) {
        if (chain.back() != r) chain.push_back(r);
    };
    for (Rid r : req.waypoints) push(r);
    for (Rid r : req.skeleton) push(r);
    push(req.dest_candidates.front());

    RoutePrediction out;
    out.traj.mm_id = id;
    const ChainRoute route = chain_dijkstra(g, chain, req.weights);
    out.diagnostics = route.diagnostics;
    if (!route.reached_last) out.diagnostics.push_back("destination " + std::to_string(chain.back()) + " unreachable");
    if (route.path.size() <= 1 && chain.size() > 1) {
        out.failed = true;
        out.traj.rid_list = {req.start};
        out.diagnostics.push_back("no route from start; start-only prediction");
    } else {
        out.traj.rid_list = route.path;
    }
    out.traj.time_list = synth_times(g, out.traj.rid_list, req.start_time, speed_kmh);
    return out;
}

// ---- pipelines ----

namespace {

std::vector<Rid> representatives(const std::vector<GroundedCell>& cells) {
    std::vector<Rid> out;
    for (const auto& c : cells) out.push_back(c.representative);
    return out;
}

RoutePrediction start_only(const RouteQuery& q, const RoadGraph& g, std::string why) {
    RoutePrediction p;
    p.failed = true;
    p.traj.mm_id = q.id;
    p.traj.rid_list = {q.start};
    p.traj.time_list = synth_times(g, p.traj.rid_list, q.start_time);
    p.diagnostics.push_back(std::move(why));
    return p;
}

// Routes once per destination candidate; the first is the prediction.
void route_candidates(PipelineOutput& out, const RoadGraph& g, RouteRequest req, TrajId id) {
    const std::vector<Rid> dests = req.dest_candidates;
    for (std::size_t k = 0; k < dests.size(); ++k) {
        req.dest_candidates = {dests[k]};
        RoutePrediction p = generate_route(g, req, id);
        out.candidates.push_back(p.traj);
        if (k == 0) out.pred = std::move(p);
    }
}

} // namespace

PipelineOutput run_trajanchor(const RouteQuery& q, const AnchorContext& ctx, const AnchorConfig& cfg,
                              std::optional<Rid> oracle_dest) {
    PipelineOutput out;
    bool extracted = true;
    try {
        out.constraints = extract_constraints(ctx.extractor, q.instruction);
    } catch (const ExtractionFailure& e) {
        extracted = false;
        out.diagnostics.push_back(std::string("extraction failed: ") + e.what());
    }

    std::vector<GroundedCell> dest_cells;
    if (extracted) dest_cells = ctx.grounder.ground(out.constraints.destination, cfg.dest_top);
    std::optional<GeoPoint> hint;
    if (cfg.dest_rerank && !dest_cells.empty()) hint = cell_center(dest_cells.front().cell, cfg.hex);
    std::optional<CellId> start_cell;
    if (cfg.start_filter) start_cell = dominant_cell(ctx.g.segment(q.start), cfg.hex);

    const AnchorResult anchor = retrieve_anchor(q.instruction, ctx.index, ctx.embedder, start_cell, hint, cfg.pool);
    if (anchor.filter_fallback) out.diagnostics.push_back("start-cell filter empty; unfiltered anchors used");
    const Trajectory& anchor_traj = ctx.index.entries[anchor.ranked.front().entry].traj;

    RouteRequest req;
    req.start = q.start;
    req.start_time = q.start_time;
    req.skeleton = sample_skeleton(anchor_traj, cfg.skeleton_m);
    req.weights.hex = cfg.hex;
    for (const auto& w : out.constraints.waypoints) {
        req.waypoints.push_back(ctx.grounder.ground(w, 1).front().representative);
    }
    for (const auto& p : out.constraints.preferences) {
        auto& target = p.kind == PreferenceKind::Avoid ? req.weights.avoid_cells : req.weights.prefer_cells;
        for (const auto& c : ctx.grounder.ground(p.phrase, cfg.pref_top)) target.insert(c.cell);
    }

    if (oracle_dest) {
        req.dest_candidates = {*oracle_dest};
    } else if (!dest_cells.empty()) {
        req.dest_candidates = representatives(dest_cells);
    } else {
        req.dest_candidates = {anchor_traj.rid_list.back()};
        out.diagnostics.push_back("destination taken from the anchor trajectory");
    }
    route_candidates(out, ctx.g, req, q.id);
    out.diagnostics.insert(out.diagnostics.end(), out.pred.diagnostics.begin(), out.pred.diagnostics.end());
    return out;
}

PipelineOutput run_destsp(const RouteQuery& q, const AnchorContext& ctx, const AnchorConfig& cfg, DestMode mode) {
    PipelineOutput out;
    try {
        out.constraints = extract_constraints(ctx.extractor, q.instruction);
    } catch (const ExtractionFailure& e) {
        out.pred = start_only(q, ctx.g, std::string("extraction failed: ") + e.what());
        out.candidates = {out.pred.traj};
        out.diagnostics = out.pred.diagnostics;
        return out;
    }
    const auto dest_cells = mode == DestMode::Bm25 ? ctx.grounder.ground_bm25(out.constraints.destination, cfg.dest_top)
                                                   : ctx.grounder.ground(out.constraints.destination, cfg.dest_top);
    RouteRequest req;
    req.start = q.start;
    req.start_time = q.start_time;
    req.dest_candidates = representatives(dest_cells);
    route_candidates(out, ctx.g, req, q.id);
    out.diagnostics = out.pred.diagnostics;
    return out;
}

PipelineOutput run_constrsp(const RouteQuery& q, const AnchorContext& ctx, const AnchorConfig& cfg) {
    PipelineOutput out;
    try {
        out.constraints = extract_constraints(ctx.extractor, q.instruction);
    } catch (const ExtractionFailure& e) {
        out.pred = start_only(q, ctx.g, std::string("extraction failed: ") + e.what());
        out.candidates = {out.pred.traj};
        out.diagnostics = out.pred.diagnostics;
        return out;
    }
    RouteRequest req;
    req.start = q.start;
    req.start_time = q.start_time;
    for (const auto& w : out.constraints.waypoints) {
        req.waypoints.push_back(ctx.grounder.ground(w, 1).front().representative);
    }
    req.dest_candidates = representatives(ctx.grounder.ground(out.constraints.destination, cfg.dest_top));
    route_candidates(out, ctx.g, req, q.id);
    out.diagnostics = out.pred.diagnostics;
    return out;
}

json prediction_to_json(const PipelineOutput& out) {
    json j = trajectory_to_json(out.pred.traj);
    j["failed"] = out.pred.failed;
    j["diagnostics"] = out.diagnostics;
    json cands = json::array();
    for (const auto& c : out.candidates) cands.push_back(c.rid_list);
    j["candidates"] = cands;
    json cs;
    cs["destination"] = out.constraints.destination;
    cs["waypoints"] = out.constraints.waypoints;
    json prefs = json::array();
    for (const auto& p : out.constraints.preferences) {
        prefs.push_back({{"kind", p.kind == PreferenceKind::Avoid ? "avoid" : "prefer"}, {"phrase", p.phrase}});
    }
    cs["preferences"] = prefs;
    j["constraints"] = cs;
    return j;
}

} // namespace trajprism
