#include "trajprism/rap.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "trajprism/annotate.hpp"
#include "trajprism/error.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

namespace {

std::vector<std::string> visited_descriptions(const PhaseSeq& ps) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& ph : ps.phases) {
        if (!ph.desc.empty() && seen.insert(ph.desc).second) out.push_back(ph.desc);
    }
    return out;
}

} // namespace

std::string trajectory_text(const Trajectory& t, const RoadGraph& g, const CellIndex& cells, const HexConfig& cfg) {
    std::string s = features_to_text(structural_features(t, g, cells, cfg), true);
    for (const auto& d : visited_descriptions(compress(t, g, cells, cfg))) s += d + "\n";
    return s;
}

CaptionIndex build_caption_index(std::span<const CaptionPair> train, const RoadGraph& g, const CellIndex& cells,
                                 const HexConfig& cfg, const Embedder& embedder) {
    if (train.empty()) throw InvalidArgument("caption index needs at least one training pair");
    CaptionIndex idx;
    idx.emb.resize(static_cast<Eigen::Index>(train.size()), embedder.dim());
    for (std::size_t i = 0; i < train.size(); ++i) {
        idx.ids.push_back(train[i].traj.mm_id);
        idx.captions.push_back(train[i].caption);
        idx.emb.row(static_cast<Eigen::Index>(i)) = embedder.embed(trajectory_text(train[i].traj, g, cells, cfg));
    }
    return idx;
}

std::vector<CaptionExample> retrieve_examples(const Trajectory& t, const RoadGraph& g, const CellIndex& cells,
                                              const HexConfig& cfg, const CaptionIndex& idx,
                                              const Embedder& embedder, std::size_t k) {
    if (k < 1) throw InvalidArgument("k must be at least 1");
    if (idx.size() == 0) throw InvalidState("caption index is empty");
    const Eigen::VectorXd s = idx.emb * embedder.embed(trajectory_text(t, g, cells, cfg));
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx.ids[i] != t.mm_id) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = s(static_cast<Eigen::Index>(a)), sb = s(static_cast<Eigen::Index>(b));
        if (sa != sb) return sa > sb;
        return idx.ids[a] < idx.ids[b];
    });
    order.resize(std::min(k, order.size()));
    std::vector<CaptionExample> out;
    for (auto i : order) out.push_back({idx.ids[i], idx.captions[i], s(static_cast<Eigen::Index>(i))});
    return out;
}

std::string_view to_string(CaptionMode m) {
    switch (m) {
    case CaptionMode::Struct: return "struct";
    case CaptionMode::Sem: return "sem";
    case CaptionMode::Rap: return "rap";
    }
    return "sem";
}

CaptionMode parse_caption_mode(std::string_view s) {
    if (s == "struct") return CaptionMode::Struct;
    if (s == "sem") return CaptionMode::Sem;
    if (s == "rap") return CaptionMode::Rap;
    throw InvalidArgument("unknown caption mode: " + std::string(s));
}

const std::string& caption_system_prompt() {
    static const std::string kPrompt =
        "You write a short caption for one vehicle trip.\n"
        "Say where it starts, how it travels and what kind of places it crosses, and where it finishes.\n"
        "Only use place and road names that appear in the input. One paragraph of plain prose.\n"
        "No em-dashes or semicolons. Reply with the caption and nothing else.\n";
    return kPrompt;
}

PromptBundle assemble_caption_prompt(const Trajectory& t, const RoadGraph& g, const CellIndex& cells,
                                     const HexConfig& cfg, std::span<const CaptionExample> examples,
                                     CaptionMode mode) {
    if (mode == CaptionMode::Rap && examples.empty()) throw InvalidArgument("rap mode needs example captions");
    const PhaseSeq ps = compress(t, g, cells, cfg);
    const bool names = mode != CaptionMode::Struct;

    std::ostringstream u;
    u << "TRAJECTORY FEATURES\n" << features_to_text(structural_features(t, g, cells, cfg), names);
    if (names) {
        u << "\nVISITED AREAS\n";
        for (const auto& d : visited_descriptions(ps)) u << "- " << d << "\n";
    }
    if (mode == CaptionMode::Rap) {
        u << "\nREFERENCE CAPTIONS (follow their style and level of detail)\n";
        for (std::size_t i = 0; i < examples.size(); ++i) u << i + 1 << ". " << examples[i].caption << "\n";
    }

    const ordered_json listing = phase_seq_to_json(ps);
    ordered_json ctx;
    ctx["mode"] = std::string(to_string(mode));
    ctx["start_time"] = listing["meta"]["start_time"];
    ctx["duration"] = listing["meta"]["total_duration"];
    ordered_json phases = ordered_json::array();
    for (const auto& p : listing["phases"]) {
        ordered_json q;
        q["dir"] = p["dir"];
        q["n"] = p["n"];
        q["duration"] = p["duration"];
        if (names) {
            q["road_names"] = p["road_names"];
            q["desc"] = p["desc"];
        }
        phases.push_back(std::move(q));
    }
    ctx["phases"] = std::move(phases);
    if (mode == CaptionMode::Rap) {
        ordered_json ex = ordered_json::array();
        for (const auto& e : examples) ex.push_back(e.caption);
        ctx["examples"] = std::move(ex);
    }
    u << "\n" << kCaptionContextMarker << "\n" << ctx.dump(2) << "\n";
    return {caption_system_prompt(), u.str()};
}

std::string caption(Generator& gen, const PromptBundle& p) {
    std::string out = trim(sanitize_punctuation(gen.complete(p)));
    if (out.empty()) throw ProviderError("provider returned an empty caption");
    return out;
}

} // namespace trajprism
