#include "trajprism/intent.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "trajprism/error.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

namespace {

// Stream tags keep the profile, persona and assignment draws independent.
constexpr std::uint64_t kProfileStream = 0x1f0e5a11ULL;
constexpr std::uint64_t kPersonaStream = 0x9e125077ULL;
constexpr std::uint64_t kAssignStream = 0xa551a11ULL;

std::size_t scenario_index(std::string_view id) {
    for (std::size_t i = 0; i < kScenarios.size(); ++i) {
        if (kScenarios[i].id == id) return i;
    }
    throw InvalidArgument("unknown scenario id '" + std::string(id) + "'");
}

const std::string& pick(Rng& rng, const std::vector<std::string>& pool, const char* name) {
    if (pool.empty()) {
        throw ConfigError(std::string("style pool '") + name + "' is empty");
    }
    return pool[rng.below(pool.size())];
}

} // namespace

const Scenario& scenario(std::string_view id) {
    return kScenarios[scenario_index(id)];
}

IntentProfile sample_profile(std::uint64_t seed, TrajId traj_id) {
    Rng rng = Rng::for_item(seed ^ kProfileStream, static_cast<std::uint64_t>(traj_id));

    const double u = rng.uniform();
    std::size_t k = kScenarioCountWeights.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < kScenarioCountWeights.size(); ++i) {
        acc += kScenarioCountWeights[i];
        if (u < acc) {
            k = i + 1;
            break;
        }
    }

    std::vector<std::size_t> chosen;
    chosen.push_back(rng.below(2)); // 1.1 or 1.2

    std::array<std::size_t, 8> rest = {2, 3, 4, 5, 6, 7, 8, 9};
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const std::size_t j = i + rng.below(rest.size() - i);
        std::swap(rest[i], rest[j]);
        chosen.push_back(rest[i]);
    }
    std::sort(chosen.begin(), chosen.end());

    IntentProfile p;
    p.traj_id = traj_id;
    bool has_33 = false;
    bool has_31_32 = false;
    for (std::size_t idx : chosen) {
        p.scenarios.emplace_back(kScenarios[idx].id);
        has_33 = has_33 || idx == 7;
        has_31_32 = has_31_32 || idx == 5 || idx == 6;
    }
    p.orthogonal_cooccurrence = has_33 && has_31_32;
    return p;
}

std::string scenario_label_line(const IntentProfile& p) {
    return join(p.scenarios, " + ");
}

json profile_to_json(const IntentProfile& p) {
    json obj;
    obj["traj_id"] = p.traj_id;
    obj["scenarios"] = p.scenarios;
    obj["k"] = p.k();
    obj["orthogonal_cooccurrence"] = p.orthogonal_cooccurrence;
    return obj;
}

IntentProfile profile_from_json(const json& obj) {
    IntentProfile p;
    p.traj_id = obj.at("traj_id").get<TrajId>();
    p.scenarios = obj.at("scenarios").get<std::vector<std::string>>();
    for (const auto& s : p.scenarios) scenario_index(s);
    p.orthogonal_cooccurrence = obj.value("orthogonal_cooccurrence", false);
    return p;
}

const StylePools& default_pools() {
    static const StylePools pools = [] {
        StylePools p;
        p.persona = {"Impatient and rushed",     "Relaxed weekend explorer",
                     "Busy parent on a school run", "Cautious newcomer to the city",
                     "Business traveler",        "Night-shift worker heading home",
                     "Retired local resident",   "Student on a tight budget",
                     "Delivery driver",          "Tourist looking for sights"};
        p.literal_forms = {"imperative command",          "declarative statement",
                           "sequenced action",            "context-aware continuation",
                           "telegraphic/terse",           "coordinate-style"};
        p.concise_forms = {"single word or minimal fragment", "terse command", "abbreviated phrase",
                           "constraint-first", "destination-only"};
        p.chatty_forms = {"question form",       "complaint or reaction", "narrative/storytelling",
                          "casual suggestion",   "soft request",          "trailing/open-ended"};
        p.literal_lengths = {"Brief but complete (one sentence)", "Moderate (dest. + 1-2 constraints)",
                             "Detailed (dest. + waypoints + constr.)"};
        p.concise_lengths = {"Ultra-terse (telegram, fragments ok)", "Short phrase (minimal thought)",
                             "Brief sentence (concise, grammatical)"};
        p.chatty_lengths = {"Casual one-liner", "Conversational (a couple sentences)",
                            "Chatty and detailed (rambling ok)"};
        return p;
    }();
    return pools;
}

StylePools load_pools(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open pools file " + path.string());
    }
    std::map<std::string, std::vector<std::string>> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected 'key = value' in " + path.string(), line_no);
        }
        std::string key = trim(t.substr(0, eq));
        if (key.size() > 2 && key.ends_with("[]")) key.resize(key.size() - 2);
        key = trim(key);
        entries[key].push_back(trim(t.substr(eq + 1)));
    }
    StylePools p = default_pools();
    const std::map<std::string, std::vector<std::string>*> slots = {
        {"persona", &p.persona},
        {"literal_forms", &p.literal_forms},
        {"concise_forms", &p.concise_forms},
        {"chatty_forms", &p.chatty_forms},
        {"literal_lengths", &p.literal_lengths},
        {"concise_lengths", &p.concise_lengths},
        {"chatty_lengths", &p.chatty_lengths},
    };
    for (auto& [key, values] : entries) {
        auto it = slots.find(key);
        if (it == slots.end()) {
            throw ConfigError("unknown pool key '" + key + "' in " + path.string());
        }
        *it->second = std::move(values);
    }
    return p;
}

PersonaStyle sample_persona_style(Rng& rng, const StylePools& pools) {
    PersonaStyle s;
    s.persona = pick(rng, pools.persona, "persona");
    s.literal.sentence_form = pick(rng, pools.literal_forms, "literal_forms");
    s.literal.length = pick(rng, pools.literal_lengths, "literal_lengths");
    s.concise.sentence_form = pick(rng, pools.concise_forms, "concise_forms");
    s.concise.length = pick(rng, pools.concise_lengths, "concise_lengths");
    s.chatty.sentence_form = pick(rng, pools.chatty_forms, "chatty_forms");
    s.chatty.length = pick(rng, pools.chatty_lengths, "chatty_lengths");
    return s;
}

PersonaStyle sample_persona_style(std::uint64_t seed, TrajId traj_id, const StylePools& pools) {
    Rng rng = Rng::for_item(seed ^ kPersonaStream, static_cast<std::uint64_t>(traj_id));
    return sample_persona_style(rng, pools);
}

json persona_style_to_json(const PersonaStyle& s) {
    json obj;
    obj["persona"] = s.persona;
    auto hint = [](const StyleHint& h) { return json{{"sentence_form", h.sentence_form}, {"length", h.length}}; };
    obj["literal"] = hint(s.literal);
    obj["concise"] = hint(s.concise);
    obj["chatty"] = hint(s.chatty);
    return obj;
}

PersonaStyle persona_style_from_json(const json& obj) {
    auto hint = [](const json& h) {
        return StyleHint{h.at("sentence_form").get<std::string>(), h.at("length").get<std::string>()};
    };
    PersonaStyle s;
    s.persona = obj.at("persona").get<std::string>();
    s.literal = hint(obj.at("literal"));
    s.concise = hint(obj.at("concise"));
    s.chatty = hint(obj.at("chatty"));
    return s;
}

RetrievalAssignment sample_assignment(std::uint64_t seed, TrajId traj_id) {
    Rng rng = Rng::for_item(seed ^ kAssignStream, static_cast<std::uint64_t>(traj_id));
    std::array<int, 3> others = {2, 3, 4};
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t j = i + rng.below(3 - i);
        std::swap(others[i], others[j]);
    }
    return {std::vector<int>{1, others[0]}, std::vector<int>{others[1]}, std::vector<int>{others[2]}};
}

bool covers_all_dimensions(const RetrievalAssignment& a) {
    std::array<bool, 4> seen{};
    for (const auto& dims : a) {
        for (int d : dims) {
            if (d < 1 || d > 4) return false;
            seen[static_cast<std::size_t>(d - 1)] = true;
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

std::string assignment_label(const std::vector<int>& dims) {
    std::vector<std::string> parts;
    for (int d : dims) {
        if (d < 1 || d > 4) throw InvalidArgument("dimension out of range: " + std::to_string(d));
        parts.push_back("Dim " + std::to_string(d) + " " +
                        std::string(kDimensionNames[static_cast<std::size_t>(d - 1)]));
    }
    return join(parts, " + ");
}

} // namespace trajprism
