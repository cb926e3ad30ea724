#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "trajprism/annotate.hpp"
#include "trajprism/error.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

DescriptionFields parse_description(std::string_view desc) {
    DescriptionFields f;
    std::size_t start = 0;
    while (start <= desc.size()) {
        const auto bar = desc.find('|', start);
        const std::string part = trim(desc.substr(start, bar == std::string_view::npos ? desc.npos : bar - start));
        const auto colon = part.find(':');
        if (colon != std::string::npos) {
            const std::string key = normalize_name(part.substr(0, colon));
            const std::string value = trim(part.substr(colon + 1));
            if (key == "gnn" || key == "label") {
                f.label = value;
            } else if (key == "narrative") {
                f.narrative = value;
            } else if (key == "pois") {
                std::size_t s = 0;
                while (s <= value.size()) {
                    const auto comma = value.find(',', s);
                    const std::string name = trim(value.substr(s, comma == std::string::npos ? value.npos : comma - s));
                    if (!name.empty()) f.pois.push_back(name);
                    if (comma == std::string::npos) break;
                    s = comma + 1;
                }
            } else if (key == "district") {
                f.district = value;
            }
        }
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    return f;
}

std::string area_phrase(std::string_view desc, const TerminologyMap& terms) {
    const std::string label = parse_description(desc).label;
    if (label.empty()) return {};
    const std::string mapped = apply_terminology(label, terms);
    return mapped == label ? std::string() : trim(mapped);
}

const std::string& annotation_system_prompt() {
    static const std::string prompt =
        "You annotate real driving trajectories for a language benchmark. The input is a compressed "
        "trajectory: phases with a role (O origin, T transit, D destination), a heading, a segment count, a "
        "duration, the road names driven, and a description of the area.\n"
        "\n"
        "Rules:\n"
        "- Use only names and facts present in the trajectory data.\n"
        "- The origin comes from the first phase, the destination from the last phase, waypoints from "
        "the phases in between.\n"
        "- Mention the destination and at most two constraints. Skip most intermediate phases.\n"
        "- Never copy area labels. Write WATERFRONT as \"by the river\", GREEN/PARK as \"the park\", "
        "URBAN/INLAND as \"downtown\", COASTAL/BEACH as \"the beach\".\n"
        "- Do not use em-dashes or semicolons.\n"
        "\n"
        "Intent dimensions:\n"
        "  Dim 1 Destination: 1.1 Exact Anchor, 1.2 Fuzzy Semantic\n"
        "  Dim 2 Waypoint: 2.1 Strict Sequential, 2.2 Flexible / Feature, 2.3 Pass-through Zone\n"
        "  Dim 3 Route Pref.: 3.1 Semantic Constraints, 3.2 Topological / Direct., 3.3 Orthogonal Comp.\n"
        "  Dim 4 Temporal/Pace: 4.1 Time-of-Day, 4.2 Pace / Duration\n"
        "\n"
        "Instructions: literal is explicit, concise is as short as possible, chatty is conversational. "
        "The three must open with different words.\n"
        "Retrieval queries read like searches over recorded trips, not like commands. Together they cover "
        "all four dimensions.\n"
        "The caption is factual, third person, present tense.\n"
        "\n"
        "Output one JSON object with the keys _intent_planning, _retrieval_planning, instruction_literal, "
        "instruction_concise, instruction_chatty, retrieval_query_1, retrieval_query_2, retrieval_query_3, "
        "trajectory_caption.\n";
    return prompt;
}

PromptBundle build_prompt(const PhaseSeq& ps, const IntentProfile& profile, const PersonaStyle& style,
                          const RetrievalAssignment& assignment, std::string_view constraints) {
    if (!covers_all_dimensions(assignment)) {
        throw InvalidAssignment("retrieval assignment must cover all four dimensions");
    }
    for (const auto& q : assignment) {
        if (q.empty()) throw InvalidAssignment("every retrieval query needs at least one dimension");
    }
    std::ostringstream u;
    u << "Write three instructions (literal, concise, chatty), three retrieval queries and one caption "
         "for this trajectory. Intent scenarios:\n";
    u << "  " << scenario_label_line(profile) << "\n\n";
    u << "INTENT PLANNING: fill \"_intent_planning\" before any other field.\n\n";
    u << "RETRIEVAL ASSIGNMENT (the three queries together cover all four dimensions):\n";
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        u << "  - retrieval_query_" << i + 1 << " -> " << assignment_label(assignment[i]) << "\n";
    }
    u << "\nSPEAKER PERSONA: " << style.persona << "\n\n";
    u << "STYLE GUIDANCE:\n";
    u << "  - literal:  " << style.literal.sentence_form << "  [length: " << style.literal.length << "]\n";
    u << "  - concise:  " << style.concise.sentence_form << "  [length: " << style.concise.length << "]\n";
    u << "  - chatty:   " << style.chatty.sentence_form << "  [length: " << style.chatty.length << "]\n\n";
    if (!constraints.empty()) u << trim(constraints) << "\n\n";
    u << "NARRATIVE MODE: text after \"Narrative:\" in a phase description is background only. Do not take "
         "facts or wording from it.\n\n";
    u << "Return only the JSON object.\n\n";
    u << phase_seq_to_json(ps).dump(2) << "\n";
    return PromptBundle{annotation_system_prompt(), u.str()};
}

// ---- template generator ----

namespace {

std::string compass_word(std::string_view dir) {
    static const std::map<std::string, std::string, std::less<>> kWords = {
        {"N", "north"}, {"NE", "northeast"}, {"E", "east"}, {"SE", "southeast"},
        {"S", "south"}, {"SW", "southwest"}, {"W", "west"}, {"NW", "northwest"}};
    auto it = kWords.find(dir);
    return it == kWords.end() ? std::string("ahead") : it->second;
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

// "Saturday, Jun 14, 2014 at 4:11 AM" -> weekday, "4 AM", "4:11 AM".
struct TimeParts {
    std::string weekday;
    std::string hour;
    std::string clock;
};

TimeParts parse_time(const std::string& s) {
    TimeParts t;
    const auto comma = s.find(',');
    t.weekday = s.substr(0, comma);
    const auto at = s.rfind(" at ");
    if (at == std::string::npos) return t;
    t.clock = s.substr(at + 4);
    const auto colon = t.clock.find(':');
    const auto space = t.clock.find(' ');
    if (colon == std::string::npos || space == std::string::npos) return t;
    const std::string h = t.clock.substr(0, colon);
    const std::string ampm = t.clock.substr(space + 1);
    t.hour = h + " " + ampm;
    return t;
}

int duration_minutes(const std::string& s) {
    int h = 0, m = 0, sec = 0;
    std::istringstream in(s);
    std::string num, unit;
    while (in >> num >> unit) {
        const int v = std::stoi(num);
        if (unit == "hr") h = v;
        if (unit == "min") m = v;
        if (unit == "sec") sec = v;
    }
    return std::max(1, h * 60 + m + (sec >= 30 ? 1 : 0));
}

struct PhaseView {
    std::string dir;
    int n = 1;
    std::vector<std::string> roads;
    std::string desc;
};

std::vector<PhaseView> phase_views(const json& phases) {
    std::vector<PhaseView> out;
    for (const auto& p : phases) {
        PhaseView v;
        v.dir = p.value("dir", "");
        v.n = p.value("n", 1);
        if (p.contains("road_names")) v.roads = p["road_names"].get<std::vector<std::string>>();
        if (p.contains("roads")) v.roads = p["roads"].get<std::vector<std::string>>();
        v.desc = p.value("desc", "");
        out.push_back(std::move(v));
    }
    return out;
}

// Names and phrases the templates draw from.
struct Facts {
    std::string origin;
    std::string dest_road;
    std::string dest_poi;
    std::string dest; ///< POI when known, else the last road
    std::string dest_area;
    std::string dest_district;
    std::string waypoint;
    std::vector<std::string> middle_roads;
    std::string area;
    std::string other_area;
    std::string first_dir;
    std::string main_dir;
    std::string last_dir;
    std::vector<std::string> dirs;
};

Facts collect_facts(const std::vector<PhaseView>& ph, const TerminologyMap& terms) {
    Facts f;
    if (ph.empty()) return f;
    for (const auto& p : ph) {
        if (f.origin.empty() && !p.roads.empty()) f.origin = p.roads.front();
    }
    for (auto it = ph.rbegin(); it != ph.rend() && f.dest_road.empty(); ++it) {
        if (!it->roads.empty()) f.dest_road = it->roads.back();
    }
    const DescriptionFields last = parse_description(ph.back().desc);
    if (!last.pois.empty()) f.dest_poi = last.pois.front();
    f.dest = !f.dest_poi.empty() ? f.dest_poi : !f.dest_road.empty() ? f.dest_road : std::string("the end point");
    f.dest_area = area_phrase(ph.back().desc, terms);
    f.dest_district = last.district;

    std::set<std::string> seen = {f.origin, f.dest_road};
    for (std::size_t k = 1; k + 1 < ph.size(); ++k) {
        for (const auto& r : ph[k].roads) {
            if (seen.insert(r).second) f.middle_roads.push_back(r);
        }
    }
    if (ph.size() >= 3) {
        const auto& mid = ph[ph.size() / 2];
        const DescriptionFields md = parse_description(mid.desc);
        if (!f.middle_roads.empty()) {
            f.waypoint = f.middle_roads[f.middle_roads.size() / 2];
        } else if (!md.pois.empty()) {
            f.waypoint = md.pois.front();
        }
    }
    for (std::size_t k = ph.size() / 2; k < ph.size() && f.area.empty(); ++k) f.area = area_phrase(ph[k].desc, terms);
    for (std::size_t k = 0; k < ph.size() && f.area.empty(); ++k) f.area = area_phrase(ph[k].desc, terms);
    // An area the trip never enters, so avoiding it stays truthful.
    std::set<std::string> visited_areas;
    for (const auto& p : ph) visited_areas.insert(area_phrase(p.desc, terms));
    for (const auto& [label, phrase] : terms) {
        if (!f.area.empty() && !visited_areas.count(phrase)) {
            f.other_area = phrase;
            break;
        }
    }

    std::map<std::string, int> weight;
    for (const auto& p : ph) {
        weight[p.dir] += p.n;
        f.dirs.push_back(compass_word(p.dir));
    }
    f.main_dir = compass_word(std::max_element(weight.begin(), weight.end(), [](const auto& a, const auto& b) {
                                  return a.second < b.second;
                              })->first);
    f.first_dir = compass_word(ph.front().dir);
    f.last_dir = compass_word(ph.back().dir);
    return f;
}

// "somewhere by the river in X", "the park in X", "downtown X"
std::string fuzzy_place(const std::string& area, const std::string& district) {
    if (district.empty()) return area.starts_with("by ") ? "somewhere " + area : area;
    if (area.starts_with("by ")) return "somewhere " + area + " in " + district;
    if (area.starts_with("the ")) return area + " in " + district;
    return area + " " + district;
}

std::string stay_clause(const std::string& area) {
    return area.starts_with("the ") ? "staying near " + area : "staying " + area;
}

std::string avoid_clause(const std::string& area) {
    return "avoiding " + (area.starts_with("by ") ? area.substr(3) : area);
}

bool has(const std::vector<std::string>& scenarios, std::string_view id) {
    return std::find(scenarios.begin(), scenarios.end(), id) != scenarios.end();
}

bool has_dim(const std::vector<std::string>& scenarios, int dim) {
    return std::any_of(scenarios.begin(), scenarios.end(), [&](const auto& s) { return scenario(s).dimension == dim; });
}

std::string line_after(const std::string& text, std::string_view marker) {
    const auto at = text.find(marker);
    if (at == std::string::npos) return {};
    const auto from = at + marker.size();
    const auto eol = text.find('\n', from);
    return trim(text.substr(from, eol == std::string::npos ? text.npos : eol - from));
}

json trailing_json(const std::string& text) {
    const auto at = text.find("\n{");
    if (at == std::string::npos) throw SchemaError("prompt carries no trailing JSON block");
    return json::parse(text.substr(at + 1));
}

std::string reference_caption(const Facts& f, const TimeParts& t, const std::string& duration) {
    std::string c = "Starting on " + f.origin;
    if (!t.clock.empty()) c += " around " + t.clock + " on " + t.weekday;
    c += ", the trip heads " + f.first_dir;
    if (!f.middle_roads.empty()) {
        c += ", continues along " + f.middle_roads.front();
        if (f.middle_roads.size() > 1) c += " and " + f.middle_roads.back();
    }
    if (!f.area.empty()) c += ", passes " + f.area;
    c += " and ends on " + f.dest_road;
    if (!f.dest_poi.empty()) c += " near " + f.dest_poi;
    c += " after " + duration + ".";
    return c;
}

std::string plain_caption(const Facts& f) {
    std::string c = "The trip starts on " + f.origin + " and moves " + f.main_dir;
    if (!f.middle_roads.empty()) c += " by way of " + f.middle_roads.front();
    c += ". It ends on " + f.dest_road;
    if (!f.dest_poi.empty()) c += " close to " + f.dest_poi;
    return c + ".";
}

std::string structural_caption(const std::vector<std::string>& dirs, const TimeParts& t, const std::string& duration) {
    std::string c;
    if (!t.clock.empty()) c = "Around " + t.clock + " on " + t.weekday + ", the";
    else c = "The";
    c += " trip heads " + (dirs.empty() ? std::string("ahead") : dirs.front());
    std::vector<std::string> turns;
    for (std::size_t k = 1; k < dirs.size(); ++k) {
        if (dirs[k] != dirs[k - 1]) turns.push_back(dirs[k]);
    }
    if (!turns.empty()) {
        c += ", turns " + turns.front();
        if (turns.size() > 1) c += " and finally " + turns.back();
    }
    c += " and stops after " + duration + ".";
    return c;
}

} // namespace

std::string TemplateGenerator::complete(const PromptBundle& p) {
    if (p.user.find(kCaptionContextMarker) != std::string::npos) return caption(p.user);
    if (p.user.find("RETRIEVAL ASSIGNMENT") != std::string::npos) return annotate(p.user);
    throw SchemaError("template generator does not recognize the prompt");
}

std::string TemplateGenerator::annotate(const std::string& user) const {
    const json listing = trailing_json(user);
    const auto views = phase_views(listing.at("phases"));
    const Facts f = collect_facts(views, terms_);
    const TimeParts t = parse_time(listing.at("meta").value("start_time", ""));
    const std::string duration = listing.at("meta").value("total_duration", "");
    const int minutes = duration_minutes(duration);
    const TrajId id = listing.value("traj_id", TrajId{0});

    std::vector<std::string> scenarios;
    {
        std::istringstream in(line_after(user, "Intent scenarios:\n"));
        std::string tok;
        while (in >> tok) {
            if (tok != "+") scenarios.push_back(tok);
        }
    }
    std::array<std::vector<int>, 3> dims;
    for (int q = 0; q < 3; ++q) {
        const std::string line = line_after(user, "retrieval_query_" + std::to_string(q + 1) + " -> ");
        for (std::size_t at = line.find("Dim "); at != std::string::npos; at = line.find("Dim ", at + 4)) {
            dims[static_cast<std::size_t>(q)].push_back(line[at + 4] - '0');
        }
    }

    // Destination phrasing.
    const bool fuzzy = has(scenarios, "1.2") && !f.dest_area.empty();
    const std::string dest = fuzzy ? fuzzy_place(f.dest_area, f.dest_district) : f.dest;

    // Constraint clauses shared by the instruction styles.
    std::vector<std::string> clauses;
    if (has_dim(scenarios, 2) && !f.waypoint.empty()) {
        clauses.push_back((has(scenarios, "2.3") ? "through " : "via ") + f.waypoint);
    }
    if (has(scenarios, "3.1") && !f.area.empty()) clauses.push_back(stay_clause(f.area));
    if (has(scenarios, "3.2")) clauses.push_back("heading " + f.main_dir);
    if (has(scenarios, "3.3")) {
        if (!has(scenarios, "3.1") && !f.area.empty()) clauses.push_back(stay_clause(f.area));
        if (!f.other_area.empty()) clauses.push_back(avoid_clause(f.other_area));
    }
    if (has(scenarios, "4.1") && !t.hour.empty()) clauses.push_back("around " + t.hour);
    if (has(scenarios, "4.2")) clauses.push_back("in about " + std::to_string(minutes) + " minutes");

    static constexpr std::array<std::string_view, 3> kOpeners = {"Drive", "Take me", "Head"};
    const std::string opener(kOpeners[static_cast<std::size_t>(id % 3 + 3) % 3]);

    std::string literal = opener + " to " + dest;
    for (const auto& c : clauses) literal += ", " + c;
    literal += ", starting on " + f.origin + ".";

    std::string concise = capitalize(dest);
    if (!clauses.empty()) concise += " " + clauses.front();
    concise += ".";
    if (clauses.size() > 1) concise += " " + capitalize(clauses.back()) + ".";

    std::string chatty = "Hey, could you get me over to " + dest + "?";
    if (clauses.empty()) {
        chatty += " No detours please, thanks!";
    } else {
        chatty += " I'd like to go " + join(clauses, ", ") + ". Thanks!";
    }

    // Retrieval queries.
    auto dim_clause = [&](int d) -> std::string {
        switch (d) {
        case 1:
            return fuzzy ? (dest.starts_with("somewhere") ? "ending " : "ending in ") + dest : "ending at " + f.dest;
        case 2:
            return !f.waypoint.empty() ? "passing through " + f.waypoint : "running along " + f.origin;
        case 3:
            return "mostly heading " + f.main_dir + (f.area.empty() ? "" : " and passing " + f.area);
        default: {
            std::string s = "starting around " + (t.hour.empty() ? std::string("midday") : t.hour);
            if (!t.weekday.empty()) s += " on a " + t.weekday;
            return s + " and lasting about " + std::to_string(minutes) + " minutes";
        }
        }
    };
    std::array<std::string, 3> queries;
    for (std::size_t q = 0; q < 3; ++q) {
        std::vector<std::string> parts;
        for (int d : dims[q]) parts.push_back(dim_clause(d));
        std::string s = q == 0 ? "Trips from " + f.origin + " " : "Trips ";
        s += join(parts, " and ") + ".";
        queries[q] = s;
    }

    ordered_json out;
    out["_intent_planning"] = "Scenarios " + join(scenarios, " + ") + ". Destination " + dest + ". " +
                              (clauses.empty() ? std::string("No extra constraints.") : "Constraints " + join(clauses, ", ") + ".");
    std::string rp;
    for (std::size_t q = 0; q < 3; ++q) {
        std::vector<std::string> names;
        for (int d : dims[q]) names.push_back("Dim " + std::to_string(d));
        rp += (q ? " " : "") + std::string("Query ") + std::to_string(q + 1) + " covers " + join(names, " and ") + ".";
    }
    out["_retrieval_planning"] = rp;
    out["instruction_literal"] = literal;
    out["instruction_concise"] = concise;
    out["instruction_chatty"] = chatty;
    out["retrieval_query_1"] = queries[0];
    out["retrieval_query_2"] = queries[1];
    out["retrieval_query_3"] = queries[2];
    out["trajectory_caption"] = reference_caption(f, t, duration);
    return out.dump(2);
}

std::string TemplateGenerator::caption(const std::string& user) const {
    const auto at = user.find(kCaptionContextMarker);
    const json ctx = json::parse(user.substr(user.find('{', at)));
    const std::string mode = ctx.value("mode", "sem");
    const auto views = phase_views(ctx.at("phases"));
    const TimeParts t = parse_time(ctx.value("start_time", ""));
    const std::string duration = ctx.value("duration", "");
    if (mode == "struct") {
        std::vector<std::string> dirs;
        for (const auto& v : views) dirs.push_back(compass_word(v.dir));
        return structural_caption(dirs, t, duration);
    }
    const Facts f = collect_facts(views, terms_);
    if (mode == "rap" && ctx.contains("examples")) {
        // Follow the phrasing most of the examples use.
        int reference_style = 0;
        int total = 0;
        for (const auto& e : ctx["examples"]) {
            ++total;
            reference_style += starts_with_word(e.get<std::string>(), "Starting");
        }
        if (total > 0 && 2 * reference_style >= total) return reference_caption(f, t, duration);
    }
    return plain_caption(f);
}

std::unique_ptr<Generator> make_generator(int max_in_flight) {
    const std::string url = provider_url_from_env();
    if (!url.empty()) return std::make_unique<HttpGenerator>(url, max_in_flight);
    return std::make_unique<TemplateGenerator>();
}

AnnotationRecord generate(Generator& gen, const PromptBundle& p, TrajId traj_id) {
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            return parse_generation(gen.complete(p), traj_id);
        } catch (const SchemaError& e) {
            last_error = e.what();
        }
    }
    throw SchemaError("generation for trajectory " + std::to_string(traj_id) + " failed twice: " + last_error);
}

} // namespace trajprism
