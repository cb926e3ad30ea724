#include "trajprism/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "trajprism/error.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

// ---- records ----

std::string& AnnotationRecord::field(std::size_t i) {
    return const_cast<std::string&>(std::as_const(*this).field(i));
}

const std::string& AnnotationRecord::field(std::size_t i) const {
    switch (i) {
    case 0: return instruction_literal;
    case 1: return instruction_concise;
    case 2: return instruction_chatty;
    case 3: return retrieval_query_1;
    case 4: return retrieval_query_2;
    case 5: return retrieval_query_3;
    case 6: return trajectory_caption;
    default: throw InvalidArgument("record field index out of range");
    }
}

ordered_json record_to_json(const AnnotationRecord& r) {
    ordered_json j;
    j["traj_id"] = r.traj_id;
    j["_intent_planning"] = r.intent_planning;
    j["_retrieval_planning"] = r.retrieval_planning;
    for (std::size_t i = 0; i < kUserFields.size(); ++i) j[std::string(kUserFields[i])] = r.field(i);
    return j;
}

AnnotationRecord record_from_json(const json& obj) {
    if (!obj.is_object()) throw SchemaError("annotation record must be a JSON object");
    AnnotationRecord r;
    if (auto it = obj.find("traj_id"); it != obj.end() && it->is_number_integer()) r.traj_id = it->get<TrajId>();
    auto opt = [&](const char* key, std::string& out) {
        if (auto it = obj.find(key); it != obj.end()) {
            if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
            out = it->get<std::string>();
        }
    };
    opt("_intent_planning", r.intent_planning);
    opt("_retrieval_planning", r.retrieval_planning);
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < kUserFields.size(); ++i) {
        const std::string key(kUserFields[i]);
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_string() || trim(it->get<std::string>()).empty()) {
            missing.push_back(key);
            continue;
        }
        r.field(i) = it->get<std::string>();
    }
    if (!missing.empty()) throw SchemaError("annotation record missing or empty: " + join(missing, ", "));
    return r;
}

AnnotationRecord parse_generation(std::string_view text, TrajId traj_id) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        throw SchemaError("provider reply contains no JSON object");
    }
    json obj;
    try {
        obj = json::parse(text.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("provider reply is not valid JSON: ") + e.what());
    }
    AnnotationRecord r = record_from_json(obj);
    r.traj_id = traj_id;
    return r;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    std::vector<AnnotationRecord> out;
    read_jsonl(path, [&](std::size_t line, const json& obj) {
        try {
            out.push_back(record_from_json(obj));
        } catch (const SchemaError& e) {
            throw ParseError(e.what(), line);
        }
    });
    return out;
}

void save_annotations(const std::vector<AnnotationRecord>& rs, const std::filesystem::path& path) {
    JsonlWriter w(path, "trajprism/annotations");
    for (const auto& r : rs) w.write(record_to_json(r));
}

// ---- terminology ----

const TerminologyMap& default_terminology() {
    static const TerminologyMap terms = {
        {"WATERFRONT", "by the river"}, {"GREEN/PARK", "the park"},    {"URBAN/INLAND", "downtown"},
        {"COASTAL/BEACH", "the beach"}, {"GREEN", "the park"},         {"PARK", "the park"},
        {"URBAN", "downtown"},          {"INLAND", "downtown"},        {"COASTAL", "the beach"},
        {"BEACH", "the beach"},
    };
    return terms;
}

TerminologyMap load_terminology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open terminology file " + path.string());
    TerminologyMap out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'LABEL = phrase'", line_no);
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return out;
}

namespace {

bool is_word_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

bool is_upper_word(std::string_view w) {
    bool any = false;
    for (char c : w) {
        const auto u = static_cast<unsigned char>(c);
        if (std::islower(u)) return false;
        any = any || std::isupper(u);
    }
    return any;
}

bool is_title_word(std::string_view w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w[0])) && !is_upper_word(w);
}

// Word starting at i (after optional spaces), or empty.
std::string_view word_at(std::string_view s, std::size_t i) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && is_word_byte(s[j])) ++j;
    return s.substr(i, j - i);
}

std::string_view word_before(std::string_view s, std::size_t i) {
    std::size_t j = i;
    while (j > 0 && s[j - 1] == ' ') --j;
    std::size_t k = j;
    while (k > 0 && is_word_byte(s[k - 1])) --k;
    return s.substr(k, j - k);
}

} // namespace

std::string apply_terminology(std::string_view text, const TerminologyMap& terms) {
    std::vector<const std::pair<std::string, std::string>*> order;
    for (const auto& t : terms) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(),
                     [](auto* a, auto* b) { return a->first.size() > b->first.size(); });

    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        const bool at_start = i == 0 || !is_word_byte(text[i - 1]);
        const std::pair<std::string, std::string>* hit = nullptr;
        if (at_start && is_word_byte(text[i])) {
            for (auto* t : order) {
                const std::size_t n = t->first.size();
                if (i + n > text.size() || !iequals(text.substr(i, n), t->first)) continue;
                if (i + n < text.size() && is_word_byte(text[i + n])) continue;
                const std::string_view w = text.substr(i, n);
                // A title-case label next to another capitalized word is part of a proper name.
                if (is_title_word(w) && (is_title_word(word_at(text, i + n)) || is_title_word(word_before(text, i)))) {
                    continue;
                }
                // Already inside its own replacement phrase: leave it alone.
                const std::string lower_label = normalize_name(t->first);
                const std::string lower_repl = normalize_name(t->second);
                const auto k = lower_repl.find(lower_label);
                if (k != std::string::npos && i >= k && i - k + t->second.size() <= text.size() &&
                    iequals(text.substr(i - k, t->second.size()), t->second)) {
                    continue;
                }
                hit = t;
                break;
            }
        }
        if (hit != nullptr) {
            out += hit->second;
            i += hit->first.size();
        } else {
            out += text[i];
            ++i;
        }
    }
    return out;
}

AnnotationRecord qc_terminology(const AnnotationRecord& rec, const TerminologyMap& terms) {
    AnnotationRecord r = rec;
    for (std::size_t i = 0; i < kUserFields.size(); ++i) r.field(i) = apply_terminology(r.field(i), terms);
    return r;
}

std::string sanitize_punctuation(std::string_view text) {
    static constexpr std::string_view kEmDash = "\xE2\x80\x94";
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.substr(i, kEmDash.size()) == kEmDash) {
            while (!out.empty() && out.back() == ' ') out.pop_back();
            out += out.empty() ? "" : ", ";
            i += kEmDash.size();
            while (i < text.size() && text[i] == ' ') ++i;
        } else if (text[i] == ';') {
            while (!out.empty() && out.back() == ' ') out.pop_back();
            out += ',';
            ++i;
        } else {
            out += text[i++];
        }
    }
    return out;
}

AnnotationRecord qc_punctuation(const AnnotationRecord& rec) {
    AnnotationRecord r = rec;
    for (std::size_t i = 0; i < kUserFields.size(); ++i) r.field(i) = sanitize_punctuation(r.field(i));
    return r;
}

double unigram_jaccard(std::string_view a, std::string_view b) {
    const auto ta = word_tokens(a);
    const auto tb = word_tokens(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& w : sa) inter += sb.count(w);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

DiversityResult qc_diversity(const AnnotationRecord& rec, double max_jaccard) {
    static constexpr std::array<std::string_view, 3> kNames = {"literal", "concise", "chatty"};
    const auto ins = rec.instructions();
    DiversityResult res;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
            const auto ta = word_tokens(ins[a]);
            const auto tb = word_tokens(ins[b]);
            const std::string pair = std::string(kNames[a]) + "/" + std::string(kNames[b]);
            if (!ta.empty() && !tb.empty() && ta[0] == tb[0]) {
                res.pass = false;
                res.reasons.push_back(pair + " share opener '" + ta[0] + "'");
            }
            const double j = unigram_jaccard(ins[a], ins[b]);
            if (j > max_jaccard) {
                res.pass = false;
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.3f", j);
                res.reasons.push_back(pair + " unigram jaccard " + buf);
            }
        }
    }
    return res;
}

// ---- mentions ----

namespace {

constexpr std::string_view kBreak = "|";

// Word tokens with a break marker wherever clause punctuation separates words.
struct RawToken {
    std::string raw;
    std::string norm;
};

std::vector<RawToken> raw_tokens(std::string_view text) {
    std::vector<RawToken> out;
    std::string cur;
    bool pending_break = false;
    auto flush = [&] {
        if (cur.empty()) return;
        if (pending_break && !out.empty()) out.push_back({std::string(kBreak), std::string(kBreak)});
        pending_break = false;
        std::string norm = normalize_name(cur);
        out.push_back({cur, norm});
        cur.clear();
    };
    for (char c : text) {
        if (is_word_byte(c)) {
            cur.push_back(c);
            continue;
        }
        flush();
        if (c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?' || c == '(' || c == ')' ||
            c == '"' || c == '|' || c == '/' || c == '\n') {
            pending_break = true;
        }
    }
    flush();
    // Normalization can split a raw token; keep alignment one-to-one by
    // replacing inner spaces.
    for (auto& t : out) std::replace(t.norm.begin(), t.norm.end(), ' ', '_');
    return out;
}

struct GazetteerIndex {
    std::map<std::string, std::vector<std::vector<std::string>>> by_first;

    explicit GazetteerIndex(const std::set<std::string>& names) {
        for (const auto& n : names) {
            auto toks = word_tokens(n);
            if (toks.empty()) continue;
            by_first[toks[0]].push_back(std::move(toks));
        }
        for (auto& [k, v] : by_first) {
            std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
        }
    }

    // Length of the longest entry matching at i, 0 if none.
    std::size_t match(const std::vector<RawToken>& toks, std::size_t i) const {
        auto it = by_first.find(toks[i].norm);
        if (it == by_first.end()) return 0;
        for (const auto& entry : it->second) {
            if (i + entry.size() > toks.size()) continue;
            bool ok = true;
            for (std::size_t k = 0; k < entry.size() && ok; ++k) ok = toks[i + k].norm == entry[k];
            if (ok) return entry.size();
        }
        return 0;
    }
};

using Cue = std::vector<std::string_view>;

const std::vector<Cue>& origin_cues() {
    static const std::vector<Cue> cues = {{"from"},           {"starting", "on"}, {"starting", "at"},
                                          {"starts", "on"},   {"starts", "at"},   {"leaving"},
                                          {"departing"},      {"departs"}};
    return cues;
}

const std::vector<Cue>& destination_cues() {
    static const std::vector<Cue> cues = {
        {"to"},           {"towards"},        {"toward"},         {"arriving", "at"}, {"arrives", "at"},
        {"ending", "at"}, {"ending", "on"},   {"ends", "at"},     {"ends", "on"},     {"finish", "at"},
        {"finish", "on"}, {"finishing", "at"}, {"finishing", "on"}, {"finishes", "at"}, {"finishes", "on"}};
    return cues;
}

bool cue_before(const std::vector<RawToken>& toks, std::size_t i, const std::vector<Cue>& cues) {
    std::size_t end = i;
    if (end > 0 && toks[end - 1].norm == "the") --end; // "to the ..."
    for (const auto& cue : cues) {
        if (cue.size() > end) continue;
        bool ok = true;
        for (std::size_t k = 0; k < cue.size() && ok; ++k) ok = toks[end - cue.size() + k].norm == cue[k];
        if (ok) return true;
    }
    return false;
}

std::string joined_norm(const std::vector<RawToken>& toks, std::size_t i, std::size_t n) {
    std::string out;
    for (std::size_t k = 0; k < n; ++k) {
        if (k) out += ' ';
        out += toks[i + k].norm;
    }
    return out;
}

} // namespace

std::vector<std::pair<std::string, MentionRole>> find_role_mentions(std::string_view text,
                                                                    const std::set<std::string>& gazetteer) {
    const GazetteerIndex index(gazetteer);
    const auto toks = raw_tokens(text);
    std::vector<std::pair<std::string, MentionRole>> out;
    std::size_t i = 0;
    while (i < toks.size()) {
        const std::size_t n = toks[i].norm == kBreak ? 0 : index.match(toks, i);
        if (n == 0) {
            ++i;
            continue;
        }
        MentionRole role = MentionRole::Any;
        if (cue_before(toks, i, origin_cues())) {
            role = MentionRole::Origin;
        } else if (cue_before(toks, i, destination_cues())) {
            role = MentionRole::Destination;
        }
        out.emplace_back(joined_norm(toks, i, n), role);
        i += n;
    }
    return out;
}

std::vector<std::string> find_mentions(std::string_view text, const std::set<std::string>& gazetteer) {
    std::vector<std::string> out;
    for (auto& [name, role] : find_role_mentions(text, gazetteer)) out.push_back(std::move(name));
    return out;
}

std::size_t GroundingReport::ungrounded_count() const {
    return static_cast<std::size_t>(
        std::count_if(mentions.begin(), mentions.end(), [](const Mention& m) { return !m.grounded; }));
}

std::vector<Mention> GroundingReport::ungrounded() const {
    std::vector<Mention> out;
    for (const auto& m : mentions) {
        if (!m.grounded) out.push_back(m);
    }
    return out;
}

namespace {

std::set<std::string> phase_vocabulary(const Phase& ph, const CellIndex& cells) {
    std::set<std::string> v;
    for (const auto& r : ph.road_names) v.insert(normalize_name(r));
    if (const CellMeta* m = cells.find(ph.cell)) {
        v.insert(m->poi_names.begin(), m->poi_names.end());
        if (!m->district.empty()) v.insert(normalize_name(m->district));
    }
    return v;
}

std::set<std::string> full_gazetteer(const PhaseSeq& ps, const CellIndex& cells) {
    std::set<std::string> g = cells.gazetteer();
    for (const auto& ph : ps.phases) {
        for (const auto& r : ph.road_names) g.insert(normalize_name(r));
    }
    return g;
}

} // namespace

GroundingReport qc_grounding(const AnnotationRecord& rec, const PhaseSeq& ps, const CellIndex& cells) {
    GroundingReport report;
    if (ps.phases.empty()) return report;
    std::set<std::string> visited;
    for (const auto& ph : ps.phases) {
        const auto v = phase_vocabulary(ph, cells);
        visited.insert(v.begin(), v.end());
    }
    const auto first = phase_vocabulary(ps.phases.front(), cells);
    const auto last = phase_vocabulary(ps.phases.back(), cells);
    const auto gazetteer = full_gazetteer(ps, cells);

    for (std::size_t f = 0; f < kUserFields.size(); ++f) {
        for (auto& [name, role] : find_role_mentions(rec.field(f), gazetteer)) {
            Mention m;
            m.field = std::string(kUserFields[f]);
            m.name = name;
            m.role = role;
            if (!visited.count(name)) {
                m.reason = "not on the trajectory";
            } else if (role == MentionRole::Origin && !first.count(name)) {
                m.reason = "origin not in the first phase";
            } else if (role == MentionRole::Destination && !last.count(name)) {
                m.reason = "destination not in the last phase";
            }
            m.grounded = m.reason.empty();
            report.mentions.push_back(std::move(m));
        }
    }
    return report;
}

// ---- hallucination ----

namespace {

bool excluded_capital(std::string_view w) {
    static const std::set<std::string, std::less<>> kWords = {
        "am", "pm", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
        "mon", "tue", "wed", "thu", "fri", "sat", "sun", "january", "february", "march", "april",
        "may", "june", "july", "august", "september", "october", "november", "december", "jan", "feb",
        "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "i"};
    return kWords.count(normalize_name(w)) != 0;
}

bool is_connector(std::string_view w) {
    static const std::set<std::string, std::less<>> kWords = {"de", "da", "do", "dos", "das", "of", "the",
                                                              "and", "la", "le", "del", "van", "von", "e"};
    return kWords.count(w) != 0;
}

// Sentence openers that are capitalized only by position.
bool common_opener(std::string_view w) {
    static const std::set<std::string, std::less<>> kWords = {
        "a", "an", "the", "near", "from", "to", "via", "then", "take", "drive", "head", "go", "get", "turn",
        "start", "starting", "past", "after", "before", "at", "on", "in", "it", "this", "that", "look", "follow",
        "continue", "hey", "please", "trips", "trip", "shortly", "later", "finally", "around", "by", "through",
        "passing", "heading", "ending", "leaving", "arriving", "stay", "staying", "avoid", "avoiding"};
    return kWords.count(normalize_name(w)) != 0;
}

bool is_capitalized(std::string_view w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w[0]));
}

} // namespace

std::vector<std::string> capitalized_entities(std::string_view text, const std::set<std::string>& gazetteer) {
    const GazetteerIndex index(gazetteer);
    auto toks = raw_tokens(text);
    std::vector<bool> masked(toks.size(), false);
    for (std::size_t i = 0; i < toks.size();) {
        const std::size_t n = toks[i].norm == kBreak ? 0 : index.match(toks, i);
        if (n == 0) {
            ++i;
            continue;
        }
        for (std::size_t k = 0; k < n; ++k) masked[i + k] = true;
        i += n;
    }

    std::vector<std::string> spans;
    std::size_t i = 0;
    while (i < toks.size()) {
        auto capital = [&](std::size_t k) {
            return !masked[k] && toks[k].norm != kBreak && is_capitalized(toks[k].raw) &&
                   !excluded_capital(toks[k].raw);
        };
        if (!capital(i) || common_opener(toks[i].raw)) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        std::size_t last_cap = i;
        int caps = 1;
        while (j < toks.size()) {
            if (capital(j)) {
                last_cap = j;
                ++caps;
            } else if (!(toks[j].norm != kBreak && !masked[j] && is_connector(toks[j].raw))) {
                break;
            }
            ++j;
        }
        if (caps >= 2) {
            std::string span;
            for (std::size_t k = i; k <= last_cap; ++k) {
                if (k > i) span += ' ';
                span += toks[k].raw;
            }
            spans.push_back(std::move(span));
        }
        i = last_cap + 1;
    }
    return spans;
}

std::vector<std::string> HeuristicJudge::suspect_spans(const AnnotationRecord& rec, const PhaseSeq& ps,
                                                       const CellIndex& cells) {
    const auto gazetteer = full_gazetteer(ps, cells);
    std::vector<std::string> out;
    for (std::size_t f = 0; f < kUserFields.size(); ++f) {
        for (auto& s : capitalized_entities(rec.field(f), gazetteer)) out.push_back(std::move(s));
    }
    return out;
}

namespace {

int accuracy_score(std::size_t ungrounded) {
    return ungrounded == 0 ? 5 : ungrounded == 1 ? 4 : 3;
}

std::size_t ungrounded_in(const GroundingReport& g, std::initializer_list<std::string_view> fields) {
    std::size_t n = 0;
    for (const auto& m : g.mentions) {
        if (m.grounded) continue;
        for (auto f : fields) n += m.field == f;
    }
    return n;
}

} // namespace

namespace {

// A place name, a compass heading, a weekday, or a number (clock time, duration).
bool has_concrete_anchor(std::string_view q, const std::set<std::string>& gazetteer) {
    if (!find_mentions(q, gazetteer).empty()) return true;
    static const std::set<std::string> kWords = {
        "north", "south", "east", "west", "northeast", "northwest", "southeast", "southwest",
        "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};
    for (const auto& w : word_tokens(q)) {
        if (kWords.count(w) || std::any_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            return true;
        }
    }
    return false;
}

} // namespace

std::array<int, 10> HeuristicJudge::raw_scores(const AnnotationRecord& rec, const PhaseSeq& ps,
                                               const CellIndex& cells, const QcOutcome& qc) {
    std::array<int, 10> s{};
    const int no_hall = qc.hallucination.flagged ? 2 : 5;
    s[0] = accuracy_score(
        ungrounded_in(qc.grounding, {"instruction_literal", "instruction_concise", "instruction_chatty"}));
    s[1] = no_hall;
    const auto lw = count_words(rec.instruction_literal);
    const auto cw = count_words(rec.instruction_concise);
    const auto hw = count_words(rec.instruction_chatty);
    s[2] = (cw < lw && cw < hw) ? 5 : 3;
    s[3] = qc.diversity.pass ? 5 : 2;

    const auto gazetteer = full_gazetteer(ps, cells);
    int specific = 0;
    for (const auto& q : rec.queries()) specific += has_concrete_anchor(q, gazetteer);
    s[4] = specific == 3 ? 5 : specific == 2 ? 4 : specific == 1 ? 3 : 2;
    s[5] = accuracy_score(
        ungrounded_in(qc.grounding, {"retrieval_query_1", "retrieval_query_2", "retrieval_query_3"}));
    s[6] = no_hall;

    int ends = 0;
    if (!ps.phases.empty()) {
        const auto mentioned = find_mentions(rec.trajectory_caption, gazetteer);
        const std::set<std::string> m(mentioned.begin(), mentioned.end());
        auto touches = [&](const std::set<std::string>& vocab) {
            return std::any_of(m.begin(), m.end(), [&](const auto& x) { return vocab.count(x) != 0; });
        };
        ends += touches(phase_vocabulary(ps.phases.front(), cells));
        ends += touches(phase_vocabulary(ps.phases.back(), cells));
    }
    s[7] = 3 + ends;
    s[8] = accuracy_score(ungrounded_in(qc.grounding, {"trajectory_caption"}));
    static const std::set<std::string> kPersonal = {"i", "me", "my", "mine", "you", "your", "we", "us", "our"};
    const auto ct = word_tokens(rec.trajectory_caption);
    const bool personal = std::any_of(ct.begin(), ct.end(), [](const auto& w) { return kPersonal.count(w) != 0; });
    s[9] = personal ? 3 : 5;
    return s;
}

namespace {

std::string judge_context(const AnnotationRecord& rec, const PhaseSeq& ps) {
    return "Record:\n" + record_to_json(rec).dump(2) + "\n\nTrajectory:\n" + phase_seq_to_json(ps).dump(2);
}

json provider_json(Generator& gen, const PromptBundle& p) {
    const std::string reply = gen.complete(p);
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ProviderError("judge reply contains no JSON object");
    }
    try {
        return json::parse(reply.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw ProviderError(std::string("judge reply is not valid JSON: ") + e.what());
    }
}

} // namespace

std::vector<std::string> ProviderJudge::suspect_spans(const AnnotationRecord& rec, const PhaseSeq& ps,
                                                      const CellIndex&) {
    PromptBundle p;
    p.system = "You verify annotations of driving trajectories. List every place or entity name in the "
               "record that the trajectory data does not support. Reply with JSON {\"suspects\": [...]}.";
    p.user = judge_context(rec, ps);
    const json j = provider_json(gen_, p);
    if (!j.contains("suspects") || !j["suspects"].is_array()) throw ProviderError("judge reply lacks 'suspects'");
    std::vector<std::string> out;
    for (const auto& s : j["suspects"]) {
        if (s.is_string()) out.push_back(s.get<std::string>());
    }
    return out;
}

std::array<int, 10> ProviderJudge::raw_scores(const AnnotationRecord& rec, const PhaseSeq& ps, const CellIndex&,
                                              const QcOutcome&) {
    PromptBundle p;
    p.system = "You grade annotations of driving trajectories on a 1 to 5 scale. Reply with one JSON object "
               "whose keys are: ";
    for (std::size_t i = 0; i < kCriteria.size(); ++i) p.system += (i ? ", " : "") + std::string(kCriteria[i]);
    p.system += ".";
    p.user = judge_context(rec, ps);
    const json j = provider_json(gen_, p);
    std::array<int, 10> s{};
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
        const std::string key(kCriteria[i]);
        if (!j.contains(key) || !j[key].is_number()) throw ProviderError("judge reply lacks '" + key + "'");
        s[i] = static_cast<int>(std::lround(j[key].get<double>()));
    }
    return s;
}

HallucinationResult qc_hallucination(Judge& judge, const AnnotationRecord& rec, const PhaseSeq& ps,
                                     const CellIndex& cells) {
    HallucinationResult res;
    try {
        res.spans = judge.suspect_spans(rec, ps, cells);
    } catch (const ProviderError& e) {
        HeuristicJudge fallback;
        res.spans = fallback.suspect_spans(rec, ps, cells);
        res.degraded = true;
        res.rationale = std::string("provider failed (") + e.what() + "), heuristic used. ";
    }
    res.flagged = !res.spans.empty();
    res.rationale += res.flagged ? "unsupported entities: " + join(res.spans, ", ") : "no unsupported entities";
    return res;
}

QcOutcome run_qc(Judge& judge, const AnnotationRecord& rec, const PhaseSeq& ps, const CellIndex& cells) {
    QcOutcome qc;
    qc.grounding = qc_grounding(rec, ps, cells);
    qc.diversity = qc_diversity(rec);
    qc.hallucination = qc_hallucination(judge, rec, ps, cells);
    return qc;
}

double ScoreCard::mean() const {
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

json scorecard_to_json(const ScoreCard& c) {
    json j;
    j["traj_id"] = c.item;
    j["judge_id"] = c.judge_id;
    for (std::size_t i = 0; i < kCriteria.size(); ++i) j[std::string(kCriteria[i])] = c.scores[i];
    return j;
}

ScoreCard scorecard_from_json(const json& obj) {
    ScoreCard c;
    c.item = obj.at("traj_id").get<TrajId>();
    c.judge_id = obj.value("judge_id", "");
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
        const int v = obj.at(std::string(kCriteria[i])).get<int>();
        if (v < 1 || v > 5) throw SchemaError("score out of range for " + std::string(kCriteria[i]));
        c.scores[i] = v;
    }
    return c;
}

JudgeResult judge_score(Judge& judge, const AnnotationRecord& rec, const PhaseSeq& ps, const CellIndex& cells,
                        const QcOutcome& qc) {
    JudgeResult res;
    res.card.item = rec.traj_id;
    res.card.judge_id = judge.id();
    const auto raw = judge.raw_scores(rec, ps, cells, qc);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const int v = std::clamp(raw[i], 1, 5);
        if (v != raw[i]) {
            res.warnings.push_back(std::string(kCriteria[i]) + " score " + std::to_string(raw[i]) +
                                   " clamped to " + std::to_string(v));
        }
        res.card.scores[i] = v;
    }
    return res;
}

Agreement agreement_pm1(const std::vector<ScoreCard>& a, const std::vector<ScoreCard>& b) {
    if (a.size() != b.size()) throw InvalidArgument("score lists differ in length");
    if (a.empty()) throw InvalidArgument("score lists are empty");
    Agreement out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].item != b[i].item) {
            throw InvalidArgument("item ids misaligned at position " + std::to_string(i));
        }
        for (std::size_t c = 0; c < kCriteria.size(); ++c) {
            out.per_criterion[c] += std::abs(a[i].scores[c] - b[i].scores[c]) <= 1 ? 1.0 : 0.0;
        }
    }
    for (auto& v : out.per_criterion) v /= static_cast<double>(a.size());
    out.mean = std::accumulate(out.per_criterion.begin(), out.per_criterion.end(), 0.0) /
               static_cast<double>(kCriteria.size());
    return out;
}

std::vector<TrajId> select_top(const std::vector<std::pair<TrajId, ScoreCard>>& scored, std::size_t n) {
    if (n > scored.size()) throw InvalidArgument("cannot select more items than were scored");
    std::vector<std::pair<double, TrajId>> order;
    order.reserve(scored.size());
    for (const auto& [id, card] : scored) order.emplace_back(card.mean(), id);
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    std::vector<TrajId> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(order[i].second);
    return out;
}

json qc_outcome_to_json(TrajId id, const QcOutcome& qc) {
    json j;
    j["traj_id"] = id;
    json ung = json::array();
    for (const auto& m : qc.grounding.ungrounded()) {
        ung.push_back({{"field", m.field}, {"name", m.name}, {"reason", m.reason}});
    }
    j["mentions"] = qc.grounding.mentions.size();
    j["ungrounded"] = ung;
    j["diversity_pass"] = qc.diversity.pass;
    j["diversity_reasons"] = qc.diversity.reasons;
    j["hallucination"] = qc.hallucination.flagged;
    j["suspects"] = qc.hallucination.spans;
    j["degraded"] = qc.hallucination.degraded;
    return j;
}

} // namespace trajprism
