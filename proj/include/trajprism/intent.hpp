#ifndef TRAJPRISM_INTENT_HPP
#define TRAJPRISM_INTENT_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "trajprism/rng.hpp"
#include "trajprism/traj.hpp"

namespace trajprism {

struct Scenario {
    std::string_view id;
    int dimension;
    std::string_view label;
};

/// The ten travel-intent scenarios across four dimensions
/// (Destination, Waypoint, Route Pref., Temporal/Pace).
inline constexpr std::array<Scenario, 10> kScenarios = {{
    {"1.1", 1, "Exact Anchor"},
    {"1.2", 1, "Fuzzy Semantic"},
    {"2.1", 2, "Strict Sequential"},
    {"2.2", 2, "Flexible / Feature"},
    {"2.3", 2, "Pass-through Zone"},
    {"3.1", 3, "Semantic Constraints"},
    {"3.2", 3, "Topological / Direct."},
    {"3.3", 3, "Orthogonal Comp."},
    {"4.1", 4, "Time-of-Day"},
    {"4.2", 4, "Pace / Duration"},
}};

inline constexpr std::array<std::string_view, 4> kDimensionNames = {
    "Destination", "Waypoint", "Route Pref.", "Temporal/Pace"};

/// Probability of drawing k = 1..5 scenarios.
inline constexpr std::array<double, 5> kScenarioCountWeights = {0.15, 0.35, 0.30, 0.15, 0.05};

const Scenario& scenario(std::string_view id);

struct IntentProfile {
    TrajId traj_id = 0;
    std::vector<std::string> scenarios; ///< distinct ids, taxonomy order
    /// Set when 3.3 co-occurs with 3.1 or 3.2.
    bool orthogonal_cooccurrence = false;

    std::size_t k() const { return scenarios.size(); }
};

/// Draws k from the count weights, one Destination scenario uniformly, and
/// k - 1 further scenarios uniformly without replacement from dimensions 2-4.
IntentProfile sample_profile(std::uint64_t seed, TrajId traj_id);

/// "1.1 + 2.2 + 3.2"
std::string scenario_label_line(const IntentProfile& p);

json profile_to_json(const IntentProfile& p);
IntentProfile profile_from_json(const json& obj);

struct StyleHint {
    std::string sentence_form;
    std::string length;
};

struct PersonaStyle {
    std::string persona;
    StyleHint literal;
    StyleHint concise;
    StyleHint chatty;
};

struct StylePools {
    std::vector<std::string> persona;
    std::vector<std::string> literal_forms;
    std::vector<std::string> concise_forms;
    std::vector<std::string> chatty_forms;
    std::vector<std::string> literal_lengths;
    std::vector<std::string> concise_lengths;
    std::vector<std::string> chatty_lengths;
};

/// Sentence-form and length pools of the style-hint table, plus a default persona list.
const StylePools& default_pools();

/// Reads `key = value` lines (a `key[]` spelling is accepted); every line
/// appends one entry to that key's pool. Keys not present keep their defaults.
StylePools load_pools(const std::filesystem::path& path);

/// Throws ConfigError when any pool is empty.
PersonaStyle sample_persona_style(Rng& rng, const StylePools& pools = default_pools());
PersonaStyle sample_persona_style(std::uint64_t seed, TrajId traj_id,
                                  const StylePools& pools = default_pools());

json persona_style_to_json(const PersonaStyle& s);
PersonaStyle persona_style_from_json(const json& obj);

/// Dimensions (1..4) each of the three retrieval queries must cover.
using RetrievalAssignment = std::array<std::vector<int>, 3>;

/// Query 1 covers Destination plus one other dimension; queries 2 and 3
/// take the remaining two, in a seeded order.
RetrievalAssignment sample_assignment(std::uint64_t seed, TrajId traj_id);

bool covers_all_dimensions(const RetrievalAssignment& a);

/// "Dim 1 Destination + Dim 2 Waypoint"
std::string assignment_label(const std::vector<int>& dims);

} // namespace trajprism

#endif // TRAJPRISM_INTENT_HPP
