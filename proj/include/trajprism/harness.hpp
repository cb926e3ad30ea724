#ifndef TRAJPRISM_HARNESS_HPP
#define TRAJPRISM_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "trajprism/anchor.hpp"
#include "trajprism/annotate.hpp"
#include "trajprism/fuse.hpp"
#include "trajprism/intent.hpp"
#include "trajprism/metrics.hpp"
#include "trajprism/rap.hpp"

namespace trajprism {

// ---- splits ----

struct SplitSpec {
    double train = 0.70;
    double val = 0.10;
    double test = 0.20;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<TrajId> train;
    std::vector<TrajId> val;
    std::vector<TrajId> test;
};

/// Seeded shuffle, then contiguous cuts of floor(train * n) and
/// floor(val * n); the rest is test.
Split split_ids(std::vector<TrajId> ids, const SplitSpec& spec);

ordered_json split_to_json(const Split& s);
Split split_from_json(const json& obj);

// ---- city bundle ----

struct CityBundle {
    HexConfig hex{};
    RoadGraph g;
    CellIndex cells;
    std::vector<Trajectory> trajs;
    std::vector<AnnotationRecord> annotations; ///< may be empty before annotation
    ordered_json config = ordered_json::object();

    const Trajectory& traj(TrajId id) const;
    const AnnotationRecord& annotation(TrajId id) const;
};

/// roadnet.jsonl, cells.jsonl, trajectories.jsonl, annotations.jsonl and config.json.
void save_bundle(const CityBundle& b, const std::filesystem::path& dir);

/// Reads a bundle back and checks every trajectory rid resolves.
CityBundle load_bundle(const std::filesystem::path& dir);

HexConfig hex_from_json(const json& obj);
ordered_json hex_to_json(const HexConfig& h);

struct SynthConfig {
    int n = 5;                 ///< intersections per side
    std::uint64_t seed = 0;
    std::size_t n_traj = 100;
    double block_m = 300.0;
    std::size_t min_len = 8;
    std::size_t max_len = 16;
    bool annotate = true;      ///< run the default annotation pipeline
    HexConfig hex{{41.15, -8.62}, 174.0};
};

/// Grid city with two-way named streets, a labelled cell gazetteer in four
/// districts, and random-walk trips timestamped in 2014.
CityBundle synth_city(const SynthConfig& cfg);

// ---- annotation pipeline ----

struct IntentPlan {
    IntentProfile profile;
    PersonaStyle style;
    RetrievalAssignment assignment;
};

IntentPlan plan_intents(std::uint64_t seed, TrajId id);
ordered_json intent_plan_to_json(const IntentPlan& p);
IntentPlan intent_plan_from_json(const json& obj);

std::vector<PhaseSeq> compress_all(const CityBundle& b, int jobs = 1);

/// One record per trajectory, in trajectory order.
std::vector<AnnotationRecord> annotate_all(const std::vector<PhaseSeq>& phases, const std::vector<IntentPlan>& plans,
                                           Generator& gen, int jobs = 1);

struct QcResult {
    std::vector<AnnotationRecord> records; ///< terminology- and punctuation-sanitized
    std::vector<QcOutcome> outcomes;
};

QcResult qc_all(Judge& judge, const std::vector<AnnotationRecord>& records, const std::vector<PhaseSeq>& phases,
                const CellIndex& cells, int jobs = 1);

std::vector<JudgeResult> judge_all(Judge& judge, const QcResult& qc, const std::vector<PhaseSeq>& phases,
                                   const CellIndex& cells, int jobs = 1);

// ---- benchmark ----

struct BenchConfig {
    std::uint64_t seed = 0;
    SplitSpec split{};
    AnchorConfig anchor{};
    TrainConfig fuse{};
    std::size_t shots = kDefaultShots;
    Eigen::Index embed_dim = 256;
    int jobs = 1;
    JaccardAggregate j_at_k = JaccardAggregate::Max;
    double edr_eps_km = kEdrEpsKm;
};

/// Overrides from a JSON object with optional "seed", "split", "anchor",
/// "fuse", "shots", "embed_dim", "jobs", "edr_eps_km" and "j_at_k" ("max" or
/// "mean") entries. Unknown keys raise ConfigError.
void apply_bench_config(const json& obj, BenchConfig& cfg);

inline constexpr std::array<std::string_view, 6> kRouteMethods = {"trajanchor", "trajanchor-oracle", "destsp-bm25",
                                                                  "destsp-embed", "constrsp", "echo"};
inline constexpr std::array<std::string_view, 3> kRetrievalMethods = {"trajfuse", "embed", "oracle"};
inline constexpr std::array<std::string_view, 4> kCaptionMethods = {"struct", "sem", "rap", "echo"};

inline constexpr std::array<std::string_view, 3> kInstructionStyles = {"literal", "concise", "chatty"};

/// Dimensions a retrieval query covers, read from "Query q covers Dim a and
/// Dim b." in the retrieval planning text.
std::vector<int> query_dimensions(const AnnotationRecord& rec, int query);

struct BenchmarkResult {
    ordered_json report;
    std::string csv; ///< figure data
};

/// Task 1 cases in (test trajectory, style) order, with the style and the
/// pipeline diagnostics of each.
std::vector<RouteCase> route_cases(const CityBundle& b, const Split& split, std::string_view method,
                                   const BenchConfig& cfg, std::vector<std::string>* styles = nullptr,
                                   std::vector<std::vector<std::string>>* diagnostics = nullptr);

/// Splits the bundle, runs one method and scores it. Throws
/// InvalidArgument for an unknown task or method.
BenchmarkResult run_benchmark(const CityBundle& b, int task, std::string_view method, const BenchConfig& cfg);

/// Re-derives the CSV figure data from a report.
std::string figure_data(const json& report);

} // namespace trajprism

#endif // TRAJPRISM_HARNESS_HPP
