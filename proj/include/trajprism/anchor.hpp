#ifndef TRAJPRISM_ANCHOR_HPP
#define TRAJPRISM_ANCHOR_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trajprism/bm25.hpp"
#include "trajprism/embed.hpp"
#include "trajprism/geo.hpp"
#include "trajprism/provider.hpp"
#include "trajprism/roadnet.hpp"
#include "trajprism/traj.hpp"

namespace trajprism {

// ---- anchor retrieval ----

struct TrainPair {
    std::string instruction;
    Trajectory traj;
};

struct IndexEntry {
    TrajId traj_id = 0;
    Eigen::VectorXd emb;
    CellId start_cell;
    GeoPoint endpoint;
    Trajectory traj;
};

struct TrajIndex {
    std::vector<IndexEntry> entries;
    Eigen::MatrixXd emb; ///< one row per entry

    bool empty() const { return entries.empty(); }
};

TrajIndex build_index(std::span<const TrainPair> train, const RoadGraph& g, const HexConfig& cfg,
                      const Embedder& embedder);

struct AnchorHit {
    std::size_t entry = 0;
    double score = 0.0;
};

struct AnchorResult {
    std::vector<AnchorHit> ranked;
    bool filter_fallback = false; ///< the start-cell filter matched nothing
};

/// Cosine top-`pool` (ties to the earlier entry). A start cell restricts the
/// pool to entries starting there; a destination hint stable-sorts the pool
/// by endpoint distance. Throws InvalidState on an empty index.
AnchorResult retrieve_anchor(std::string_view instr, const TrajIndex& idx, const Embedder& embedder,
                             std::optional<CellId> start_cell, std::optional<GeoPoint> dest_hint,
                             std::size_t pool);

// ---- constraint extraction ----

enum class PreferenceKind : std::uint8_t { Prefer, Avoid };

struct Preference {
    PreferenceKind kind = PreferenceKind::Prefer;
    std::string phrase;
    friend bool operator==(const Preference&, const Preference&) = default;
};

struct ConstraintSet {
    std::string destination;
    std::vector<std::string> waypoints;
    std::vector<Preference> preferences;
    friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

class ConstraintExtractor {
public:
    virtual ~ConstraintExtractor() = default;
    virtual ConstraintSet extract(std::string_view instr) = 0;
};

/// Cue patterns over normalized text: "to X" (after go/get/head), "via",
/// "through", "past" for waypoints, "avoid" and "staying", "along",
/// "prefer", "stick to" for preferences. Without a destination cue the
/// first short fragment is taken. Throws ExtractionFailure when nothing
/// usable remains.
class RuleExtractor final : public ConstraintExtractor {
public:
    ConstraintSet extract(std::string_view instr) override;
};

/// Asks the generator for {"destination", "waypoints", "preferences"}; any
/// provider failure or empty destination falls back to the rules.
class ProviderExtractor final : public ConstraintExtractor {
public:
    explicit ProviderExtractor(Generator& gen) : gen_(gen) {}
    ConstraintSet extract(std::string_view instr) override;

private:
    Generator& gen_;
    RuleExtractor fallback_;
};

ConstraintSet extract_constraints(ConstraintExtractor& ex, std::string_view instr);

// ---- grounding ----

struct GroundedCell {
    CellId cell;
    double score = 0.0;
    std::vector<Rid> rids;   ///< segments whose dominant cell is `cell`
    Rid representative = 0;  ///< midpoint closest to the cell center
};

/// Cell lookup by text. Only cells that carry at least one segment are
/// indexed, so every result can be routed to.
class CellGrounder {
public:
    CellGrounder(const CellIndex& cells, const RoadGraph& g, const HexConfig& cfg, const Embedder& embedder);

    std::size_t size() const { return cells_.size(); }

    /// Cosine top-k, ties by CellId order. Throws InvalidState when empty.
    std::vector<GroundedCell> ground(std::string_view phrase, std::size_t top) const;

    /// BM25 top-k over the same cell texts.
    std::vector<GroundedCell> ground_bm25(std::string_view phrase, std::size_t top) const;

    const std::vector<GroundedCell>& cells() const { return cells_; }

private:
    const Embedder& embedder_;
    std::vector<GroundedCell> cells_;
    Eigen::MatrixXd emb_;
    std::unique_ptr<Bm25Index> bm25_;
};

std::vector<GroundedCell> ground_phrase(std::string_view phrase, const CellGrounder& grounder, std::size_t top);

// ---- route generation ----

/// m rids at evenly spaced interior positions ((i + 1)(N - 1)) / (m + 1),
/// clamped to [1, N - 2], duplicates dropped.
std::vector<Rid> sample_skeleton(const Trajectory& anchor, std::size_t m);

struct RouteRequest {
    Rid start = 0;
    std::int64_t start_time = 0;
    std::vector<Rid> waypoints;       ///< grounded waypoint segments, in order
    std::vector<Rid> skeleton;
    std::vector<Rid> dest_candidates; ///< ranked; the first is routed to
    SoftWeights weights;
};

struct RoutePrediction {
    Trajectory traj;
    std::vector<std::string> diagnostics;
    bool failed = false; ///< start-only sentinel
};

inline constexpr double kSyntheticSpeedKmh = 30.0;

/// Chains start, waypoints, skeleton, destination through soft-weighted
/// Dijkstra and stamps times at constant speed.
RoutePrediction generate_route(const RoadGraph& g, const RouteRequest& req, TrajId id = 0,
                               double speed_kmh = kSyntheticSpeedKmh);

/// Entry times for a segment path at constant speed.
std::vector<std::int64_t> synth_times(const RoadGraph& g, std::span<const Rid> path, std::int64_t start_time,
                                      double speed_kmh = kSyntheticSpeedKmh);

// ---- pipelines ----

struct AnchorConfig {
    std::size_t pool = 10;
    std::size_t skeleton_m = 3;
    std::size_t dest_top = 5;
    std::size_t pref_top = 5;
    bool start_filter = true;
    bool dest_rerank = true;
    HexConfig hex{};
};

struct RouteQuery {
    TrajId id = 0;
    std::string instruction;
    Rid start = 0;
    std::int64_t start_time = 0;
};

struct PipelineOutput {
    RoutePrediction pred;
    std::vector<Trajectory> candidates; ///< one route per destination candidate, for the oracle metrics
    ConstraintSet constraints;
    std::vector<std::string> diagnostics;
};

struct AnchorContext {
    const RoadGraph& g;
    const CellGrounder& grounder;
    const TrajIndex& index;
    const Embedder& embedder;
    ConstraintExtractor& extractor;
};

/// Retrieval, extraction and grounding, then generate_route. `oracle_dest`
/// replaces the grounded destination candidates.
PipelineOutput run_trajanchor(const RouteQuery& q, const AnchorContext& ctx, const AnchorConfig& cfg,
                              std::optional<Rid> oracle_dest = std::nullopt);

enum class DestMode : std::uint8_t { Bm25, Embed };

/// Shortest path to the grounded destination.
PipelineOutput run_destsp(const RouteQuery& q, const AnchorContext& ctx, const AnchorConfig& cfg, DestMode mode);

/// DestSP plus grounded waypoints, no skeleton and no soft preferences.
PipelineOutput run_constrsp(const RouteQuery& q, const AnchorContext& ctx, const AnchorConfig& cfg);

json prediction_to_json(const PipelineOutput& out);

} // namespace trajprism

#endif // TRAJPRISM_ANCHOR_HPP
