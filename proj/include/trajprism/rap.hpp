#ifndef TRAJPRISM_RAP_HPP
#define TRAJPRISM_RAP_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trajprism/embed.hpp"
#include "trajprism/geo.hpp"
#include "trajprism/provider.hpp"
#include "trajprism/roadnet.hpp"
#include "trajprism/traj.hpp"

namespace trajprism {

/// Text a trajectory is indexed under: its structural features with road
/// names, then the description of every visited cell.
std::string trajectory_text(const Trajectory& t, const RoadGraph& g, const CellIndex& cells, const HexConfig& cfg);

struct CaptionPair {
    Trajectory traj;
    std::string caption;
};

struct CaptionIndex {
    std::vector<TrajId> ids;
    std::vector<std::string> captions;
    Eigen::MatrixXd emb; ///< one row per entry

    std::size_t size() const { return ids.size(); }
};

CaptionIndex build_caption_index(std::span<const CaptionPair> train, const RoadGraph& g, const CellIndex& cells,
                                 const HexConfig& cfg, const Embedder& embedder);

struct CaptionExample {
    TrajId traj_id = 0;
    std::string caption;
    double similarity = 0.0;
};

inline constexpr std::size_t kDefaultShots = 3;

/// Cosine top-k, ties to the smaller traj id. An entry with the query's own
/// id is skipped.
std::vector<CaptionExample> retrieve_examples(const Trajectory& t, const RoadGraph& g, const CellIndex& cells,
                                              const HexConfig& cfg, const CaptionIndex& idx,
                                              const Embedder& embedder, std::size_t k = kDefaultShots);

enum class CaptionMode : std::uint8_t { Struct, Sem, Rap };

std::string_view to_string(CaptionMode m);
CaptionMode parse_caption_mode(std::string_view s);

const std::string& caption_system_prompt();

/// Struct sees turns, timing and coordinates only. Sem adds road names and
/// cell descriptions, rap adds the example captions. Rap without examples
/// throws InvalidArgument.
PromptBundle assemble_caption_prompt(const Trajectory& t, const RoadGraph& g, const CellIndex& cells,
                                     const HexConfig& cfg, std::span<const CaptionExample> examples,
                                     CaptionMode mode);

/// Punctuation-sanitized, trimmed reply. Empty output raises ProviderError.
std::string caption(Generator& gen, const PromptBundle& p);

} // namespace trajprism

#endif // TRAJPRISM_RAP_HPP
