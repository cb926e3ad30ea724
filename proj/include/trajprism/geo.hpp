#ifndef TRAJPRISM_GEO_HPP
#define TRAJPRISM_GEO_HPP

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace trajprism {

inline constexpr double kEarthRadiusKm = 6371.0088;

/// WGS84 position in degrees. Construct through make_point() to get the
/// finiteness check and longitude normalization into [-180, 180).
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

GeoPoint make_point(double lat, double lon);

double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Initial great-circle bearing from a to b, in [0, 360).
double bearing_deg(const GeoPoint& a, const GeoPoint& b);

/// Arithmetic midpoint in lat/lon; adequate at road-segment scale.
GeoPoint midpoint(const GeoPoint& a, const GeoPoint& b);

enum class Compass : std::uint8_t { N, NE, E, SE, S, SW, W, NW };

Compass compass8(double bearing);
std::string_view to_string(Compass c);
Compass opposite(Compass c);
std::optional<Compass> parse_compass(std::string_view s);

/// Axial coordinate of a pointy-top hexagon.
struct CellId {
    std::int32_t q = 0;
    std::int32_t r = 0;

    friend auto operator<=>(const CellId&, const CellId&) = default;
};

std::string to_string(const CellId& c);

struct HexConfig {
    GeoPoint origin{};
    double edge_m = 174.0;
};

/// Maximum distance from the projection origin that cell_of accepts.
inline constexpr double kProjectionRadiusKm = 200.0;

CellId cell_of(const GeoPoint& p, const HexConfig& cfg);
GeoPoint cell_center(const CellId& c, const HexConfig& cfg);

/// Neighbors in the fixed order E, NE, NW, W, SW, SE.
std::array<CellId, 6> cell_neighbors(const CellId& c);

/// Grid distance in cells.
int cell_distance(const CellId& a, const CellId& b);

struct CellMeta {
    CellId cell;
    std::string description;
    std::set<std::string> poi_names;  // normalized
    std::set<std::string> road_names; // normalized
    std::string district;
    std::array<CellId, 6> neighbors{};
};

/// Cell metadata keyed by CellId. The name sets are stored normalized;
/// display spellings are kept alongside for text generation.
class CellIndex {
public:
    CellIndex() = default;

    void insert(CellId cell, std::string description, const std::vector<std::string>& poi_names,
                const std::vector<std::string>& road_names, std::string district);

    const CellMeta* find(const CellId& c) const;
    bool contains(const CellId& c) const { return cells_.count(c) != 0; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    const std::map<CellId, CellMeta>& cells() const { return cells_; }

    /// Display spelling of a normalized name, or the key itself if unknown.
    const std::string& display(const std::string& normalized) const;

    /// Every normalized POI, road, and district name across all cells.
    std::set<std::string> gazetteer() const;

    /// Normalized POI and road names of the given cells.
    std::set<std::string> gazetteer_of(const std::vector<CellId>& cells) const;

    /// Description plus names, the text that grounding and semantic
    /// encoding embed for a cell.
    std::string grounding_text(const CellId& c) const;

    static CellIndex load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::map<CellId, CellMeta> cells_;
    std::map<std::string, std::string> display_;
    std::map<CellId, std::vector<std::string>> display_pois_;
    std::map<CellId, std::vector<std::string>> display_roads_;
};

} // namespace trajprism

template <>
struct std::hash<trajprism::CellId> {
    std::size_t operator()(const trajprism::CellId& c) const noexcept {
        return std::hash<std::uint64_t>{}((std::uint64_t(std::uint32_t(c.q)) << 32) |
                                          std::uint32_t(c.r));
    }
};

#endif // TRAJPRISM_GEO_HPP
