#include "trajprism/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "trajprism/error.hpp"
#include "trajprism/jsonl.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kEarthRadiusM = kEarthRadiusKm * 1000.0;
const double kSqrt3 = std::sqrt(3.0);

double wrap_lon(double lon) {
    double x = std::fmod(lon + 180.0, 360.0);
    if (x < 0) x += 360.0;
    return x - 180.0;
}

void check_finite(const GeoPoint& p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) {
        throw InvalidArgument("non-finite coordinate");
    }
}

struct Planar {
    double east;
    double north;
};

Planar project(const GeoPoint& p, const HexConfig& cfg) {
    check_finite(p);
    if (haversine_km(cfg.origin, p) > kProjectionRadiusKm) {
        throw ProjectionDomainError("point (" + std::to_string(p.lat) + ", " +
                                    std::to_string(p.lon) + ") is beyond " +
                                    std::to_string(kProjectionRadiusKm) +
                                    " km of the projection origin");
    }
    const double dlon = wrap_lon(p.lon - cfg.origin.lon);
    return {kEarthRadiusM * dlon * kDegToRad * std::cos(cfg.origin.lat * kDegToRad),
            kEarthRadiusM * (p.lat - cfg.origin.lat) * kDegToRad};
}

Planar hex_center_planar(const CellId& c, double size) {
    return {size * kSqrt3 * (c.q + 0.5 * c.r), -size * 1.5 * c.r};
}

} // namespace

GeoPoint make_point(double lat, double lon) {
    GeoPoint p{lat, lon};
    check_finite(p);
    if (lat < -90.0 || lat > 90.0) {
        throw InvalidArgument("latitude out of range: " + std::to_string(lat));
    }
    p.lon = wrap_lon(lon);
    return p;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    check_finite(a);
    check_finite(b);
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2);
    const double s2 = std::sin(dlambda / 2);
    const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double bearing_deg(const GeoPoint& a, const GeoPoint& b) {
    check_finite(a);
    check_finite(b);
    if (a == b) {
        throw DegenerateBearing("bearing of coincident points is undefined");
    }
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double y = std::sin(dlambda) * std::cos(phi2);
    const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
    double deg = std::atan2(y, x) * kRadToDeg;
    deg = std::fmod(deg + 360.0, 360.0);
    return deg >= 360.0 ? 0.0 : deg;
}

GeoPoint midpoint(const GeoPoint& a, const GeoPoint& b) {
    const double dlon = wrap_lon(b.lon - a.lon);
    return GeoPoint{(a.lat + b.lat) / 2.0, wrap_lon(a.lon + dlon / 2.0)};
}

Compass compass8(double bearing) {
    double b = std::fmod(bearing, 360.0);
    if (b < 0) b += 360.0;
    const auto sector = static_cast<int>(std::floor((b + 22.5) / 45.0)) % 8;
    return static_cast<Compass>(sector);
}

std::string_view to_string(Compass c) {
    static constexpr std::array<std::string_view, 8> names = {"N", "NE", "E", "SE",
                                                              "S", "SW", "W", "NW"};
    return names[static_cast<std::size_t>(c)];
}

Compass opposite(Compass c) {
    return static_cast<Compass>((static_cast<int>(c) + 4) % 8);
}

std::optional<Compass> parse_compass(std::string_view s) {
    for (int i = 0; i < 8; ++i) {
        if (to_string(static_cast<Compass>(i)) == s) {
            return static_cast<Compass>(i);
        }
    }
    return std::nullopt;
}

std::string to_string(const CellId& c) {
    return "(" + std::to_string(c.q) + "," + std::to_string(c.r) + ")";
}

CellId cell_of(const GeoPoint& p, const HexConfig& cfg) {
    if (!(cfg.edge_m > 0.0)) {
        throw InvalidArgument("hex edge length must be positive");
    }
    const Planar xy = project(p, cfg);
    const double size = cfg.edge_m;
    const double rf = -xy.north / (1.5 * size);
    const double qf = xy.east / (kSqrt3 * size) - rf / 2.0;
    const double sf = -qf - rf;

    double rq = std::round(qf);
    double rr = std::round(rf);
    const double rs = std::round(sf);
    const double dq = std::abs(rq - qf);
    const double dr = std::abs(rr - rf);
    const double ds = std::abs(rs - sf);
    if (dq > dr && dq > ds) {
        rq = -rr - rs;
    } else if (dr > ds) {
        rr = -rq - rs;
    }
    const CellId rounded{static_cast<std::int32_t>(rq), static_cast<std::int32_t>(rr)};

    // The nearest center is the rounded cell or one of its neighbors; an
    // explicit comparison makes boundary ties resolve to the smaller id.
    CellId best = rounded;
    auto dist2 = [&](const CellId& c) {
        const Planar ctr = hex_center_planar(c, size);
        const double de = ctr.east - xy.east;
        const double dn = ctr.north - xy.north;
        return de * de + dn * dn;
    };
    double best_d = dist2(rounded);
    for (const CellId& n : cell_neighbors(rounded)) {
        const double d = dist2(n);
        if (d < best_d || (d == best_d && n < best)) {
            best = n;
            best_d = d;
        }
    }
    return best;
}

GeoPoint cell_center(const CellId& c, const HexConfig& cfg) {
    const Planar xy = hex_center_planar(c, cfg.edge_m);
    const double lat = cfg.origin.lat + xy.north / kEarthRadiusM * kRadToDeg;
    const double lon =
        cfg.origin.lon + xy.east / (kEarthRadiusM * std::cos(cfg.origin.lat * kDegToRad)) * kRadToDeg;
    return GeoPoint{lat, wrap_lon(lon)};
}

std::array<CellId, 6> cell_neighbors(const CellId& c) {
    return {CellId{c.q + 1, c.r},     CellId{c.q + 1, c.r - 1}, CellId{c.q, c.r - 1},
            CellId{c.q - 1, c.r},     CellId{c.q - 1, c.r + 1}, CellId{c.q, c.r + 1}};
}

int cell_distance(const CellId& a, const CellId& b) {
    const int dq = a.q - b.q;
    const int dr = a.r - b.r;
    return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

// --- CellIndex -------------------------------------------------------------

void CellIndex::insert(CellId cell, std::string description,
                       const std::vector<std::string>& poi_names,
                       const std::vector<std::string>& road_names, std::string district) {
    CellMeta meta;
    meta.cell = cell;
    meta.description = std::move(description);
    meta.district = std::move(district);
    meta.neighbors = cell_neighbors(cell);
    auto& pois = display_pois_[cell];
    auto& roads = display_roads_[cell];
    pois.clear();
    roads.clear();
    for (const auto& n : poi_names) {
        auto key = normalize_name(n);
        if (key.empty()) continue;
        display_.emplace(key, trim(n));
        if (meta.poi_names.insert(key).second) pois.push_back(trim(n));
    }
    for (const auto& n : road_names) {
        auto key = normalize_name(n);
        if (key.empty()) continue;
        display_.emplace(key, trim(n));
        if (meta.road_names.insert(key).second) roads.push_back(trim(n));
    }
    if (!meta.district.empty()) {
        display_.emplace(normalize_name(meta.district), meta.district);
    }
    cells_[cell] = std::move(meta);
}

const CellMeta* CellIndex::find(const CellId& c) const {
    auto it = cells_.find(c);
    return it == cells_.end() ? nullptr : &it->second;
}

const std::string& CellIndex::display(const std::string& normalized) const {
    auto it = display_.find(normalized);
    return it == display_.end() ? normalized : it->second;
}

std::set<std::string> CellIndex::gazetteer() const {
    std::set<std::string> out;
    for (const auto& [id, meta] : cells_) {
        out.insert(meta.poi_names.begin(), meta.poi_names.end());
        out.insert(meta.road_names.begin(), meta.road_names.end());
        if (!meta.district.empty()) out.insert(normalize_name(meta.district));
    }
    return out;
}

std::set<std::string> CellIndex::gazetteer_of(const std::vector<CellId>& cells) const {
    std::set<std::string> out;
    for (const auto& c : cells) {
        if (const CellMeta* m = find(c)) {
            out.insert(m->poi_names.begin(), m->poi_names.end());
            out.insert(m->road_names.begin(), m->road_names.end());
        }
    }
    return out;
}

std::string CellIndex::grounding_text(const CellId& c) const {
    const CellMeta* m = find(c);
    if (m == nullptr) return {};
    std::string text = m->description;
    auto append = [&](const std::vector<std::string>& names) {
        for (const auto& n : names) {
            text += text.empty() ? "" : " | ";
            text += n;
        }
    };
    if (auto it = display_pois_.find(c); it != display_pois_.end()) append(it->second);
    if (auto it = display_roads_.find(c); it != display_roads_.end()) append(it->second);
    return text;
}

CellIndex CellIndex::load(const std::filesystem::path& path) {
    CellIndex idx;
    read_jsonl(path, [&](std::size_t line, const json& obj) {
        if (!obj.contains("cell_q") || !obj.contains("cell_r")) {
            throw ParseError("cell record missing cell_q/cell_r", line);
        }
        const CellId id{obj.at("cell_q").get<std::int32_t>(), obj.at("cell_r").get<std::int32_t>()};
        idx.insert(id, obj.value("description", std::string{}),
                   obj.value("poi_names", std::vector<std::string>{}),
                   obj.value("road_names", std::vector<std::string>{}),
                   obj.value("district", std::string{}));
    });
    return idx;
}

void CellIndex::save(const std::filesystem::path& path) const {
    JsonlWriter out(path, "trajprism/cells");
    for (const auto& [id, meta] : cells_) {
        ordered_json obj;
        obj["cell_q"] = id.q;
        obj["cell_r"] = id.r;
        obj["description"] = meta.description;
        auto pois = display_pois_.find(id);
        auto roads = display_roads_.find(id);
        obj["poi_names"] = pois == display_pois_.end() ? std::vector<std::string>{} : pois->second;
        obj["road_names"] = roads == display_roads_.end() ? std::vector<std::string>{} : roads->second;
        obj["district"] = meta.district;
        out.write(obj);
    }
}

} // namespace trajprism
