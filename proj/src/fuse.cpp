#include "trajprism/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "trajprism/error.hpp"

namespace trajprism {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Vector2d to_local(const GeoPoint& p, const GeoPoint& o) {
    const double r = kEarthRadiusKm * 1000.0;
    return {r * (p.lon - o.lon) * kDeg * std::cos(o.lat * kDeg), r * (p.lat - o.lat) * kDeg};
}

void check_finite(const Eigen::MatrixXd& m, std::string_view what, std::size_t batch) {
    if (!m.allFinite()) throw NumericFailure("non-finite " + std::string(what), batch);
}

} // namespace

std::vector<Eigen::Vector2d> resample_polyline(std::span<const GeoPoint> pts, int n) {
    if (pts.empty() || n < 1) throw InvalidArgument("resample needs points and n >= 1");
    std::vector<Eigen::Vector2d> xy;
    xy.reserve(pts.size());
    for (const auto& p : pts) xy.push_back(to_local(p, pts.front()));
    std::vector<double> cum(xy.size(), 0.0);
    for (std::size_t i = 1; i < xy.size(); ++i) cum[i] = cum[i - 1] + (xy[i] - xy[i - 1]).norm();
    const double total = cum.back();

    std::vector<Eigen::Vector2d> out;
    out.reserve(static_cast<std::size_t>(n));
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        if (total <= 0.0) {
            out.push_back(xy.front());
            continue;
        }
        const double s = n == 1 ? 0.0 : total * k / (n - 1);
        while (seg + 2 < xy.size() && cum[seg + 1] < s) ++seg;
        if (xy.size() == 1) {
            out.push_back(xy.front());
            continue;
        }
        const double len = cum[seg + 1] - cum[seg];
        const double f = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(xy[seg] + f * (xy[seg + 1] - xy[seg]));
    }
    return out;
}

Eigen::VectorXd geo_encode(const Trajectory& t, const RoadGraph& g) {
    const auto pts = trajectory_points(t, g);
    auto rs = resample_polyline(pts, kGeoSamples);
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : rs) c += p;
    c /= static_cast<double>(rs.size());
    double diam = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        for (std::size_t j = i + 1; j < rs.size(); ++j) diam = std::max(diam, (rs[i] - rs[j]).norm());
    }
    Eigen::VectorXd v(kGeoDim);
    for (std::size_t i = 0; i < rs.size(); ++i) {
        Eigen::Vector2d q = rs[i] - c;
        if (diam > 0.0) q /= diam;
        v(static_cast<Eigen::Index>(2 * i)) = q.x();
        v(static_cast<Eigen::Index>(2 * i + 1)) = q.y();
    }
    const double dur = t.time_list.empty() ? 0.0 : static_cast<double>(t.time_list.back() - t.time_list.front());
    v(kGeoDim - 1) = std::log1p(std::max(0.0, dur)) / 10.0;
    return v;
}

Eigen::VectorXd sem_encode(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg, const CellIndex& cells,
                           const Embedder& embedder) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(embedder.dim());
    int n = 0;
    for (const auto& c : visited_cells(t, g, cfg)) {
        if (!cells.contains(c)) continue;
        acc += embedder.embed(cells.grounding_text(c));
        ++n;
    }
    if (n == 0) return acc;
    const double norm = acc.norm();
    return norm > 0.0 ? Eigen::VectorXd(acc / norm) : acc;
}

Eigen::VectorXd fuse_features(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg, const CellIndex& cells,
                              const Embedder& embedder) {
    const auto geo = geo_encode(t, g);
    const auto sem = sem_encode(t, g, cfg, cells, embedder);
    Eigen::VectorXd x(geo.size() + sem.size());
    x << geo, sem;
    return x;
}

FuseParams init_params(Eigen::Index out_dim, Eigen::Index in_dim, Rng& rng) {
    if (out_dim < 1 || in_dim < 1) throw InvalidArgument("fuse dimensions must be positive");
    FuseParams p;
    const double a = 1.0 / std::sqrt(static_cast<double>(in_dim));
    p.W.resize(out_dim, in_dim);
    for (Eigen::Index r = 0; r < out_dim; ++r) {
        for (Eigen::Index c = 0; c < in_dim; ++c) p.W(r, c) = rng.uniform(-a, a);
    }
    p.b = Eigen::VectorXd::Zero(out_dim);
    p.log_tau = std::log(kInitTau);
    return p;
}

Eigen::VectorXd fuse_forward(const FuseParams& p, const Eigen::VectorXd& geo, const Eigen::VectorXd& sem) {
    Eigen::VectorXd x(geo.size() + sem.size());
    x << geo, sem;
    if (x.size() != p.W.cols()) throw InvalidArgument("feature size does not match W");
    Eigen::VectorXd z = p.W * x + p.b;
    const double n = z.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericFailure("zero or non-finite fused vector", 0);
    return z / n;
}

Eigen::MatrixXd fuse_rows(const FuseParams& p, const Eigen::MatrixXd& X) {
    if (X.cols() != p.W.cols()) throw InvalidArgument("feature size does not match W");
    Eigen::MatrixXd Z = (X * p.W.transpose()).rowwise() + p.b.transpose();
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        const double n = Z.row(i).norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw NumericFailure("zero or non-finite fused vector", static_cast<std::size_t>(i));
        Z.row(i) /= n;
    }
    return Z;
}

LossAndGrads infonce_loss_and_grads(const FuseParams& p, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& X,
                                    std::size_t batch_index) {
    const Eigen::Index B = Q.rows();
    if (B < 1 || X.rows() != B) throw InvalidArgument("query and feature batches must be the same non-zero size");
    if (Q.cols() != p.W.rows()) throw InvalidArgument("query size does not match fused size");
    if (X.cols() != p.W.cols()) throw InvalidArgument("feature size does not match W");

    Eigen::MatrixXd Z = (X * p.W.transpose()).rowwise() + p.b.transpose();
    Eigen::VectorXd norms = Z.rowwise().norm();
    for (Eigen::Index j = 0; j < B; ++j) {
        if (!(norms(j) > 0.0) || !std::isfinite(norms(j))) throw NumericFailure("zero fused vector", batch_index);
    }
    Eigen::MatrixXd U = norms.cwiseInverse().asDiagonal() * Z;
    const double tau = p.tau();
    Eigen::MatrixXd S = Q * U.transpose();
    Eigen::MatrixXd L = S / tau;

    // row softmax
    Eigen::MatrixXd P(B, B);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        const double mx = L.row(i).maxCoeff();
        Eigen::RowVectorXd e = (L.row(i).array() - mx).exp();
        const double sum = e.sum();
        P.row(i) = e / sum;
        loss += mx + std::log(sum) - L(i, i);
    }
    loss /= static_cast<double>(B);
    if (!std::isfinite(loss)) throw NumericFailure("non-finite loss", batch_index);

    Eigen::MatrixXd G = (P - Eigen::MatrixXd::Identity(B, B)) / static_cast<double>(B); // dL/dlogits
    Eigen::MatrixXd dS = G / tau;
    LossAndGrads out;
    out.loss = loss;
    out.dlog_tau = -(G.array() * S.array()).sum() / tau;

    Eigen::MatrixXd dU = dS.transpose() * Q; // row j: dL/du_j
    Eigen::MatrixXd dZ(B, Z.cols());
    for (Eigen::Index j = 0; j < B; ++j) {
        const Eigen::RowVectorXd u = U.row(j);
        const Eigen::RowVectorXd du = dU.row(j);
        dZ.row(j) = (du - du.dot(u) * u) / norms(j);
    }
    out.dW = dZ.transpose() * X;
    out.db = dZ.colwise().sum().transpose();
    check_finite(out.dW, "gradient", batch_index);
    check_finite(out.db, "gradient", batch_index);
    if (!std::isfinite(out.dlog_tau)) throw NumericFailure("non-finite gradient", batch_index);
    return out;
}

TrainResult train_fuse(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& X, const TrainConfig& cfg) {
    const auto n = static_cast<std::size_t>(Q.rows());
    if (cfg.batch < 1) throw InvalidArgument("batch size must be positive");
    if (n < cfg.batch) throw InvalidArgument("fewer training pairs than the batch size");
    if (static_cast<std::size_t>(X.rows()) != n) throw InvalidArgument("query and feature counts differ");

    Rng rng(cfg.seed);
    TrainResult res;
    res.params = init_params(Q.cols(), X.cols(), rng);
    auto& p = res.params;

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t batch_no = 0;
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double sum = 0.0;
        int batches = 0;
        for (std::size_t s = 0; s < n; s += cfg.batch) {
            const std::size_t e = std::min(n, s + cfg.batch);
            const auto bsz = static_cast<Eigen::Index>(e - s);
            Eigen::MatrixXd qb(bsz, Q.cols());
            Eigen::MatrixXd xb(bsz, X.cols());
            for (Eigen::Index r = 0; r < bsz; ++r) {
                qb.row(r) = Q.row(order[s + static_cast<std::size_t>(r)]);
                xb.row(r) = X.row(order[s + static_cast<std::size_t>(r)]);
            }
            const auto lg = infonce_loss_and_grads(p, qb, xb, batch_no++);
            p.W -= cfg.lr * lg.dW;
            p.b -= cfg.lr * lg.db;
            p.log_tau -= cfg.lr * lg.dlog_tau;
            sum += lg.loss;
            ++batches;
        }
        res.loss_curve.push_back(sum / batches);
    }
    return res;
}

FusedDb build_fused_db(const FuseParams& p, const std::vector<TrajId>& ids, const Eigen::MatrixXd& X) {
    if (static_cast<Eigen::Index>(ids.size()) != X.rows()) throw InvalidArgument("id and feature counts differ");
    return {ids, fuse_rows(p, X)};
}

std::vector<TrajId> fuse_retrieve(const Eigen::VectorXd& query, const FusedDb& db, std::size_t k) {
    if (db.size() == 0) throw InvalidState("fused database is empty");
    if (query.size() != db.vecs.cols()) throw InvalidArgument("query size does not match the database");
    const double qn = query.norm();
    const Eigen::VectorXd s = db.vecs * (qn > 0.0 ? Eigen::VectorXd(query / qn) : query);
    std::vector<std::size_t> order(db.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ia = static_cast<Eigen::Index>(a);
        const auto ib = static_cast<Eigen::Index>(b);
        if (s(ia) != s(ib)) return s(ia) > s(ib);
        return db.ids[a] < db.ids[b];
    });
    std::vector<TrajId> out;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(db.ids[order[i]]);
    return out;
}

std::vector<TrajId> fuse_retrieve(std::string_view query, const FusedDb& db, const Embedder& embedder,
                                  std::size_t k) {
    return fuse_retrieve(embedder.embed(query), db, k);
}

void save_params(const FuseParams& p, const std::filesystem::path& path) {
    ordered_json j;
    j["_schema"] = "trajprism/fuse_params";
    j["version"] = kSchemaVersion;
    j["out_dim"] = p.W.rows();
    j["in_dim"] = p.W.cols();
    j["log_tau"] = p.log_tau;
    std::vector<double> w(p.W.data(), p.W.data() + p.W.size());
    j["W_colmajor"] = w;
    j["b"] = std::vector<double>(p.b.data(), p.b.data() + p.b.size());
    write_file(path, j.dump() + "\n");
}

FuseParams load_params(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 1);
    }
    FuseParams p;
    try {
        const auto out = j.at("out_dim").get<Eigen::Index>();
        const auto in = j.at("in_dim").get<Eigen::Index>();
        const auto w = j.at("W_colmajor").get<std::vector<double>>();
        const auto b = j.at("b").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != out * in || static_cast<Eigen::Index>(b.size()) != out) {
            throw ParseError(path.string() + ": parameter sizes do not match", 1);
        }
        p.W = Eigen::Map<const Eigen::MatrixXd>(w.data(), out, in);
        p.b = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
        p.log_tau = j.at("log_tau").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 1);
    }
    return p;
}

void save_fused_db(const FusedDb& db, const std::filesystem::path& path) {
    JsonlWriter w(path, "trajprism/fused_db");
    for (std::size_t i = 0; i < db.size(); ++i) {
        const Eigen::VectorXd v = db.vecs.row(static_cast<Eigen::Index>(i)).transpose();
        ordered_json j;
        j["traj_id"] = db.ids[i];
        j["vec"] = std::vector<double>(v.data(), v.data() + v.size());
        w.write(j);
    }
}

FusedDb load_fused_db(const std::filesystem::path& path) {
    FusedDb db;
    std::vector<std::vector<double>> rows;
    read_jsonl(path, [&](std::size_t line, const json& j) {
        db.ids.push_back(j.at("traj_id").get<TrajId>());
        rows.push_back(j.at("vec").get<std::vector<double>>());
        if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
            throw ParseError(path.string() + ": inconsistent vector size", line);
        }
    });
    const auto d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    db.vecs.resize(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        db.vecs.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), d);
    }
    return db;
}

} // namespace trajprism
