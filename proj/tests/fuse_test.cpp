#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>

#include "trajprism/error.hpp"
#include "trajprism/fuse.hpp"
#include "test_support.hpp"

using namespace trajprism;
using trajprism::testing::lattice_graph;

namespace {

const HexConfig kHex{{41.15, -8.62}, 174.0};

Eigen::MatrixXd unit_rows(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
        m.row(i).normalize();
    }
    return m;
}

Eigen::MatrixXd random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    }
    return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

std::vector<GeoPoint> shift(const std::vector<GeoPoint>& pts, double dlat, double dlon) {
    std::vector<GeoPoint> out;
    for (auto p : pts) out.push_back({p.lat + dlat, p.lon + dlon});
    return out;
}

// 2D rotation acting on each consecutive coordinate pair.
Eigen::MatrixXd pairwise_rotation(Eigen::Index d, double angle) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i + 1 < d; i += 2) {
        r(i, i) = std::cos(angle);
        r(i, i + 1) = -std::sin(angle);
        r(i + 1, i) = std::sin(angle);
        r(i + 1, i + 1) = std::cos(angle);
    }
    return r;
}

} // namespace

// ---- geo encoder ----

TEST(Resample, MatchesDensePolyline) {
    const std::vector<GeoPoint> pts = {{41.15, -8.62}, {41.151, -8.62}, {41.151, -8.618}, {41.153, -8.6175}};
    const auto rs = resample_polyline(pts, 16);
    ASSERT_EQ(rs.size(), 16u);

    // oracle: densify each leg in local meters, then take the dense point
    // whose running length is closest to each target
    const double r = kEarthRadiusKm * 1000.0, k = std::numbers::pi / 180.0;
    std::vector<Eigen::Vector2d> xy;
    for (const auto& p : pts) {
        xy.emplace_back(r * (p.lon - pts[0].lon) * k * std::cos(pts[0].lat * k), r * (p.lat - pts[0].lat) * k);
    }
    std::vector<Eigen::Vector2d> dense{xy[0]};
    std::vector<double> run{0.0};
    for (std::size_t i = 1; i < xy.size(); ++i) {
        for (int s = 1; s <= 2000; ++s) {
            dense.push_back(xy[i - 1] + (xy[i] - xy[i - 1]) * (s / 2000.0));
            run.push_back(run.back() + (dense.back() - dense[dense.size() - 2]).norm());
        }
    }
    for (int j = 0; j < 16; ++j) {
        const double target = run.back() * j / 15.0;
        std::size_t best = 0;
        for (std::size_t d = 0; d < run.size(); ++d) {
            if (std::abs(run[d] - target) < std::abs(run[best] - target)) best = d;
        }
        EXPECT_LT((rs[static_cast<std::size_t>(j)] - dense[best]).norm(), 0.2) << j;
    }
    EXPECT_NEAR(rs.front().norm(), 0.0, 1e-9);
    double step0 = (rs[1] - rs[0]).norm();
    for (int k = 1; k + 1 < 16; ++k) {
        // equal arc spacing, chord can only shrink at corners
        EXPECT_LE((rs[k + 1] - rs[k]).norm(), step0 + 1e-6);
    }
}

TEST(Resample, DegenerateInputs) {
    const std::vector<GeoPoint> one = {{41.15, -8.62}};
    for (const auto& p : resample_polyline(one, 4)) EXPECT_EQ(p.norm(), 0.0);
    const std::vector<GeoPoint> same = {{41.15, -8.62}, {41.15, -8.62}};
    for (const auto& p : resample_polyline(same, 4)) EXPECT_EQ(p.norm(), 0.0);
    EXPECT_THROW(resample_polyline({}, 4), InvalidArgument);
}

TEST(GeoEncode, ShapeIsTranslationAndScaleFree) {
    Rng rng(1);
    const RoadGraph g = lattice_graph(4, rng, 100.0, 100.0);
    Trajectory t{1, {0, 1, 2, 3}, {0, 10, 20, 30}};
    const Eigen::VectorXd v = geo_encode(t, g);
    ASSERT_EQ(v.size(), kGeoDim);
    EXPECT_NEAR(v(kGeoDim - 1), std::log1p(30.0) / 10.0, 1e-12);

    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    double diam = 0.0;
    for (int i = 0; i < kGeoSamples; ++i) centroid += v.segment<2>(2 * i);
    for (int i = 0; i < kGeoSamples; ++i) {
        for (int j = 0; j < kGeoSamples; ++j) diam = std::max(diam, (v.segment<2>(2 * i) - v.segment<2>(2 * j)).norm());
    }
    EXPECT_NEAR(centroid.norm(), 0.0, 1e-9);
    EXPECT_NEAR(diam, 1.0, 1e-9);

    // the same shape shifted a few hundred meters encodes the same way
    const auto pts = trajectory_points(t, g);
    const auto a = resample_polyline(pts, kGeoSamples);
    const auto b = resample_polyline(shift(pts, 0.003, 0.004), kGeoSamples);
    for (int i = 0; i < kGeoSamples; ++i) EXPECT_LT((a[i] - b[i]).norm(), 0.05);
}

// ---- sem encoder ----

TEST(SemEncode, SingleCellAndMissingMetadata) {
    Rng rng(2);
    const RoadGraph g = lattice_graph(4, rng, 100.0, 100.0);
    HashEmbedder emb(64, 3);
    Trajectory t{1, {0}, {0}};
    const CellId c = dominant_cell(g.segment(0), kHex);

    CellIndex none;
    EXPECT_EQ(sem_encode(t, g, kHex, none, emb).norm(), 0.0);

    CellIndex cells;
    cells.insert(c, "GNN: PARK | Narrative: Lawns. | POIs: Fonte | District: Norte", {"Fonte"}, {}, "Norte");
    const Eigen::VectorXd v = sem_encode(t, g, kHex, cells, emb);
    EXPECT_NEAR((v - emb.embed(cells.grounding_text(c))).norm(), 0.0, 1e-12);
}

// ---- forward ----

TEST(FuseForward, UnitNormAndZeroThrows) {
    Rng rng(4);
    FuseParams p = init_params(8, kGeoDim + 5, rng);
    EXPECT_EQ(p.b, Eigen::VectorXd::Zero(8));
    EXPECT_NEAR(p.tau(), 0.07, 1e-12);
    EXPECT_LE(p.W.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(static_cast<double>(kGeoDim + 5)));

    const Eigen::VectorXd geo = Eigen::VectorXd::Random(kGeoDim);
    const Eigen::VectorXd sem = Eigen::VectorXd::Random(5);
    EXPECT_NEAR(fuse_forward(p, geo, sem).norm(), 1.0, 1e-12);
    EXPECT_THROW(fuse_forward(p, Eigen::VectorXd::Zero(kGeoDim), Eigen::VectorXd::Zero(5)), NumericFailure);
    EXPECT_THROW(fuse_forward(p, geo, Eigen::VectorXd::Zero(4)), InvalidArgument);
}

// ---- loss and gradients ----

TEST(InfoNce, GradientsMatchFiniteDifferences) {
    Rng rng(5);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index B = 1 + static_cast<Eigen::Index>(rng.below(8));
        const Eigen::Index out = 4 + static_cast<Eigen::Index>(rng.below(4));
        const Eigen::Index in = 3 + static_cast<Eigen::Index>(rng.below(6));
        FuseParams p = init_params(out, in, rng);
        p.b = random_mat(out, 1, rng).col(0) * 0.1;
        p.log_tau = std::log(rng.uniform(0.2, 1.0));
        const Eigen::MatrixXd Q = unit_rows(B, out, rng);
        const Eigen::MatrixXd X = random_mat(B, in, rng);
        const LossAndGrads g = infonce_loss_and_grads(p, Q, X);

        auto loss_at = [&](FuseParams q) { return infonce_loss_and_grads(q, Q, X).loss; };
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c) {
                FuseParams a = p, b = p;
                a.W(r, c) += h;
                b.W(r, c) -= h;
                const double num = (loss_at(a) - loss_at(b)) / (2 * h);
                if (std::abs(num) + std::abs(g.dW(r, c)) > 1e-7) worst = std::max(worst, rel_err(num, g.dW(r, c)));
                else EXPECT_NEAR(num, g.dW(r, c), 1e-9);
            }
            FuseParams a = p, b = p;
            a.b(r) += h;
            b.b(r) -= h;
            const double num = (loss_at(a) - loss_at(b)) / (2 * h);
            if (std::abs(num) + std::abs(g.db(r)) > 1e-7) worst = std::max(worst, rel_err(num, g.db(r)));
            else EXPECT_NEAR(num, g.db(r), 1e-9);
        }
        FuseParams a = p, b = p;
        a.log_tau += h;
        b.log_tau -= h;
        const double num = (loss_at(a) - loss_at(b)) / (2 * h);
        if (std::abs(num) + std::abs(g.dlog_tau) > 1e-7) worst = std::max(worst, rel_err(num, g.dlog_tau));
        else EXPECT_NEAR(num, g.dlog_tau, 1e-9);
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(InfoNce, SinglePairHasZeroLossAndGradient) {
    Rng rng(6);
    const FuseParams p = init_params(5, 7, rng);
    const LossAndGrads g = infonce_loss_and_grads(p, unit_rows(1, 5, rng), random_mat(1, 7, rng));
    EXPECT_NEAR(g.loss, 0.0, 1e-12);
    EXPECT_NEAR(g.dW.norm(), 0.0, 1e-12);
    EXPECT_NEAR(g.db.norm(), 0.0, 1e-12);
    EXPECT_NEAR(g.dlog_tau, 0.0, 1e-12);
}

TEST(InfoNce, IdenticalFusedVectorsGiveLogB) {
    Rng rng(7);
    const FuseParams p = init_params(5, 7, rng);
    for (Eigen::Index B : {2, 3, 8}) {
        const Eigen::MatrixXd X = random_mat(1, 7, rng).replicate(B, 1);
        const LossAndGrads g = infonce_loss_and_grads(p, unit_rows(B, 5, rng), X);
        EXPECT_NEAR(g.loss, std::log(static_cast<double>(B)), 1e-12);
    }
}

TEST(InfoNce, RotationInvariant) {
    Rng rng(8);
    FuseParams p = init_params(6, 9, rng);
    const Eigen::MatrixXd Q = unit_rows(5, 6, rng);
    const Eigen::MatrixXd X = random_mat(5, 9, rng);
    const Eigen::MatrixXd R = pairwise_rotation(6, 0.7);
    FuseParams rotated = p;
    rotated.W = R * p.W;
    rotated.b = R * p.b;
    EXPECT_NEAR(infonce_loss_and_grads(p, Q, X).loss, infonce_loss_and_grads(rotated, Q * R.transpose(), X).loss, 1e-12);
}

TEST(InfoNce, ShapeMismatchesThrow) {
    Rng rng(9);
    const FuseParams p = init_params(5, 7, rng);
    EXPECT_THROW(infonce_loss_and_grads(p, unit_rows(2, 5, rng), random_mat(3, 7, rng)), InvalidArgument);
    EXPECT_THROW(infonce_loss_and_grads(p, unit_rows(2, 4, rng), random_mat(2, 7, rng)), InvalidArgument);
    EXPECT_THROW(infonce_loss_and_grads(p, unit_rows(0, 5, rng), random_mat(0, 7, rng)), InvalidArgument);
}

TEST(InfoNce, NumericFailureCarriesBatchIndex) {
    Rng rng(10);
    FuseParams p = init_params(5, 7, rng);
    p.W(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        infonce_loss_and_grads(p, unit_rows(2, 5, rng), random_mat(2, 7, rng), 17);
        FAIL() << "expected NumericFailure";
    } catch (const NumericFailure& e) {
        EXPECT_EQ(e.batch_index(), 17u);
    }
}

// ---- training ----

namespace {

const std::vector<std::string> kWords = {"amber", "birch", "cedar", "delta", "ember", "fjord", "grove", "harbor",
                                         "iris",  "jasper", "kestrel", "lotus", "maple", "nectar", "onyx", "poplar"};

struct Toy {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd X;
    std::vector<TrajId> ids;
};

// Queries name a place; the semantic half of the features embeds a longer
// description of the same place, the geometric half is noise.
Toy make_toy(std::size_t n, const Embedder& emb, Rng& rng) {
    Toy t;
    t.Q.resize(static_cast<Eigen::Index>(n), emb.dim());
    t.X.resize(static_cast<Eigen::Index>(n), kGeoDim + emb.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const std::string a = kWords[i % 16], b = kWords[(i / 16 + i) % 16];
        const std::string place = a + " " + b + " " + kWords[(i / 16) % 16] + "s";
        const auto r = static_cast<Eigen::Index>(i);
        t.Q.row(r) = emb.embed("take me to the " + place).transpose();
        t.X.row(r).head(kGeoDim) = random_mat(1, kGeoDim, rng) * 0.3;
        t.X.row(r).tail(emb.dim()) = emb.embed(place + " hall | District: D" + std::to_string(i % 4)).transpose();
        t.ids.push_back(static_cast<TrajId>(i));
    }
    return t;
}

double recall_at_1(const FuseParams& p, const Toy& t) {
    const FusedDb db = build_fused_db(p, t.ids, t.X);
    int hit = 0;
    for (Eigen::Index i = 0; i < t.Q.rows(); ++i) {
        hit += fuse_retrieve(Eigen::VectorXd(t.Q.row(i).transpose()), db, 1).front() == t.ids[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(hit) / static_cast<double>(t.Q.rows());
}

} // namespace

TEST(Train, ToySetReachesHighRecall) {
    HashEmbedder emb(128, 11);
    Rng rng(12);
    const Toy toy = make_toy(200, emb, rng);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 32;
    cfg.seed = 13;
    Rng init_rng(cfg.seed);
    const double before = recall_at_1(init_params(toy.Q.cols(), toy.X.cols(), init_rng), toy);
    const TrainResult r = train_fuse(toy.Q, toy.X, cfg);
    ASSERT_EQ(r.loss_curve.size(), 50u);
    std::cout << "R@1 untrained " << before << ", trained " << recall_at_1(r.params, toy) << "\n";
    EXPECT_LT(before, 0.5);
    EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
    EXPECT_GE(recall_at_1(r.params, toy), 0.9);
}

TEST(Train, LossNonIncreasingOnSeparableSet) {
    HashEmbedder emb(64, 14);
    Rng rng(15);
    const Toy toy = make_toy(64, emb, rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch = 64; // full batch, so the curve tracks the true loss
    cfg.lr = 0.05;
    cfg.seed = 16;
    const TrainResult r = train_fuse(toy.Q, toy.X, cfg);
    for (std::size_t e = 1; e < r.loss_curve.size(); ++e) EXPECT_LE(r.loss_curve[e], r.loss_curve[e - 1] + 1e-12) << e;
}

TEST(Train, ZeroLearningRateKeepsInitAndRunsAreDeterministic) {
    HashEmbedder emb(32, 17);
    Rng rng(18);
    const Toy toy = make_toy(40, emb, rng);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 8;
    cfg.seed = 19;
    cfg.lr = 0.0;
    const TrainResult frozen = train_fuse(toy.Q, toy.X, cfg);
    Rng init_rng(19);
    const FuseParams init = init_params(toy.Q.cols(), toy.X.cols(), init_rng);
    EXPECT_EQ(frozen.params.W, init.W);
    EXPECT_EQ(frozen.params.b, init.b);
    EXPECT_EQ(frozen.params.log_tau, init.log_tau);

    cfg.lr = 0.3;
    const TrainResult a = train_fuse(toy.Q, toy.X, cfg);
    const TrainResult b = train_fuse(toy.Q, toy.X, cfg);
    EXPECT_EQ(a.params.W, b.params.W);
    EXPECT_EQ(a.loss_curve, b.loss_curve);

    cfg.batch = 41;
    EXPECT_THROW(train_fuse(toy.Q, toy.X, cfg), InvalidArgument);
}

// ---- retrieval and persistence ----

TEST(FusedDb, TiesGoToSmallerIdAndRoundTrip) {
    FusedDb db;
    db.ids = {9, 3, 5};
    db.vecs.resize(3, 2);
    db.vecs << 1, 0, 1, 0, 0, 1;
    EXPECT_EQ(fuse_retrieve(Eigen::Vector2d(1, 0), db, 3), (std::vector<TrajId>{3, 9, 5}));
    EXPECT_EQ(fuse_retrieve(Eigen::Vector2d(0, 2), db, 1), (std::vector<TrajId>{5}));
    EXPECT_THROW(fuse_retrieve(Eigen::Vector2d(1, 0), FusedDb{}, 1), InvalidState);

    const auto dir = std::filesystem::temp_directory_path() / "trajprism_fuse_test";
    std::filesystem::create_directories(dir);
    save_fused_db(db, dir / "db.jsonl");
    const FusedDb back = load_fused_db(dir / "db.jsonl");
    EXPECT_EQ(back.ids, db.ids);
    EXPECT_EQ(back.vecs, db.vecs);

    Rng rng(20);
    FuseParams p = init_params(4, 6, rng);
    p.b(2) = 0.125;
    save_params(p, dir / "params.json");
    const FuseParams q = load_params(dir / "params.json");
    EXPECT_EQ(q.W, p.W);
    EXPECT_EQ(q.b, p.b);
    EXPECT_EQ(q.log_tau, p.log_tau);
    std::filesystem::remove_all(dir);
}

TEST(FuseForward, IdentityBlockGivesNormalizedGeo) {
    FuseParams p;
    p.W = Eigen::MatrixXd::Zero(kGeoDim, kGeoDim + 4);
    p.W.leftCols(kGeoDim).setIdentity();
    p.b = Eigen::VectorXd::Zero(kGeoDim);
    const Eigen::VectorXd geo = Eigen::VectorXd::LinSpaced(kGeoDim, -1.0, 2.0);
    EXPECT_NEAR((fuse_forward(p, geo, Eigen::VectorXd::Zero(4)) - geo.normalized()).norm(), 0.0, 1e-12);
}

TEST(SemEncode, MatchesExplicitSum) {
    Rng rng(21);
    const RoadGraph g = lattice_graph(4, rng, 100.0, 100.0);
    HashEmbedder emb(64, 22);
    CellIndex cells;
    int k = 0;
    for (const auto& [cell, rids] : segments_by_cell(g, kHex)) {
        cells.insert(cell, "GNN: URBAN | Narrative: Block " + std::to_string(k) + ". | District: D", {}, {}, "D");
        ++k;
    }
    const Trajectory t{1, {0, 1, 2, 6, 10}, {0, 1, 2, 3, 4}};
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(64);
    for (const auto& c : visited_cells(t, g, kHex)) sum += emb.embed(cells.grounding_text(c));
    EXPECT_NEAR((sem_encode(t, g, kHex, cells, emb) - sum.normalized()).norm(), 0.0, 1e-12);

    const Trajectory rev{2, {10, 6, 2, 1, 0}, {0, 1, 2, 3, 4}};
    EXPECT_NEAR((sem_encode(rev, g, kHex, cells, emb) - sem_encode(t, g, kHex, cells, emb)).norm(), 0.0, 1e-12);
}

TEST(FusedDb, LargeKGivesFullBruteForceOrdering) {
    Rng rng(23);
    FusedDb db;
    db.vecs = unit_rows(12, 5, rng);
    for (TrajId i = 0; i < 12; ++i) db.ids.push_back(100 - i);
    const Eigen::VectorXd q = unit_rows(1, 5, rng).row(0).transpose();
    const auto got = fuse_retrieve(q, db, 50);
    std::vector<std::pair<double, TrajId>> oracle;
    for (Eigen::Index i = 0; i < 12; ++i) oracle.emplace_back(-db.vecs.row(i).dot(q), db.ids[static_cast<std::size_t>(i)]);
    std::sort(oracle.begin(), oracle.end());
    ASSERT_EQ(got.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(got[i], oracle[i].second);
}
