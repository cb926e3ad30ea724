#ifndef TRAJPRISM_FUSE_HPP
#define TRAJPRISM_FUSE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trajprism/embed.hpp"
#include "trajprism/geo.hpp"
#include "trajprism/jsonl.hpp"
#include "trajprism/rng.hpp"
#include "trajprism/roadnet.hpp"
#include "trajprism/traj.hpp"

namespace trajprism {

inline constexpr int kGeoSamples = 16;
inline constexpr Eigen::Index kGeoDim = 2 * kGeoSamples + 1;

/// Polyline resampled to `n` points equally spaced by arc length, in local
/// east/north meters around the first point.
std::vector<Eigen::Vector2d> resample_polyline(std::span<const GeoPoint> pts, int n);

/// Resampled shape with the centroid removed and divided by the largest
/// pairwise distance, flattened, then log1p(duration) / 10.
Eigen::VectorXd geo_encode(const Trajectory& t, const RoadGraph& g);

/// Normalized mean of the visited cells' grounding-text embeddings. Cells
/// without metadata are skipped; a trip with none gives the zero vector.
Eigen::VectorXd sem_encode(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg, const CellIndex& cells,
                           const Embedder& embedder);

struct FuseParams {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
    double log_tau = 0.0;

    double tau() const { return std::exp(log_tau); }
};

inline constexpr double kInitTau = 0.07;

/// W ~ uniform(+-1/sqrt(in_dim)), b = 0, tau = 0.07.
FuseParams init_params(Eigen::Index out_dim, Eigen::Index in_dim, Rng& rng);

/// normalize(W [geo; sem] + b). Throws NumericFailure on a zero projection.
Eigen::VectorXd fuse_forward(const FuseParams& p, const Eigen::VectorXd& geo, const Eigen::VectorXd& sem);

/// Row-wise fuse_forward over concatenated features X (B x in_dim).
Eigen::MatrixXd fuse_rows(const FuseParams& p, const Eigen::MatrixXd& X);

struct LossAndGrads {
    double loss = 0.0;
    Eigen::MatrixXd dW;
    Eigen::VectorXd db;
    double dlog_tau = 0.0;
};

/// Mean over rows i of -log softmax_i(Q_i . F_j / tau) at j = i, where F are
/// the fused rows of X. Q rows are unit query embeddings.
LossAndGrads infonce_loss_and_grads(const FuseParams& p, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& X,
                                    std::size_t batch_index = 0);

struct TrainConfig {
    int epochs = 50;
    std::size_t batch = 32;
    double lr = 0.5;
    std::uint64_t seed = 0;
};

struct TrainResult {
    FuseParams params;
    std::vector<double> loss_curve; ///< mean mini-batch loss per epoch
};

/// Seeded mini-batch gradient descent; the final short batch is kept.
TrainResult train_fuse(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& X, const TrainConfig& cfg);

/// Concatenated geo and sem features of one trajectory.
Eigen::VectorXd fuse_features(const Trajectory& t, const RoadGraph& g, const HexConfig& cfg, const CellIndex& cells,
                              const Embedder& embedder);

struct FusedDb {
    std::vector<TrajId> ids;
    Eigen::MatrixXd vecs; ///< unit rows

    std::size_t size() const { return ids.size(); }
};

FusedDb build_fused_db(const FuseParams& p, const std::vector<TrajId>& ids, const Eigen::MatrixXd& X);

/// Top K by cosine against the query embedding, ties to the smaller traj id.
std::vector<TrajId> fuse_retrieve(const Eigen::VectorXd& query, const FusedDb& db, std::size_t k);
std::vector<TrajId> fuse_retrieve(std::string_view query, const FusedDb& db, const Embedder& embedder, std::size_t k);

void save_params(const FuseParams& p, const std::filesystem::path& path);
FuseParams load_params(const std::filesystem::path& path);
void save_fused_db(const FusedDb& db, const std::filesystem::path& path);
FusedDb load_fused_db(const std::filesystem::path& path);

} // namespace trajprism

#endif // TRAJPRISM_FUSE_HPP
