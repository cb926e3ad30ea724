#ifndef TRAJPRISM_EMBED_HPP
#define TRAJPRISM_EMBED_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace trajprism {

/// Text embedding provider. Implementations return unit-norm vectors of a
/// fixed dimension.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Eigen::Index dim() const = 0;
    virtual Eigen::VectorXd embed(std::string_view text) const = 0;

    /// One embedding per row.
    Eigen::MatrixXd embed_rows(const std::vector<std::string>& texts) const;
};

/// Signed feature hashing of character trigrams and whole words of the
/// normalized text, L2-normalized. Offline and deterministic.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(Eigen::Index dim = 256, std::uint64_t seed = 0x7a3c);

    Eigen::Index dim() const override { return dim_; }
    Eigen::VectorXd embed(std::string_view text) const override;

private:
    void add_feature(Eigen::VectorXd& v, std::string_view feature, double weight) const;

    Eigen::Index dim_;
    std::uint64_t seed_;
};

/// Cosine similarity; 0 when either side is the zero vector.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Normalizes in place. Returns false (leaving v untouched) for a zero vector.
bool normalize_in_place(Eigen::VectorXd& v);

/// Greedy token-matching F1 over per-token embeddings: precision averages,
/// for each predicted token, its best cosine against the reference tokens,
/// and recall the converse. 0 when either side has no tokens.
double greedy_match_f1(std::string_view pred, std::string_view ref, const Embedder& emb);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);

} // namespace trajprism

#endif // TRAJPRISM_EMBED_HPP
