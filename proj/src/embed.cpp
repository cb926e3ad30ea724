#include "trajprism/embed.hpp"

#include <cmath>
#include <unordered_map>

#include "trajprism/error.hpp"
#include "trajprism/rng.hpp"
#include "trajprism/text.hpp"

namespace trajprism {

Eigen::MatrixXd Embedder::embed_rows(const std::vector<std::string>& texts) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), dim());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = embed(texts[i]).transpose();
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

HashEmbedder::HashEmbedder(Eigen::Index dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim <= 0) throw InvalidArgument("embedding dimension must be positive");
}

void HashEmbedder::add_feature(Eigen::VectorXd& v, std::string_view feature, double weight) const {
    const std::uint64_t h = splitmix64(fnv1a64(feature) ^ seed_);
    const auto slot = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v[slot] += (h >> 63) ? -weight : weight;
}

Eigen::VectorXd HashEmbedder::embed(std::string_view text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    const std::vector<std::string> words = word_tokens(text);
    const std::string padded = "^^" + join(words, " ") + "$$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        add_feature(v, std::string_view(padded).substr(i, 3), 1.0);
    }
    for (const auto& w : words) add_feature(v, "w:" + w, 2.0);
    if (!normalize_in_place(v)) v[0] = 1.0;
    return v;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

bool normalize_in_place(Eigen::VectorXd& v) {
    const double n = v.norm();
    if (n == 0.0 || !std::isfinite(n)) return false;
    v /= n;
    return true;
}

double greedy_match_f1(std::string_view pred, std::string_view ref, const Embedder& emb) {
    const auto pt = word_tokens(pred);
    const auto rt = word_tokens(ref);
    if (pt.empty() || rt.empty()) return 0.0;
    std::unordered_map<std::string, Eigen::VectorXd> cache;
    auto vec = [&](const std::string& w) -> const Eigen::VectorXd& {
        auto it = cache.find(w);
        if (it == cache.end()) it = cache.emplace(w, emb.embed(w)).first;
        return it->second;
    };
    Eigen::MatrixXd P(static_cast<Eigen::Index>(pt.size()), emb.dim());
    Eigen::MatrixXd R(static_cast<Eigen::Index>(rt.size()), emb.dim());
    for (std::size_t i = 0; i < pt.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = vec(pt[i]).transpose();
    for (std::size_t i = 0; i < rt.size(); ++i) R.row(static_cast<Eigen::Index>(i)) = vec(rt[i]).transpose();
    const Eigen::MatrixXd sim = P * R.transpose();
    const double precision = sim.rowwise().maxCoeff().mean();
    const double recall = sim.colwise().maxCoeff().mean();
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

} // namespace trajprism
