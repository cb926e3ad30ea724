#include "trajprism/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajprism/text.hpp"

namespace trajprism {

Bm25Index::Bm25Index(const std::vector<std::string>& docs, double k1, double b) : k1_(k1), b_(b) {
    double total = 0.0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto toks = word_tokens(docs[d]);
        std::map<std::string, int> tf;
        for (const auto& t : toks) ++tf[t];
        for (const auto& [t, n] : tf) postings_[t].emplace_back(d, n);
        doc_len_.push_back(static_cast<double>(toks.size()));
        total += static_cast<double>(toks.size());
    }
    if (!docs.empty()) avg_len_ = total / static_cast<double>(docs.size());
}

std::vector<double> Bm25Index::scores(std::string_view query) const {
    std::vector<double> out(doc_len_.size(), 0.0);
    if (doc_len_.empty()) return out;
    const double n = static_cast<double>(doc_len_.size());
    auto qt = word_tokens(query);
    std::sort(qt.begin(), qt.end());
    qt.erase(std::unique(qt.begin(), qt.end()), qt.end());
    for (const auto& t : qt) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& [d, f] : it->second) {
            const double norm = avg_len_ > 0 ? doc_len_[d] / avg_len_ : 0.0;
            out[d] += idf * (f * (k1_ + 1.0)) / (f + k1_ * (1.0 - b_ + b_ * norm));
        }
    }
    return out;
}

std::vector<std::size_t> Bm25Index::top(std::string_view query, std::size_t k) const {
    const auto s = scores(query);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    order.resize(std::min(k, order.size()));
    return order;
}

} // namespace trajprism
