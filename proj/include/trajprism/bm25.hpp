#ifndef TRAJPRISM_BM25_HPP
#define TRAJPRISM_BM25_HPP

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace trajprism {

/// Okapi BM25 over a fixed document list. Documents are tokenized with
/// word_tokens; idf is log(1 + (N - df + 0.5) / (df + 0.5)).
class Bm25Index {
public:
    explicit Bm25Index(const std::vector<std::string>& docs, double k1 = 1.2, double b = 0.75);

    std::size_t size() const { return doc_len_.size(); }

    /// Score of every document, in document order.
    std::vector<double> scores(std::string_view query) const;

    /// Indices of the top k documents, ties to the smaller index.
    std::vector<std::size_t> top(std::string_view query, std::size_t k) const;

private:
    double k1_, b_, avg_len_ = 0.0;
    std::vector<double> doc_len_;
    std::map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
};

} // namespace trajprism

#endif // TRAJPRISM_BM25_HPP
