#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"

namespace qrl {

using vec = std::vector<double>;

/// Pretrained word vectors plus one shared out-of-vocabulary vector.
///
/// Pretrained rows are fixed. The OOV vector is the only row meant to be
/// learned; models copy it into their own parameters and train the copy.
class EmbeddingTable {
  public:
    static constexpr double oov_init_range = 0.05;

    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim, std::uint64_t seed = 0) : dim_(dim) { init_oov(seed); }

    void add(const std::string& token, std::span<const double> v) {
        if (v.size() != dim_) throw invalid_argument("embedding for '" + token + "' has wrong dimension");
        if (vocab_.contains(token)) throw format_error("duplicate embedding token '" + token + "'");
        vocab_.add(token);
        rows_.insert(rows_.end(), v.begin(), v.end());
    }

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return vocab_.size(); }
    bool contains(const std::string& token) const { return vocab_.contains(token); }
    const Vocabulary& vocabulary() const { return vocab_; }
    std::span<const double> oov() const { return oov_; }

    std::span<const double> row(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }

    /// The token's vector, or the OOV vector for unknown tokens.
    std::span<const double> lookup(const std::string& token) const {
        auto i = vocab_.find(token);
        return i < vocab_.size() ? row(i) : std::span<const double>(oov_);
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw error("cannot write " + path);
        out.precision(17);
        for (std::size_t i = 0; i < size(); ++i) {
            out << vocab_.token(static_cast<std::uint32_t>(i));
            for (double x : row(i)) out << ' ' << x;
            out << '\n';
        }
    }

    void init_oov(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-oov_init_range, oov_init_range);
        oov_.resize(dim_);
        for (auto& x : oov_) x = u(rng);
    }

  private:
    std::size_t dim_ = 0;
    Vocabulary vocab_;
    std::vector<double> rows_;
    std::vector<double> oov_;
};

/// Reads "token f1 ... fd" lines. A leading word2vec header line of two
/// integers ("count dim") is accepted and skipped.
inline EmbeddingTable load_embeddings(const std::string& path, std::uint64_t seed = 0) {
    auto in = detail::open_input(path);
    EmbeddingTable table;
    bool have_dim = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line)) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        vec v;
        std::string field;
        while (ss >> field) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw format_error(detail::where(path, lineno) + "non-numeric component '" + field + "'");
            }
        }
        if (lineno == 1 && v.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) {
            continue;  // word2vec header
        }
        if (v.empty()) throw format_error(detail::where(path, lineno) + "token without a vector");
        if (!have_dim) {
            table = EmbeddingTable(v.size(), seed);
            have_dim = true;
        } else if (v.size() != table.dimension()) {
            throw format_error(detail::where(path, lineno) + "dimension " + std::to_string(v.size()) +
                               " differs from " + std::to_string(table.dimension()));
        }
        try {
            table.add(token, v);
        } catch (const format_error& e) {
            throw format_error(detail::where(path, lineno) + e.what());
        }
    }
    if (!have_dim) throw format_error(path + ": no embeddings");
    return table;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw invalid_argument("cosine similarity of vectors with different dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

/// Mean of the query tokens' vectors (OOV tokens contribute the OOV vector).
inline vec query_embedding(const EmbeddingTable& table, const token_seq& query) {
    if (query.empty()) throw invalid_argument("query embedding of an empty query");
    vec out(table.dimension(), 0.0);
    for (const auto& t : query) {
        auto v = table.lookup(t);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    }
    for (auto& x : out) x /= static_cast<double>(query.size());
    return out;
}

}  // namespace qrl
