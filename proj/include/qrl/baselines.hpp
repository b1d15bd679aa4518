#pragma once

#include <string>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "index.hpp"
#include "metrics.hpp"
#include "prf.hpp"

namespace qrl {

enum class Baseline { raw, prf_tfidf, prf_rm, prf_emb, vocab_emb };

inline std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::raw: return "raw";
        case Baseline::prf_tfidf: return "prf-tfidf";
        case Baseline::prf_rm: return "prf-rm";
        case Baseline::prf_emb: return "prf-emb";
        case Baseline::vocab_emb: return "vocab-emb";
    }
    return "?";
}

inline bool is_baseline(const std::string& name) {
    return name == "raw" || name == "prf-tfidf" || name == "prf-rm" || name == "prf-emb" || name == "vocab-emb";
}

inline Baseline parse_baseline(const std::string& name) {
    for (auto b : {Baseline::raw, Baseline::prf_tfidf, Baseline::prf_rm, Baseline::prf_emb, Baseline::vocab_emb}) {
        if (to_string(b) == name) return b;
    }
    throw invalid_argument("unknown baseline '" + name + "'");
}

/// The PRF family proper: methods that read terms from feedback documents.
inline bool uses_feedback(Baseline b) {
    return b == Baseline::prf_tfidf || b == Baseline::prf_rm || b == Baseline::prf_emb;
}

inline bool needs_embeddings(Baseline b) { return b == Baseline::prf_emb || b == Baseline::vocab_emb; }

struct PrfConfig {
    std::size_t n = 300;  // terms taken (per document for TF-IDF)
    std::size_t k = 9;    // feedback documents
    RelevanceModelParams rm;
};

inline token_seq reformulate_baseline(Baseline b, const token_seq& q0, const InvertedIndex& index,
                                      const EmbeddingTable* table, const PrfConfig& p) {
    if (needs_embeddings(b) && !table) throw invalid_argument(to_string(b) + " needs word embeddings");
    switch (b) {
        case Baseline::raw: return q0;
        case Baseline::prf_tfidf: return prf_tfidf(q0, index, p.n, p.k);
        case Baseline::prf_rm: return prf_rm(q0, index, p.n, p.k, p.rm);
        case Baseline::prf_emb: return prf_emb(q0, index, *table, p.n, p.k);
        case Baseline::vocab_emb: return vocab_emb(q0, *table, p.n);
    }
    return q0;
}

inline EvalReport evaluate_baseline(Baseline b, const std::vector<QueryRecord>& queries, const InvertedIndex& index,
                                    const EmbeddingTable* table, const PrfConfig& p,
                                    const std::vector<MetricSpec>& metrics) {
    EvalReport report(metrics);
    auto depth = depth_needed(metrics);
    for (const auto& q : queries) {
        auto q1 = reformulate_baseline(b, q.tokens, index, table, p);
        report.add(q.qid, ids_of(index.search(q1, depth)), q.relevant_ids);
    }
    return report;
}

struct GridPoint {
    PrfConfig config;
    double score = -1.0;
};

/// Best (N, K) by the mean of `metric` over `queries`; the first best point
/// in grid order wins ties. Vocab-Emb ignores K, and raw ignores both.
inline GridPoint grid_search(Baseline b, const std::vector<QueryRecord>& queries, const InvertedIndex& index,
                             const EmbeddingTable* table, const std::vector<std::size_t>& ns,
                             const std::vector<std::size_t>& ks, const MetricSpec& metric, PrfConfig base = {}) {
    if (ns.empty() || ks.empty()) throw invalid_argument("empty grid");
    GridPoint best;
    for (auto n : ns) {
        for (auto k : ks) {
            auto p = base;
            p.n = n;
            p.k = k;
            double s = evaluate_baseline(b, queries, index, table, p, {metric}).mean(0);
            if (s > best.score) best = {p, s};
            if (b == Baseline::vocab_emb || b == Baseline::raw) break;
        }
        if (b == Baseline::raw) break;
    }
    return best;
}

/// M and K grids used for PRF tuning.
inline const std::vector<std::size_t> prf_n_grid{10, 50, 100, 200, 300, 500};
inline const std::vector<std::size_t> prf_k_grid{1, 3, 5, 9, 11};

}  // namespace qrl
