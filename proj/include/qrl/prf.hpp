#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "index.hpp"

namespace qrl {

/// Context windows pad past the sequence boundary with this token.
inline const std::string null_token;

struct CandidateTerm {
    std::string token;
    token_seq context;              // 2k+1 tokens centred on `token`
    std::optional<doc_id> source;   // nullopt: came from the query
    std::size_t pool_index = 0;
};

struct PoolConfig {
    std::size_t max_words = 300;     // M
    std::size_t max_docs = 7;        // K
    std::size_t context_radius = 4;  // k; window of 2k+1
};

struct CandidatePool {
    std::vector<CandidateTerm> terms;
    PoolConfig config;

    std::size_t size() const { return terms.size(); }
    bool empty() const { return terms.empty(); }
    const CandidateTerm& operator[](std::size_t i) const { return terms[i]; }
};

inline token_seq context_window(const token_seq& seq, std::size_t pos, std::size_t radius) {
    token_seq out;
    out.reserve(2 * radius + 1);
    for (std::size_t j = 0; j < 2 * radius + 1; ++j) {
        auto p = static_cast<std::ptrdiff_t>(pos + j) - static_cast<std::ptrdiff_t>(radius);
        out.push_back(p >= 0 && p < static_cast<std::ptrdiff_t>(seq.size()) ? seq[static_cast<std::size_t>(p)]
                                                                             : null_token);
    }
    return out;
}

/// Query tokens followed by the first M tokens of each of the top-K results.
/// Contexts are taken from the full document, so a candidate's window does
/// not depend on M.
inline CandidatePool build_pool(const token_seq& query, const SearchResult& results, const InvertedIndex& index,
                                const PoolConfig& cfg = {}) {
    if (cfg.max_words == 0 || cfg.max_docs == 0) throw invalid_argument("pool needs M >= 1 and K >= 1");
    CandidatePool pool;
    pool.config = cfg;
    for (std::size_t i = 0; i < query.size(); ++i) {
        pool.terms.push_back({query[i], context_window(query, i, cfg.context_radius), std::nullopt, pool.terms.size()});
    }
    auto n_docs = std::min(cfg.max_docs, results.size());
    for (std::size_t r = 0; r < n_docs; ++r) {
        auto tokens = index.doc_tokens(results[r].id);
        auto n = std::min(cfg.max_words, tokens.size());
        for (std::size_t i = 0; i < n; ++i) {
            pool.terms.push_back(
                {tokens[i], context_window(tokens, i, cfg.context_radius), results[r].id, pool.terms.size()});
        }
    }
    return pool;
}

inline CandidatePool build_pool(const QueryRecord& query, const SearchResult& results, const InvertedIndex& index,
                                const PoolConfig& cfg = {}) {
    return build_pool(query.tokens, results, index, cfg);
}

/// Uniform draw among the top-min(K, |results|) documents.
template <typename Rng>
doc_id sample_feedback_doc(const SearchResult& results, std::size_t k, Rng& rng) {
    if (results.empty()) throw invalid_argument("cannot sample a feedback document from empty results");
    if (k == 0) throw invalid_argument("K must be >= 1");
    auto n = std::min(k, results.size());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    return results[pick(rng)].id;
}

inline doc_id sample_feedback_doc(const SearchResult& results, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_feedback_doc(results, k, rng);
}

struct ScoredTerm {
    std::string token;
    double score;
};

namespace detail {

inline void sort_by_score_then_token(std::vector<ScoredTerm>& terms) {
    std::stable_sort(terms.begin(), terms.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
        return a.score != b.score ? a.score > b.score : a.token < b.token;
    });
}

inline token_seq append_top(const token_seq& query, const std::vector<ScoredTerm>& ranked, std::size_t n) {
    token_seq out = query;
    for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].token);
    return out;
}

}  // namespace detail

/// Distinct terms of one document ranked by tf * ln(N / df); ties keep
/// first-occurrence order.
inline std::vector<ScoredTerm> tfidf_terms(const InvertedIndex& index, doc_id doc) {
    auto tokens = index.doc_tokens(doc);
    std::vector<ScoredTerm> out;
    std::unordered_map<std::string, std::size_t> at;
    for (const auto& t : tokens) {
        auto [it, fresh] = at.emplace(t, out.size());
        if (fresh) out.push_back({t, 0.0});
        out[it->second].score += 1.0;
    }
    auto n = static_cast<double>(index.n_docs());
    for (auto& st : out) st.score *= std::log(n / index.df(st.token));
    std::stable_sort(out.begin(), out.end(), [](const ScoredTerm& a, const ScoredTerm& b) { return a.score > b.score; });
    return out;
}

inline token_seq prf_tfidf(const token_seq& query, const InvertedIndex& index, std::size_t n, std::size_t k) {
    if (n == 0 || k == 0) throw invalid_argument("PRF-TFIDF needs N >= 1 and K >= 1");
    token_seq out = query;
    for (const auto& r : index.search(query, k)) {
        auto ranked = tfidf_terms(index, r.id);
        for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].token);
    }
    return out;
}

struct RelevanceModelParams {
    double lambda = 0.5;
    double mu = 1500.0;
};

/// P(t|q0) = (1-λ) tf(t∈q)/|q| + λ Σ_{d∈D0} P(d) P(t|d) P(q0|d), P(d) = 1/|D0|,
/// over every distinct term of q0 ∪ D0, ranked by score then token.
inline std::vector<ScoredTerm> relevance_model_scores(const token_seq& query, const SearchResult& feedback,
                                                      const InvertedIndex& index, const RelevanceModelParams& p) {
    if (p.lambda < 0.0 || p.lambda > 1.0) throw invalid_argument("lambda must lie in [0, 1]");
    std::vector<std::string> terms;
    std::unordered_set<std::string> seen;
    for (const auto& t : query) {
        if (seen.insert(t).second) terms.push_back(t);
    }
    for (const auto& r : feedback) {
        for (const auto& t : index.doc_tokens(r.id)) {
            if (seen.insert(t).second) terms.push_back(t);
        }
    }
    std::vector<double> q_lik;
    for (const auto& r : feedback) q_lik.push_back(index.lm_query_likelihood(query, r.id, p.mu));

    std::vector<ScoredTerm> out;
    out.reserve(terms.size());
    for (const auto& t : terms) {
        double in_query = static_cast<double>(std::count(query.begin(), query.end(), t));
        double from_query = query.empty() ? 0.0 : in_query / static_cast<double>(query.size());
        double from_docs = 0.0;
        for (std::size_t i = 0; i < feedback.size(); ++i) {
            from_docs += index.lm_prob(t, feedback[i].id, p.mu) * q_lik[i];
        }
        if (!feedback.empty()) from_docs /= static_cast<double>(feedback.size());
        out.push_back({t, (1.0 - p.lambda) * from_query + p.lambda * from_docs});
    }
    detail::sort_by_score_then_token(out);
    return out;
}

inline token_seq prf_rm(const token_seq& query, const InvertedIndex& index, std::size_t n, std::size_t k,
                        const RelevanceModelParams& p = {}) {
    if (n == 0 || k == 0) throw invalid_argument("PRF-RM needs N >= 1 and K >= 1");
    auto feedback = index.search(query, k);
    if (feedback.empty()) return query;
    return detail::append_top(query, relevance_model_scores(query, feedback, index, p), n);
}

inline std::vector<ScoredTerm> rank_by_similarity(const EmbeddingTable& table, const token_seq& query,
                                                  const std::vector<std::string>& candidates) {
    auto q = query_embedding(table, query);
    std::vector<ScoredTerm> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back({c, cosine_similarity(table.lookup(c), q)});
    detail::sort_by_score_then_token(out);
    return out;
}

inline token_seq prf_emb(const token_seq& query, const InvertedIndex& index, const EmbeddingTable& table,
                         std::size_t n, std::size_t k) {
    if (n == 0 || k == 0) throw invalid_argument("PRF-Emb needs N >= 1 and K >= 1");
    std::vector<std::string> candidates;
    std::unordered_set<std::string> seen;
    for (const auto& r : index.search(query, k)) {
        for (const auto& t : index.doc_tokens(r.id)) {
            if (seen.insert(t).second) candidates.push_back(t);
        }
    }
    return detail::append_top(query, rank_by_similarity(table, query, candidates), n);
}

inline token_seq vocab_emb(const token_seq& query, const EmbeddingTable& table, std::size_t n) {
    if (n == 0) throw invalid_argument("Vocab-Emb needs N >= 1");
    return detail::append_top(query, rank_by_similarity(table, query, table.vocabulary().tokens()), n);
}

inline void write_reformulation_header(std::ostream& out) { out << "qid\toriginal\treformulated\n"; }

inline void write_reformulation(std::ostream& out, query_id qid, const token_seq& original,
                                const token_seq& reformulated) {
    out << qid << '\t' << join(original) << '\t' << join(reformulated) << '\n';
}

}  // namespace qrl
