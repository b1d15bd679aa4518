#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "binary_io.hpp"
#include "corpus.hpp"
#include "error.hpp"

namespace qrl {

struct Posting {
    std::uint32_t doc;  // dense internal document number
    std::uint32_t tf;
};

struct ScoredDoc {
    doc_id id;
    double score;
    bool operator==(const ScoredDoc&) const = default;
};

/// Ranked list, scores non-increasing, ties by ascending id.
using SearchResult = std::vector<ScoredDoc>;

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Inverted index plus a forward store of each document's tokens.
///
/// Documents are numbered densely in ascending id order, so comparing
/// internal numbers is the same as comparing ids.
class InvertedIndex {
  public:
    static constexpr char magic[8] = {'Q', 'R', 'L', 'I', 'D', 'X', '\0', '\1'};
    static constexpr std::uint32_t format_version = 1;

    InvertedIndex() = default;

    explicit InvertedIndex(const Corpus& corpus, Bm25Params params = {}) : params_(params) {
        if (corpus.empty()) throw invalid_argument("cannot index an empty corpus");
        std::vector<const Document*> docs;
        docs.reserve(corpus.size());
        for (const auto& d : corpus.documents()) docs.push_back(&d);
        std::sort(docs.begin(), docs.end(), [](auto* a, auto* b) { return a->id < b->id; });

        for (std::uint32_t n = 0; n < docs.size(); ++n) {
            const auto& d = *docs[n];
            ids_.push_back(d.id);
            titles_.push_back(join(d.title));
            std::vector<std::uint32_t> terms;
            for (const auto& tok : d.text()) terms.push_back(vocab_.add(tok));
            postings_.resize(vocab_.size());
            collection_tf_.resize(vocab_.size(), 0);
            // postings are appended in document order, so they stay sorted
            std::unordered_map<std::uint32_t, std::uint32_t> tf;
            for (auto t : terms) ++tf[t];
            std::vector<std::uint32_t> order;
            order.reserve(tf.size());
            for (auto& [t, _] : tf) order.push_back(t);
            std::sort(order.begin(), order.end());
            for (auto t : order) {
                postings_[t].push_back({n, tf[t]});
                collection_tf_[t] += tf[t];
            }
            lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
            collection_length_ += terms.size();
            terms_.push_back(std::move(terms));
        }
        finish();
    }

    std::size_t n_docs() const { return ids_.size(); }
    std::size_t n_terms() const { return vocab_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    std::uint64_t collection_length() const { return collection_length_; }
    const Bm25Params& bm25_params() const { return params_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    const std::vector<doc_id>& doc_ids() const { return ids_; }

    bool contains(doc_id id) const { return positions_.count(id) != 0; }

    std::uint32_t doc_number(doc_id id) const {
        auto it = positions_.find(id);
        if (it == positions_.end()) throw not_found("unknown document id " + std::to_string(id));
        return it->second;
    }

    std::uint32_t doc_length(doc_id id) const { return lengths_[doc_number(id)]; }
    const std::string& title(doc_id id) const { return titles_[doc_number(id)]; }

    /// The document's indexed tokens (title then body) in original order.
    token_seq doc_tokens(doc_id id, std::size_t max_words = SIZE_MAX) const {
        const auto& terms = terms_[doc_number(id)];
        token_seq out;
        auto n = std::min(max_words, terms.size());
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(vocab_.token(terms[i]));
        return out;
    }

    const std::vector<Posting>& postings(const std::string& term) const {
        static const std::vector<Posting> none;
        auto t = vocab_.find(term);
        return t < postings_.size() ? postings_[t] : none;
    }

    std::uint32_t df(const std::string& term) const { return static_cast<std::uint32_t>(postings(term).size()); }

    std::uint64_t collection_tf(const std::string& term) const {
        auto t = vocab_.find(term);
        return t < collection_tf_.size() ? collection_tf_[t] : 0;
    }

    std::uint32_t tf(const std::string& term, doc_id id) const {
        auto n = doc_number(id);
        const auto& p = postings(term);
        auto it = std::lower_bound(p.begin(), p.end(), n, [](const Posting& a, std::uint32_t v) { return a.doc < v; });
        return (it != p.end() && it->doc == n) ? it->tf : 0;
    }

    /// Lucene-style idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
    double idf(std::uint32_t df) const {
        auto n = static_cast<double>(n_docs());
        return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    double bm25_score(const token_seq& query, doc_id id) const {
        auto n = doc_number(id);
        double score = 0.0;
        for (const auto& [term, count] : query_terms(query)) {
            const auto& p = postings_[term];
            auto it = std::lower_bound(p.begin(), p.end(), n, [](const Posting& a, std::uint32_t v) { return a.doc < v; });
            if (it == p.end() || it->doc != n) continue;
            score += count * term_weight(static_cast<std::uint32_t>(p.size()), it->tf, lengths_[n]);
        }
        return score;
    }

    /// Top-k documents by BM25 among those matching at least one query term.
    SearchResult search(const token_seq& query, std::size_t k) const {
        if (k == 0) throw invalid_argument("search depth k must be >= 1");
        std::vector<double> acc(n_docs(), 0.0);
        std::vector<std::uint32_t> touched;
        for (const auto& [term, count] : query_terms(query)) {
            const auto& p = postings_[term];
            auto df = static_cast<std::uint32_t>(p.size());
            for (const auto& post : p) {
                if (acc[post.doc] == 0.0) touched.push_back(post.doc);
                acc[post.doc] += count * term_weight(df, post.tf, lengths_[post.doc]);
            }
        }
        std::vector<std::uint32_t> hits;
        hits.reserve(touched.size());
        for (auto d : touched) {
            if (acc[d] > 0.0) hits.push_back(d);
        }
        auto better = [&](std::uint32_t a, std::uint32_t b) { return acc[a] != acc[b] ? acc[a] > acc[b] : a < b; };
        auto top = std::min(k, hits.size());
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(top), hits.end(), better);
        SearchResult out;
        out.reserve(top);
        for (std::size_t i = 0; i < top; ++i) out.push_back({ids_[hits[i]], acc[hits[i]]});
        return out;
    }

    /// Dirichlet-smoothed P(t|d) = (tf + u P(t|C)) / (|d| + u).
    double lm_prob(const std::string& term, doc_id id, double u) const {
        if (!(u > 0.0)) throw invalid_argument("Dirichlet prior u must be > 0");
        auto len = doc_length(id);
        double p_c = collection_prob(term);
        return (tf(term, id) + u * p_c) / (len + u);
    }

    double lm_query_likelihood(const token_seq& query, doc_id id, double u) const {
        double p = 1.0;
        for (const auto& w : query) p *= lm_prob(w, id, u);
        return p;
    }

    double collection_prob(const std::string& term) const {
        return static_cast<double>(collection_tf(term)) / static_cast<double>(collection_length_);
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw error("cannot write " + path);
        out.write(magic, sizeof(magic));
        io::write_pod(out, format_version);
        io::write_pod<std::uint64_t>(out, n_docs());
        io::write_pod(out, params_.k1);
        io::write_pod(out, params_.b);
        io::write_pod<std::uint64_t>(out, vocab_.size());
        for (const auto& t : vocab_.tokens()) io::write_string(out, t);
        for (std::size_t n = 0; n < n_docs(); ++n) {
            io::write_pod(out, ids_[n]);
            io::write_string(out, titles_[n]);
            io::write_vector(out, terms_[n]);
        }
        for (const auto& p : postings_) io::write_vector(out, p);
        if (!out) throw error("write failed: " + path);
    }

    static InvertedIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw not_found("no such file: " + path);
        char head[sizeof(magic)];
        if (!in.read(head, sizeof(head)) || !std::equal(head, head + sizeof(head), magic)) {
            throw format_error(path + ": not an index file (bad magic)");
        }
        auto version = io::read_pod<std::uint32_t>(in);
        if (version != format_version) {
            throw format_error(path + ": unsupported index format version " + std::to_string(version));
        }
        InvertedIndex idx;
        auto n_docs = io::read_pod<std::uint64_t>(in);
        idx.params_.k1 = io::read_pod<double>(in);
        idx.params_.b = io::read_pod<double>(in);
        auto n_terms = io::read_pod<std::uint64_t>(in);
        for (std::uint64_t i = 0; i < n_terms; ++i) idx.vocab_.add(io::read_string(in));
        if (idx.vocab_.size() != n_terms) throw format_error(path + ": duplicate vocabulary entry");
        idx.collection_tf_.assign(n_terms, 0);
        for (std::uint64_t n = 0; n < n_docs; ++n) {
            idx.ids_.push_back(io::read_pod<doc_id>(in));
            idx.titles_.push_back(io::read_string(in));
            auto terms = io::read_vector<std::uint32_t>(in);
            for (auto t : terms) {
                if (t >= n_terms) throw format_error(path + ": term id out of range");
            }
            idx.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
            idx.collection_length_ += terms.size();
            idx.terms_.push_back(std::move(terms));
        }
        for (std::uint64_t t = 0; t < n_terms; ++t) {
            auto p = io::read_vector<Posting>(in);
            for (const auto& post : p) {
                if (post.doc >= n_docs) throw format_error(path + ": posting doc out of range");
                idx.collection_tf_[t] += post.tf;
            }
            idx.postings_.push_back(std::move(p));
        }
        idx.finish();
        return idx;
    }

  private:
    double term_weight(std::uint32_t df, std::uint32_t tf, std::uint32_t len) const {
        double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_length_);
        return idf(df) * tf * (params_.k1 + 1.0) / (tf + norm);
    }

    /// Known query terms with multiplicities, in first-occurrence order.
    std::vector<std::pair<std::uint32_t, double>> query_terms(const token_seq& query) const {
        std::vector<std::pair<std::uint32_t, double>> out;
        for (const auto& w : query) {
            auto t = vocab_.find(w);
            if (t >= vocab_.size()) continue;
            auto it = std::find_if(out.begin(), out.end(), [t](const auto& p) { return p.first == t; });
            if (it == out.end()) {
                out.emplace_back(t, 1.0);
            } else {
                it->second += 1.0;
            }
        }
        return out;
    }

    void finish() {
        positions_.clear();
        for (std::uint32_t n = 0; n < ids_.size(); ++n) positions_[ids_[n]] = n;
        avg_doc_length_ = ids_.empty() ? 0.0 : static_cast<double>(collection_length_) / static_cast<double>(ids_.size());
    }

    Bm25Params params_;
    Vocabulary vocab_;
    std::vector<doc_id> ids_;
    std::vector<std::string> titles_;
    std::vector<std::vector<std::uint32_t>> terms_;
    std::vector<std::uint32_t> lengths_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint64_t> collection_tf_;
    std::uint64_t collection_length_ = 0;
    double avg_doc_length_ = 0.0;
    std::unordered_map<doc_id, std::uint32_t> positions_;
};

inline InvertedIndex build_index(const Corpus& corpus, Bm25Params params = {}) { return InvertedIndex(corpus, params); }

}  // namespace qrl
