#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "index.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "prf.hpp"
#include "rl.hpp"

namespace qrl {

struct TermLabel {
    query_id qid = 0;
    std::size_t pool_index = 0;
    std::string term;
    double r = 0.0;        // reward of q0
    double r_prime = 0.0;  // reward of q0 ++ [term]
    bool relevant = false;
};

/// (R' - R) / R > threshold, or R' > 0 when R = 0.
inline bool improves(double r, double r_prime, double threshold = 0.005) {
    if (r == 0.0) return r_prime > 0.0;
    return (r_prime - r) / r > threshold;
}

/// Labels every pool entry by retrieving q0 ++ [term] on its own.
/// Retrievals are shared between repeated tokens.
inline std::vector<TermLabel> label_terms(const QueryRecord& query, const CandidatePool& pool,
                                          const InvertedIndex& index, const RewardConfig& rc,
                                          double threshold = 0.005) {
    if (pool.empty()) throw invalid_argument("cannot label an empty pool");
    const double r = reward(ids_of(index.search(query.tokens, rc.k)), query.relevant_ids, rc);
    std::unordered_map<std::string, double> cache;
    std::vector<TermLabel> out;
    out.reserve(pool.size());
    for (const auto& c : pool.terms) {
        auto it = cache.find(c.token);
        if (it == cache.end()) {
            auto q = query.tokens;
            q.push_back(c.token);
            try {
                it = cache.emplace(c.token, reward(ids_of(index.search(q, rc.k)), query.relevant_ids, rc)).first;
            } catch (const std::exception& e) {
                throw error("labeling term '" + c.token + "' of query " + std::to_string(query.qid) + ": " + e.what());
            }
        }
        out.push_back({query.qid, c.pool_index, c.token, r, it->second, improves(r, it->second, threshold)});
    }
    return out;
}

/// A test-time pool (q0 and its top-K results) with its labels.
struct LabeledPool {
    QueryRecord query;
    CandidatePool pool;
    std::vector<TermLabel> labels;

    std::vector<std::size_t> positives() const {
        std::vector<std::size_t> out;
        for (const auto& l : labels) {
            if (l.relevant) out.push_back(l.pool_index);
        }
        return out;
    }
};

inline CandidatePool test_pool(const token_seq& q0, const InvertedIndex& index, const PoolConfig& cfg) {
    return build_pool(q0, index.search(q0, cfg.max_docs), index, cfg);
}

inline void write_labels_header(std::ostream& out) { out << "qid\tterm\tR\tR'\trelevant\n"; }

inline void write_labels(std::ostream& out, const std::vector<TermLabel>& labels) {
    auto old = out.precision(17);
    for (const auto& l : labels) {
        out << l.qid << '\t' << l.term << '\t' << l.r << '\t' << l.r_prime << '\t' << (l.relevant ? 1 : 0) << '\n';
    }
    out.precision(old);
}

/// Rows grouped by qid in file order; pool_index is the row's position in its group.
inline std::map<query_id, std::vector<TermLabel>> read_labels(const std::string& path) {
    auto in = detail::open_input(path);
    std::map<query_id, std::vector<TermLabel>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("qid\t", 0) == 0) continue;
        if (detail::blank(line)) continue;
        std::istringstream ss(line);
        TermLabel l;
        int rel = 0;
        if (!(ss >> l.qid >> l.term >> l.r >> l.r_prime >> rel) || (rel != 0 && rel != 1)) {
            throw format_error(detail::where(path, lineno) + "malformed label row");
        }
        l.relevant = rel == 1;
        auto& v = out[l.qid];
        l.pool_index = v.size();
        v.push_back(std::move(l));
    }
    return out;
}

/// Labels each query's test-time pool, reusing cached rows whose terms line
/// up with the pool exactly.
inline std::vector<LabeledPool> label_queries(const std::vector<QueryRecord>& queries, const InvertedIndex& index,
                                              const PoolConfig& pool_cfg, const RewardConfig& rc,
                                              double threshold = 0.005,
                                              const std::map<query_id, std::vector<TermLabel>>* cache = nullptr) {
    std::vector<LabeledPool> out;
    for (const auto& q : queries) {
        LabeledPool lp{q, test_pool(q.tokens, index, pool_cfg), {}};
        if (lp.pool.empty()) continue;
        bool hit = false;
        if (cache) {
            auto it = cache->find(q.qid);
            if (it != cache->end() && it->second.size() == lp.pool.size()) {
                hit = std::equal(it->second.begin(), it->second.end(), lp.pool.terms.begin(),
                                 [](const TermLabel& l, const CandidateTerm& c) { return l.term == c.token; });
                if (hit) {
                    lp.labels = it->second;
                    for (auto& l : lp.labels) l.relevant = improves(l.r, l.r_prime, threshold);
                }
            }
        }
        if (!hit) lp.labels = label_terms(q, lp.pool, index, rc, threshold);
        out.push_back(std::move(lp));
    }
    return out;
}

inline double positive_fraction(const std::vector<LabeledPool>& data) {
    std::size_t pos = 0, all = 0;
    for (const auto& d : data) {
        for (const auto& l : d.labels) pos += l.relevant;
        all += d.labels.size();
    }
    return all ? static_cast<double>(pos) / static_cast<double>(all) : 0.0;
}

struct ClassifierConfig {
    std::size_t steps = 2000;  // Adam updates, one pool per update
    AdamConfig adam{1e-3};
    double threshold = 0.5;    // decision threshold at evaluation
    std::uint64_t seed = 1;
};

struct ClassifierResult {
    double initial_loss = 0.0;  // mean BCE over all labeled terms
    double final_loss = 0.0;
    double accuracy = 0.0;      // at the configured threshold
    std::size_t steps = 0;
};

namespace detail {

/// Mean binary cross-entropy of the scorer's logits against labels.
inline Var bce_loss(Graph& g, Var logits, const std::vector<TermLabel>& labels) {
    const auto n = labels.size();
    Matrix y(n, 1), one_minus_y(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        y.data[i] = labels[i].relevant ? 1.0 : 0.0;
        one_minus_y.data[i] = 1.0 - y.data[i];
    }
    auto pos = g.mul(g.constant(std::move(y)), g.log_sigmoid(logits));
    auto neg = g.mul(g.constant(std::move(one_minus_y)), g.log_sigmoid(g.scale(logits, -1.0)));
    return g.scale(g.sum(g.add(pos, neg)), -1.0 / static_cast<double>(n));
}

inline std::pair<double, double> loss_and_accuracy(const PolicyModel& model, const std::vector<LabeledPool>& data,
                                                   double threshold) {
    double loss = 0.0;
    std::size_t correct = 0, all = 0;
    for (const auto& d : data) {
        Graph g;
        auto f = model.forward(g, d.query.tokens, d.pool, false);
        loss += g.scalar(bce_loss(g, f.logits, d.labels)) * static_cast<double>(d.labels.size());
        const auto& z = g.value(f.logits).data;
        for (std::size_t i = 0; i < z.size(); ++i) correct += (stable_sigmoid(z[i]) > threshold) == d.labels[i].relevant;
        all += d.labels.size();
    }
    return {loss / static_cast<double>(all), static_cast<double>(correct) / static_cast<double>(all)};
}

}  // namespace detail

/// Fits the per-term scorer of a selection model to term labels by Adam on
/// per-pool mean binary cross-entropy.
inline ClassifierResult train_classifier(PolicyModel& model, const std::vector<LabeledPool>& data,
                                         const ClassifierConfig& cfg) {
    if (model.is_sequential()) throw invalid_argument("the classifier needs a selection model");
    std::size_t pos = 0, all = 0;
    for (const auto& d : data) {
        for (const auto& l : d.labels) pos += l.relevant;
        all += d.labels.size();
    }
    if (pos == 0 || pos == all) throw invalid_argument("classifier training needs both positive and negative labels");
    ClassifierResult res;
    res.initial_loss = detail::loss_and_accuracy(model, data, cfg.threshold).first;
    Adam opt(model.parameters().policy, cfg.adam);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t next = order.size();
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        if (next == order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            next = 0;
        }
        const auto& d = data[order[next++]];
        model.parameters().policy.zero_grad();
        Graph g;
        auto f = model.forward(g, d.query.tokens, d.pool, false);
        g.backward(detail::bce_loss(g, f.logits, d.labels));
        opt.step();
        ++res.steps;
    }
    std::tie(res.final_loss, res.accuracy) = detail::loss_and_accuracy(model, data, cfg.threshold);
    return res;
}

/// Appends every positively labeled pool entry to q0 (pool order) and
/// evaluates the resulting retrieval.
inline EvalReport sl_oracle_eval(const std::vector<LabeledPool>& data, const InvertedIndex& index,
                                 const std::vector<MetricSpec>& metrics = default_metrics()) {
    EvalReport report(metrics);
    auto depth = depth_needed(metrics);
    for (const auto& d : data) {
        auto q = append_terms(d.query.tokens, d.pool, d.positives());
        report.add(d.query.qid, ids_of(index.search(q, depth)), d.query.relevant_ids);
    }
    return report;
}

/// SL-Oracle over raw queries; queries whose pool is empty keep q0.
inline EvalReport sl_oracle_eval(const std::vector<QueryRecord>& queries, const InvertedIndex& index,
                                 const PoolConfig& pool_cfg, const RewardConfig& rc,
                                 const std::vector<MetricSpec>& metrics = default_metrics(), double threshold = 0.005) {
    EvalReport report(metrics);
    auto depth = depth_needed(metrics);
    for (const auto& q : queries) {
        auto pool = test_pool(q.tokens, index, pool_cfg);
        auto terms = q.tokens;
        if (!pool.empty()) {
            LabeledPool lp{q, pool, label_terms(q, pool, index, rc, threshold)};
            terms = append_terms(q.tokens, pool, lp.positives());
        }
        report.add(q.qid, ids_of(index.search(terms, depth)), q.relevant_ids);
    }
    return report;
}

}  // namespace qrl
