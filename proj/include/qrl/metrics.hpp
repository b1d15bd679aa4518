#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "index.hpp"

namespace qrl {

namespace detail {

inline bool is_relevant(doc_id d, const std::vector<doc_id>& relevant_sorted) {
    return std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), d);
}

inline std::vector<doc_id> sorted_unique(std::vector<doc_id> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline std::size_t hits_at(const std::vector<doc_id>& retrieved, const std::vector<doc_id>& rel, std::size_t k) {
    std::size_t n = std::min(k, retrieved.size()), hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += is_relevant(retrieved[i], rel);
    return hits;
}

}  // namespace detail

inline std::vector<doc_id> ids_of(const SearchResult& r) {
    std::vector<doc_id> out;
    out.reserve(r.size());
    for (const auto& s : r) out.push_back(s.id);
    return out;
}

/// |D_K ∩ D*| / |D*|
inline double recall_at_k(const std::vector<doc_id>& retrieved, const std::vector<doc_id>& relevant, std::size_t k) {
    if (relevant.empty()) throw invalid_argument("recall needs a non-empty relevant set");
    if (k == 0) throw invalid_argument("k must be >= 1");
    auto rel = detail::sorted_unique(relevant);
    return static_cast<double>(detail::hits_at(retrieved, rel, k)) / static_cast<double>(rel.size());
}

/// |D_K ∩ D*| / |D_K|, where D_K is what was actually retrieved (0 if nothing was).
inline double precision_at_k(const std::vector<doc_id>& retrieved, const std::vector<doc_id>& relevant, std::size_t k) {
    if (k == 0) throw invalid_argument("k must be >= 1");
    auto n = std::min(k, retrieved.size());
    if (n == 0) return 0.0;
    auto rel = detail::sorted_unique(relevant);
    return static_cast<double>(detail::hits_at(retrieved, rel, k)) / static_cast<double>(n);
}

inline double average_precision_at_k(const std::vector<doc_id>& retrieved, const std::vector<doc_id>& relevant,
                                     std::size_t k) {
    if (relevant.empty()) throw invalid_argument("average precision needs a non-empty relevant set");
    if (k == 0) throw invalid_argument("k must be >= 1");
    auto rel = detail::sorted_unique(relevant);
    auto n = std::min(k, retrieved.size());
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (detail::is_relevant(retrieved[j], rel)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(j + 1);
        }
    }
    return sum / static_cast<double>(rel.size());
}

inline double map_at_k(const std::vector<double>& ap) {
    if (ap.empty()) throw invalid_argument("MAP over an empty query set");
    return std::accumulate(ap.begin(), ap.end(), 0.0) / static_cast<double>(ap.size());
}

/// R@K used as the reinforcement signal.
struct RewardConfig {
    std::size_t k = 40;
};

inline double reward(const std::vector<doc_id>& retrieved, const std::vector<doc_id>& relevant,
                     const RewardConfig& cfg = {}) {
    return recall_at_k(retrieved, relevant, cfg.k);
}

enum class MetricKind { recall, precision, average_precision };

struct MetricSpec {
    MetricKind kind;
    std::size_t k;

    std::string name() const {
        switch (kind) {
            case MetricKind::recall: return "R@" + std::to_string(k);
            case MetricKind::precision: return "P@" + std::to_string(k);
            case MetricKind::average_precision: return "MAP@" + std::to_string(k);
        }
        return "?";
    }

    double evaluate(const std::vector<doc_id>& retrieved, const std::vector<doc_id>& relevant) const {
        switch (kind) {
            case MetricKind::recall: return recall_at_k(retrieved, relevant, k);
            case MetricKind::precision: return precision_at_k(retrieved, relevant, k);
            case MetricKind::average_precision: return average_precision_at_k(retrieved, relevant, k);
        }
        return 0.0;
    }

    static MetricSpec parse(const std::string& s) {
        auto at = s.find('@');
        if (at == std::string::npos) throw invalid_argument("bad metric '" + s + "'");
        auto head = s.substr(0, at);
        std::size_t k = 0;
        try {
            k = std::stoul(s.substr(at + 1));
        } catch (const std::exception&) {
            throw invalid_argument("bad metric '" + s + "'");
        }
        if (k == 0) throw invalid_argument("bad metric '" + s + "'");
        if (head == "R") return {MetricKind::recall, k};
        if (head == "P") return {MetricKind::precision, k};
        if (head == "MAP" || head == "AP") return {MetricKind::average_precision, k};
        throw invalid_argument("bad metric '" + s + "'");
    }
};

inline std::vector<MetricSpec> default_metrics() {
    return {{MetricKind::recall, 40}, {MetricKind::precision, 10}, {MetricKind::average_precision, 40}};
}

inline std::size_t depth_needed(const std::vector<MetricSpec>& metrics) {
    std::size_t k = 1;
    for (const auto& m : metrics) k = std::max(k, m.k);
    return k;
}

/// Per-query and mean values for a fixed list of metrics.
class EvalReport {
  public:
    explicit EvalReport(std::vector<MetricSpec> metrics = default_metrics()) : metrics_(std::move(metrics)) {}

    void add(query_id qid, const std::vector<doc_id>& retrieved, const std::vector<doc_id>& relevant) {
        std::vector<double> row;
        row.reserve(metrics_.size());
        for (const auto& m : metrics_) row.push_back(m.evaluate(retrieved, relevant));
        qids_.push_back(qid);
        rows_.push_back(std::move(row));
    }

    /// Appends precomputed metric values, in metric order.
    void add_row(query_id qid, std::vector<double> row) {
        if (row.size() != metrics_.size()) throw invalid_argument("row width does not match the metric list");
        qids_.push_back(qid);
        rows_.push_back(std::move(row));
    }

    const std::vector<MetricSpec>& metrics() const { return metrics_; }
    const std::vector<double>& row(std::size_t query) const { return rows_.at(query); }
    std::size_t size() const { return rows_.size(); }
    const std::vector<query_id>& qids() const { return qids_; }
    double value(std::size_t query, std::size_t metric) const { return rows_.at(query).at(metric); }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < metrics_.size(); ++i) {
            if (metrics_[i].name() == name) return i;
        }
        throw not_found("metric " + name + " not in report");
    }

    /// Arithmetic mean over queries (MAP for the AP columns).
    double mean(std::size_t metric) const {
        if (rows_.empty()) throw invalid_argument("empty report");
        std::vector<double> col;
        col.reserve(rows_.size());
        for (const auto& r : rows_) col.push_back(r[metric]);
        return map_at_k(col);
    }

    double mean(const std::string& name) const { return mean(column(name)); }

    void write_tsv(std::ostream& out) const {
        out << "qid";
        for (const auto& m : metrics_) out << '\t' << m.name();
        out << '\n' << std::setprecision(6) << std::fixed;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            out << qids_[i];
            for (double v : rows_[i]) out << '\t' << v;
            out << '\n';
        }
        out << "mean";
        for (std::size_t m = 0; m < metrics_.size(); ++m) out << '\t' << mean(m);
        out << '\n';
        out.unsetf(std::ios::fixed);
    }

    nlohmann::json summary(const std::string& method) const {
        nlohmann::json j = {{"method", method}, {"queries", rows_.size()}};
        for (std::size_t m = 0; m < metrics_.size(); ++m) j[metrics_[m].name()] = rows_.empty() ? 0.0 : mean(m);
        return j;
    }

  private:
    std::vector<MetricSpec> metrics_;
    std::vector<query_id> qids_;
    std::vector<std::vector<double>> rows_;
};

}  // namespace qrl
