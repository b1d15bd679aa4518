#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "index.hpp"
#include "neural.hpp"
#include "rl.hpp"

namespace qrl {

struct OracleConfig {
    std::size_t subset_size = 100;
    std::size_t patience_epochs = 50;  // epochs without a better subset reward
    std::size_t max_epochs = 500;
    std::uint64_t seed = 1;
};

struct SubsetResult {
    std::size_t index = 0;
    std::size_t first = 0;  // position of the subset's first query in the eval set
    std::size_t count = 0;
    double best_reward = 0.0;  // R_i*
    std::size_t epochs = 0;
    std::uint64_t init_checksum = 0;
};

struct OracleResult {
    std::vector<SubsetResult> subsets;
    double r_star = 0.0;
    EvalReport report;  // each query scored by its own subset's best model
};

inline double mean_subset_reward(const std::vector<SubsetResult>& subsets) {
    if (subsets.empty()) throw invalid_argument("no subsets");
    double s = 0.0;
    for (const auto& r : subsets) s += r.best_reward;
    return s / static_cast<double>(subsets.size());
}

inline std::uint64_t subset_seed(std::uint64_t seed, std::size_t i) { return seed * 1000003ull + i; }

/// Splits the eval set into contiguous subsets, overfits a freshly
/// initialized model of the given kind on each (validating on the subset
/// itself), and averages the best subset rewards. `metrics` fills the
/// per-query report of the best models.
inline OracleResult rl_oracle(const std::vector<QueryRecord>& eval, const InvertedIndex& index,
                              const EmbeddingTable& table, const ModelConfig& model_cfg, const RlConfig& cfg,
                              const OracleConfig& oc, const std::vector<MetricSpec>& metrics = {}) {
    if (oc.subset_size == 0) throw invalid_argument("subset size must be >= 1");
    if (eval.size() < oc.subset_size) throw invalid_argument("eval set smaller than the subset size");
    OracleResult out;
    out.report = EvalReport(metrics.empty() ? std::vector<MetricSpec>{{MetricKind::recall, cfg.reward.k}} : metrics);
    TrainConfig tc;
    tc.max_epochs = oc.max_epochs;
    tc.patience = oc.patience_epochs;
    for (std::size_t first = 0, i = 0; first < eval.size(); first += oc.subset_size, ++i) {
        auto last = std::min(eval.size(), first + oc.subset_size);
        std::vector<QueryRecord> subset(eval.begin() + static_cast<std::ptrdiff_t>(first),
                                        eval.begin() + static_cast<std::ptrdiff_t>(last));
        PolicyModel model(model_cfg, table, subset_seed(oc.seed, i));
        SubsetResult sr{i, first, subset.size(), 0.0, 0, model.parameters().checksum()};
        tc.eval_every = subset.size();
        try {
            auto res = train_policy(model, index, subset, subset, cfg, tc, subset_seed(oc.seed, i) ^ 0x5bd1e995u);
            sr.best_reward = std::max(0.0, res.best_valid);
            sr.epochs = res.log.size();
            auto ev = evaluate_policy(model, subset, index, cfg, out.report.metrics(), cfg.rounds);
            for (std::size_t q = 0; q < ev.report.size(); ++q) {
                out.report.add_row(ev.report.qids()[q], ev.report.row(q));
            }
        } catch (const numeric_error& e) {
            throw numeric_error("RL-Oracle subset " + std::to_string(i) + ": " + e.what());
        }
        out.subsets.push_back(sr);
    }
    out.r_star = mean_subset_reward(out.subsets);
    return out;
}

inline void write_oracle_tsv(std::ostream& out, const OracleResult& r) {
    out << "subset\tfirst\tqueries\tepochs\tR*\n";
    for (const auto& s : r.subsets) {
        out << s.index << '\t' << s.first << '\t' << s.count << '\t' << s.epochs << '\t' << s.best_reward << '\n';
    }
    out << "mean\t\t\t\t" << r.r_star << '\n';
}

}  // namespace qrl
