#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "baselines.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "neural.hpp"
#include "oracle.hpp"
#include "prf.hpp"
#include "rl.hpp"
#include "supervised.hpp"

namespace qrl {

struct SlConfig {
    double label_threshold = 0.005;
    ClassifierConfig classifier;
};

/// Everything a run needs besides the data files. Every section and key is
/// optional; unknown keys are rejected.
struct LabConfig {
    std::string corpus;      // JSON-lines corpus
    std::string embeddings;  // "token f1 ... fd" text vectors
    std::uint64_t seed = 1;
    std::size_t d = 32;
    nlohmann::json model = nlohmann::json::object();  // overrides of ModelConfig::defaults; radius comes from rl
    RlConfig rl;
    TrainConfig train;
    PrfConfig prf;
    SlConfig sl;
    OracleConfig oracle;
    std::size_t eval_k = 40;  // K of R@K and MAP@K in reports; P@10 is fixed

    /// Model shape for a kind, with the "model" section applied on top of the defaults.
    ModelConfig model_config(ModelKind kind, std::size_t embedding_dim) const {
        auto j = model;
        j["kind"] = to_string(kind);
        if (!j.contains("d")) j["d"] = d;
        auto c = model_config_from_json(j);
        c.embedding_dim = embedding_dim;
        c.context_radius = rl.pool.context_radius;
        return c;
    }

    std::vector<MetricSpec> metrics() const {
        return {{MetricKind::recall, eval_k}, {MetricKind::precision, 10}, {MetricKind::average_precision, eval_k}};
    }

    void validate() const {
        if (d == 0) throw invalid_argument("d must be positive");
        if (eval_k == 0) throw invalid_argument("eval_k must be positive");
        if (prf.n == 0 || prf.k == 0) throw invalid_argument("prf.n and prf.k must be >= 1");
        if (!(prf.rm.lambda >= 0.0 && prf.rm.lambda <= 1.0)) throw invalid_argument("prf.rm_lambda must lie in [0, 1]");
        if (!(prf.rm.mu > 0.0)) throw invalid_argument("prf.rm_mu must be positive");
        if (oracle.subset_size == 0) throw invalid_argument("oracle.subset_size must be >= 1");
        if (train.patience == 0) throw invalid_argument("train.patience must be >= 1");
        rl.validate();
        for (auto kind : {ModelKind::ff, ModelKind::cnn, ModelKind::rnn, ModelKind::rnn_seq}) {
            model_config(kind, 1).validate();
        }
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& section, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw format_error("config section '" + section + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const auto* k : keys) known = known || key == k;
        if (!known) throw format_error("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw format_error("config key '" + section + "." + key + "' has the wrong type");
    }
}

}  // namespace detail

inline LabConfig config_from_json(const nlohmann::json& j) {
    using detail::read_key;
    LabConfig c;
    detail::check_keys(j, "", {"corpus", "embeddings", "seed", "d", "model", "rl", "train", "prf", "sl", "oracle", "eval_k"});
    read_key(j, "corpus", c.corpus, "");
    read_key(j, "embeddings", c.embeddings, "");
    read_key(j, "seed", c.seed, "");
    read_key(j, "d", c.d, "");
    read_key(j, "eval_k", c.eval_k, "");
    if (j.contains("model")) {
        c.model = j.at("model");
        detail::check_keys(c.model, "model", {"d", "query_encoder", "term_encoder", "gated"});
    }
    if (j.contains("rl")) {
        const auto& r = j.at("rl");
        detail::check_keys(r, "rl",
                           {"M", "K", "context_radius", "epsilon", "lambda", "alpha", "lr", "beta1", "beta2", "adam_eps",
                            "reward_k", "rounds", "beam", "max_len", "clip_norm", "batch"});
        read_key(r, "M", c.rl.pool.max_words, "rl");
        read_key(r, "K", c.rl.pool.max_docs, "rl");
        read_key(r, "context_radius", c.rl.pool.context_radius, "rl");
        read_key(r, "epsilon", c.rl.epsilon, "rl");
        read_key(r, "lambda", c.rl.entropy_lambda, "rl");
        read_key(r, "alpha", c.rl.value_alpha, "rl");
        read_key(r, "lr", c.rl.adam.lr, "rl");
        read_key(r, "beta1", c.rl.adam.beta1, "rl");
        read_key(r, "beta2", c.rl.adam.beta2, "rl");
        read_key(r, "adam_eps", c.rl.adam.eps, "rl");
        read_key(r, "reward_k", c.rl.reward.k, "rl");
        read_key(r, "rounds", c.rl.rounds, "rl");
        read_key(r, "beam", c.rl.beam, "rl");
        read_key(r, "max_len", c.rl.max_len, "rl");
        read_key(r, "clip_norm", c.rl.clip_norm, "rl");
        read_key(r, "batch", c.rl.batch, "rl");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::check_keys(t, "train", {"max_epochs", "eval_every", "patience", "eval_rounds", "shuffle"});
        read_key(t, "max_epochs", c.train.max_epochs, "train");
        read_key(t, "eval_every", c.train.eval_every, "train");
        read_key(t, "patience", c.train.patience, "train");
        read_key(t, "eval_rounds", c.train.eval_rounds, "train");
        read_key(t, "shuffle", c.train.shuffle, "train");
    }
    if (j.contains("prf")) {
        const auto& p = j.at("prf");
        detail::check_keys(p, "prf", {"n", "k", "rm_lambda", "rm_mu"});
        read_key(p, "n", c.prf.n, "prf");
        read_key(p, "k", c.prf.k, "prf");
        read_key(p, "rm_lambda", c.prf.rm.lambda, "prf");
        read_key(p, "rm_mu", c.prf.rm.mu, "prf");
    }
    if (j.contains("sl")) {
        const auto& s = j.at("sl");
        detail::check_keys(s, "sl", {"label_threshold", "steps", "lr", "threshold"});
        read_key(s, "label_threshold", c.sl.label_threshold, "sl");
        read_key(s, "steps", c.sl.classifier.steps, "sl");
        read_key(s, "lr", c.sl.classifier.adam.lr, "sl");
        read_key(s, "threshold", c.sl.classifier.threshold, "sl");
    }
    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        detail::check_keys(o, "oracle", {"subset_size", "patience_epochs", "max_epochs"});
        read_key(o, "subset_size", c.oracle.subset_size, "oracle");
        read_key(o, "patience_epochs", c.oracle.patience_epochs, "oracle");
        read_key(o, "max_epochs", c.oracle.max_epochs, "oracle");
    }
    try {
        c.validate();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("bad model section: ") + e.what());
    }
    return c;
}

inline nlohmann::json to_json(const LabConfig& c) {
    return {{"corpus", c.corpus},
            {"embeddings", c.embeddings},
            {"seed", c.seed},
            {"d", c.d},
            {"model", c.model},
            {"eval_k", c.eval_k},
            {"rl",
             {{"M", c.rl.pool.max_words},
              {"K", c.rl.pool.max_docs},
              {"context_radius", c.rl.pool.context_radius},
              {"epsilon", c.rl.epsilon},
              {"lambda", c.rl.entropy_lambda},
              {"alpha", c.rl.value_alpha},
              {"lr", c.rl.adam.lr},
              {"beta1", c.rl.adam.beta1},
              {"beta2", c.rl.adam.beta2},
              {"adam_eps", c.rl.adam.eps},
              {"reward_k", c.rl.reward.k},
              {"rounds", c.rl.rounds},
              {"beam", c.rl.beam},
              {"max_len", c.rl.max_len},
              {"clip_norm", c.rl.clip_norm},
              {"batch", c.rl.batch}}},
            {"train",
             {{"max_epochs", c.train.max_epochs},
              {"eval_every", c.train.eval_every},
              {"patience", c.train.patience},
              {"eval_rounds", c.train.eval_rounds},
              {"shuffle", c.train.shuffle}}},
            {"prf", {{"n", c.prf.n}, {"k", c.prf.k}, {"rm_lambda", c.prf.rm.lambda}, {"rm_mu", c.prf.rm.mu}}},
            {"sl",
             {{"label_threshold", c.sl.label_threshold},
              {"steps", c.sl.classifier.steps},
              {"lr", c.sl.classifier.adam.lr},
              {"threshold", c.sl.classifier.threshold}}},
            {"oracle",
             {{"subset_size", c.oracle.subset_size},
              {"patience_epochs", c.oracle.patience_epochs},
              {"max_epochs", c.oracle.max_epochs}}}};
}

/// Relative data paths are resolved against the config file's directory.
inline LabConfig load_config(const std::string& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": " + e.what());
    }
    auto c = config_from_json(j);
    auto base = std::filesystem::path(path).parent_path();
    for (auto* f : {&c.corpus, &c.embeddings}) {
        if (!f->empty() && std::filesystem::path(*f).is_relative()) *f = (base / *f).lexically_normal().string();
    }
    return c;
}

}  // namespace qrl
