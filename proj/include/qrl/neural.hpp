#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "binary_io.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "prf.hpp"
#include "tensor.hpp"

namespace qrl {

enum class EncoderKind { feed_forward, convolutional, recurrent };
enum class ModelKind { ff, cnn, rnn, rnn_seq };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::ff: return "ff";
        case ModelKind::cnn: return "cnn";
        case ModelKind::rnn: return "rnn";
        case ModelKind::rnn_seq: return "rnn-seq";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "ff") return ModelKind::ff;
    if (s == "cnn") return ModelKind::cnn;
    if (s == "rnn") return ModelKind::rnn;
    if (s == "rnn-seq") return ModelKind::rnn_seq;
    throw invalid_argument("unknown model kind '" + s + "' (expected ff|cnn|rnn|rnn-seq)");
}

inline std::string to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::feed_forward: return "ff";
        case EncoderKind::convolutional: return "cnn";
        case EncoderKind::recurrent: return "rnn";
    }
    return "?";
}

inline EncoderKind parse_encoder_kind(const std::string& s) {
    if (s == "ff") return EncoderKind::feed_forward;
    if (s == "cnn") return EncoderKind::convolutional;
    if (s == "rnn") return EncoderKind::recurrent;
    throw invalid_argument("unknown encoder kind '" + s + "'");
}

struct EncoderConfig {
    EncoderKind kind = EncoderKind::convolutional;
    std::vector<std::size_t> windows{3, 3};  // convolutional: one odd window per layer
    std::size_t filters = 256;               // convolutional: channels of the non-final layers
    std::size_t hidden = 128;                // recurrent: units per direction
    std::size_t layers = 2;                  // recurrent
    bool bidirectional = true;               // recurrent

    void validate(std::size_t d) const {
        if (kind == EncoderKind::convolutional) {
            if (windows.empty()) throw invalid_argument("convolutional encoder needs at least one layer");
            for (auto w : windows) {
                if (w == 0 || w % 2 == 0) throw invalid_argument("convolution windows must be odd");
            }
            if (filters == 0) throw invalid_argument("filter count must be positive");
        }
        if (kind == EncoderKind::recurrent) {
            if (hidden == 0 || layers == 0) throw invalid_argument("recurrent sizes must be positive");
            if (hidden * (bidirectional ? 2 : 1) != d) {
                throw invalid_argument("recurrent encoder output (hidden x directions) must equal d");
            }
        }
    }

    bool operator==(const EncoderConfig&) const = default;
};

struct ModelConfig {
    ModelKind kind = ModelKind::cnn;
    std::size_t d = 256;
    std::size_t embedding_dim = 0;  // taken from the embedding table when 0
    std::size_t context_radius = 4;
    EncoderConfig query_encoder;
    EncoderConfig term_encoder;
    bool gated = true;  // sequence generator: LSTM cell, or the plain tanh recurrence when false

    /// Layer shapes for a model kind at dimension d: 2-layer convolutions
    /// (windows 3,3 for queries and 9,3 for candidates), 2-layer
    /// bidirectional LSTMs with d/2 units per direction, or one
    /// feed-forward hidden layer.
    static ModelConfig defaults(ModelKind kind, std::size_t d) {
        ModelConfig c;
        c.kind = kind;
        c.d = d;
        switch (kind) {
            case ModelKind::ff:
                c.query_encoder.kind = c.term_encoder.kind = EncoderKind::feed_forward;
                break;
            case ModelKind::cnn:
                c.query_encoder.kind = c.term_encoder.kind = EncoderKind::convolutional;
                c.query_encoder.windows = {3, 3};
                c.term_encoder.windows = {9, 3};
                c.query_encoder.filters = c.term_encoder.filters = d;
                break;
            case ModelKind::rnn:
            case ModelKind::rnn_seq:
                c.query_encoder.kind = c.term_encoder.kind = EncoderKind::recurrent;
                c.query_encoder.hidden = c.term_encoder.hidden = d / 2;
                break;
        }
        return c;
    }

    void validate() const {
        if (d == 0) throw invalid_argument("model dimension d must be positive");
        if (embedding_dim == 0) throw invalid_argument("embedding dimension not set");
        query_encoder.validate(d);
        term_encoder.validate(d);
    }

    bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const EncoderConfig& e) {
    return {{"kind", to_string(e.kind)}, {"windows", e.windows},        {"filters", e.filters},
            {"hidden", e.hidden},        {"layers", e.layers},          {"bidirectional", e.bidirectional}};
}

inline EncoderConfig encoder_from_json(const nlohmann::json& j, EncoderConfig base = {}) {
    if (j.contains("kind")) base.kind = parse_encoder_kind(j.at("kind").get<std::string>());
    if (j.contains("windows")) base.windows = j.at("windows").get<std::vector<std::size_t>>();
    if (j.contains("filters")) base.filters = j.at("filters").get<std::size_t>();
    if (j.contains("hidden")) base.hidden = j.at("hidden").get<std::size_t>();
    if (j.contains("layers")) base.layers = j.at("layers").get<std::size_t>();
    if (j.contains("bidirectional")) base.bidirectional = j.at("bidirectional").get<bool>();
    return base;
}

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"kind", to_string(c.kind)},
            {"d", c.d},
            {"embedding_dim", c.embedding_dim},
            {"context_radius", c.context_radius},
            {"query_encoder", to_json(c.query_encoder)},
            {"term_encoder", to_json(c.term_encoder)},
            {"gated", c.gated}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    auto kind = parse_model_kind(j.at("kind").get<std::string>());
    auto c = ModelConfig::defaults(kind, j.at("d").get<std::size_t>());
    if (j.contains("embedding_dim")) c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    if (j.contains("context_radius")) c.context_radius = j.at("context_radius").get<std::size_t>();
    if (j.contains("query_encoder")) c.query_encoder = encoder_from_json(j.at("query_encoder"), c.query_encoder);
    if (j.contains("term_encoder")) c.term_encoder = encoder_from_json(j.at("term_encoder"), c.term_encoder);
    if (j.contains("gated")) c.gated = j.at("gated").get<bool>();
    return c;
}

/// Candidate windows as row indices into a local embedding matrix; -1 is the
/// null padding token.
struct WindowIndex {
    std::size_t count = 0;
    std::size_t width = 0;  // 2k+1
    std::vector<int> rows;

    int at(std::size_t candidate, std::size_t pos) const { return rows[candidate * width + pos]; }
};

/// Turns a token sequence or a set of candidate windows into vectors.
class Encoder {
  public:
    virtual ~Encoder() = default;
    /// φ over a whole sequence x (L×e) -> 1×d.
    virtual Var encode_sequence(Graph& g, Var x) const = 0;
    /// One d-vector per window, depending only on that window's tokens.
    virtual Var encode_windows(Graph& g, Var x, const WindowIndex& w) const = 0;
};

namespace detail {

inline std::vector<int> centre_rows(const WindowIndex& w) {
    std::vector<int> rows(w.count);
    for (std::size_t i = 0; i < w.count; ++i) rows[i] = w.at(i, w.width / 2);
    return rows;
}

}  // namespace detail

/// One tanh hidden layer per token. Sequences are averaged; a window is
/// represented by its centre token.
class FeedForwardEncoder final : public Encoder {
  public:
    FeedForwardEncoder(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t d)
        : w_(params.add(prefix + ".weight", d, in)), b_(params.add(prefix + ".bias", 1, d)) {}

    Var encode_sequence(Graph& g, Var x) const override {
        if (g.value(x).rows == 0) throw invalid_argument("cannot encode an empty sequence");
        return g.mean_rows(hidden(g, x));
    }

    Var encode_windows(Graph& g, Var x, const WindowIndex& w) const override {
        return hidden(g, g.gather(x, detail::centre_rows(w)));
    }

  private:
    Var hidden(Graph& g, Var x) const { return g.tanh(g.linear(x, g.param(w_), g.param(b_))); }

    Tensor& w_;
    Tensor& b_;
};

/// Stack of "same"-padded 1-D convolutions with tanh, followed by max
/// pooling over positions for sequences. Windows are convolved as short
/// zero-padded sequences and read out at the centre.
class ConvEncoder final : public Encoder {
  public:
    ConvEncoder(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t d,
                const EncoderConfig& cfg)
        : windows_(cfg.windows) {
        std::size_t width = in;
        for (std::size_t l = 0; l < windows_.size(); ++l) {
            std::size_t out = l + 1 == windows_.size() ? d : cfg.filters;
            auto name = prefix + ".conv" + std::to_string(l);
            weights_.push_back(&params.add(name + ".weight", out, windows_[l] * width));
            biases_.push_back(&params.add(name + ".bias", 1, out));
            width = out;
        }
    }

    Var encode_sequence(Graph& g, Var x) const override {
        auto len = static_cast<int>(g.value(x).rows);
        if (len == 0) throw invalid_argument("cannot encode an empty sequence");
        Var h = x;
        for (std::size_t l = 0; l < windows_.size(); ++l) {
            int r = static_cast<int>(windows_[l] / 2);
            std::vector<int> idx;
            idx.reserve(static_cast<std::size_t>(len) * windows_[l]);
            for (int j = 0; j < len; ++j) {
                for (int o = -r; o <= r; ++o) idx.push_back(j + o >= 0 && j + o < len ? j + o : -1);
            }
            h = layer(g, l, g.gather(h, std::move(idx), windows_[l]));
        }
        return g.max_rows(h);
    }

    Var encode_windows(Graph& g, Var x, const WindowIndex& w) const override {
        const int k = static_cast<int>(w.width / 2);
        const std::size_t layers = windows_.size();
        // offsets (relative to the centre) needed at each layer's output
        std::vector<std::vector<int>> need(layers + 1);
        need[layers] = {0};
        for (std::size_t l = layers; l-- > 0;) {
            std::set<int> s;
            int r = static_cast<int>(windows_[l] / 2);
            for (int o : need[l + 1]) {
                for (int j = -r; j <= r; ++j) {
                    if (std::abs(o + j) <= k) s.insert(o + j);
                }
            }
            need[l].assign(s.begin(), s.end());
        }
        auto slot = [&](std::size_t level, int offset) {
            const auto& v = need[level];
            return static_cast<int>(std::lower_bound(v.begin(), v.end(), offset) - v.begin());
        };

        Var h = x;
        for (std::size_t l = 0; l < layers; ++l) {
            int r = static_cast<int>(windows_[l] / 2);
            const auto& outs = need[l + 1];
            std::vector<int> idx;
            idx.reserve(w.count * outs.size() * windows_[l]);
            for (std::size_t i = 0; i < w.count; ++i) {
                for (int o : outs) {
                    for (int j = -r; j <= r; ++j) {
                        int p = o + j;
                        if (std::abs(p) > k) {
                            idx.push_back(-1);
                        } else if (l == 0) {
                            idx.push_back(w.at(i, static_cast<std::size_t>(p + k)));
                        } else {
                            idx.push_back(static_cast<int>(i * need[l].size()) + slot(l, p));
                        }
                    }
                }
            }
            h = layer(g, l, g.gather(h, std::move(idx), windows_[l]));
        }
        return h;
    }

  private:
    Var layer(Graph& g, std::size_t l, Var cols) const {
        return g.tanh(g.linear(cols, g.param(*weights_[l]), g.param(*biases_[l])));
    }

    std::vector<std::size_t> windows_;
    std::vector<Tensor*> weights_;
    std::vector<Tensor*> biases_;
};

/// Standard LSTM cell (input, forget, output gates) over a batch of rows.
struct LstmCell {
    Tensor* wx = nullptr;  // 4h × in
    Tensor* wh = nullptr;  // 4h × h
    Tensor* bias = nullptr;
    std::size_t hidden = 0;

    LstmCell() = default;
    LstmCell(ParameterSet& params, const std::string& name, std::size_t in, std::size_t h)
        : wx(&params.add(name + ".wx", 4 * h, in)),
          wh(&params.add(name + ".wh", 4 * h, h)),
          bias(&params.add(name + ".bias", 1, 4 * h)),
          hidden(h) {}

    struct State {
        Var h;
        Var c;
    };

    State step(Graph& g, Var x, State s) const {
        auto z = g.add(g.linear(x, g.param(*wx), g.param(*bias)), g.linear(s.h, g.param(*wh)));
        auto i = g.sigmoid(g.slice_cols(z, 0, hidden));
        auto f = g.sigmoid(g.slice_cols(z, hidden, 2 * hidden));
        auto u = g.tanh(g.slice_cols(z, 2 * hidden, 3 * hidden));
        auto o = g.sigmoid(g.slice_cols(z, 3 * hidden, 4 * hidden));
        auto c = g.add(g.mul(f, s.c), g.mul(i, u));
        return {g.mul(o, g.tanh(c)), c};
    }
};

/// Multi-layer (optionally bidirectional) LSTM. A sequence is represented by
/// the top layer's final forward state joined with its final backward state;
/// a window by the top layer's output at the centre position.
class RecurrentEncoder final : public Encoder {
  public:
    RecurrentEncoder(ParameterSet& params, const std::string& prefix, std::size_t in, const EncoderConfig& cfg)
        : hidden_(cfg.hidden), dirs_(cfg.bidirectional ? 2 : 1) {
        std::size_t width = in;
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            auto name = prefix + ".lstm" + std::to_string(l);
            forward_.emplace_back(params, name + ".fwd", width, hidden_);
            if (dirs_ == 2) backward_.emplace_back(params, name + ".bwd", width, hidden_);
            width = hidden_ * dirs_;
        }
    }

    Var encode_sequence(Graph& g, Var x) const override {
        auto len = g.value(x).rows;
        if (len == 0) throw invalid_argument("cannot encode an empty sequence");
        std::vector<Var> steps;
        for (std::size_t t = 0; t < len; ++t) steps.push_back(g.gather(x, {static_cast<int>(t)}));
        auto [fwd, bwd] = run(g, steps, 1);
        if (dirs_ == 1) return fwd.back();
        return g.concat_cols(fwd.back(), bwd.front());
    }

    Var encode_windows(Graph& g, Var x, const WindowIndex& w) const override {
        std::vector<Var> steps;
        for (std::size_t t = 0; t < w.width; ++t) {
            std::vector<int> idx(w.count);
            for (std::size_t i = 0; i < w.count; ++i) idx[i] = w.at(i, t);
            steps.push_back(g.gather(x, std::move(idx)));
        }
        auto [fwd, bwd] = run(g, steps, w.count);
        auto centre = w.width / 2;
        if (dirs_ == 1) return fwd[centre];
        return g.concat_cols(fwd[centre], bwd[centre]);
    }

  private:
    using Outputs = std::vector<Var>;

    std::pair<Outputs, Outputs> run(Graph& g, std::vector<Var> steps, std::size_t batch) const {
        Outputs fwd, bwd;
        for (std::size_t l = 0; l < forward_.size(); ++l) {
            fwd = scan(g, forward_[l], steps, batch, false);
            if (dirs_ == 2) {
                bwd = scan(g, backward_[l], steps, batch, true);
                for (std::size_t t = 0; t < steps.size(); ++t) steps[t] = g.concat_cols(fwd[t], bwd[t]);
            } else {
                steps = fwd;
            }
        }
        return {fwd, bwd};
    }

    Outputs scan(Graph& g, const LstmCell& cell, const std::vector<Var>& steps, std::size_t batch,
                 bool reverse) const {
        Outputs out(steps.size());
        LstmCell::State s{g.constant(Matrix(batch, hidden_)), g.constant(Matrix(batch, hidden_))};
        for (std::size_t n = 0; n < steps.size(); ++n) {
            auto t = reverse ? steps.size() - 1 - n : n;
            s = cell.step(g, steps[t], s);
            out[t] = s.h;
        }
        return out;
    }

    std::size_t hidden_;
    std::size_t dirs_;
    std::vector<LstmCell> forward_;
    std::vector<LstmCell> backward_;
};

inline std::unique_ptr<Encoder> make_encoder(ParameterSet& params, const std::string& prefix, std::size_t in,
                                             std::size_t d, const EncoderConfig& cfg) {
    switch (cfg.kind) {
        case EncoderKind::feed_forward: return std::make_unique<FeedForwardEncoder>(params, prefix, in, d);
        case EncoderKind::convolutional: return std::make_unique<ConvEncoder>(params, prefix, in, d, cfg);
        case EncoderKind::recurrent: return std::make_unique<RecurrentEncoder>(params, prefix, in, cfg);
    }
    throw invalid_argument("unknown encoder kind");
}

/// Learnable tensors of a reformulator, split into the policy side (encoders,
/// term scorer, OOV vector, sequence generator) and the value network. The
/// two sets never share a tensor.
struct PolicyParameters {
    ParameterSet policy;
    ParameterSet value;

    std::uint64_t checksum() const { return policy.checksum() * 31 + value.checksum(); }
};

/// P(t_i | q0) = σ(Uᵀ tanh(W [φa ∥ φb(e_i)]) + b), returned as logits
/// (pre-sigmoid), one row per candidate.
inline Var term_logits(Graph& g, Var query_vec, Var term_vecs, Tensor& w, Tensor& u, Tensor& b) {
    auto hidden = g.tanh(g.linear(g.concat_cols(query_vec, term_vecs), g.param(w)));
    return g.linear(hidden, g.param(u), g.param(b));
}

/// R̄ = σ(Sᵀ tanh(V [φa ∥ mean_i φb(e_i)]) + b_v).
inline Var value_estimate(Graph& g, Var query_vec, Var term_vecs, Tensor& v, Tensor& s, Tensor& b) {
    if (g.value(term_vecs).rows == 0) throw invalid_argument("value estimate needs a non-empty pool");
    auto pooled = g.mean_rows(term_vecs);
    auto hidden = g.tanh(g.linear(g.concat_cols(query_vec, pooled), g.param(v)));
    return g.sigmoid(g.linear(hidden, g.param(s), g.param(b)));
}

/// Recurrent state of the sequential generator.
struct SeqState {
    Var h;
    Var c;
};

/// The learned pieces of the term-by-term generator.
///
/// gated: h_k from an LSTM cell whose pre-activation is
///   W_a φa + W_b φb(t^{k-1}) + W_h h_{k-1} + bias (4d rows: i, f, u, o).
/// ungated: h_k = tanh(W_a φa + W_b φb(t^{k-1}) + W_h h_{k-1}).
struct SequenceGenerator {
    Tensor* wa = nullptr;
    Tensor* wb = nullptr;
    Tensor* wh = nullptr;
    Tensor* bias = nullptr;
    Tensor* start = nullptr;  // stands in for φb(t^0)
    Tensor* stop = nullptr;   // STOP token vector
    std::size_t d = 0;
    bool gated = true;

    SequenceGenerator() = default;
    SequenceGenerator(ParameterSet& params, std::size_t dim, bool is_gated) : d(dim), gated(is_gated) {
        std::size_t rows = gated ? 4 * d : d;
        wa = &params.add("seq.wa", rows, d);
        wb = &params.add("seq.wb", rows, d);
        wh = &params.add("seq.wh", rows, d);
        if (gated) bias = &params.add("seq.bias", 1, rows);
        start = &params.add("seq.start", 1, d);
        stop = &params.add("seq.stop", 1, d);
    }

    SeqState initial(Graph& g) const { return {g.constant(Matrix(1, d)), g.constant(Matrix(1, d))}; }

    SeqState step(Graph& g, Var query_vec, Var prev_term, SeqState s) const {
        auto z = g.add(g.add(g.linear(query_vec, g.param(*wa)), g.linear(prev_term, g.param(*wb))),
                       g.linear(s.h, g.param(*wh)));
        if (!gated) {
            auto h = g.tanh(z);
            return {h, h};
        }
        z = g.add(z, g.param(*bias));
        auto i = g.sigmoid(g.slice_cols(z, 0, d));
        auto f = g.sigmoid(g.slice_cols(z, d, 2 * d));
        auto u = g.tanh(g.slice_cols(z, 2 * d, 3 * d));
        auto o = g.sigmoid(g.slice_cols(z, 3 * d, 4 * d));
        auto c = g.add(g.mul(f, s.c), g.mul(i, u));
        return {g.mul(o, g.tanh(c)), c};
    }

    /// log P over candidates then STOP (last row): softmax of φb(e_i)ᵀ h_k.
    Var log_probs(Graph& g, Var h, Var term_vecs) const {
        auto options = g.stack_rows({term_vecs, g.param(*stop)});
        return g.log_softmax(g.linear(options, h));
    }
};

/// Everything one forward pass over (query, pool) produces.
struct PolicyForward {
    Var query_vec;       // φa, 1×d
    Var term_vecs;       // φb, n×d
    Var logits;          // n×1, selection models only
    Var value;           // R̄, 1×1, computed on detached encoder outputs
};

/// Query-reformulation policy: encoders, per-term scorer or sequential
/// generator, and the value-network baseline.
class PolicyModel {
  public:
    PolicyModel(ModelConfig cfg, const EmbeddingTable& table, std::uint64_t seed) : cfg_(std::move(cfg)), table_(&table) {
        if (cfg_.embedding_dim == 0) cfg_.embedding_dim = table.dimension();
        if (cfg_.embedding_dim != table.dimension()) {
            throw invalid_argument("model embedding dimension does not match the embedding table");
        }
        cfg_.validate();
        const auto d = cfg_.d, e = cfg_.embedding_dim;
        auto& p = params_.policy;
        oov_ = &p.add("oov", 1, e);
        query_encoder_ = make_encoder(p, "query", e, d, cfg_.query_encoder);
        term_encoder_ = make_encoder(p, "term", e, d, cfg_.term_encoder);
        if (is_sequential()) {
            seq_ = SequenceGenerator(p, d, cfg_.gated);
        } else {
            w_ = &p.add("scorer.w", d, 2 * d);
            u_ = &p.add("scorer.u", 1, d);
            b_ = &p.add("scorer.bias", 1, 1);
        }
        v_ = &params_.value.add("value.v", d, 2 * d);
        s_ = &params_.value.add("value.s", 1, d);
        bv_ = &params_.value.add("value.bias", 1, 1);
        reinitialize(seed);
    }

    PolicyModel(const PolicyModel&) = delete;
    PolicyModel& operator=(const PolicyModel&) = delete;

    void reinitialize(std::uint64_t seed) {
        init_uniform(params_.policy, seed);
        init_uniform(params_.value, seed ^ 0x9e3779b97f4a7c15ull);
        std::copy(table_->oov().begin(), table_->oov().end(), oov_->value.data.begin());
    }

    const ModelConfig& config() const { return cfg_; }
    bool is_sequential() const { return cfg_.kind == ModelKind::rnn_seq; }
    PolicyParameters& parameters() { return params_; }
    const PolicyParameters& parameters() const { return params_; }
    const EmbeddingTable& embeddings() const { return *table_; }
    const SequenceGenerator& generator() const { return seq_; }
    Tensor& scorer_bias() { return *b_; }

    /// Pool-local embedding matrix; OOV rows are tied to the learnable vector.
    struct Inputs {
        Var rows;
        std::vector<int> query_rows;
        WindowIndex windows;
    };

    Inputs embed(Graph& g, const token_seq& query, const CandidatePool& pool) const {
        std::unordered_map<std::string, int> local;
        std::vector<const std::string*> order;
        auto row_of = [&](const std::string& t) -> int {
            if (t.empty()) return -1;  // null padding
            auto [it, fresh] = local.emplace(t, static_cast<int>(order.size()));
            if (fresh) order.push_back(&it->first);
            return it->second;
        };
        Inputs in;
        for (const auto& t : query) in.query_rows.push_back(row_of(t));
        in.windows.count = pool.size();
        in.windows.width = 2 * cfg_.context_radius + 1;
        in.windows.rows.reserve(pool.size() * in.windows.width);
        for (const auto& c : pool.terms) {
            if (c.context.size() != in.windows.width) {
                throw invalid_argument("candidate context width does not match the model's context radius");
            }
            for (const auto& t : c.context) in.windows.rows.push_back(row_of(t));
        }
        const auto e = cfg_.embedding_dim;
        Matrix base(std::max<std::size_t>(order.size(), 1), e);
        std::vector<bool> oov(base.rows, false);
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (table_->contains(*order[i])) {
                auto v = table_->lookup(*order[i]);
                std::copy(v.begin(), v.end(), base.row(i));
            } else {
                oov[i] = true;
            }
        }
        in.rows = g.substitute_rows(std::move(base), g.param(*oov_), oov);
        return in;
    }

    Var encode_query(Graph& g, const Inputs& in) const {
        if (in.query_rows.empty()) throw invalid_argument("cannot encode an empty query");
        return query_encoder_->encode_sequence(g, g.gather(in.rows, in.query_rows));
    }

    Var encode_terms(Graph& g, const Inputs& in) const {
        if (in.windows.count == 0) throw invalid_argument("cannot encode an empty pool");
        return term_encoder_->encode_windows(g, in.rows, in.windows);
    }

    Var value_of(Graph& g, Var query_vec, Var term_vecs) const {
        return value_estimate(g, g.detach(query_vec), g.detach(term_vecs), *v_, *s_, *bv_);
    }

    PolicyForward forward(Graph& g, const token_seq& query, const CandidatePool& pool, bool with_value = true) const {
        auto in = embed(g, query, pool);
        PolicyForward f;
        f.query_vec = encode_query(g, in);
        f.term_vecs = encode_terms(g, in);
        if (!is_sequential()) f.logits = term_logits(g, f.query_vec, f.term_vecs, *w_, *u_, *b_);
        if (with_value) f.value = value_of(g, f.query_vec, f.term_vecs);
        return f;
    }

    /// P(t_i | q0) for every candidate (selection models).
    std::vector<double> term_probabilities(const token_seq& query, const CandidatePool& pool) const {
        if (is_sequential()) throw invalid_argument("sequential models do not score terms independently");
        if (pool.empty()) return {};
        Graph g;
        auto f = forward(g, query, pool, false);
        std::vector<double> out;
        for (double z : g.value(f.logits).data) out.push_back(detail::stable_sigmoid(z));
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw error("cannot write " + path);
        out.write(checkpoint_magic, sizeof(checkpoint_magic));
        io::write_pod(out, checkpoint_version);
        io::write_string(out, to_json(cfg_).dump());
        for (const auto* set : {&params_.policy, &params_.value}) {
            io::write_pod<std::uint64_t>(out, set->size());
            set->for_each([&](const std::string& name, const Tensor& t) {
                io::write_string(out, name);
                io::write_pod<std::uint64_t>(out, t.rows());
                io::write_pod<std::uint64_t>(out, t.cols());
                io::write_vector(out, t.value.data);
            });
        }
        if (!out) throw error("write failed: " + path);
    }

    /// Reads a checkpoint's model configuration without loading tensors.
    static ModelConfig read_config(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        return read_header(in, path);
    }

    /// Loads tensor values; names and shapes must match this model exactly.
    void load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        auto cfg = read_header(in, path);
        if (!(cfg == cfg_)) throw format_error(path + ": checkpoint configuration does not match the model");
        for (auto* set : {&params_.policy, &params_.value}) {
            auto n = io::read_pod<std::uint64_t>(in);
            if (n != set->size()) throw format_error(path + ": tensor count mismatch");
            std::vector<std::pair<std::string, Matrix>> loaded;
            for (std::uint64_t i = 0; i < n; ++i) {
                auto name = io::read_string(in);
                auto rows = io::read_pod<std::uint64_t>(in);
                auto cols = io::read_pod<std::uint64_t>(in);
                auto data = io::read_vector<double>(in);
                if (data.size() != rows * cols) throw format_error(path + ": tensor " + name + " size mismatch");
                loaded.emplace_back(name, Matrix(rows, cols, std::move(data)));
            }
            std::size_t i = 0;
            set->for_each([&](const std::string& name, Tensor& t) {
                const auto& [lname, m] = loaded[i++];
                if (lname != name || !t.value.same_shape(m)) {
                    throw format_error(path + ": tensor " + lname + " does not match " + name);
                }
                t.value = m;
            });
        }
    }

  private:
    static constexpr char checkpoint_magic[8] = {'Q', 'R', 'L', 'C', 'K', 'P', 'T', '\1'};
    static constexpr std::uint32_t checkpoint_version = 1;

    static ModelConfig read_header(std::istream& in, const std::string& path) {
        if (!in) throw not_found("no such file: " + path);
        char head[sizeof(checkpoint_magic)];
        if (!in.read(head, sizeof(head)) || !std::equal(head, head + sizeof(head), checkpoint_magic)) {
            throw format_error(path + ": not a checkpoint (bad magic)");
        }
        auto version = io::read_pod<std::uint32_t>(in);
        if (version != checkpoint_version) {
            throw format_error(path + ": unsupported checkpoint version " + std::to_string(version));
        }
        try {
            return model_config_from_json(nlohmann::json::parse(io::read_string(in)));
        } catch (const nlohmann::json::exception& e) {
            throw format_error(path + ": bad model configuration: " + e.what());
        }
    }

    ModelConfig cfg_;
    const EmbeddingTable* table_;
    PolicyParameters params_;
    Tensor* oov_ = nullptr;
    std::unique_ptr<Encoder> query_encoder_;
    std::unique_ptr<Encoder> term_encoder_;
    SequenceGenerator seq_;
    Tensor* w_ = nullptr;
    Tensor* u_ = nullptr;
    Tensor* b_ = nullptr;
    Tensor* v_ = nullptr;
    Tensor* s_ = nullptr;
    Tensor* bv_ = nullptr;
};

}  // namespace qrl
