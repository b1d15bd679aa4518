#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "qrl/qrl.hpp"

namespace qrl::testing {

/// Scratch directory removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::size_t counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("qrl_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

inline Corpus make_corpus(const std::vector<std::string>& bodies) {
    Corpus c;
    for (std::size_t i = 0; i < bodies.size(); ++i) c.add({i, {}, tokenize(bodies[i])});
    return c;
}

/// Random corpus over a small vocabulary "w0".."w{vocab-1}".
template <typename Rng>
Corpus random_corpus(Rng& rng, std::size_t docs, std::size_t vocab, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1), len(1, max_len);
    Corpus c;
    for (std::size_t i = 0; i < docs; ++i) {
        Document d;
        d.id = i;
        auto n = len(rng);
        for (std::size_t k = 0; k < n; ++k) d.body.push_back("w" + std::to_string(word(rng)));
        c.add(std::move(d));
    }
    return c;
}

/// Word vectors with a fixed dimension for every token in the corpus plus `extra`.
template <typename Rng>
EmbeddingTable random_table(Rng& rng, const Corpus& corpus, std::size_t dim, const token_seq& extra = {}) {
    std::normal_distribution<double> g(0.0, 1.0);
    EmbeddingTable t(dim, 7);
    auto add = [&](const std::string& w) {
        if (t.contains(w)) return;
        vec v(dim);
        for (auto& x : v) x = g(rng);
        t.add(w, v);
    };
    for (const auto& d : corpus.documents()) {
        for (const auto& w : d.text()) add(w);
    }
    for (const auto& w : extra) add(w);
    return t;
}

/// One-armed bandit world: q0 = "alpha" retrieves only the non-relevant
/// document 0, which contains "magic"; the relevant document 1 contains
/// "magic" and nothing from q0. Selecting "magic" lifts R@10 from 0 to 1;
/// every other candidate leaves it at 0.
struct BanditWorld {
    Corpus corpus;
    InvertedIndex index;
    EmbeddingTable table;
    QueryRecord query;

    explicit BanditWorld(std::uint64_t seed = 1) {
        corpus = make_corpus({"alpha filler1 magic filler2 filler3", "magic target words here", "other text entirely",
                              "filler1 filler2 padding", "more unrelated padding"});
        index = build_index(corpus);
        std::mt19937_64 rng(seed);
        table = random_table(rng, corpus, 8);
        query = {0, {"alpha"}, {1}};
    }

    RlConfig config() const {
        RlConfig c;
        c.pool = {10, 1, 2};
        c.reward.k = 10;
        c.rounds = 1;
        return c;
    }
};


/// Scores every document of the corpus from its raw tokens with Lucene-idf
/// BM25 (k1 1.2, b 0.75), without an inverted index. Query terms are counted
/// with multiplicity and summed in first-occurrence order; ties go to the
/// earlier document.
inline std::vector<std::pair<doc_id, double>> brute_force_bm25(const Corpus& corpus, const token_seq& query,
                                                              std::size_t k) {
    const double k1 = 1.2, b = 0.75;
    const auto& docs = corpus.documents();
    const double n = static_cast<double>(docs.size());
    double total = 0.0;
    for (const auto& d : docs) total += static_cast<double>(d.text().size());
    const double avgdl = total / n;
    token_seq distinct;
    std::vector<double> mult;
    for (const auto& w : query) {
        auto it = std::find(distinct.begin(), distinct.end(), w);
        if (it == distinct.end()) {
            distinct.push_back(w);
            mult.push_back(1.0);
        } else {
            mult[static_cast<std::size_t>(it - distinct.begin())] += 1.0;
        }
    }
    std::vector<std::pair<doc_id, double>> scored;
    for (const auto& d : docs) {
        auto text = d.text();
        double s = 0.0;
        bool hit = false;
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            double tf = static_cast<double>(std::count(text.begin(), text.end(), distinct[i]));
            if (tf == 0.0) continue;
            double df = 0.0;
            for (const auto& o : docs) {
                auto ot = o.text();
                df += std::find(ot.begin(), ot.end(), distinct[i]) != ot.end() ? 1.0 : 0.0;
            }
            double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            double norm = k1 * (1.0 - b + b * static_cast<double>(text.size()) / avgdl);
            s += mult[i] * (idf * tf * (k1 + 1.0) / (tf + norm));
            hit = true;
        }
        if (hit && s > 0.0) scored.emplace_back(d.id, s);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

/// Dirichlet P(t|d) from raw corpus counts.
inline double dirichlet_oracle(const Corpus& corpus, const std::string& t, doc_id id, double mu) {
    double cf = 0.0, total = 0.0;
    for (const auto& d : corpus.documents()) {
        auto text = d.text();
        cf += static_cast<double>(std::count(text.begin(), text.end(), t));
        total += static_cast<double>(text.size());
    }
    auto text = corpus.at(id).text();
    double tf = static_cast<double>(std::count(text.begin(), text.end(), t));
    return (tf + mu * cf / total) / (static_cast<double>(text.size()) + mu);
}

/// Relevance-model weight of t: (1-λ) tf(t,q)/|q| + λ/|D| Σ_d P(t|d) Π_w P(w|d).
inline double relevance_model_oracle(const Corpus& corpus, const token_seq& q, const std::vector<doc_id>& feedback,
                                     const std::string& t, double lambda, double mu) {
    double from_q = static_cast<double>(std::count(q.begin(), q.end(), t)) / static_cast<double>(q.size());
    double from_d = 0.0;
    for (auto id : feedback) {
        double lik = 1.0;
        for (const auto& w : q) lik *= dirichlet_oracle(corpus, w, id, mu);
        from_d += dirichlet_oracle(corpus, t, id, mu) * lik;
    }
    from_d /= static_cast<double>(feedback.size());
    return (1.0 - lambda) * from_q + lambda * from_d;
}

/// Literal scalar transcriptions of the model's heads, on plain nested vectors.
namespace scalar {

using mat = std::vector<std::vector<double>>;

inline mat to_mat(const Matrix& m) {
    mat out(m.rows, std::vector<double>(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) out[r][c] = m(r, c);
    }
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// U · tanh(W [q ; t]) + b, pre-sigmoid.
inline double term_logit(const std::vector<double>& q, const std::vector<double>& t, const mat& w,
                         const std::vector<double>& u, double b) {
    std::vector<double> x = q;
    x.insert(x.end(), t.begin(), t.end());
    double z = b;
    for (std::size_t o = 0; o < w.size(); ++o) {
        double a = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) a += w[o][j] * x[j];
        z += u[o] * std::tanh(a);
    }
    return z;
}

/// σ(S · tanh(V [q ; mean_i t_i]) + b).
inline double value(const std::vector<double>& q, const mat& terms, const mat& v, const std::vector<double>& s,
                    double b) {
    std::vector<double> mean(terms[0].size(), 0.0);
    for (const auto& t : terms) {
        for (std::size_t j = 0; j < t.size(); ++j) mean[j] += t[j] / static_cast<double>(terms.size());
    }
    return sigmoid(term_logit(q, mean, v, s, b));
}

/// log-softmax over [t_1·h, ..., t_n·h, stop·h] at each step of a forced
/// sequence of picks; the generator state follows the picks.
struct SeqParams {
    mat wa, wb, wh;
    std::vector<double> bias, start, stop;
    bool gated = true;
};

inline std::vector<std::vector<double>> seq_log_probs(const SeqParams& p, const std::vector<double>& q,
                                                      const mat& terms, const std::vector<std::size_t>& picks) {
    const std::size_t d = q.size();
    std::vector<double> h(d, 0.0), c(d, 0.0), prev = p.start;
    std::vector<std::vector<double>> out;
    for (std::size_t step = 0; step <= picks.size(); ++step) {
        std::vector<double> z(p.wa.size(), 0.0);
        for (std::size_t r = 0; r < z.size(); ++r) {
            for (std::size_t j = 0; j < d; ++j) z[r] += p.wa[r][j] * q[j] + p.wb[r][j] * prev[j] + p.wh[r][j] * h[j];
            if (p.gated) z[r] += p.bias[r];
        }
        if (p.gated) {
            for (std::size_t j = 0; j < d; ++j) {
                double i = sigmoid(z[j]), f = sigmoid(z[d + j]), u = std::tanh(z[2 * d + j]), o = sigmoid(z[3 * d + j]);
                c[j] = f * c[j] + i * u;
                h[j] = o * std::tanh(c[j]);
            }
        } else {
            for (std::size_t j = 0; j < d; ++j) h[j] = std::tanh(z[j]);
        }
        std::vector<double> logits;
        for (const auto& t : terms) {
            double a = 0.0;
            for (std::size_t j = 0; j < d; ++j) a += t[j] * h[j];
            logits.push_back(a);
        }
        double a = 0.0;
        for (std::size_t j = 0; j < d; ++j) a += p.stop[j] * h[j];
        logits.push_back(a);
        double mx = *std::max_element(logits.begin(), logits.end()), sum = 0.0;
        for (double l : logits) sum += std::exp(l - mx);
        for (auto& l : logits) l = l - mx - std::log(sum);
        out.push_back(logits);
        if (step < picks.size()) prev = terms[picks[step]];
    }
    return out;
}

/// C_a = (R - R̄) Σ_{selected} -log P.
inline double c_a(double r, double baseline, const std::vector<double>& probs, const std::vector<std::size_t>& sel) {
    double s = 0.0;
    for (auto i : sel) s += -std::log(probs[i]);
    return (r - baseline) * s;
}

inline double c_b(double r, double baseline, double alpha) { return alpha * (r - baseline) * (r - baseline); }

/// C_H = -λ Σ P log P.
inline double c_h(const std::vector<double>& probs, double lambda) {
    double s = 0.0;
    for (double p : probs) s += p * std::log(p);
    return -lambda * s;
}

}  // namespace scalar

struct GradCheckResult {
    double policy = 0.0;  // policy loss against policy parameters
    double value = 0.0;   // value loss against value parameters
};

/// Finite-difference check of a small model of `kind` (d = 8, pool of 6
/// with radius 2). Parameters are redrawn from U(-scale, scale) so that
/// recurrent gates are not saturated; the policy loss is C_a - C_H over a
/// fixed selection (selection models) or a fixed sequence (sequential),
/// and the value loss is C_b.
inline GradCheckResult gradient_check_model(ModelKind kind, bool gated, double scale, double eps,
                                            Difference scheme = Difference::central, std::uint64_t seed = 3) {
    SyntheticConfig sc;
    sc.n_topics = 4;
    sc.n_docs = 20;
    sc.n_queries = 8;
    sc.embedding_dim = 6;
    sc.body_length = 8;
    sc.background_words = 20;
    sc.missing_rate = 0.3;  // exercises the learnable OOV vector
    auto data = generate_synthetic(sc);
    auto index = build_index(data.corpus);
    auto mc = ModelConfig::defaults(kind, 8);
    mc.query_encoder.filters = mc.term_encoder.filters = 5;
    mc.term_encoder.windows = {5, 3};
    mc.context_radius = 2;
    mc.gated = gated;
    PolicyModel model(mc, data.embeddings, seed);
    std::mt19937_64 r(seed * 7 + 1);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto* set : {&model.parameters().policy, &model.parameters().value}) {
        set->for_each([&](const std::string&, Tensor& t) {
            for (auto& v : t.value.data) v = u(r);
        });
    }
    const auto& q = data.split.train.at(0);
    auto pool = build_pool(q.tokens, index.search(q.tokens, 1), index, {6, 1, 2});
    pool.terms.resize(std::min<std::size_t>(pool.size(), 8));
    const std::vector<std::size_t> sel{0, 2, 3};
    const std::vector<std::size_t> picks{2, 0};
    bool value_side = false;
    auto loss = [&](bool grad) {
        Graph g;
        auto f = model.forward(g, q.tokens, pool, true);
        Var pl;
        if (model.is_sequential()) {
            // frozen sequence: picks 2, 0, then STOP
            const auto& gen = model.generator();
            auto state = gen.initial(g);
            Var prev = g.param(*gen.start);
            std::vector<Var> chosen, entropies;
            for (std::size_t step = 0; step <= picks.size(); ++step) {
                state = gen.step(g, f.query_vec, prev, state);
                auto logp = gen.log_probs(g, state.h, f.term_vecs);
                std::size_t pick = step < picks.size() ? picks[step] : pool.size();
                chosen.push_back(g.element(logp, pick, 0));
                entropies.push_back(detail::neg_entropy_from_logp(g, logp, 0.3));
                if (step < picks.size()) prev = g.gather(f.term_vecs, {static_cast<int>(pick)});
            }
            pl = g.add(g.scale(g.sum(g.stack_rows(chosen)), -0.7), g.sum(g.stack_rows(entropies)));
        } else {
            pl = detail::selection_loss(g, f.logits, sel, 0.7, 0.3).loss;
        }
        auto vl = detail::value_loss_node(g, f.value, 0.8, 0.1);
        auto total = value_side ? vl : pl;
        if (grad) g.backward(total);
        return g.scalar(total);
    };
    GradCheckResult out;
    model.parameters().value.zero_grad();
    out.policy = grad_check(loss, model.parameters().policy, eps, scheme);
    value_side = true;
    model.parameters().policy.zero_grad();
    out.value = grad_check(loss, model.parameters().value, eps, scheme);
    return out;
}

}  // namespace qrl::testing
