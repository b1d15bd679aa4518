#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "index.hpp"
#include "metrics.hpp"
#include "neural.hpp"
#include "prf.hpp"
#include "tensor.hpp"

namespace qrl {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline bool grads_finite(const ParameterSet& params) {
    bool ok = true;
    params.for_each([&](const std::string&, const Tensor& t) {
        for (double g : t.grad.data) ok = ok && std::isfinite(g);
    });
    return ok;
}

/// Adam with bias correction over one parameter group. With clip_norm > 0
/// the whole group's gradient is rescaled to at most that norm first.
class Adam {
  public:
    Adam(ParameterSet& params, AdamConfig cfg = {}, double clip_norm = 0.0)
        : params_(&params), cfg_(cfg), clip_(clip_norm) {
        params.for_each([&](const std::string&, Tensor& t) {
            m_.emplace_back(t.size(), 0.0);
            v_.emplace_back(t.size(), 0.0);
        });
    }

    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

    /// Applies one update from the current gradient slots. Throws
    /// numeric_error, touching nothing, if any gradient is non-finite.
    void step() {
        if (!grads_finite(*params_)) throw numeric_error("non-finite gradient; update aborted");
        double scale = 1.0;
        if (clip_ > 0.0) {
            double norm = params_->grad_norm();
            if (norm > clip_) scale = clip_ / norm;
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        std::size_t k = 0;
        params_->for_each([&](const std::string&, Tensor& t) {
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < t.size(); ++i) {
                double g = t.grad.data[i] * scale;
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                t.value.data[i] -= cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
            }
            ++k;
        });
    }

  private:
    ParameterSet* params_;
    AdamConfig cfg_;
    double clip_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// Indices i with probs[i] > epsilon, ascending.
inline std::vector<std::size_t> select_terms_test(const std::vector<double>& probs, double epsilon) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > epsilon) out.push_back(i);
    }
    return out;
}

/// One independent Bernoulli(probs[i]) draw per term, ascending indices.
template <typename Rng>
std::vector<std::size_t> select_terms_train(const std::vector<double>& probs, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (u(rng) < probs[i]) out.push_back(i);
    }
    return out;
}

inline std::vector<std::size_t> select_terms_train(const std::vector<double>& probs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return select_terms_train(probs, rng);
}

/// C_a = (R - R̄) Σ_{t∈T} -log P(t|q0), given the probabilities of the selected terms.
inline double reinforce_loss(double reward, double baseline, const std::vector<double>& selected_probs) {
    double nll = 0.0;
    for (double p : selected_probs) nll -= std::log(p);
    return (reward - baseline) * nll;
}

/// C_b = α (R - R̄)².
inline double value_loss(double reward, double baseline, double alpha) {
    if (!(alpha > 0.0)) throw invalid_argument("value loss scale alpha must be positive");
    return alpha * (reward - baseline) * (reward - baseline);
}

/// C_H = -λ Σ P log P.
inline double entropy_reg(const std::vector<double>& probs, double lambda) {
    if (lambda < 0.0) throw invalid_argument("entropy coefficient must be non-negative");
    double s = 0.0;
    for (double p : probs) {
        if (p > 0.0) s += p * std::log(p);
    }
    return -lambda * s;
}

struct RlConfig {
    PoolConfig pool;                 // M, K, context radius
    double epsilon = 0.5;            // test-time selection threshold
    double entropy_lambda = 1e-3;
    double value_alpha = 0.1;
    AdamConfig adam;
    RewardConfig reward;             // R@K used as reward
    std::size_t rounds = 2;          // test-time reformulation rounds
    std::size_t beam = 4;
    std::size_t max_len = 50;        // generated terms, sequential model
    double clip_norm = -1.0;         // < 0: unit norm for recurrent models, none otherwise
    std::size_t batch = 1;           // episodes per update; losses are averaged

    double effective_clip(ModelKind kind) const {
        if (clip_norm >= 0.0) return clip_norm;
        return kind == ModelKind::rnn || kind == ModelKind::rnn_seq ? 1.0 : 0.0;
    }

    void validate() const {
        if (pool.max_words == 0 || pool.max_docs == 0) throw invalid_argument("M and K must be >= 1");
        if (!(value_alpha > 0.0)) throw invalid_argument("alpha must be positive");
        if (entropy_lambda < 0.0) throw invalid_argument("lambda must be non-negative");
        if (rounds == 0) throw invalid_argument("rounds must be >= 1");
        if (beam == 0 || max_len == 0) throw invalid_argument("beam and max_len must be >= 1");
        if (batch == 0) throw invalid_argument("batch must be >= 1");
        if (!(adam.lr > 0.0)) throw invalid_argument("learning rate must be positive");
    }
};

/// Separate optimizer state for the policy and the value network.
struct Optimizers {
    Adam policy;
    Adam value;

    Optimizers(PolicyModel& model, const RlConfig& cfg)
        : policy(model.parameters().policy, cfg.adam, cfg.effective_clip(model.config().kind)),
          value(model.parameters().value, cfg.adam, cfg.effective_clip(model.config().kind)) {}

    /// Checks both groups before touching either.
    void step(PolicyModel& model) {
        if (!grads_finite(model.parameters().policy) || !grads_finite(model.parameters().value)) {
            throw numeric_error("non-finite gradient; update aborted");
        }
        policy.step();
        value.step();
    }
};

struct EpisodeTrace {
    query_id qid = 0;
    bool skipped = false;
    std::string diagnostic;
    std::size_t pool_size = 0;
    std::vector<std::size_t> selected;  // pool indices (sampled set, or generation order)
    token_seq terms;
    token_seq reformulated;
    double reward = 0.0;
    double baseline = 0.0;
    double c_a = 0.0;
    double c_b = 0.0;
    double c_h = 0.0;
};

inline token_seq append_terms(const token_seq& q0, const CandidatePool& pool, const std::vector<std::size_t>& idx) {
    token_seq q = q0;
    for (auto i : idx) q.push_back(pool[i].token);
    return q;
}

namespace detail {

inline double episode_reward(const InvertedIndex& index, const token_seq& q, const QueryRecord& rec,
                             const RewardConfig& rc) {
    return reward(ids_of(index.search(q, rc.k)), rec.relevant_ids, rc);
}

/// α (R - v)² on the graph.
inline Var value_loss_node(Graph& g, Var value, double reward, double alpha) {
    auto diff = g.add(g.scale(value, -1.0), g.constant(Matrix(1, 1, reward)));
    return g.scale(g.mul(diff, diff), alpha);
}

/// λ Σ P log P over every entry of logp (log-probabilities); the negative of C_H.
inline Var neg_entropy_from_logp(Graph& g, Var logp, double lambda) {
    return g.scale(g.sum(g.mul(g.exp(logp), logp)), lambda);
}

/// Policy loss and C_H for an independent-selection episode over `logits`.
struct SelectionLoss {
    Var loss;
    double c_a;
    double c_h;
};

inline SelectionLoss selection_loss(Graph& g, Var logits, const std::vector<std::size_t>& selected, double advantage,
                                    double lambda) {
    auto logp = g.log_sigmoid(logits);
    double c_a = 0.0;
    Var total = g.constant(Matrix(1, 1, 0.0));
    if (!selected.empty()) {
        std::vector<int> rows(selected.begin(), selected.end());
        auto sum_logp = g.sum(g.gather(logp, rows));
        auto ca = g.scale(sum_logp, -advantage);
        c_a = g.scalar(ca);
        total = ca;
    }
    double c_h = 0.0;
    if (lambda > 0.0) {
        auto ne = neg_entropy_from_logp(g, logp, lambda);
        c_h = -g.scalar(ne);
        total = g.add(total, ne);
    }
    return {total, c_a, c_h};
}

}  // namespace detail

/// Samples one generated sequence from the sequential model and returns the
/// summed log-probability of the choices (STOP included when emitted) and
/// λ Σ_steps Σ P log P, both as graph nodes.
struct SampledSequence {
    std::vector<std::size_t> indices;
    Var logprob;
    Var neg_entropy;
    bool stopped = false;
};

template <typename Rng>
SampledSequence sample_sequence(Graph& g, const PolicyModel& model, Var query_vec, Var term_vecs, std::size_t max_len,
                                double lambda, Rng& rng) {
    const auto& gen = model.generator();
    const auto n = g.value(term_vecs).rows;
    SampledSequence out;
    auto state = gen.initial(g);
    Var prev = g.param(*gen.start);
    std::vector<Var> chosen;
    std::vector<Var> entropies;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t step = 0; step < max_len; ++step) {
        state = gen.step(g, query_vec, prev, state);
        auto logp = gen.log_probs(g, state.h, term_vecs);
        const auto& lp = g.value(logp);
        double r = u(rng), acc = 0.0;
        std::size_t pick = n;  // falls through to STOP on rounding
        for (std::size_t i = 0; i <= n; ++i) {
            acc += std::exp(lp.data[i]);
            if (r < acc) {
                pick = i;
                break;
            }
        }
        chosen.push_back(g.element(logp, pick, 0));
        if (lambda > 0.0) entropies.push_back(detail::neg_entropy_from_logp(g, logp, lambda));
        if (pick == n) {
            out.stopped = true;
            break;
        }
        out.indices.push_back(pick);
        prev = g.gather(term_vecs, {static_cast<int>(pick)});
    }
    out.logprob = g.sum(g.stack_rows(chosen));
    out.neg_entropy = entropies.empty() ? g.constant(Matrix(1, 1, 0.0)) : g.sum(g.stack_rows(entropies));
    return out;
}

/// One rollout plus backpropagation of `weight` × (C_a - C_H + C_b) into the
/// gradient slots; no optimizer step.
template <typename Rng>
EpisodeTrace rollout(const QueryRecord& query, const InvertedIndex& index, PolicyModel& model, const RlConfig& cfg,
                     Rng& rng, double weight = 1.0) {
    EpisodeTrace tr;
    tr.qid = query.qid;
    auto d0 = index.search(query.tokens, cfg.pool.max_docs);
    if (d0.empty()) {
        tr.skipped = true;
        tr.diagnostic = "query " + std::to_string(query.qid) + " retrieved nothing; episode skipped";
        return tr;
    }
    auto doc = sample_feedback_doc(d0, cfg.pool.max_docs, rng);
    SearchResult feedback{{doc, 0.0}};
    auto pool = build_pool(query.tokens, feedback, index, cfg.pool);
    tr.pool_size = pool.size();

    Graph g;
    auto f = model.forward(g, query.tokens, pool, true);
    tr.baseline = g.scalar(f.value);
    Var policy_loss;
    if (model.is_sequential()) {
        auto s = sample_sequence(g, model, f.query_vec, f.term_vecs, cfg.max_len, cfg.entropy_lambda, rng);
        tr.selected = s.indices;
        tr.terms = append_terms({}, pool, tr.selected);
        tr.reformulated = append_terms(query.tokens, pool, tr.selected);
        tr.reward = detail::episode_reward(index, tr.reformulated, query, cfg.reward);
        double adv = tr.reward - tr.baseline;
        auto ca = g.scale(s.logprob, -adv);
        tr.c_a = g.scalar(ca);
        tr.c_h = -g.scalar(s.neg_entropy);
        policy_loss = g.add(ca, s.neg_entropy);
    } else {
        std::vector<double> probs;
        for (double z : g.value(f.logits).data) probs.push_back(detail::stable_sigmoid(z));
        tr.selected = select_terms_train(probs, rng);
        tr.terms = append_terms({}, pool, tr.selected);
        tr.reformulated = append_terms(query.tokens, pool, tr.selected);
        tr.reward = detail::episode_reward(index, tr.reformulated, query, cfg.reward);
        auto sl = detail::selection_loss(g, f.logits, tr.selected, tr.reward - tr.baseline, cfg.entropy_lambda);
        tr.c_a = sl.c_a;
        tr.c_h = sl.c_h;
        policy_loss = sl.loss;
    }
    auto vl = detail::value_loss_node(g, f.value, tr.reward, cfg.value_alpha);
    tr.c_b = g.scalar(vl);
    auto total = g.scale(g.add(policy_loss, vl), weight);
    if (!std::isfinite(g.scalar(total))) throw numeric_error("non-finite loss for query " + std::to_string(query.qid));
    g.backward(total);
    return tr;
}

/// retrieve → sample feedback doc → pool → sample → retrieve → reward →
/// one Adam step on each parameter group.
template <typename Rng>
EpisodeTrace train_episode(const QueryRecord& query, const InvertedIndex& index, PolicyModel& model, Optimizers& opt,
                           const RlConfig& cfg, Rng& rng) {
    model.parameters().policy.zero_grad();
    model.parameters().value.zero_grad();
    auto tr = rollout(query, index, model, cfg, rng);
    if (!tr.skipped) opt.step(model);
    return tr;
}

struct Decoded {
    std::vector<std::size_t> indices;  // pool indices, generation order
    double logprob = 0.0;              // includes STOP unless forced at max_len
    bool forced_stop = false;
};

/// Beam search over candidate sequences of the sequential model.
///
/// Each live hypothesis is scored for STOP (recorded as finished, not taking
/// a beam slot) and for every candidate; the best `beam` non-STOP extensions
/// survive. At max_len every extension is finished by force. Search ends once
/// the best finished score is at least every live score, since scores only
/// decrease with length. Ties prefer the earlier hypothesis, then the lower
/// candidate index. With beam 1 this follows the greedy candidate path and
/// returns its best stopping point.
inline Decoded decode_sequence(const PolicyModel& model, const token_seq& query, const CandidatePool& pool,
                               std::size_t beam, std::size_t max_len) {
    if (beam == 0 || max_len == 0) throw invalid_argument("beam and max_len must be >= 1");
    if (!model.is_sequential()) throw invalid_argument("decode_sequence needs a sequential model");
    if (pool.empty()) return {};
    Graph g;
    auto in = model.embed(g, query, pool);
    auto qv = g.detach(model.encode_query(g, in));
    auto tv = g.detach(model.encode_terms(g, in));
    const auto& gen = model.generator();
    const auto n = pool.size();

    struct Hyp {
        std::vector<std::size_t> seq;
        double lp;
        SeqState state;
        Var prev;
    };
    std::vector<Hyp> live{{{}, 0.0, gen.initial(g), g.constant(gen.start->value)}};
    std::vector<Decoded> finished;
    for (std::size_t step = 1; step <= max_len && !live.empty(); ++step) {
        struct Ext {
            std::size_t hyp;
            std::size_t cand;
            double lp;
        };
        std::vector<Ext> ext;
        std::vector<SeqState> states;
        for (std::size_t h = 0; h < live.size(); ++h) {
            auto st = gen.step(g, qv, live[h].prev, live[h].state);
            states.push_back(st);
            const auto lp = g.value(gen.log_probs(g, st.h, tv)).data;
            finished.push_back({live[h].seq, live[h].lp + lp[n], false});
            for (std::size_t i = 0; i < n; ++i) ext.push_back({h, i, live[h].lp + lp[i]});
        }
        std::stable_sort(ext.begin(), ext.end(), [](const Ext& a, const Ext& b) { return a.lp > b.lp; });
        if (step == max_len) {
            for (const auto& e : ext) {
                auto seq = live[e.hyp].seq;
                seq.push_back(e.cand);
                finished.push_back({std::move(seq), e.lp, true});
            }
            break;
        }
        std::vector<Hyp> next;
        for (std::size_t j = 0; j < std::min(beam, ext.size()); ++j) {
            const auto& e = ext[j];
            auto seq = live[e.hyp].seq;
            seq.push_back(e.cand);
            next.push_back({std::move(seq), e.lp, states[e.hyp], g.gather(tv, {static_cast<int>(e.cand)})});
        }
        live = std::move(next);
        double best_done = -std::numeric_limits<double>::infinity();
        for (const auto& f : finished) best_done = std::max(best_done, f.logprob);
        double best_live = -std::numeric_limits<double>::infinity();
        for (const auto& h : live) best_live = std::max(best_live, h.lp);
        if (best_done >= best_live) break;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < finished.size(); ++i) {
        if (finished[i].logprob > finished[best].logprob) best = i;
    }
    return finished[best];
}

/// Terms a trained model appends to q0 for one pool at test time.
inline std::vector<std::size_t> choose_terms(const PolicyModel& model, const token_seq& query, const CandidatePool& pool,
                                             const RlConfig& cfg) {
    if (pool.empty()) return {};
    if (model.is_sequential()) return decode_sequence(model, query, pool, cfg.beam, cfg.max_len).indices;
    return select_terms_test(model.term_probabilities(query, pool), cfg.epsilon);
}

struct Reformulation {
    token_seq query;     // final q_r
    SearchResult results;
    std::vector<token_seq> per_round;
    std::size_t selected_last = 0;  // terms chosen in the final round
};

/// Term chooser: (q0, pool) -> pool indices to append.
using TermChooser = std::function<std::vector<std::size_t>(const token_seq&, const CandidatePool&)>;

/// Round r builds its pool from q0 and the top-K results of round r-1 (the
/// raw retrieval for r = 1) and searches q_r = q0 ++ chosen terms.
inline Reformulation reformulate_rounds(const token_seq& q0, const InvertedIndex& index, const TermChooser& choose,
                                        const PoolConfig& pool_cfg, std::size_t rounds, std::size_t depth) {
    if (rounds == 0) throw invalid_argument("rounds must be >= 1");
    Reformulation out;
    out.query = q0;
    auto results = index.search(q0, std::max(depth, pool_cfg.max_docs));
    for (std::size_t r = 0; r < rounds; ++r) {
        auto pool = build_pool(q0, results, index, pool_cfg);
        auto idx = choose(q0, pool);
        out.selected_last = idx.size();
        out.query = append_terms(q0, pool, idx);
        out.per_round.push_back(out.query);
        results = index.search(out.query, std::max(depth, pool_cfg.max_docs));
    }
    if (results.size() > depth) results.resize(depth);
    out.results = std::move(results);
    return out;
}

inline Reformulation reformulate_rounds(const token_seq& q0, const InvertedIndex& index, const PolicyModel& model,
                                        const RlConfig& cfg, std::size_t rounds, std::size_t depth) {
    TermChooser choose = [&](const token_seq& q, const CandidatePool& p) { return choose_terms(model, q, p, cfg); };
    return reformulate_rounds(q0, index, choose, cfg.pool, rounds, depth);
}

/// Test-time metrics of a term chooser over a query list.
struct PolicyEval {
    EvalReport report;
    double mean_selected = 0.0;  // terms appended in the final round
};

inline PolicyEval evaluate_chooser(const TermChooser& choose, const std::vector<QueryRecord>& queries,
                                   const InvertedIndex& index, const PoolConfig& pool, std::size_t rounds,
                                   const std::vector<MetricSpec>& metrics) {
    PolicyEval ev{EvalReport(metrics), 0.0};
    auto depth = depth_needed(metrics);
    for (const auto& q : queries) {
        auto r = reformulate_rounds(q.tokens, index, choose, pool, rounds, depth);
        ev.report.add(q.qid, ids_of(r.results), q.relevant_ids);
        ev.mean_selected += static_cast<double>(r.selected_last);
    }
    if (!queries.empty()) ev.mean_selected /= static_cast<double>(queries.size());
    return ev;
}

inline PolicyEval evaluate_policy(const PolicyModel& model, const std::vector<QueryRecord>& queries,
                                  const InvertedIndex& index, const RlConfig& cfg,
                                  const std::vector<MetricSpec>& metrics, std::size_t rounds) {
    TermChooser choose = [&](const token_seq& q, const CandidatePool& p) { return choose_terms(model, q, p, cfg); };
    return evaluate_chooser(choose, queries, index, cfg.pool, rounds, metrics);
}

/// Mean test-mode reward over a query list.
inline double mean_reward(const PolicyModel& model, const std::vector<QueryRecord>& queries,
                          const InvertedIndex& index, const RlConfig& cfg, std::size_t rounds) {
    if (queries.empty()) throw invalid_argument("mean reward over no queries");
    MetricSpec m{MetricKind::recall, cfg.reward.k};
    return evaluate_policy(model, queries, index, cfg, {m}, rounds).report.mean(0);
}

struct SweepPoint {
    std::size_t m = 0;  // words read per feedback document
    double value = 0.0;
    double mean_selected = 0.0;
};

/// Test-time `metric` of a trained model as the candidate budget M varies.
inline std::vector<SweepPoint> sweep_candidates(const PolicyModel& model, const std::vector<QueryRecord>& queries,
                                                const InvertedIndex& index, RlConfig cfg,
                                                const std::vector<std::size_t>& ms, const MetricSpec& metric,
                                                std::size_t rounds) {
    std::vector<SweepPoint> out;
    for (auto m : ms) {
        if (m == 0) throw invalid_argument("candidate counts must be >= 1");
        cfg.pool.max_words = m;
        auto ev = evaluate_policy(model, queries, index, cfg, {metric}, rounds);
        out.push_back({m, ev.report.mean(0), ev.mean_selected});
    }
    return out;
}

/// (qid, term, context, P) rows.
inline void write_probability_header(std::ostream& out) { out << "qid\tterm\tcontext\tP\n"; }

inline void write_probabilities(std::ostream& out, query_id qid, const CandidatePool& pool,
                                const std::vector<double>& probs) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
        token_seq ctx;
        for (const auto& t : pool[i].context) ctx.push_back(t.empty() ? "_" : t);
        out << qid << '\t' << pool[i].token << '\t' << join(ctx) << '\t' << probs[i] << '\n';
    }
}

inline std::vector<Matrix> snapshot(const ParameterSet& params) {
    std::vector<Matrix> out;
    params.for_each([&](const std::string&, const Tensor& t) { out.push_back(t.value); });
    return out;
}

inline void restore(ParameterSet& params, const std::vector<Matrix>& values) {
    std::size_t i = 0;
    params.for_each([&](const std::string&, Tensor& t) { t.value = values.at(i++); });
}

struct TrainConfig {
    std::size_t max_epochs = 100;
    std::size_t eval_every = 0;  // episodes between validations; 0 = once per epoch
    std::size_t patience = 20;   // validations without improvement before stopping
    std::size_t eval_rounds = 0;  // 0: the configured test-time rounds
    bool shuffle = true;
};

/// One record per validation.
struct TrainLogRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double train_reward = 0.0;  // mean sampled reward since the previous record
    double valid_reward = 0.0;
    double c_a = 0.0;
    double c_b = 0.0;
    double c_h = 0.0;
    std::size_t skipped = 0;

    nlohmann::json to_json() const {
        return {{"step", step},   {"epoch", epoch}, {"train_reward", train_reward}, {"valid_reward", valid_reward},
                {"c_a", c_a},     {"c_b", c_b},     {"c_h", c_h},                   {"skipped", skipped}};
    }
};

struct TrainResult {
    double best_valid = -1.0;
    std::size_t best_step = 0;
    std::size_t steps = 0;
    bool early_stopped = false;
    std::vector<TrainLogRecord> log;
};

/// REINFORCE training with periodic validation; the best-validating
/// parameters are restored at the end.
inline TrainResult train_policy(PolicyModel& model, const InvertedIndex& index, const std::vector<QueryRecord>& train,
                                const std::vector<QueryRecord>& valid, const RlConfig& cfg, const TrainConfig& tc,
                                std::uint64_t seed,
                                const std::function<void(const TrainLogRecord&)>& on_eval = nullptr) {
    cfg.validate();
    if (train.empty()) throw invalid_argument("no training queries");
    const auto& eval_set = valid.empty() ? train : valid;
    std::mt19937_64 rng(seed);
    Optimizers opt(model, cfg);
    TrainResult res;
    auto best_policy = snapshot(model.parameters().policy);
    auto best_value = snapshot(model.parameters().value);
    const std::size_t every = tc.eval_every ? tc.eval_every : train.size();
    std::size_t since_best = 0, in_batch = 0;
    TrainLogRecord acc;
    std::size_t acc_n = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    auto evaluate = [&](std::size_t epoch) {
        acc.step = res.steps;
        acc.epoch = epoch;
        if (acc_n) {
            acc.train_reward /= static_cast<double>(acc_n);
            acc.c_a /= static_cast<double>(acc_n);
            acc.c_b /= static_cast<double>(acc_n);
            acc.c_h /= static_cast<double>(acc_n);
        }
        acc.valid_reward = mean_reward(model, eval_set, index, cfg, tc.eval_rounds ? tc.eval_rounds : cfg.rounds);
        res.log.push_back(acc);
        if (on_eval) on_eval(acc);
        if (acc.valid_reward > res.best_valid) {
            res.best_valid = acc.valid_reward;
            res.best_step = res.steps;
            best_policy = snapshot(model.parameters().policy);
            best_value = snapshot(model.parameters().value);
            since_best = 0;
        } else {
            ++since_best;
        }
        acc = {};
        acc_n = 0;
        return since_best >= tc.patience;
    };

    bool stop = false;
    for (std::size_t epoch = 0; epoch < tc.max_epochs && !stop; ++epoch) {
        if (tc.shuffle) std::shuffle(order.begin(), order.end(), rng);
        for (auto qi : order) {
            if (in_batch == 0) {
                model.parameters().policy.zero_grad();
                model.parameters().value.zero_grad();
            }
            auto tr = rollout(train[qi], index, model, cfg, rng, 1.0 / static_cast<double>(cfg.batch));
            if (tr.skipped) {
                ++acc.skipped;
            } else {
                acc.train_reward += tr.reward;
                acc.c_a += tr.c_a;
                acc.c_b += tr.c_b;
                acc.c_h += tr.c_h;
                ++acc_n;
                if (++in_batch == cfg.batch) {
                    opt.step(model);
                    in_batch = 0;
                }
            }
            ++res.steps;
            if (res.steps % every == 0 && evaluate(epoch)) {
                res.early_stopped = true;
                stop = true;
                break;
            }
        }
    }
    if (in_batch > 0) opt.step(model);
    if (res.log.empty() || res.steps % every != 0) evaluate(tc.max_epochs);
    restore(model.parameters().policy, best_policy);
    restore(model.parameters().value, best_value);
    return res;
}

}  // namespace qrl
