#include <gtest/gtest.h>

#include <limits>
#include <memory>
#include <random>

#include "test_support.hpp"

namespace qrl {
namespace {

using testing::TempDir;
namespace scalar = testing::scalar;

void fill(Tensor& t, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : t.value.data) v = u(rng);
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    Tensor t(r, c);
    fill(t, rng);
    return t.value;
}

TEST(Scorer, MatchesScalarTranscription) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t d = 1 + trial % 6, n = 1 + trial % 5;
        Tensor w(d, 2 * d), u(1, d), b(1, 1);
        fill(w, rng);
        fill(u, rng);
        fill(b, rng);
        auto qv = random_matrix(1, d, rng), tv = random_matrix(n, d, rng);
        Graph g;
        auto z = g.value(term_logits(g, g.constant(qv), g.constant(tv), w, u, b));
        auto W = scalar::to_mat(w.value);
        auto Q = scalar::to_mat(qv)[0];
        auto T = scalar::to_mat(tv);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(z(i, 0), scalar::term_logit(Q, T[i], W, u.value.data, b.value.data[0]), 1e-10);
        }
    }
}

TEST(ValueNetwork, MatchesScalarTranscription) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t d = 1 + trial % 6, n = 1 + trial % 4;
        Tensor v(d, 2 * d), s(1, d), b(1, 1);
        fill(v, rng);
        fill(s, rng);
        fill(b, rng);
        auto qv = random_matrix(1, d, rng), tv = random_matrix(n, d, rng);
        Graph g;
        double got = g.scalar(value_estimate(g, g.constant(qv), g.constant(tv), v, s, b));
        double want = scalar::value(scalar::to_mat(qv)[0], scalar::to_mat(tv), scalar::to_mat(v.value), s.value.data,
                                    b.value.data[0]);
        EXPECT_NEAR(got, want, 1e-10);
        EXPECT_GT(got, 0.0);
        EXPECT_LT(got, 1.0);
    }
    Graph g;
    Tensor v(2, 4), s(1, 2), b(1, 1);
    EXPECT_THROW(value_estimate(g, g.constant(Matrix(1, 2)), g.constant(Matrix(0, 2)), v, s, b), invalid_argument);
}

void check_sequence_probs(bool gated, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t d = 1 + trial % 5, n = 1 + trial % 5, len = trial % 4;
        ParameterSet params;
        SequenceGenerator gen(params, d, gated);
        params.for_each([&](const std::string&, Tensor& t) { fill(t, rng); });
        auto qv = random_matrix(1, d, rng), tv = random_matrix(n, d, rng);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> picks(len);
        for (auto& p : picks) p = pick(rng);

        scalar::SeqParams sp;
        sp.gated = gated;
        sp.wa = scalar::to_mat(gen.wa->value);
        sp.wb = scalar::to_mat(gen.wb->value);
        sp.wh = scalar::to_mat(gen.wh->value);
        if (gated) sp.bias = gen.bias->value.data;
        sp.start = gen.start->value.data;
        sp.stop = gen.stop->value.data;
        auto want = scalar::seq_log_probs(sp, scalar::to_mat(qv)[0], scalar::to_mat(tv), picks);

        Graph g;
        auto q = g.constant(qv), t = g.constant(tv);
        auto state = gen.initial(g);
        Var prev = g.param(*gen.start);
        for (std::size_t step = 0; step <= len; ++step) {
            state = gen.step(g, q, prev, state);
            const auto& lp = g.value(gen.log_probs(g, state.h, t));
            ASSERT_EQ(lp.rows, n + 1);
            for (std::size_t i = 0; i <= n; ++i) EXPECT_NEAR(lp(i, 0), want[step][i], 1e-10);
            if (step < len) prev = g.gather(t, {static_cast<int>(picks[step])});
        }
    }
}

TEST(SequenceGenerator, GatedMatchesScalarTranscription) { check_sequence_probs(true, 3); }
TEST(SequenceGenerator, UngatedMatchesScalarTranscription) { check_sequence_probs(false, 4); }

struct GradCase {
    ModelKind kind;
    bool gated;
    double scale;
    double eps;
    Difference scheme;
};

class ModelGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(ModelGradient, FiniteDifferencesAgree) {
    auto c = GetParam();
    auto r = testing::gradient_check_model(c.kind, c.gated, c.scale, c.eps, c.scheme);
    EXPECT_LT(r.policy, 1e-5);
    EXPECT_LT(r.value, 1e-5);
}

// Richardson-extrapolated central differences at eps 1e-3 cover every kind;
// plain central differences resolve the selection kinds directly.
INSTANTIATE_TEST_SUITE_P(AllKinds, ModelGradient,
                         ::testing::Values(GradCase{ModelKind::ff, true, 1.0, 1e-3, Difference::richardson},
                                           GradCase{ModelKind::cnn, true, 1.0, 1e-3, Difference::richardson},
                                           GradCase{ModelKind::rnn, true, 1.0, 1e-3, Difference::richardson},
                                           GradCase{ModelKind::rnn_seq, true, 1.0, 1e-3, Difference::richardson},
                                           GradCase{ModelKind::rnn_seq, false, 1.0, 1e-3, Difference::richardson},
                                           GradCase{ModelKind::ff, true, 1.0, 1e-4, Difference::central},
                                           GradCase{ModelKind::cnn, true, 1.0, 1e-4, Difference::central},
                                           GradCase{ModelKind::rnn, true, 1.0, 3e-4, Difference::central}),
                         [](const auto& info) {
                             auto n = to_string(info.param.kind);
                             std::replace(n.begin(), n.end(), '-', '_');
                             if (!info.param.gated) n += "_ungated";
                             return n + (info.param.scheme == Difference::central ? "_central" : "_richardson");
                         });

TEST(GradCheck, QuadraticIsExact) {
    ParameterSet p;
    auto& t = p.add("theta", 2, 3);
    std::mt19937_64 rng(4);
    fill(t, rng);
    auto loss = [&](bool grad) {
        Graph g;
        auto x = g.param(t);
        auto l = g.scale(g.sum(g.mul(x, x)), 0.5);
        if (grad) g.backward(l);
        return g.scalar(l);
    };
    EXPECT_LT(grad_check(loss, p, 1e-5), 1e-9);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(t.grad.data[i], t.value.data[i]);
    EXPECT_LT(grad_check(loss, p, 1e-4, Difference::richardson), 1e-9);
    EXPECT_THROW(grad_check(loss, p, 1e-7), invalid_argument);
    EXPECT_THROW(grad_check(loss, p, 1e-2), invalid_argument);
    auto bad = [&](bool) { return std::numeric_limits<double>::quiet_NaN(); };
    EXPECT_THROW(grad_check(bad, p, 1e-5), numeric_error);
}

TEST(GradCheck, ScorerWithLogLossOnFourTerms) {
    std::mt19937_64 rng(6);
    ParameterSet p;
    auto& w = p.add("w", 8, 16);
    auto& u = p.add("u", 1, 8);
    auto& b = p.add("b", 1, 1);
    p.for_each([&](const std::string&, Tensor& t) { fill(t, rng, 0.5); });
    auto qv = random_matrix(1, 8, rng), tv = random_matrix(4, 8, rng);
    const std::vector<double> labels{1, 0, 0, 1};
    auto loss = [&](bool grad) {
        Graph g;
        auto z = term_logits(g, g.constant(qv), g.constant(tv), w, u, b);
        // -Σ y log σ(z) + (1 - y) log σ(-z)
        Matrix sign(4, 1);
        for (std::size_t i = 0; i < 4; ++i) sign.data[i] = labels[i] > 0 ? 1.0 : -1.0;
        auto l = g.scale(g.sum(g.log_sigmoid(g.mul(z, g.constant(sign)))), -1.0);
        if (grad) g.backward(l);
        return g.scalar(l);
    };
    EXPECT_LT(grad_check(loss, p, 1e-5), 1e-5);
}

TEST(Scorer, ClosedFormCases) {
    Tensor w(3, 6), u(1, 3), b(1, 1);
    std::mt19937_64 rng(2);
    auto qv = random_matrix(1, 3, rng), tv = random_matrix(4, 3, rng);
    Graph g;
    auto z = g.value(g.sigmoid(term_logits(g, g.constant(qv), g.constant(tv), w, u, b)));
    for (double p : z.data) EXPECT_EQ(p, 0.5);
    b.value.data[0] = 30.0;
    fill(w, rng);
    fill(u, rng, 0.1);
    Graph g2;
    auto hi = g2.value(g2.sigmoid(term_logits(g2, g2.constant(qv), g2.constant(tv), w, u, b)));
    for (double p : hi.data) EXPECT_GE(p, 1.0 - 1e-9);
    Graph g3;
    EXPECT_THROW(term_logits(g3, g3.constant(Matrix(1, 2)), g3.constant(tv), w, u, b), invalid_argument);
}

TEST(ValueNetwork, ClosedFormCases) {
    Tensor v(3, 6), s(1, 3), b(1, 1);
    std::mt19937_64 rng(9);
    auto qv = random_matrix(1, 3, rng), tv = random_matrix(5, 3, rng);
    Graph g;
    EXPECT_EQ(g.scalar(value_estimate(g, g.constant(qv), g.constant(tv), v, s, b)), 0.5);
    fill(v, rng);
    fill(s, rng);
    auto one = random_matrix(1, 3, rng);
    Graph g2;
    double got = g2.scalar(value_estimate(g2, g2.constant(qv), g2.constant(one), v, s, b));
    double want = scalar::sigmoid(
        scalar::term_logit(scalar::to_mat(qv)[0], scalar::to_mat(one)[0], scalar::to_mat(v.value), s.value.data, 0.0));
    EXPECT_NEAR(got, want, 1e-15);
}

TEST(SequenceGenerator, StopCompetesInOneSoftmax) {
    ParameterSet p;
    SequenceGenerator gen(p, 4, true);
    std::mt19937_64 rng(12);
    p.for_each([&](const std::string&, Tensor& t) { fill(t, rng); });
    auto tv = random_matrix(5, 4, rng);
    Graph g;
    auto uniform = g.value(gen.log_probs(g, g.constant(Matrix(1, 4)), g.constant(tv)));
    for (double lp : uniform.data) EXPECT_NEAR(lp, -std::log(6.0), 1e-15);

    auto h = random_matrix(1, 4, rng);
    for (std::size_t j = 0; j < 4; ++j) tv(2, j) = 10.0 * h(0, j);
    auto lp = g.value(gen.log_probs(g, g.constant(h), g.constant(tv)));
    double total = 0.0;
    for (double x : lp.data) total += std::exp(x);
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(std::max_element(lp.data.begin(), lp.data.end()) - lp.data.begin(), 2);
}

TEST(SequenceGenerator, ZeroWeightsKeepZeroState) {
    for (bool gated : {true, false}) {
        ParameterSet p;
        SequenceGenerator gen(p, 3, gated);
        Graph g;
        auto q = g.constant(Matrix(1, 3));
        auto s = gen.initial(g);
        Var prev = g.param(*gen.start);
        for (int k = 0; k < 3; ++k) {
            s = gen.step(g, q, prev, s);
            for (double v : g.value(s.h).data) EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(SequenceGenerator, SameInputsSameState) {
    ParameterSet p;
    SequenceGenerator gen(p, 3, true);
    std::mt19937_64 rng(13);
    p.for_each([&](const std::string&, Tensor& t) { fill(t, rng); });
    Graph g;
    auto q = g.constant(random_matrix(1, 3, rng));
    auto x = g.constant(random_matrix(1, 3, rng));
    auto s0 = gen.initial(g);
    Matrix first = g.value(gen.step(g, q, x, s0).h);
    Matrix second = g.value(gen.step(g, q, x, s0).h);
    EXPECT_EQ(first, second);
}

TEST(ConvEncoder, DuplicatingAPeriodicSequenceKeepsMaxPool) {
    // (a b)^3 already contains every window of the 5-token receptive field
    // that (a b)^6 does, so the max-pooled features cannot change.
    std::mt19937_64 rng(8);
    ParameterSet p;
    EncoderConfig cfg;
    cfg.windows = {3, 3};
    cfg.filters = 4;
    ConvEncoder enc(p, "q", 3, 5, cfg);
    p.for_each([&](const std::string&, Tensor& t) { fill(t, rng); });
    auto a = random_matrix(1, 3, rng), b = random_matrix(1, 3, rng);
    auto seq = [&](std::size_t reps) {
        Matrix m(2 * reps, 3);
        for (std::size_t i = 0; i < 2 * reps; ++i) std::copy_n((i % 2 ? b : a).data.begin(), 3, m.row(i));
        return m;
    };
    Graph g;
    auto once = g.value(enc.encode_sequence(g, g.constant(seq(3))));
    auto twice = g.value(enc.encode_sequence(g, g.constant(seq(6))));
    for (std::size_t j = 0; j < once.cols; ++j) EXPECT_NEAR(once(0, j), twice(0, j), 1e-15);
}

TEST(ConvEncoder, MaxPoolOfSequenceHandComputed) {
    // one layer, window 1, identity-like weight: features are tanh of the inputs, max over rows
    ParameterSet p;
    EncoderConfig cfg;
    cfg.windows = {1};
    ConvEncoder enc(p, "q", 2, 2, cfg);
    p.at("q.conv0.weight").value = Matrix(2, 2, {1, 0, 0, 1});
    Graph g;
    auto x = g.constant(Matrix(3, 2, {0.1, -0.5, 0.7, 0.2, -0.3, 0.4}));
    auto out = g.value(enc.encode_sequence(g, x));
    EXPECT_NEAR(out(0, 0), std::tanh(0.7), 1e-15);
    EXPECT_NEAR(out(0, 1), std::tanh(0.4), 1e-15);
}

std::unique_ptr<Encoder> random_encoder(ParameterSet& p, EncoderKind kind, std::size_t in, std::size_t d,
                                        std::mt19937_64& rng) {
    EncoderConfig cfg;
    cfg.kind = kind;
    cfg.filters = 4;
    cfg.hidden = d / 2;
    auto enc = make_encoder(p, "e", in, d, cfg);
    p.for_each([&](const std::string& name, Tensor& t) {
        if (name.find("bias") == std::string::npos) fill(t, rng);
    });
    return enc;
}

TEST(Encoders, ZeroInputsGiveZeroOutput) {
    std::mt19937_64 rng(14);
    for (auto kind : {EncoderKind::feed_forward, EncoderKind::convolutional, EncoderKind::recurrent}) {
        ParameterSet p;
        auto enc = random_encoder(p, kind, 3, 4, rng);
        Graph g;
        auto out = g.value(enc->encode_sequence(g, g.constant(Matrix(5, 3))));
        ASSERT_EQ(out.cols, 4u);
        for (double v : out.data) EXPECT_EQ(v, 0.0) << to_string(kind);
        EXPECT_THROW(enc->encode_sequence(g, g.constant(Matrix(0, 3))), invalid_argument);
    }
}

TEST(Encoders, FeedForwardSingleTokenIsItsHiddenOutput) {
    std::mt19937_64 rng(15);
    ParameterSet p;
    auto enc = random_encoder(p, EncoderKind::feed_forward, 3, 4, rng);
    fill(p.at("e.bias"), rng);
    auto x = random_matrix(1, 3, rng);
    Graph g;
    auto out = g.value(enc->encode_sequence(g, g.constant(x)));
    const auto& w = p.at("e.weight").value;
    for (std::size_t o = 0; o < 4; ++o) {
        double a = p.at("e.bias").value.data[o];
        for (std::size_t j = 0; j < 3; ++j) a += w(o, j) * x(0, j);
        EXPECT_NEAR(out(0, o), std::tanh(a), 1e-15);
    }
}

TEST(Encoders, RecurrentDependsOnOrder) {
    std::mt19937_64 rng(16);
    ParameterSet p;
    auto enc = random_encoder(p, EncoderKind::recurrent, 3, 4, rng);
    auto x = random_matrix(4, 3, rng);
    Matrix rev(4, 3);
    for (std::size_t i = 0; i < 4; ++i) std::copy_n(x.row(3 - i), 3, rev.row(i));
    Graph g;
    Matrix a = g.value(enc->encode_sequence(g, g.constant(x)));
    Matrix b = g.value(enc->encode_sequence(g, g.constant(rev)));
    EXPECT_NE(a, b);
    EXPECT_EQ(a, g.value(enc->encode_sequence(g, g.constant(x))));
}

TEST(Encoders, TermVectorsFollowContext) {
    std::mt19937_64 rng(17);
    EmbeddingTable table(4, 1);
    for (const auto* w : {"a", "b", "c", "x"}) {
        std::vector<double> v(4);
        for (auto& e : v) e = std::uniform_real_distribution<double>(-1, 1)(rng);
        table.add(w, v);
    }
    CandidatePool pool;
    pool.terms.push_back({"x", {"a", "x", "b"}, 0, 0});
    pool.terms.push_back({"x", {"a", "x", "b"}, 1, 1});
    pool.terms.push_back({"x", {"c", "x", "c"}, 1, 2});
    for (auto kind : {ModelKind::cnn, ModelKind::rnn}) {
        auto cfg = ModelConfig::defaults(kind, 4);
        cfg.context_radius = 1;
        cfg.term_encoder.windows = {3};
        PolicyModel model(cfg, table, 3);
        Graph g;
        auto in = model.embed(g, {"a"}, pool);
        auto t = g.value(model.encode_terms(g, in));
        EXPECT_TRUE(std::equal(t.row(0), t.row(0) + 4, t.row(1)));
        EXPECT_FALSE(std::equal(t.row(0), t.row(0) + 4, t.row(2)));
    }
    auto cfg = ModelConfig::defaults(ModelKind::ff, 4);
    cfg.context_radius = 1;
    PolicyModel zero(cfg, table, 3);
    zero.parameters().policy.for_each([](const std::string&, Tensor& t) {
        std::fill(t.value.data.begin(), t.value.data.end(), 0.0);
    });
    Graph g;
    auto t = g.value(zero.encode_terms(g, zero.embed(g, {"a"}, pool)));
    for (double v : t.data) EXPECT_EQ(v, 0.0);
}

struct SmallWorld {
    SyntheticData data;
    InvertedIndex index;
    SmallWorld() : data(make()), index(build_index(data.corpus)) {}
    static SyntheticData make() {
        SyntheticConfig sc;
        sc.n_topics = 6;
        sc.n_docs = 36;
        sc.n_queries = 24;
        sc.embedding_dim = 8;
        sc.background_words = 50;
        sc.missing_rate = 0.2;
        return generate_synthetic(sc);
    }
    CandidatePool pool(const QueryRecord& q, std::size_t radius = 4) const {
        return build_pool(q.tokens, index.search(q.tokens, 3), index, {20, 3, radius});
    }
};

class SelectionModel : public ::testing::TestWithParam<ModelKind> {};

TEST_P(SelectionModel, ProbabilitiesDependOnlyOnQueryAndContext) {
    SmallWorld w;
    PolicyModel model(ModelConfig::defaults(GetParam(), 8), w.data.embeddings, 4);
    const auto& q = w.data.split.train[0];
    auto pool = w.pool(q);
    auto probs = model.term_probabilities(q.tokens, pool);
    ASSERT_EQ(probs.size(), pool.size());
    for (double p : probs) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
    // same candidate alone, and with the pool reversed
    CandidatePool single = pool;
    single.terms = {pool.terms[3]};
    EXPECT_NEAR(model.term_probabilities(q.tokens, single)[0], probs[3], 1e-12);
    CandidatePool rev = pool;
    std::reverse(rev.terms.begin(), rev.terms.end());
    auto rp = model.term_probabilities(q.tokens, rev);
    for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_NEAR(rp[pool.size() - 1 - i], probs[i], 1e-12);
    // identical context, identical probability
    CandidatePool dup = pool;
    dup.terms.push_back(pool.terms[1]);
    EXPECT_NEAR(model.term_probabilities(q.tokens, dup).back(), probs[1], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Kinds, SelectionModel, ::testing::Values(ModelKind::ff, ModelKind::cnn, ModelKind::rnn),
                         [](const auto& info) { return to_string(info.param); });

TEST(PolicyModel, ContextWidthMustMatchRadius) {
    SmallWorld w;
    PolicyModel model(ModelConfig::defaults(ModelKind::cnn, 8), w.data.embeddings, 1);
    const auto& q = w.data.split.train[0];
    EXPECT_THROW(model.term_probabilities(q.tokens, w.pool(q, 2)), invalid_argument);
}

TEST(PolicyModel, OovTokensUseTheLearnableVector) {
    SmallWorld w;
    PolicyModel model(ModelConfig::defaults(ModelKind::ff, 8), w.data.embeddings, 1);
    const auto& oov = model.parameters().policy.at("oov").value.data;
    EXPECT_TRUE(std::equal(oov.begin(), oov.end(), w.data.embeddings.oov().begin()));
    CandidatePool pool;
    pool.terms.push_back({"never-seen-token", context_window({"never-seen-token"}, 0, 4), std::nullopt, 0});
    Graph g;
    auto f = model.forward(g, {"never-seen-token"}, pool, false);
    model.parameters().policy.zero_grad();
    g.backward(g.sum(f.logits));
    double norm = 0.0;
    for (double x : model.parameters().policy.at("oov").grad.data) norm += x * x;
    EXPECT_GT(norm, 0.0);
}

TEST(PolicyModel, ValueLossNeverReachesPolicyParameters) {
    SmallWorld w;
    PolicyModel model(ModelConfig::defaults(ModelKind::cnn, 8), w.data.embeddings, 1);
    const auto& q = w.data.split.train[0];
    Graph g;
    auto f = model.forward(g, q.tokens, w.pool(q), true);
    model.parameters().policy.zero_grad();
    model.parameters().value.zero_grad();
    g.backward(detail::value_loss_node(g, f.value, 1.0, 0.1));
    EXPECT_EQ(model.parameters().policy.grad_norm(), 0.0);
    EXPECT_GT(model.parameters().value.grad_norm(), 0.0);
}

TEST(PolicyModel, SeedDeterminesInitialization) {
    SmallWorld w;
    auto cfg = ModelConfig::defaults(ModelKind::rnn, 8);
    PolicyModel a(cfg, w.data.embeddings, 5), b(cfg, w.data.embeddings, 5), c(cfg, w.data.embeddings, 6);
    EXPECT_EQ(a.parameters().checksum(), b.parameters().checksum());
    EXPECT_NE(a.parameters().checksum(), c.parameters().checksum());
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
    TempDir dir;
    SmallWorld w;
    for (auto kind : {ModelKind::ff, ModelKind::cnn, ModelKind::rnn, ModelKind::rnn_seq}) {
        auto cfg = ModelConfig::defaults(kind, 8);
        PolicyModel a(cfg, w.data.embeddings, 11);
        auto path = dir.file(to_string(kind) + ".ckpt");
        a.save(path);
        EXPECT_EQ(PolicyModel::read_config(path).kind, kind);
        PolicyModel b(a.config(), w.data.embeddings, 99);
        b.load(path);
        EXPECT_EQ(a.parameters().checksum(), b.parameters().checksum());
        if (kind != ModelKind::rnn_seq) {
            const auto& q = w.data.split.train[1];
            auto pool = w.pool(q);
            EXPECT_EQ(a.term_probabilities(q.tokens, pool), b.term_probabilities(q.tokens, pool));
        }
    }
}

TEST(Checkpoint, MismatchAndCorruptionRejected) {
    TempDir dir;
    SmallWorld w;
    PolicyModel a(ModelConfig::defaults(ModelKind::cnn, 8), w.data.embeddings, 1);
    a.save(dir.file("a.ckpt"));
    PolicyModel other(ModelConfig::defaults(ModelKind::ff, 8), w.data.embeddings, 1);
    EXPECT_THROW(other.load(dir.file("a.ckpt")), format_error);
    testing::write_text(dir.file("junk.ckpt"), "garbage");
    EXPECT_THROW(a.load(dir.file("junk.ckpt")), format_error);
    EXPECT_THROW(a.load(dir.file("missing.ckpt")), not_found);
    // truncated file
    {
        std::ifstream in(dir.file("a.ckpt"), std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream(dir.file("cut.ckpt"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    }
    EXPECT_THROW(a.load(dir.file("cut.ckpt")), format_error);
}

TEST(ModelConfig, JsonRoundTripAndValidation) {
    for (auto kind : {ModelKind::ff, ModelKind::cnn, ModelKind::rnn, ModelKind::rnn_seq}) {
        auto c = ModelConfig::defaults(kind, 16);
        c.embedding_dim = 7;
        c.gated = kind != ModelKind::rnn_seq;
        EXPECT_EQ(model_config_from_json(to_json(c)), c);
    }
    auto bad = ModelConfig::defaults(ModelKind::rnn, 16);
    bad.embedding_dim = 4;
    bad.query_encoder.hidden = 5;
    EXPECT_THROW(bad.validate(), invalid_argument);
    auto even = ModelConfig::defaults(ModelKind::cnn, 16);
    even.embedding_dim = 4;
    even.term_encoder.windows = {4};
    EXPECT_THROW(even.validate(), invalid_argument);
    EXPECT_THROW(parse_model_kind("transformer"), invalid_argument);
}

}  // namespace
}  // namespace qrl
