#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embeddings.hpp"
#include "error.hpp"

namespace qrl {

/// Topic-mixture world with controllable query/document vocabulary mismatch.
///
/// Topic t owns document words "t<t>w<j>". Its query vocabulary holds
/// round(query_words * (1 - mismatch)) of those document words plus
/// query-only words "t<t>q<j>" that never occur in documents. Topics are
/// grouped; each group shares words "g<g>w<j>". Every document also draws
/// from a shared Zipf-distributed background vocabulary "b<j>".
///
/// Word vectors are noise plus a topic direction and a group direction;
/// topic-specific words (document and query-only alike) also share one
/// "specificity" direction, so generic group and background words are
/// separable from content words without knowing the topic.
///
/// Document i belongs to topic i % n_topics; query i asks for topic
/// i % n_topics and every document of that topic is relevant.
struct SyntheticConfig {
    std::uint64_t seed = 1;
    std::size_t n_topics = 200;
    std::size_t n_docs = 2000;
    std::size_t n_queries = 300;
    double mismatch = 0.5;

    std::size_t topic_words = 20;
    std::size_t query_words = 8;
    std::size_t group_size = 5;  // topics per group
    std::size_t group_words = 20;
    std::size_t background_words = 1000;
    std::size_t title_length = 3;
    std::size_t body_length = 30;
    double topic_rate = 0.2;
    double leak_rate = 0.0;  // words of another topic from the same group
    double group_rate = 0.2;
    std::size_t query_length_min = 3;
    std::size_t query_length_max = 5;
    double valid_fraction = 1.0 / 6.0;
    double test_fraction = 1.0 / 6.0;

    std::size_t embedding_dim = 32;
    double topic_signal = 0.5;  // weight of the topic direction in topic-word vectors
    double group_signal = 1.0;  // weight of the group direction in topic and group words
    double specificity = 1.0;   // weight of a direction shared by all topic-specific words
    double noise = 0.8;         // per-word isotropic noise
    double missing_rate = 0.0;  // fraction of background words left out of the table (OOV)

    void validate() const {
        if (n_topics == 0) throw invalid_argument("n_topics must be >= 1");
        if (n_docs < n_topics) throw invalid_argument("n_docs must be >= n_topics");
        if (n_queries == 0) throw invalid_argument("n_queries must be >= 1");
        if (mismatch < 0.0 || mismatch > 1.0) throw invalid_argument("mismatch must lie in [0, 1]");
        if (topic_words == 0 || query_words == 0 || group_size == 0 || background_words == 0) {
            throw invalid_argument("vocabulary sizes must be positive");
        }
        if (body_length == 0) throw invalid_argument("body_length must be positive");
        if (topic_rate < 0.0 || leak_rate < 0.0 || group_rate < 0.0 || topic_rate + leak_rate + group_rate > 1.0) {
            throw invalid_argument("topic, leak and group rates must sum to at most 1");
        }
        if (query_length_min == 0 || query_length_min > query_length_max) throw invalid_argument("bad query lengths");
        if (valid_fraction < 0.0 || test_fraction < 0.0 || valid_fraction + test_fraction >= 1.0) {
            throw invalid_argument("split fractions must leave training queries");
        }
        if (embedding_dim == 0) throw invalid_argument("embedding_dim must be positive");
        if (topic_signal < 0.0 || group_signal < 0.0 || specificity < 0.0 || noise < 0.0) {
            throw invalid_argument("embedding weights must be non-negative");
        }
        if (missing_rate < 0.0 || missing_rate > 1.0) throw invalid_argument("missing_rate must lie in [0, 1]");
    }
};

struct SyntheticData {
    Corpus corpus;
    DatasetSplit split;
    EmbeddingTable embeddings;
    std::vector<std::size_t> query_topic;  // by qid
};

namespace detail {

inline std::string topic_word(std::size_t t, std::size_t j) { return "t" + std::to_string(t) + "w" + std::to_string(j); }
inline std::string query_word(std::size_t t, std::size_t j) { return "t" + std::to_string(t) + "q" + std::to_string(j); }
inline std::string group_word(std::size_t g, std::size_t j) { return "g" + std::to_string(g) + "w" + std::to_string(j); }
inline std::string background_word(std::size_t j) { return "b" + std::to_string(j); }

/// Number of document words in each topic's query vocabulary.
inline std::size_t shared_query_words(const SyntheticConfig& c) {
    auto n = static_cast<std::size_t>(std::llround(static_cast<double>(c.query_words) * (1.0 - c.mismatch)));
    return std::min(n, c.topic_words);
}

}  // namespace detail

/// The query vocabulary of every topic, in generation order.
inline std::vector<token_seq> synthetic_query_vocabularies(const SyntheticConfig& c) {
    c.validate();
    std::mt19937_64 rng(c.seed ^ 0x51ed270b2f0cull);
    std::vector<token_seq> out(c.n_topics);
    const auto shared = detail::shared_query_words(c);
    for (std::size_t t = 0; t < c.n_topics; ++t) {
        std::vector<std::size_t> words(c.topic_words);
        std::iota(words.begin(), words.end(), 0);
        std::shuffle(words.begin(), words.end(), rng);
        for (std::size_t j = 0; j < shared; ++j) out[t].push_back(detail::topic_word(t, words[j]));
        for (std::size_t j = shared; j < c.query_words; ++j) out[t].push_back(detail::query_word(t, j - shared));
    }
    return out;
}

inline SyntheticData generate_synthetic(const SyntheticConfig& c) {
    c.validate();
    SyntheticData out;
    std::mt19937_64 rng(c.seed);
    const std::size_t n_groups = (c.n_topics + c.group_size - 1) / c.group_size;

    // background words follow a Zipf(1) law
    std::vector<double> zipf(c.background_words);
    for (std::size_t j = 0; j < zipf.size(); ++j) zipf[j] = 1.0 / static_cast<double>(j + 1);
    std::discrete_distribution<std::size_t> background(zipf.begin(), zipf.end());
    std::uniform_int_distribution<std::size_t> topic_pick(0, c.topic_words - 1);
    std::uniform_int_distribution<std::size_t> group_pick(0, std::max<std::size_t>(c.group_words, 1) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto draw = [&](std::size_t topic) {
        double u = unit(rng);
        if (u < c.topic_rate) return detail::topic_word(topic, topic_pick(rng));
        u -= c.topic_rate;
        if (u < c.leak_rate) {
            auto first = topic / c.group_size * c.group_size;
            auto size = std::min(c.group_size, c.n_topics - first);
            std::uniform_int_distribution<std::size_t> sibling(0, size - 1);
            return detail::topic_word(first + sibling(rng), topic_pick(rng));
        }
        u -= c.leak_rate;
        if (u < c.group_rate && c.group_words > 0) {
            return detail::group_word(topic / c.group_size, group_pick(rng));
        }
        return detail::background_word(background(rng));
    };

    std::vector<std::vector<doc_id>> topic_docs(c.n_topics);
    for (std::size_t i = 0; i < c.n_docs; ++i) {
        auto topic = i % c.n_topics;
        Document d;
        d.id = i;
        for (std::size_t k = 0; k < c.title_length; ++k) d.title.push_back(draw(topic));
        for (std::size_t k = 0; k < c.body_length; ++k) d.body.push_back(draw(topic));
        topic_docs[topic].push_back(d.id);
        out.corpus.add(std::move(d));
    }

    auto vocab = synthetic_query_vocabularies(c);
    std::uniform_int_distribution<std::size_t> len_pick(c.query_length_min, c.query_length_max);
    std::vector<QueryRecord> queries;
    for (std::size_t i = 0; i < c.n_queries; ++i) {
        auto topic = i % c.n_topics;
        auto words = vocab[topic];
        std::shuffle(words.begin(), words.end(), rng);
        words.resize(std::min(len_pick(rng), words.size()));
        queries.push_back({i, words, topic_docs[topic]});
        out.query_topic.push_back(topic);
    }
    std::shuffle(queries.begin(), queries.end(), rng);
    auto n_valid = static_cast<std::size_t>(std::llround(c.valid_fraction * static_cast<double>(c.n_queries)));
    auto n_test = static_cast<std::size_t>(std::llround(c.test_fraction * static_cast<double>(c.n_queries)));
    n_valid = std::min(n_valid, queries.size());
    n_test = std::min(n_test, queries.size() - n_valid);
    out.split.valid.assign(queries.begin(), queries.begin() + static_cast<std::ptrdiff_t>(n_valid));
    out.split.test.assign(queries.begin() + static_cast<std::ptrdiff_t>(n_valid),
                          queries.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
    out.split.train.assign(queries.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), queries.end());
    for (auto* s : {&out.split.train, &out.split.valid, &out.split.test}) {
        std::sort(s->begin(), s->end(), [](const QueryRecord& a, const QueryRecord& b) { return a.qid < b.qid; });
    }

    // embeddings: topic and group directions plus isotropic noise
    std::mt19937_64 erng(c.seed ^ 0x2545f4914f6cdd1dull);
    const auto e = c.embedding_dim;
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(e)));
    auto random_vec = [&] {
        vec v(e);
        for (auto& x : v) x = gauss(erng);
        return v;
    };
    std::vector<vec> topic_dir(c.n_topics), group_dir(n_groups);
    const vec specific_dir = random_vec();
    for (auto& v : topic_dir) v = random_vec();
    for (auto& v : group_dir) v = random_vec();
    auto word_vec = [&](const vec* topic, const vec* group) {
        vec v = random_vec();
        for (std::size_t k = 0; k < e; ++k) {
            v[k] *= c.noise;
            if (topic) v[k] += c.topic_signal * (*topic)[k] + c.specificity * specific_dir[k];
            if (group) v[k] += c.group_signal * (*group)[k];
        }
        return v;
    };
    EmbeddingTable table(e, c.seed ^ 0x9e3779b9u);
    for (std::size_t t = 0; t < c.n_topics; ++t) {
        const auto* g = &group_dir[t / c.group_size];
        for (std::size_t j = 0; j < c.topic_words; ++j) table.add(detail::topic_word(t, j), word_vec(&topic_dir[t], g));
        for (std::size_t j = 0; j + detail::shared_query_words(c) < c.query_words; ++j) {
            table.add(detail::query_word(t, j), word_vec(&topic_dir[t], g));
        }
    }
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
        for (std::size_t j = 0; j < c.group_words; ++j) table.add(detail::group_word(gi, j), word_vec(nullptr, &group_dir[gi]));
    }
    for (std::size_t j = 0; j < c.background_words; ++j) {
        auto v = random_vec();
        if (unit(erng) < c.missing_rate) continue;
        table.add(detail::background_word(j), v);
    }
    out.embeddings = std::move(table);
    return out;
}

inline SyntheticData generate_synthetic(std::uint64_t seed, std::size_t n_topics, std::size_t n_docs,
                                        std::size_t n_queries, double mismatch) {
    SyntheticConfig c;
    c.seed = seed;
    c.n_topics = n_topics;
    c.n_docs = n_docs;
    c.n_queries = n_queries;
    c.mismatch = mismatch;
    return generate_synthetic(c);
}

}  // namespace qrl
