#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"

namespace qrl {
namespace {

using nlohmann::json;
using testing::TempDir;
using testing::write_text;

TEST(Config, EmptyObjectGivesDefaults) {
    auto c = config_from_json(json::object());
    EXPECT_EQ(c.rl.pool.max_words, 300u);
    EXPECT_EQ(c.rl.pool.max_docs, 7u);
    EXPECT_EQ(c.rl.rounds, 2u);
    EXPECT_EQ(c.rl.beam, 4u);
    EXPECT_EQ(c.rl.max_len, 50u);
    EXPECT_EQ(c.rl.reward.k, 40u);
    EXPECT_EQ(c.oracle.subset_size, 100u);
    EXPECT_EQ(c.oracle.patience_epochs, 50u);
    EXPECT_EQ(c.sl.label_threshold, 0.005);
    EXPECT_EQ(c.sl.classifier.threshold, 0.5);
    EXPECT_EQ(c.eval_k, 40u);
}

TEST(Config, JsonRoundTrip) {
    auto j = json::parse(R"({
        "seed": 7, "d": 16, "eval_k": 10,
        "model": {"gated": false},
        "rl": {"M": 50, "K": 3, "context_radius": 2, "lambda": 0.03, "lr": 0.001, "reward_k": 10,
               "rounds": 1, "beam": 2, "max_len": 5, "clip_norm": 0.5, "batch": 4},
        "train": {"max_epochs": 3, "patience": 2, "shuffle": false},
        "prf": {"n": 10, "k": 5, "rm_lambda": 0.4, "rm_mu": 1000},
        "sl": {"steps": 10, "threshold": 0.4},
        "oracle": {"subset_size": 25, "patience_epochs": 5, "max_epochs": 9}
    })");
    auto c = config_from_json(j);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.rl.pool.max_docs, 3u);
    EXPECT_EQ(c.rl.batch, 4u);
    EXPECT_FALSE(c.train.shuffle);
    EXPECT_EQ(c.prf.rm.mu, 1000.0);
    EXPECT_EQ(c.oracle.subset_size, 25u);
    auto back = to_json(c);
    EXPECT_EQ(to_json(config_from_json(back)), back);

    auto mc = c.model_config(ModelKind::rnn_seq, 5);
    EXPECT_EQ(mc.d, 16u);
    EXPECT_EQ(mc.embedding_dim, 5u);
    EXPECT_EQ(mc.context_radius, 2u);
    EXPECT_FALSE(mc.gated);
    EXPECT_EQ(c.metrics()[0].k, 10u);
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
    EXPECT_THROW(config_from_json(json::parse(R"({"sead": 1})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"rl": {"M": 5, "gamma": 1}})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"model": {"layers": 3}})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"rl": {"M": "many"}})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"rl": []})")), format_error);
    EXPECT_THROW(config_from_json(json::parse(R"({"rl": {"M": 0}})")), invalid_argument);
    EXPECT_THROW(config_from_json(json::parse(R"({"rl": {"lr": 0}})")), invalid_argument);
    EXPECT_THROW(config_from_json(json::parse(R"({"prf": {"rm_lambda": 2}})")), invalid_argument);
    EXPECT_THROW(config_from_json(json::parse(R"({"oracle": {"subset_size": 0}})")), invalid_argument);
    EXPECT_THROW(config_from_json(json::parse(R"({"d": 0})")), invalid_argument);
}

TEST(Config, RelativePathsResolveAgainstTheConfigFile) {
    TempDir dir;
    std::filesystem::create_directories(dir.path() / "sub");
    write_text(dir.file("sub/c.json"), R"({"corpus": "../data/corpus.jsonl", "embeddings": "/abs/v.txt"})");
    auto c = load_config(dir.file("sub/c.json"));
    EXPECT_EQ(c.corpus, (dir.path() / "data" / "corpus.jsonl").lexically_normal().string());
    EXPECT_EQ(c.embeddings, "/abs/v.txt");

    write_text(dir.file("bad.json"), "{ not json");
    EXPECT_THROW(load_config(dir.file("bad.json")), format_error);
    EXPECT_THROW(load_config(dir.file("missing.json")), not_found);
}

}  // namespace
}  // namespace qrl
