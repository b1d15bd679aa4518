#include <gtest/gtest.h>

#include "test_support.hpp"

namespace qrl {
namespace {

using testing::TempDir;
using testing::write_text;

TEST(Embeddings, LoadSkipsWord2vecHeader) {
    TempDir dir;
    write_text(dir.file("v.txt"), "2 3\na 1 0 0\nb 0 2 0\n");
    auto t = load_embeddings(dir.file("v.txt"));
    EXPECT_EQ(t.dimension(), 3u);
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.lookup("b")[1], 2.0);
}

TEST(Embeddings, LoadRejectsBadInput) {
    TempDir dir;
    write_text(dir.file("ragged.txt"), "a 1 0\nb 1 0 0\n");
    EXPECT_THROW(load_embeddings(dir.file("ragged.txt")), format_error);
    write_text(dir.file("nan.txt"), "a 1 x\n");
    EXPECT_THROW(load_embeddings(dir.file("nan.txt")), format_error);
    write_text(dir.file("dup.txt"), "a 1 0\na 0 1\n");
    EXPECT_THROW(load_embeddings(dir.file("dup.txt")), format_error);
    write_text(dir.file("empty.txt"), "\n");
    EXPECT_THROW(load_embeddings(dir.file("empty.txt")), format_error);
    EXPECT_THROW(load_embeddings(dir.file("missing.txt")), not_found);
}

TEST(Embeddings, WriteLoadRoundTripIsExact) {
    TempDir dir;
    std::mt19937_64 rng(5);
    auto corpus = testing::random_corpus(rng, 10, 20, 5);
    auto t = testing::random_table(rng, corpus, 6);
    t.write(dir.file("v.txt"));
    auto back = load_embeddings(dir.file("v.txt"));
    ASSERT_EQ(back.size(), t.size());
    for (const auto& w : t.vocabulary().tokens()) {
        auto a = t.lookup(w), b = back.lookup(w);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    }
}

TEST(Embeddings, OovVectorIsSeededAndShared) {
    EmbeddingTable a(4, 3), b(4, 3), c(4, 4);
    EXPECT_TRUE(std::equal(a.oov().begin(), a.oov().end(), b.oov().begin()));
    EXPECT_FALSE(std::equal(a.oov().begin(), a.oov().end(), c.oov().begin()));
    auto v = a.lookup("unknown");
    EXPECT_TRUE(std::equal(v.begin(), v.end(), a.oov().begin()));
}

TEST(Embeddings, CosineAndQueryMean) {
    std::vector<double> x{1, 0}, y{0, 1}, z{2, 0}, zero{0, 0};
    EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(x, z), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(x, zero), 0.0);
    EXPECT_THROW(cosine_similarity(x, std::vector<double>{1, 2, 3}), invalid_argument);

    EmbeddingTable t(2, 0);
    t.add("a", x);
    t.add("b", y);
    auto q = query_embedding(t, {"a", "b", "a"});
    EXPECT_DOUBLE_EQ(q[0], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(q[1], 1.0 / 3.0);
    EXPECT_THROW(query_embedding(t, {}), invalid_argument);
}

TEST(Embeddings, DimensionChecked) {
    EmbeddingTable t(3, 0);
    EXPECT_THROW(t.add("a", std::vector<double>{1, 2}), invalid_argument);
}

}  // namespace
}  // namespace qrl
