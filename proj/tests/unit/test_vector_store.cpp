#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "slic/error.hpp"
#include "slic/util.hpp"
#include "slic/vector_store.hpp"
#include "support/support.hpp"

using namespace slic;
using namespace slic::vs;

namespace {

Document doc(const std::string& doi, const std::string& title, const std::string& abstract,
             std::optional<std::string> full_text = std::nullopt) {
  Document d;
  d.doi = doi;
  d.title = title;
  d.abstract = abstract;
  d.full_text = std::move(full_text);
  return d;
}

std::string para(std::size_t chars, char fill) {
  // Sentences of 50 chars: 48 letters, '.', ' '.
  std::string s;
  while (s.size() + 50 <= chars) s += std::string(48, fill) + ". ";
  s += std::string(chars - s.size(), fill);
  return s;
}

VectorStore random_store(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  VectorStore s(d);
  for (std::size_t i = 0; i < n; ++i) {
    VectorRecord r;
    // Few distinct DOIs so ties on score fall through to chunk_id too.
    r.doi = "10.1/v" + std::to_string(i % 7);
    r.chunk_id = static_cast<int>(i / 7) - 1;
    for (std::size_t j = 0; j < d; ++j) r.vector.push_back(static_cast<float>(g(rng)));
    if (i % 5 == 0 && i > 0) r.vector = s.records()[i - 5].vector;  // exact duplicates
    r.text = "t" + std::to_string(i);
    r.norm_title = util::to_lower_ascii(r.text);
    s.add(std::move(r));
  }
  return s;
}

std::vector<Hit> brute_cosine(const VectorStore& s, const std::vector<double>& q, std::size_t k) {
  std::vector<Hit> all;
  double qn = 0;
  for (double x : q) qn += x * x;
  for (const auto& r : s.records()) {
    double dot = 0, rn = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      dot += q[i] * r.vector[i];
      rn += static_cast<double>(r.vector[i]) * r.vector[i];
    }
    all.push_back({r.doi, r.chunk_id, dot / (std::sqrt(qn) * std::sqrt(rn)), r.text});
  }
  std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
    return std::tie(b.score, a.doi, a.chunk_id) < std::tie(a.score, b.doi, b.chunk_id);
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST(Chunk, EmptyText) { EXPECT_TRUE(chunk_fulltext("").empty()); }

TEST(Chunk, ThreeParagraphs) {
  auto c = chunk_fulltext("First one.\n\nSecond one.\n  \nThird\nspans two lines.");
  ASSERT_EQ(c.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(c[i].first, i);
  EXPECT_EQ(c[0].second, "First one.");
  EXPECT_EQ(c[2].second, "Third\nspans two lines.");
}

TEST(Chunk, LongParagraphSplitsAtSentences) {
  std::string p = para(2500, 'a');
  auto c = chunk_fulltext(p, 1000);
  ASSERT_EQ(c.size(), 3u);
  std::string joined;
  for (const auto& [id, t] : c) {
    EXPECT_LE(t.size(), 1000u);
    EXPECT_EQ(t.back(), '.');
    if (!joined.empty()) joined += ' ';
    joined += t;
  }
  EXPECT_EQ(joined, util::trim(p));
}

TEST(Chunk, HardCutWithoutSentenceEnd) {
  std::string p(2100, 'x');
  auto c = chunk_fulltext(p, 1000);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].second.size(), 1000u);
  EXPECT_EQ(c[2].second.size(), 100u);
}

TEST(Chunk, MinimumSize) { EXPECT_THROW(chunk_fulltext("x", 100), ConfigError); }

TEST(Chunk, NeverSplitsCodePoints) {
  std::string p;
  while (p.size() < 2100) p += "\xC3\xA9";  // é
  for (const auto& [id, t] : chunk_fulltext(p, 999)) EXPECT_EQ(util::utf8_decode(t).size() * 2, t.size());
}

TEST(Index, RecordCounts) {
  std::vector<Document> docs;
  for (int i = 0; i < 10; ++i) docs.push_back(doc("10.1/d" + std::to_string(i), "Title " + std::to_string(i), "abs"));
  HashEmbedder e(64);
  IndexStats st;
  auto s = index_documents(Corpus(docs), e, 1000, &st);
  EXPECT_EQ(s.size(), 10u);
  EXPECT_EQ(st.documents, 10u);
  EXPECT_EQ(st.chunks, 0u);

  docs[0].full_text = "one\n\ntwo\n\nthree";
  docs[1].full_text = para(2500, 'b');
  s = index_documents(Corpus(docs), e, 1000, &st);
  EXPECT_EQ(s.size(), 16u);
  EXPECT_EQ(st.chunks, 6u);
  ASSERT_NE(s.find("10.1/d0", 2), nullptr);
  EXPECT_EQ(s.find("10.1/d0", 2)->text, "three");
  EXPECT_EQ(s.find("10.1/d3", -1)->norm_title, "title 3");
  EXPECT_EQ(s.find("10.1/d3", 0), nullptr);
}

TEST(HashEmbedder, UnitAndDeterministic) {
  HashEmbedder e(128);
  for (const char* t : {"", "   ", "malware families", "Malware   FAMILIES", "the of and"}) {
    auto v = e.embed(t);
    ASSERT_EQ(v.size(), 128u);
    double n = 0;
    for (double x : v) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12) << t;
    EXPECT_EQ(v, e.embed(t));
  }
  EXPECT_EQ(e.embed("malware families"), e.embed("Malware   FAMILIES"));
  EXPECT_THROW(HashEmbedder(0), ConfigError);
}

TEST(Knn, CosineExample) {
  VectorStore s(2);
  s.add({"10.1/a", -1, "a", {1, 0}, ""});
  s.add({"10.1/b", -1, "b", {0, 1}, ""});
  s.add({"10.1/c", -1, "c", {1, 1}, ""});
  auto h = s.knn_cosine({1, 0}, 2);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].doi, "10.1/a");
  EXPECT_DOUBLE_EQ(h[0].score, 1.0);
  EXPECT_EQ(h[1].doi, "10.1/c");
  EXPECT_NEAR(h[1].score, std::sqrt(0.5), 1e-7);
  EXPECT_EQ(s.knn_cosine({1, 0}, 10).size(), 3u);
}

TEST(Knn, TiesBreakByDoiThenChunk) {
  VectorStore s(2);
  s.add({"10.1/b", 0, "", {1, 0}, ""});
  s.add({"10.1/a", 3, "", {2, 0}, ""});
  s.add({"10.1/a", 1, "", {1, 0}, ""});
  auto h = s.knn_cosine({1, 0}, 3);
  EXPECT_EQ(h[0].doi + "#" + std::to_string(h[0].chunk_id), "10.1/a#1");
  EXPECT_EQ(h[1].doi + "#" + std::to_string(h[1].chunk_id), "10.1/a#3");
  EXPECT_EQ(h[2].doi, "10.1/b");
}

TEST(Knn, CosineMatchesBruteForce) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t d = 1 + rng() % 12, n = 1 + rng() % 60, k = 1 + rng() % 15;
    auto s = random_store(rng, n, d);
    std::normal_distribution<double> g;
    std::vector<double> q(d);
    for (auto& x : q) x = g(rng);
    auto got = s.knn_cosine(q, k);
    auto want = brute_cosine(s, q, k);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].doi, want[i].doi) << trial << " " << i;
      EXPECT_EQ(got[i].chunk_id, want[i].chunk_id) << trial << " " << i;
      EXPECT_DOUBLE_EQ(got[i].score, want[i].score);
    }
  }
}

TEST(Knn, LevenshteinOnTitles) {
  std::vector<Document> docs = {doc("10.1/a", "Malware Families", "x", "p1\n\np2"),
                                doc("10.1/b", "Anomaly detection", "x"), doc("10.1/c", "Malware family", "x")};
  auto s = index_documents(Corpus(docs), HashEmbedder(16));
  auto h = s.knn_levenshtein("malware familes", 2);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].doi, "10.1/a");
  EXPECT_EQ(h[0].chunk_id, -1);
  EXPECT_DOUBLE_EQ(h[0].score, -1.0 / 16.0);
  EXPECT_EQ(h[1].doi, "10.1/c");
  // Title search only sees one record per document.
  EXPECT_EQ(s.knn_levenshtein("zzz", 10).size(), 3u);
  EXPECT_EQ(s.knn_levenshtein("p2", 1, LevenshteinField::text)[0].chunk_id, 1);
}

TEST(Knn, LevenshteinMatchesBruteForce) {
  std::mt19937_64 rng(5);
  std::vector<Document> docs;
  for (int i = 0; i < 30; ++i) docs.push_back(doc("10.1/l" + std::to_string(i), slic::testing::fuzz_string(rng()), ""));
  auto s = index_documents(Corpus(docs), HashEmbedder(8));
  for (int trial = 0; trial < 30; ++trial) {
    std::string q = slic::testing::fuzz_string(rng());
    std::size_t k = 1 + rng() % 10;
    auto got = s.knn_levenshtein(q, k);
    std::vector<std::tuple<double, std::string>> want;
    for (const auto& d : docs)
      want.emplace_back(normalized_levenshtein(util::to_lower_ascii(q), util::to_lower_ascii(d.title)), d.doi);
    std::sort(want.begin(), want.end());
    ASSERT_EQ(got.size(), k);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(got[i].doi, std::get<1>(want[i]));
      EXPECT_DOUBLE_EQ(-got[i].score, std::get<0>(want[i]));
    }
  }
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("caf\xC3\xA9", "cafe"), 1u);
  EXPECT_DOUBLE_EQ(normalized_levenshtein("", ""), 0.0);
  EXPECT_DOUBLE_EQ(normalized_levenshtein("abc", "abd"), 1.0 / 3.0);
}

TEST(Levenshtein, SymmetricBoundedTriangle) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto a = slic::testing::fuzz_string(i), b = slic::testing::fuzz_string(i + 1000), c = slic::testing::fuzz_string(i + 2000);
    EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
    EXPECT_EQ(levenshtein(a, a), 0u);
    EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
    double n = normalized_levenshtein(a, b);
    EXPECT_GE(n, 0.0);
    EXPECT_LE(n, 1.0);
  }
}

TEST(Store, Errors) {
  VectorStore s(3);
  EXPECT_THROW(s.knn_cosine({1, 0, 0}, 1), EmptyStore);
  EXPECT_THROW(s.knn_levenshtein("x", 1), EmptyStore);
  EXPECT_THROW(s.add({"10.1/a", -1, "", {1, 0}, ""}), EmbeddingDimensionMismatch);
  s.add({"10.1/a", -1, "", {1, 0, 0}, ""});
  EXPECT_THROW(s.add({"10.1/a", -1, "", {0, 1, 0}, ""}), FormatError);
  EXPECT_THROW(s.knn_cosine({1, 0}, 1), EmbeddingDimensionMismatch);
  EXPECT_THROW(s.knn_cosine({0, 0, 0}, 1), ZeroVector);
  EXPECT_THROW(s.knn_cosine({1, 0, 0}, 0), ConfigError);
}

TEST(Store, SerializeRoundTrip) {
  auto f = slic::testing::make_qa_fixture();
  const auto& s = f->vectors;
  auto text = s.serialize();
  auto back = VectorStore::deserialize(text);
  EXPECT_EQ(back.size(), s.size());
  EXPECT_EQ(back.dimension(), s.dimension());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.records()[i].vector, s.records()[i].vector);
    EXPECT_EQ(back.records()[i].text, s.records()[i].text);
    EXPECT_EQ(back.records()[i].norm_title, s.records()[i].norm_title);
  }
  EXPECT_EQ(back.serialize(), text);

  slic::testing::TempDir tmp;
  s.save(tmp.path() / "a.store");
  index_documents(f->corpus, *f->provider).save(tmp.path() / "b.store");
  EXPECT_EQ(util::read_file(tmp.path() / "a.store"), util::read_file(tmp.path() / "b.store"));
  EXPECT_EQ(VectorStore::load(tmp.path() / "a.store").serialize(), text);
}

TEST(Store, DeserializeRejectsBadInput) {
  EXPECT_THROW(VectorStore::deserialize(""), FormatError);
  EXPECT_THROW(VectorStore::deserialize("{\"d\":2,\"count\":1}\n"), FormatError);
  EXPECT_THROW(VectorStore::deserialize("{\"d\":2,\"count\":1}\n{\"doi\":\"x\"}\n"), FormatError);
}
