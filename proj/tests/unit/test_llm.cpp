#include <gtest/gtest.h>

#include <thread>

#include "slic/error.hpp"
#include "slic/llm.hpp"
#include "support/support.hpp"

using namespace slic;
using namespace slic::llm;

TEST(Stops, EarliestStopWins) {
  EXPECT_EQ(apply_stops("abc\nObservation: x", {"Observation:", "\n"}), "abc");
  EXPECT_EQ(apply_stops("abc", {"zz"}), "abc");
  EXPECT_EQ(apply_stops("abc", {""}), "abc");
  EXPECT_EQ(apply_stops("abc", {}), "abc");
  EXPECT_EQ(apply_stops("abc", {"a"}), "");
}

TEST(Mock, SubstringAndRegexRules) {
  MockLlm m({{"hello", "hi there"}, {"/year (\\d{4}) in (\\w+)/", "$2:$1:$3"}, {"hello world", "never reached"}});
  EXPECT_EQ(m.complete("say hello world", {}), "hi there");
  EXPECT_EQ(m.complete("the year 2019 in Oslo", {}), "Oslo:2019:");
  EXPECT_EQ(m.complete("nothing matches", {}), MockLlm::kDefaultRefusal);
  EXPECT_EQ(m.calls(), 3u);
}

TEST(Mock, RefusalAndStops) {
  MockLlm m({{"q", "line one\nline two"}}, "I don't know.");
  EXPECT_EQ(m.complete("q", {"\n"}), "line one");
  EXPECT_EQ(m.complete("other", {"know"}), "I don't ");
}

TEST(Mock, SlashOnlyIsLiteral) {
  MockLlm m(std::vector<MockRule>{{"/", "slash"}});
  EXPECT_EQ(m.complete("a/b", {}), "slash");
}

TEST(Mock, ParseScript) {
  auto m = MockLlm::parse("{\"match\": \"/^x(\\\\d)/\", \"response\": \"got $1\"}\n\n{\"match\": \"y\", \"response\": \"Y\"}\n");
  EXPECT_EQ(m.complete("x7", {}), "got 7");
  EXPECT_EQ(m.complete("ay", {}), "Y");
  EXPECT_THROW(MockLlm::parse("{\"match\": 1}\n"), FormatError);
  EXPECT_THROW(MockLlm::parse("not json\n"), FormatError);
  EXPECT_THROW(MockLlm(std::vector<MockRule>{{"/(unclosed/", "x"}}), FormatError);
}

TEST(Mock, BundledScriptsLoad) {
  for (const char* f : {"qa.jsonl", "bundled.jsonl"}) {
    auto m = MockLlm::load(slic::testing::source_dir() / "assets" / "mock_llm" / f);
    EXPECT_EQ(m.complete("### ANSWER WITHOUT CONTEXT\nQuestion: What is the title of 10.1/x?\n", {}).rfind("I don't know", 0),
              0u);
  }
  EXPECT_THROW(MockLlm::load(slic::testing::source_dir() / "assets" / "mock_llm" / "missing.jsonl"), Error);
}

TEST(Mock, ConcurrentCallsCounted) {
  MockLlm m(std::vector<MockRule>{{"/(\\d+)/", "n$1"}});
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t)
    ts.emplace_back([&m, t] {
      for (int i = 0; i < 250; ++i) EXPECT_EQ(m.complete(std::to_string(t * 1000 + i), {}), "n" + std::to_string(t * 1000 + i));
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(m.calls(), 2000u);
}

TEST(HttpClient, UnreachableEndpoint) {
  HttpLlmClient c("http://127.0.0.1:1", "m");
  EXPECT_THROW(c.complete("x", {}), LlmUnavailable);
}
