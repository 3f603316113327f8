#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "slic/cypher.hpp"
#include "slic/error.hpp"
#include "slic/rag.hpp"
#include "slic/util.hpp"
#include "support/support.hpp"

using namespace slic;
using namespace slic::rag;

namespace {

const slic::testing::QaFixture& fixture() {
  static auto f = slic::testing::make_qa_fixture();
  return *f;
}

llm::MockLlm bundled_llm() {
  return llm::MockLlm::load(slic::testing::source_dir() / "assets" / "mock_llm" / "bundled.jsonl");
}

// The vector_search turn used by the bundled script.
const std::vector<llm::MockRule> kSearchThenAnswer = {
    {R"(/^### REACT\n[\s\S]*\nObservation: \[(10\.\S+) #(-?\d+)\] score=\S+ ([^\n]*)/)",
     "Thought: found it.\nFinal Answer: $3 [$1]"},
    {R"(/^### REACT\n[\s\S]*\nQuestion: ([^\n]+)\n/)", "Thought: search.\nAction: vector_search\nAction Input: $1"},
};

Tool echo_tool(const std::string& name, const std::string& doi) {
  return {{name, "echo", "{}"}, [doi](const std::string& in) {
            return ToolResult{"saw " + in, {{doi, std::nullopt, "saw " + in}}};
          }};
}

}  // namespace

// ---- routing ---------------------------------------------------------------

TEST(Route, MetadataQuestionIsGeneral) {
  const auto& f = fixture();
  auto r = route_question("How many papers were written related to " + f.topics[0].label + " in 2019?", *f.llm);
  EXPECT_EQ(r.kind, RouteKind::General);
  EXPECT_FALSE(r.rationale.empty());
}

TEST(Route, ContentQuestionIsSpecificDocument) {
  auto m = bundled_llm();
  auto r = route_question("What challenge is associated with malware classification?", m);
  EXPECT_EQ(r.kind, RouteKind::SpecificDocument);
}

TEST(Route, FallbackRules) {
  llm::MockLlm m(std::vector<llm::MockRule>{});
  EXPECT_EQ(route_question("Summarise 10.1234/abc.", m).kind, RouteKind::SpecificDocument);
  EXPECT_EQ(route_question("What does \"Online anomaly scoring\" claim?", m).kind, RouteKind::SpecificDocument);
  EXPECT_EQ(route_question("How many papers mention tensors?", m).kind, RouteKind::General);
  EXPECT_THROW(route_question("  \n", m), EmptyQuestion);
}

// ---- genericization ----------------------------------------------------------

TEST(Genericize, PersonAndYear) {
  auto g = genericize_by_rules("Which papers did Jane Doe write in 2020?", {});
  EXPECT_EQ(g.template_q, "Which papers did $PERSON write in $YEAR?");
  EXPECT_EQ(g.bindings, (Bindings{{"$PERSON", "Jane Doe"}, {"$YEAR", "2020"}}));
}

TEST(Genericize, SentenceStartIsNotAPerson) {
  auto g = genericize_by_rules("Anomaly Detection papers from 1750?", {});
  EXPECT_EQ(g.template_q, "Anomaly Detection papers from 1750?");
  EXPECT_TRUE(g.bindings.empty());
}

TEST(Genericize, DoiTopicKeyword) {
  Gazetteer gaz{{"tensor decomposition", "tensor"}, {"phishing"}};
  auto g = genericize_by_rules("Does 10.5555/core.001 cover Tensor Decomposition or phishing?", gaz);
  EXPECT_EQ(g.template_q, "Does $DOI cover $TOPIC or $KEYWORD?");
  EXPECT_EQ(g.bindings.at("$DOI"), "10.5555/core.001");
  EXPECT_EQ(g.bindings.at("$TOPIC"), "Tensor Decomposition");
  EXPECT_EQ(g.bindings.at("$KEYWORD"), "phishing");
  // Whole words only.
  EXPECT_TRUE(genericize_by_rules("about tensorial maps", gaz).bindings.empty());
}

TEST(Genericize, SubstitutesBackToTheQuestion) {
  const auto& f = fixture();
  auto gaz = Gazetteer::from_graph(f.graph);
  ASSERT_EQ(gaz.topics.size(), 10u);
  auto questions = slic::testing::qa_questions(f);
  int checked = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    std::string q = questions[i % questions.size()].text;
    if (i % 2) q = slic::testing::fuzz_string(i) + " " + q + " " + slic::testing::fuzz_string(i + 500);
    auto g = genericize_by_rules(q, gaz);
    EXPECT_EQ(substitute(g.bindings, g.template_q), q) << q;
    for (const auto& [k, v] : g.bindings) EXPECT_NE(q.find(v), std::string::npos);
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Genericize, LlmReplyValidated) {
  Gazetteer gaz;
  llm::MockLlm good(std::vector<llm::MockRule>{{"### GENERICIZE", R"({"template": "Papers by $PERSON?", "bindings": {"$PERSON": "ana lee"}})"}});
  auto g = genericize_question("Papers by ana lee?", good, gaz);
  EXPECT_EQ(g.template_q, "Papers by $PERSON?");

  // Does not substitute back, so the rules take over.
  llm::MockLlm wrong(std::vector<llm::MockRule>{{"### GENERICIZE", R"({"template": "Papers by $PERSON?", "bindings": {"$PERSON": "Bo"}})"}});
  EXPECT_EQ(genericize_question("Papers by Ana Lee in 2001?", wrong, gaz).template_q, "Papers by $PERSON in $YEAR?");
  llm::MockLlm junk(std::vector<llm::MockRule>{{"### GENERICIZE", "sure! here it is"}});
  EXPECT_EQ(genericize_question("Papers in 2001?", junk, gaz).template_q, "Papers in $YEAR?");
  llm::MockLlm unknown(std::vector<llm::MockRule>{{"### GENERICIZE", R"({"template": "Papers by $WHO?", "bindings": {"$WHO": "x"}})"}});
  EXPECT_EQ(genericize_question("Papers by x?", unknown, gaz).template_q, "Papers by x?");
}

TEST(Placeholders, Listing) {
  EXPECT_EQ(placeholders_in("a $DOI b $YEAR $DOI $ c"), (std::vector<std::string>{"$DOI", "$YEAR"}));
  EXPECT_EQ(substitute({{"$DOI", "10.1/x"}}, "$DOI and $DOIX and $YEAR"), "10.1/x and $DOIX and $YEAR");
}

// ---- templates ---------------------------------------------------------------

TEST(Templates, ParseErrors) {
  vs::HashEmbedder e(32);
  EXPECT_THROW(parse_templates(R"({"cypher": "MATCH (d) WHERE d.x = '$WHO' RETURN d", "description": "x"})", e),
               FormatError);
  EXPECT_THROW(parse_templates(R"({"cypher": "MATCH (d RETURN d", "description": "x"})", e), FormatError);
  EXPECT_THROW(parse_templates(R"({"cypher": "MATCH (d) RETURN d"})", e), FormatError);
  auto ok = parse_templates("\n" R"({"cypher": "MATCH (d) RETURN d", "description": "all"})" "\n", e);
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].description_vector, e.embed("all"));
}

TEST(Templates, RetrievalMatchesBruteForce) {
  const auto& f = fixture();
  const auto& store = f.templates;
  ASSERT_EQ(store.size(), 13u);
  std::vector<std::string> queries;
  for (const auto& t : store) queries.push_back(t.description);
  for (std::uint64_t i = 0; i < 20; ++i) queries.push_back(slic::testing::fuzz_string(i));
  for (const auto& q : queries) {
    auto qv = f.provider->embed(q);
    std::vector<std::pair<double, std::size_t>> want;
    for (std::size_t i = 0; i < store.size(); ++i) {
      double dot = 0;
      for (std::size_t j = 0; j < qv.size(); ++j) dot += qv[j] * store[i].description_vector[j];
      want.emplace_back(-dot, i);
    }
    std::stable_sort(want.begin(), want.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first - 1e-12; });
    auto got = retrieve_templates(q, store, *f.provider, 3);
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r) {
      double got_dot = 0;
      auto gv = got[r].description_vector;
      for (std::size_t j = 0; j < qv.size(); ++j) got_dot += qv[j] * gv[j];
      EXPECT_NEAR(got_dot, -want[r].first, 1e-9) << q;
    }
  }
  // Each description retrieves itself first.
  for (const auto& t : store) EXPECT_EQ(retrieve_templates(t.description, store, *f.provider, 1)[0].cypher, t.cypher);
  EXPECT_TRUE(retrieve_templates("x", {}, *f.provider, 3).empty());
}

TEST(Templates, TryRetrievedYearCount) {
  const auto& f = fixture();
  auto gaz = Gazetteer::from_graph(f.graph);
  int in_2020 = 0;
  for (const auto& d : f.corpus.documents()) in_2020 += d.year == 2020;
  ASSERT_GT(in_2020, 0);
  auto tmpl = retrieve_templates("How many papers were published in $YEAR?", f.templates, *f.provider, 3);
  std::vector<TryLog> log;
  auto hit = try_retrieved(tmpl, {{"$YEAR", "2020"}}, f.graph, gaz, &log);
  ASSERT_TRUE(hit);
  ASSERT_EQ(hit->table.rows.size(), 1u);
  EXPECT_EQ(cypher::value_text(f.graph, hit->table.rows[0][0]), std::to_string(in_2020));
  EXPECT_EQ(log.back().outcome, "executed");
}

TEST(Templates, TryRetrievedSkipsUnbindable) {
  const auto& f = fixture();
  auto gaz = Gazetteer::from_graph(f.graph);
  std::vector<QueryTemplate> tmpl = {f.templates[0], f.templates[9]};  // $DOI, then $YEAR
  std::vector<TryLog> log;
  auto hit = try_retrieved(tmpl, {{"$YEAR", "2017"}}, f.graph, gaz, &log);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->template_index, 1u);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].outcome, "unbindable");
  EXPECT_FALSE(try_retrieved({f.templates[0]}, {}, f.graph, gaz));
}

TEST(Templates, BindingsCanonicalised) {
  const auto& f = fixture();
  auto gaz = Gazetteer::from_graph(f.graph);
  const auto& d = f.corpus.documents()[3];
  std::string upper = d.doi;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  auto hit = try_retrieved({f.templates[6]}, {{"$DOI", " " + upper + " "}}, f.graph, gaz);
  ASSERT_TRUE(hit);
  ASSERT_EQ(hit->table.rows.size(), 1u);
  EXPECT_EQ(f.graph.nodes()[hit->table.rows[0][0].id].key.key, d.doi);

  std::string label = f.topics[2].label;
  std::string shouted = label;
  std::transform(shouted.begin(), shouted.end(), shouted.begin(), [](unsigned char c) { return std::toupper(c); });
  hit = try_retrieved({f.templates[7]}, {{"$TOPIC", shouted}}, f.graph, gaz);
  ASSERT_TRUE(hit);
  EXPECT_EQ(cypher::value_text(f.graph, hit->table.rows[0][0]), "6");

  // Quotes in a binding cannot break out of the literal.
  hit = try_retrieved({f.templates[11]}, {{"$PERSON", "x' OR 'a' = 'a"}}, f.graph, gaz);
  ASSERT_TRUE(hit);
  EXPECT_TRUE(hit->table.rows.empty());
}

// ---- synthesis and audit -------------------------------------------------------

TEST(Synthesize, RetriesWithTheError) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"Previous attempt:", "```\nMATCH (d:Document) RETURN count(*)\n```"}, {"### SYNTHESIZE", "MATCH (d"}});
  auto r = synthesize_cypher("schema", {}, "how many?", m);
  EXPECT_EQ(r.cypher, "MATCH (d:Document) RETURN count(*)");
  ASSERT_EQ(r.attempts.size(), 2u);
  EXPECT_EQ(r.attempts[0], "MATCH (d");
}

TEST(Synthesize, GivesUpAfterThreeAttempts) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"### SYNTHESIZE", "not a query"}});
  EXPECT_THROW(synthesize_cypher("schema", {}, "q", m), SynthesisFailed);
  EXPECT_EQ(m.calls(), 3u);
}

TEST(Audit, Verdicts) {
  const auto& f = fixture();
  const std::string q = "MATCH (d:Document) RETURN count(*)";
  llm::MockLlm yes(std::vector<llm::MockRule>{{"### AUDIT PLAN", "It scans documents and counts them."}, {"### AUDIT VERDICT", "YES - it counts."}});
  auto v = audit_cypher(f.graph, q, "How many documents?", yes);
  EXPECT_TRUE(v.valid);
  EXPECT_EQ(v.reason, "it counts.");
  EXPECT_EQ(v.plan_text, "It scans documents and counts them.");
  EXPECT_NE(v.profile_text.find("ScanByLabel"), std::string::npos);

  llm::MockLlm no(std::vector<llm::MockRule>{{"### AUDIT PLAN", "It counts."}, {"### AUDIT VERDICT", "No. Wrong label."}});
  v = audit_cypher(f.graph, q, "How many authors?", no);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reason, "Wrong label.");

  llm::MockLlm vague(std::vector<llm::MockRule>{{"### AUDIT PLAN", "It counts."}, {"### AUDIT VERDICT", "Perhaps"}});
  v = audit_cypher(f.graph, q, "q", vague);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reason.rfind("unparseable verdict", 0), 0u);

  llm::MockLlm refuses({});
  EXPECT_FALSE(audit_cypher(f.graph, q, "q", refuses).valid);
  EXPECT_EQ(refuses.calls(), 1u);

  v = audit_cypher(f.graph, "MATCH (d RETURN d", "q", yes);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.reason.rfind("parse error", 0), 0u);
  v = audit_cypher(f.graph, "MATCH (d:Nope) RETURN d", "q", yes);
  EXPECT_FALSE(v.valid);
}

// ---- ReAct ---------------------------------------------------------------------

TEST(React, ImmediateAnswer) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"### REACT", "Thought: easy.\nFinal Answer: forty-two"}});
  auto a = run_react("q?", {}, m, 8);
  EXPECT_EQ(a.text, "forty-two");
  EXPECT_FALSE(a.abstained);
  EXPECT_TRUE(a.citations.empty());
  ASSERT_TRUE(a.react);
  EXPECT_EQ(a.react->step, 1);
  ASSERT_EQ(a.react->scratchpad.size(), 1u);
  EXPECT_EQ(a.react->scratchpad[0].thought, "easy.");
}

TEST(React, VectorSearchCitesChunk) {
  const auto& f = fixture();
  auto sys = f.system();
  const Document* d = nullptr;
  for (const auto& doc : f.corpus.documents())
    if (doc.full_text) {
      d = &doc;
      break;
    }
  ASSERT_NE(d, nullptr);
  auto chunk = f.vectors.find(d->doi, 1);
  ASSERT_NE(chunk, nullptr);
  llm::MockLlm m(kSearchThenAnswer);
  auto a = run_react(chunk->text, default_tools(sys), m, 8, sys.corpus);
  EXPECT_FALSE(a.abstained);
  EXPECT_EQ(a.text, chunk->text + " [" + d->doi + "]");
  ASSERT_FALSE(a.citations.empty());
  EXPECT_EQ(a.citations[0], (Citation{d->doi, 1}));
  EXPECT_EQ(a.react->scratchpad[0].action, "vector_search");
  EXPECT_EQ(m.calls(), 2u);
}

TEST(React, StepLimit) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"### REACT", "Thought: again.\nAction: nowhere\nAction Input: x"}});
  auto a = run_react("q?", {echo_tool("echo", "10.1/e")}, m, 8);
  EXPECT_TRUE(a.abstained);
  EXPECT_EQ(a.abstain_reason, "StepLimitExceeded");
  EXPECT_EQ(a.react->scratchpad.size(), 8u);
  EXPECT_EQ(m.calls(), 8u);
  EXPECT_EQ(a.react->scratchpad[0].observation.rfind("Error: unknown tool 'nowhere'", 0), 0u);
}

TEST(React, MalformedReplyIsRecorded) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"could not parse", "Final Answer: saw x"}, {"### REACT", "just rambling"}});
  auto a = run_react("q?", {}, m, 8);
  EXPECT_EQ(a.text, "saw x");
  EXPECT_EQ(a.react->scratchpad.size(), 2u);
}

TEST(React, CitesOnlySupportingSources) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"Observation: saw", "Final Answer: saw x"}, {"### REACT", "Action: echo\nAction Input: x"}});
  auto a = run_react("q?", {echo_tool("echo", "10.1/e")}, m, 8);
  ASSERT_EQ(a.citations.size(), 1u);
  EXPECT_EQ(a.citations[0].doi, "10.1/e");
  // Not in the corpus: dropped.
  Corpus empty;
  EXPECT_TRUE(run_react("q?", {echo_tool("echo", "10.1/e")}, m, 8, &empty).citations.empty());
}

TEST(React, RefusalAbstains) {
  llm::MockLlm m(std::vector<llm::MockRule>{{"### REACT", "Final Answer: I don't know."}});
  auto a = run_react("q?", {}, m, 8);
  EXPECT_TRUE(a.abstained);
  EXPECT_THROW(run_react(" ", {}, m, 8), EmptyQuestion);
}

TEST(React, RenderIsAFunctionOfState) {
  ReactState s;
  s.instructions = react_instructions();
  s.user_query = "q";
  s.tool_specs = {{"t", "d", "{}"}};
  s.scratchpad = {{"th", "t", "in", "obs"}, {"done", "", "ans", ""}};
  ReactState copy = s;
  EXPECT_EQ(s.render(), copy.render());
  EXPECT_EQ(s.render(), s.render());
  auto text = s.render();
  EXPECT_EQ(text.rfind("### REACT\n", 0), 0u);
  EXPECT_NE(text.find("Action Input: in\nObservation: obs\n"), std::string::npos);
  EXPECT_NE(text.find("Final Answer: ans\n"), std::string::npos);
  copy.step = 5;  // bookkeeping only
  EXPECT_EQ(copy.render(), text);
}

// ---- answers -------------------------------------------------------------------

TEST(Answer, TitleWithCitation) {
  const auto& f = fixture();
  const auto& d = f.corpus.documents()[5];
  auto a = answer_question("What is the title of " + d.doi + "?", f.system());
  EXPECT_FALSE(a.abstained) << a.abstain_reason;
  EXPECT_EQ(a.text, d.title);
  ASSERT_FALSE(a.citations.empty());
  EXPECT_EQ(a.citations[0], (Citation{d.doi, -1}));
  ASSERT_TRUE(a.audit);
  EXPECT_EQ(a.audit->path, "retrieved");
  EXPECT_EQ(a.audit->genericized.template_q, "What is the title of $DOI?");
}

TEST(Answer, UnknownDoiAbstains) {
  const auto& f = fixture();
  auto a = answer_question("What is the title of 10.7777/qa.999?", f.system());
  EXPECT_TRUE(a.abstained);
  EXPECT_TRUE(a.citations.empty());
  EXPECT_EQ(a.text, abstention_text());
  EXPECT_EQ(a.abstain_reason.rfind("UnknownDocument", 0), 0u);
}

TEST(Answer, TopicCount) {
  const auto& f = fixture();
  auto a = answer_question("How many papers are there on the topic of " + f.topics[4].label + "?", f.system());
  EXPECT_EQ(a.text, "6");
  EXPECT_EQ(a.citations.size(), 6u);
  for (const auto& c : a.citations) EXPECT_EQ(f.corpus.find(c.doi)->topic_id, 4);
}

TEST(Answer, ClosedBook) {
  const auto& f = fixture();
  const auto& d = f.corpus.documents()[0];
  auto a = answer_question("What year was " + d.doi + " published?", f.system(false));
  EXPECT_EQ(a.text, "2019");
  EXPECT_TRUE(a.citations.empty());
  auto b = answer_question("What is the title of " + d.doi + "?", f.system(false));
  EXPECT_TRUE(b.abstained);
}

TEST(Answer, ErrorsBecomeAbstentions) {
  const auto& f = fixture();
  auto sys = f.system();
  EXPECT_THROW(answer_question("", sys), EmptyQuestion);
  sys.graph = nullptr;
  auto a = answer_question("How many papers were published in 2019?", sys);
  EXPECT_TRUE(a.abstained);
  sys.llm = nullptr;
  EXPECT_THROW(answer_question("q?", sys), ConfigError);
}

TEST(Answer, JsonShape) {
  const auto& f = fixture();
  auto j = answer_json(answer_question("What year was " + f.corpus.documents()[1].doi + " published?", f.system()));
  for (const char* k : {"text", "citations", "route", "abstained", "abstain_reason", "transcript"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["transcript"]["type"], "audit");
  EXPECT_EQ(j["route"]["kind"], "General");
  EXPECT_EQ(j["citations"][0]["chunk_id"], -1);
}

TEST(Refusal, Openings) {
  EXPECT_TRUE(is_refusal("  I don't know."));
  EXPECT_TRUE(is_refusal("i cannot say"));
  EXPECT_TRUE(is_refusal("I can't"));
  EXPECT_FALSE(is_refusal("It is unknown"));
  EXPECT_FALSE(is_refusal("2019"));
}
