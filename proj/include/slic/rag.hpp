#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slic/corpus.hpp"
#include "slic/cypher.hpp"
#include "slic/graph.hpp"
#include "slic/llm.hpp"
#include "slic/vector_store.hpp"

namespace slic::rag {

// ---- routing -------------------------------------------------------------

enum class RouteKind { SpecificDocument, General };

std::string to_string(RouteKind k);

struct Route {
  RouteKind kind = RouteKind::General;
  std::string rationale;
};

// One LLM call with the routing prompt; the reply must start with
// "SpecificDocument" or "General". Otherwise a DOI or a quoted title in the
// question means SpecificDocument, anything else General.
Route route_question(const std::string& q, const llm::LlmClient& llm);

// ---- ReAct ---------------------------------------------------------------

struct ToolSpec {
  std::string name;
  std::string description;
  std::string parameters;  // JSON schema of the single input
};

struct ScratchEntry {
  std::string thought;
  std::string action;  // empty on the final entry
  std::string action_input;
  std::string observation;
};

struct ReactState {
  std::string instructions;
  std::string user_query;
  std::vector<ToolSpec> tool_specs;
  std::vector<ScratchEntry> scratchpad;
  int step = 0;
  int max_steps = 8;

  // Instructions, question, tools, scratchpad; a pure function of the state.
  std::string render() const;
};

const std::string& react_instructions();

struct Citation {
  std::string doi;
  std::optional<int> chunk_id;

  auto operator<=>(const Citation&) const = default;
};

// A piece of text a tool showed the agent, kept for attribution.
struct SourceText {
  std::string doi;
  std::optional<int> chunk_id;
  std::string text;
};

struct ToolResult {
  std::string observation;
  std::vector<SourceText> sources;
};

struct Tool {
  ToolSpec spec;
  std::function<ToolResult(const std::string& input)> run;
};

// ---- general route -------------------------------------------------------

struct QueryTemplate {
  std::string cypher;
  std::string description;
  std::vector<double> description_vector;
};

// Line-delimited {"cypher", "description"}; vectors are recomputed with
// `provider`. Throws FormatError for unknown placeholders or cypher that does
// not parse once placeholders are filled.
std::vector<QueryTemplate> load_templates(const std::filesystem::path& path, const vs::EmbeddingProvider& provider);
std::vector<QueryTemplate> parse_templates(const std::string& jsonl, const vs::EmbeddingProvider& provider);

// Placeholder names used in `text`, e.g. {"$DOI"}.
std::vector<std::string> placeholders_in(const std::string& text);
const std::vector<std::string>& placeholder_names();

using Bindings = std::map<std::string, std::string>;

struct Genericized {
  std::string template_q;
  Bindings bindings;  // placeholder -> surface exactly as written in q
};

// Entity surfaces known to the graph, used by the rule genericizer.
struct Gazetteer {
  std::vector<std::string> topics;    // Topic labels
  std::vector<std::string> keywords;  // Keyword terms

  static Gazetteer from_graph(const graph::GraphStore& g);
};

// Asks the LLM for {"template", "bindings"}; a reply that is not JSON or that
// does not substitute back to q falls back to the rules in
// genericize_by_rules.
Genericized genericize_question(const std::string& q, const llm::LlmClient& llm, const Gazetteer& gaz);
// At most one span per placeholder type: $DOI, $YEAR (1800-2100), $TOPIC and
// $KEYWORD from the gazetteer (longest first, case-insensitive), $PERSON as a
// run of two or more capitalised words not at the start of the question.
Genericized genericize_by_rules(const std::string& q, const Gazetteer& gaz);
std::string substitute(const Bindings& bindings, const std::string& template_q);

std::vector<QueryTemplate> retrieve_templates(const std::string& template_q, const std::vector<QueryTemplate>& store,
                                              const vs::EmbeddingProvider& provider, std::size_t k);

struct RetrievedResult {
  std::string cypher;
  cypher::Table table;
  std::size_t template_index = 0;
};

struct TryLog {
  std::string description;
  std::string outcome;  // "unbindable", "executed" or the error text
};

// Binding values are canonicalised before substitution: DOIs as
// canonical_doi, topics to the stored label. Templates with unbound
// placeholders are never executed.
std::optional<RetrievedResult> try_retrieved(const std::vector<QueryTemplate>& templates, const Bindings& bindings,
                                             const graph::GraphStore& graph, const Gazetteer& gaz,
                                             std::vector<TryLog>* log = nullptr);

struct SynthesisResult {
  std::string cypher;
  std::vector<std::string> attempts;  // raw LLM outputs, first to last
};

// One call plus up to two retries; each retry prompt carries the previous
// output and its ParseError. Throws SynthesisFailed.
SynthesisResult synthesize_cypher(const std::string& schema_text, const std::vector<QueryTemplate>& examples,
                                  const std::string& question, const llm::LlmClient& llm);

struct AuditVerdict {
  bool valid = false;
  std::string plan_text;
  std::string reason;
  std::string profile_text;
};

AuditVerdict audit_cypher(const graph::GraphStore& graph, const std::string& cypher, const std::string& question,
                          const llm::LlmClient& llm);

// ---- answers -------------------------------------------------------------

struct AuditTrail {
  Genericized genericized;
  std::vector<std::string> retrieved;  // template descriptions, best first
  std::vector<TryLog> tries;
  std::string path;  // "retrieved" or "synthesized"
  std::string cypher;
  std::vector<std::string> synthesis_attempts;
  std::optional<AuditVerdict> verdict;
  std::size_t row_count = 0;
};

struct Answer {
  std::string text;
  std::vector<Citation> citations;
  Route route;
  bool abstained = false;
  std::string abstain_reason;
  std::optional<ReactState> react;
  std::optional<AuditTrail> audit;
};

const std::string& abstention_text();
// "I don't know", "I cannot", "I can't" openings.
bool is_refusal(const std::string& text);

// Everything answer_question reads. Pointers are non-owning and must outlive
// the calls; all of it is read-only so sessions can share one instance.
struct System {
  const Corpus* corpus = nullptr;
  const graph::GraphStore* graph = nullptr;
  const vs::VectorStore* vectors = nullptr;
  const vs::EmbeddingProvider* provider = nullptr;
  const std::vector<QueryTemplate>* templates = nullptr;
  const llm::LlmClient* llm = nullptr;
  Gazetteer gazetteer;
  bool retrieval = true;  // false: answer from the model alone
  int max_steps = 8;
  std::size_t template_k = 3;
  std::size_t search_k = 3;
};

// vector_search, graph_query, levenshtein_lookup.
std::vector<Tool> default_tools(const System& sys);

Answer run_react(const std::string& q, const std::vector<Tool>& tools, const llm::LlmClient& llm, int max_steps,
                 const Corpus* corpus = nullptr);

// Never throws for pipeline failures; they become abstentions with a reason.
// EmptyQuestion is still raised for a blank question.
Answer answer_question(const std::string& q, const System& sys);

nlohmann::json answer_json(const Answer& a);
nlohmann::json react_state_json(const ReactState& s);

}  // namespace slic::rag
