#include "slic/rag.hpp"

#include <algorithm>
#include <boost/regex.hpp>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::rag {

using nlohmann::json;

namespace {

const boost::regex& doi_regex() {
  static const boost::regex re(R"(10\.\d{4,9}/[^\s?,;"']+)");
  return re;
}

// DOI-shaped spans, trailing full stops trimmed.
std::vector<std::pair<std::size_t, std::size_t>> find_dois(const std::string& q) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (boost::sregex_iterator it(q.begin(), q.end(), doi_regex()), end; it != end; ++it) {
    auto b = static_cast<std::size_t>(it->position());
    auto e = b + static_cast<std::size_t>(it->length());
    while (e > b && q[e - 1] == '.') --e;
    if (e > b) out.emplace_back(b, e);
  }
  return out;
}

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// First whole-word, case-insensitive occurrence of needle at or after `from`.
std::size_t find_word_icase(const std::string& lower_hay, const std::string& lower_needle, std::size_t from = 0) {
  if (lower_needle.empty()) return std::string::npos;
  for (auto pos = lower_hay.find(lower_needle, from); pos != std::string::npos;
       pos = lower_hay.find(lower_needle, pos + 1)) {
    bool left = pos == 0 || !word_char(lower_hay[pos - 1]);
    auto end = pos + lower_needle.size();
    bool right = end >= lower_hay.size() || !word_char(lower_hay[end]);
    if (left && right) return pos;
  }
  return std::string::npos;
}

std::string strip_prefix(std::string s, const std::string& prefix) {
  s = util::trim(s);
  if (s.rfind(prefix, 0) == 0) s = util::trim(s.substr(prefix.size()));
  return s;
}

std::string cypher_literal_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\' || c == '\'' || c == '"') out += '\\';
    out += c;
  }
  return out;
}

std::string row_text(const graph::GraphStore& g, const std::vector<cypher::Value>& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += " | ";
    out += cypher::value_text(g, row[i]);
  }
  return out;
}

Answer abstain(Route route, std::string reason) {
  Answer a;
  a.text = abstention_text();
  a.route = std::move(route);
  a.abstained = true;
  a.abstain_reason = std::move(reason);
  return a;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na > 0 && nb > 0 ? dot / std::sqrt(na * nb) : 0.0;
}

}  // namespace

// ---- routing -------------------------------------------------------------

std::string to_string(RouteKind k) { return k == RouteKind::SpecificDocument ? "SpecificDocument" : "General"; }

Route route_question(const std::string& q, const llm::LlmClient& llm) {
  if (util::trim(q).empty()) throw EmptyQuestion("question is empty");
  std::string prompt =
      "### ROUTE\n"
      "Decide how the question should be answered.\n"
      "SpecificDocument: the answer is in the text of one document (title, abstract or full text).\n"
      "General: the answer needs corpus-level structure such as counts, trends or metadata joins.\n"
      "Reply with the route name, a colon and a short rationale.\n"
      "Question: " +
      q + "\n";
  std::string reply = util::trim(llm.complete(prompt, {"\n"}));
  for (RouteKind k : {RouteKind::SpecificDocument, RouteKind::General}) {
    std::string name = to_string(k);
    if (reply.rfind(name, 0) == 0) {
      std::string rest = util::trim(reply.substr(name.size()));
      if (!rest.empty() && rest[0] == ':') rest = util::trim(rest.substr(1));
      return {k, rest};
    }
  }
  if (!find_dois(q).empty()) return {RouteKind::SpecificDocument, "rule fallback: question names a DOI"};
  static const boost::regex quoted(R"("[^"]+"|\xE2\x80\x9C[^\xE2]+\xE2\x80\x9D)");
  if (boost::regex_search(q, quoted)) return {RouteKind::SpecificDocument, "rule fallback: question quotes a title"};
  return {RouteKind::General, "rule fallback: no document named"};
}

// ---- ReAct ---------------------------------------------------------------

const std::string& react_instructions() {
  static const std::string text =
      "You answer questions about a collection of scientific documents. Use the tools to look up facts and do not "
      "answer from memory. Prefer vector_search for questions about what a document says.\n"
      "Each turn, reply in exactly one of two forms.\n"
      "To call a tool:\n"
      "Thought: <your reasoning>\n"
      "Action: <tool name>\n"
      "Action Input: <tool input>\n"
      "To finish:\n"
      "Thought: <your reasoning>\n"
      "Final Answer: <the answer, quoting the source text where possible>\n"
      "If the tools do not contain the answer, reply with Final Answer: I don't know.";
  return text;
}

std::string ReactState::render() const {
  std::string out = "### REACT\n" + instructions + "\n\nQuestion: " + user_query + "\n\nTools:\n";
  for (const auto& t : tool_specs) out += "- " + t.name + ": " + t.description + "\n  Input: " + t.parameters + "\n";
  out += "\nScratchpad:\n";
  for (const auto& e : scratchpad) {
    out += "Thought: " + e.thought + "\n";
    if (!e.action.empty()) {
      out += "Action: " + e.action + "\nAction Input: " + e.action_input + "\nObservation: " + e.observation + "\n";
    } else if (!e.observation.empty()) {
      out += "Observation: " + e.observation + "\n";
    } else {
      out += "Final Answer: " + e.action_input + "\n";
    }
  }
  return out;
}

namespace {

struct Parsed {
  enum class Kind { action, final, invalid } kind = Kind::invalid;
  std::string thought;
  std::string action;
  std::string input;
};

Parsed parse_react_output(const std::string& raw) {
  Parsed p;
  if (auto f = raw.find("Final Answer:"); f != std::string::npos) {
    p.kind = Parsed::Kind::final;
    p.thought = strip_prefix(raw.substr(0, f), "Thought:");
    p.input = util::trim(raw.substr(f + 13));
    return p;
  }
  auto a = raw.find("Action:");
  auto ai = raw.find("Action Input:");
  if (a == std::string::npos || ai == std::string::npos || ai < a) {
    p.thought = util::trim(raw);
    return p;
  }
  p.kind = Parsed::Kind::action;
  p.thought = strip_prefix(raw.substr(0, a), "Thought:");
  p.action = util::trim(raw.substr(a + 7, ai - a - 7));
  p.input = util::trim(raw.substr(ai + 13));
  if (p.action.empty()) p.kind = Parsed::Kind::invalid;
  return p;
}

}  // namespace

std::vector<Tool> default_tools(const System& sys) {
  std::vector<Tool> tools;
  auto doc_text = [&sys](const std::string& doi, const std::string& fallback) {
    if (sys.corpus)
      if (const auto* d = sys.corpus->find(doi)) return vs::document_text(*d);
    return fallback;
  };

  tools.push_back(
      {{"vector_search", "Semantic search over document titles, abstracts and full-text paragraphs.",
        R"({"type": "string", "description": "search text"})"},
       [&sys](const std::string& input) {
         if (!sys.vectors || !sys.provider) throw ConfigError("vector store not loaded");
         if (util::trim(input).empty()) throw EmptyQuestion("empty search text");
         ToolResult r;
         for (const auto& h : sys.vectors->knn_cosine(sys.provider->embed(input), sys.search_k)) {
           char score[32];
           std::snprintf(score, sizeof score, "%.3f", h.score);
           r.observation += "[" + h.doi + " #" + std::to_string(h.chunk_id) + "] score=" + score + " " + h.text + "\n";
           r.sources.push_back({h.doi, h.chunk_id, h.text});
         }
         return r;
       }});

  tools.push_back({{"graph_query", "Runs a CypherLite query against the knowledge graph.",
                    R"({"type": "string", "description": "CypherLite query"})"},
                   [&sys, doc_text](const std::string& input) {
                     if (!sys.graph) throw ConfigError("graph not loaded");
                     auto table = cypher::execute(*sys.graph, cypher::parse_cypherlite(input));
                     ToolResult r;
                     r.observation = "Rows: " + std::to_string(table.rows.size()) + "\n";
                     std::set<std::string> seen;
                     for (std::size_t i = 0; i < table.rows.size(); ++i) {
                       if (i < 20) r.observation += std::to_string(i + 1) + ". " + row_text(*sys.graph, table.rows[i]) + "\n";
                       for (const auto& v : table.rows[i]) {
                         if (v.kind != cypher::Value::Kind::node) continue;
                         const auto& n = sys.graph->nodes()[v.id];
                         if (n.key.label != "Document" || !seen.insert(n.key.key).second) continue;
                         r.sources.push_back({n.key.key, -1, doc_text(n.key.key, cypher::value_text(*sys.graph, v))});
                       }
                     }
                     return r;
                   }});

  tools.push_back({{"levenshtein_lookup", "Finds documents whose title is closest in edit distance to the input.",
                    R"({"type": "string", "description": "approximate title"})"},
                   [&sys](const std::string& input) {
                     if (!sys.vectors) throw ConfigError("vector store not loaded");
                     ToolResult r;
                     for (const auto& h :
                          sys.vectors->knn_levenshtein(input, sys.search_k, vs::LevenshteinField::title)) {
                       char dist[32];
                       std::snprintf(dist, sizeof dist, "%.3f", -h.score);
                       r.observation += "[" + h.doi + " #-1] distance=" + dist + " " + h.text + "\n";
                       r.sources.push_back({h.doi, h.chunk_id, h.text});
                     }
                     return r;
                   }});
  return tools;
}

Answer run_react(const std::string& q, const std::vector<Tool>& tools, const llm::LlmClient& llm, int max_steps,
                 const Corpus* corpus) {
  if (util::trim(q).empty()) throw EmptyQuestion("question is empty");
  ReactState state;
  state.instructions = react_instructions();
  state.user_query = q;
  state.max_steps = max_steps;
  for (const auto& t : tools) state.tool_specs.push_back(t.spec);

  Route route{RouteKind::SpecificDocument, ""};
  std::vector<SourceText> sources;

  while (state.step < state.max_steps) {
    ++state.step;
    std::string raw;
    try {
      raw = llm.complete(state.render(), {"Observation:"});
    } catch (const Error& e) {
      auto a = abstain(route, e.what());
      a.react = state;
      return a;
    }
    Parsed p = parse_react_output(raw);
    if (p.kind == Parsed::Kind::invalid) {
      state.scratchpad.push_back(
          {p.thought, "", "", "Error: could not parse the reply; use the Action or Final Answer format."});
      continue;
    }
    if (p.kind == Parsed::Kind::final) {
      state.scratchpad.push_back({p.thought, "", p.input, ""});
      Answer a;
      a.route = route;
      a.text = p.input;
      if (a.text.empty() || is_refusal(a.text)) {
        a.abstained = true;
        a.abstain_reason = "model declined";
      } else {
        std::set<Citation> seen;
        for (const auto& s : sources) {
          bool supports = util::contains_icase(s.text, a.text) || util::contains_icase(a.text, s.doi);
          if (!supports || (corpus && !corpus->contains(s.doi))) continue;
          Citation c{s.doi, s.chunk_id};
          if (seen.insert(c).second) a.citations.push_back(c);
        }
      }
      a.react = std::move(state);
      return a;
    }
    ScratchEntry entry{p.thought, p.action, p.input, ""};
    auto tool = std::find_if(tools.begin(), tools.end(), [&](const Tool& t) { return t.spec.name == p.action; });
    if (tool == tools.end()) {
      std::vector<std::string> names;
      for (const auto& t : tools) names.push_back(t.spec.name);
      entry.observation = "Error: unknown tool '" + p.action + "'. Available: " + util::join(names, ", ");
    } else {
      try {
        auto r = tool->run(p.input);
        entry.observation = r.observation.empty() ? "(no results)" : util::trim(r.observation);
        sources.insert(sources.end(), r.sources.begin(), r.sources.end());
      } catch (const std::exception& e) {
        entry.observation = std::string("Error: ") + e.what();
      }
    }
    state.scratchpad.push_back(std::move(entry));
  }
  auto a = abstain(route, "StepLimitExceeded");
  a.react = std::move(state);
  return a;
}

// ---- templates -----------------------------------------------------------

const std::vector<std::string>& placeholder_names() {
  static const std::vector<std::string> names = {"$PERSON", "$YEAR", "$TOPIC", "$DOI", "$KEYWORD"};
  return names;
}

std::vector<std::string> placeholders_in(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t i = text.find('$'); i != std::string::npos; i = text.find('$', i + 1)) {
    std::size_t j = i + 1;
    while (j < text.size() && std::isupper(static_cast<unsigned char>(text[j]))) ++j;
    std::string name = text.substr(i, j - i);
    if (name.size() > 1 && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::vector<QueryTemplate> parse_templates(const std::string& jsonl, const vs::EmbeddingProvider& provider) {
  std::vector<QueryTemplate> out;
  std::istringstream in(jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    auto where = "template line " + std::to_string(lineno) + ": ";
    QueryTemplate t;
    try {
      auto j = json::parse(line);
      t.cypher = j.at("cypher").get<std::string>();
      t.description = j.at("description").get<std::string>();
    } catch (const json::exception& e) {
      throw FormatError(where + e.what());
    }
    Bindings probe;
    for (const auto& p : placeholders_in(t.cypher)) {
      const auto& names = placeholder_names();
      if (std::find(names.begin(), names.end(), p) == names.end()) throw FormatError(where + "unknown placeholder " + p);
      probe[p] = "x";
    }
    try {
      cypher::parse_cypherlite(substitute(probe, t.cypher));
    } catch (const ParseError& e) {
      throw FormatError(where + e.what());
    }
    t.description_vector = provider.embed(t.description);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<QueryTemplate> load_templates(const std::filesystem::path& path, const vs::EmbeddingProvider& provider) {
  return parse_templates(util::read_file(path), provider);
}

std::vector<QueryTemplate> retrieve_templates(const std::string& template_q, const std::vector<QueryTemplate>& store,
                                              const vs::EmbeddingProvider& provider, std::size_t k) {
  if (store.empty() || k == 0) return {};
  auto qv = provider.embed(template_q);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < store.size(); ++i) scored.emplace_back(cosine(qv, store[i].description_vector), i);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<QueryTemplate> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(store[scored[i].second]);
  return out;
}

// ---- genericization ------------------------------------------------------

Gazetteer Gazetteer::from_graph(const graph::GraphStore& g) {
  Gazetteer gaz;
  for (auto id : g.nodes_with_label("Topic")) {
    const auto& props = g.nodes()[id].properties;
    if (auto it = props.find("label"); it != props.end() && !it->second.empty()) gaz.topics.push_back(it->second);
  }
  for (auto id : g.nodes_with_label("Keyword")) {
    const auto& n = g.nodes()[id];
    auto it = n.properties.find("term");
    gaz.keywords.push_back(it != n.properties.end() ? it->second : n.key.key);
  }
  return gaz;
}

std::string substitute(const Bindings& bindings, const std::string& template_q) {
  std::string out;
  std::size_t i = 0;
  while (i < template_q.size()) {
    if (template_q[i] == '$') {
      std::size_t j = i + 1;
      while (j < template_q.size() && std::isupper(static_cast<unsigned char>(template_q[j]))) ++j;
      if (auto it = bindings.find(template_q.substr(i, j - i)); j > i + 1 && it != bindings.end()) {
        out += it->second;
        i = j;
        continue;
      }
    }
    out += template_q[i++];
  }
  return out;
}

Genericized genericize_by_rules(const std::string& q, const Gazetteer& gaz) {
  Genericized g{q, {}};
  if (q.find('$') != std::string::npos) return g;

  struct Span {
    std::size_t begin, end;
    std::string name;
  };
  std::vector<Span> spans;
  std::vector<bool> taken(q.size(), false);
  auto free = [&](std::size_t b, std::size_t e) {
    return std::none_of(taken.begin() + static_cast<std::ptrdiff_t>(b), taken.begin() + static_cast<std::ptrdiff_t>(e),
                        [](bool t) { return t; });
  };
  auto claim = [&](std::size_t b, std::size_t e, const std::string& name) {
    std::fill(taken.begin() + static_cast<std::ptrdiff_t>(b), taken.begin() + static_cast<std::ptrdiff_t>(e), true);
    spans.push_back({b, e, name});
  };

  if (auto dois = find_dois(q); !dois.empty()) claim(dois[0].first, dois[0].second, "$DOI");

  static const boost::regex year_re(R"(\b(\d{4})\b)");
  for (boost::sregex_iterator it(q.begin(), q.end(), year_re), end; it != end; ++it) {
    auto b = static_cast<std::size_t>(it->position()), e = b + 4;
    int y = std::stoi(it->str());
    if (y >= 1800 && y <= 2100 && free(b, e)) {
      claim(b, e, "$YEAR");
      break;
    }
  }

  std::string lower = util::to_lower_ascii(q);
  auto gazetteer_pass = [&](std::vector<std::string> entries, const std::string& name) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    for (const auto& entry : entries) {
      std::string needle = util::to_lower_ascii(util::trim(entry));
      for (auto pos = find_word_icase(lower, needle); pos != std::string::npos;
           pos = find_word_icase(lower, needle, pos + 1)) {
        if (free(pos, pos + needle.size())) {
          claim(pos, pos + needle.size(), name);
          return;
        }
      }
    }
  };
  gazetteer_pass(gaz.topics, "$TOPIC");
  gazetteer_pass(gaz.keywords, "$KEYWORD");

  // Capitalised words: an upper-case letter followed by lower-case letters,
  // hyphens or apostrophes.
  struct Word {
    std::size_t begin, end;
    bool capital, sentence_start;
  };
  std::vector<Word> words;
  bool at_start = true;
  for (std::size_t i = 0; i < q.size();) {
    unsigned char c = static_cast<unsigned char>(q[i]);
    if (!std::isalpha(c)) {
      if (c == '.' || c == '?' || c == '!') at_start = true;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < q.size() && (std::isalpha(static_cast<unsigned char>(q[j])) || q[j] == '-' || q[j] == '\'')) ++j;
    bool capital = std::isupper(c) && j - i >= 2 &&
                   std::all_of(q.begin() + static_cast<std::ptrdiff_t>(i) + 1, q.begin() + static_cast<std::ptrdiff_t>(j),
                               [](char ch) { return std::islower(static_cast<unsigned char>(ch)) || ch == '-' || ch == '\''; });
    words.push_back({i, j, capital && free(i, j), at_start});
    at_start = false;
    i = j;
  }
  for (std::size_t w = 0; w < words.size();) {
    if (!words[w].capital || words[w].sentence_start) {
      ++w;
      continue;
    }
    std::size_t last = w;
    while (last + 1 < words.size() && words[last + 1].capital && !words[last + 1].sentence_start &&
           words[last + 1].begin == words[last].end + 1 && q[words[last].end] == ' ')
      ++last;
    if (last > w) {
      claim(words[w].begin, words[last].end, "$PERSON");
      break;
    }
    w = last + 1;
  }

  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.begin > b.begin; });
  for (const auto& s : spans) {
    g.bindings[s.name] = q.substr(s.begin, s.end - s.begin);
    g.template_q.replace(s.begin, s.end - s.begin, s.name);
  }
  return g;
}

Genericized genericize_question(const std::string& q, const llm::LlmClient& llm, const Gazetteer& gaz) {
  std::string prompt =
      "### GENERICIZE\n"
      "Replace each named entity in the question with one of the placeholders $PERSON, $YEAR, $TOPIC, $DOI, "
      "$KEYWORD. Reply with JSON {\"template\": <question with placeholders>, \"bindings\": {<placeholder>: "
      "<original text>}}.\n"
      "Question: " +
      q + "\n";
  std::string reply = util::trim(llm.complete(prompt, {}));
  try {
    auto j = json::parse(reply);
    Genericized g{j.at("template").get<std::string>(), j.at("bindings").get<Bindings>()};
    const auto& names = placeholder_names();
    bool ok = substitute(g.bindings, g.template_q) == q;
    for (const auto& [k, v] : g.bindings) ok = ok && std::find(names.begin(), names.end(), k) != names.end();
    for (const auto& p : placeholders_in(g.template_q)) ok = ok && g.bindings.contains(p);
    if (ok) return g;
  } catch (const json::exception&) {
  }
  return genericize_by_rules(q, gaz);
}

std::optional<RetrievedResult> try_retrieved(const std::vector<QueryTemplate>& templates, const Bindings& bindings,
                                             const graph::GraphStore& graph, const Gazetteer& gaz,
                                             std::vector<TryLog>* log) {
  auto note = [&](const QueryTemplate& t, std::string outcome) {
    if (log) log->push_back({t.description, std::move(outcome)});
  };
  Bindings canonical;
  for (const auto& [k, v] : bindings) {
    std::string value = util::trim(v);
    if (k == "$DOI") value = canonical_doi(value);
    if (k == "$TOPIC")
      for (const auto& label : gaz.topics)
        if (util::canonical_surface(label) == util::canonical_surface(value)) value = label;
    canonical[k] = cypher_literal_escape(value);
  }
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& t = templates[i];
    auto needed = placeholders_in(t.cypher);
    if (!std::all_of(needed.begin(), needed.end(), [&](const std::string& p) { return canonical.contains(p); })) {
      note(t, "unbindable");
      continue;
    }
    std::string text = substitute(canonical, t.cypher);
    try {
      auto table = cypher::execute(graph, cypher::parse_cypherlite(text));
      note(t, "executed");
      return RetrievedResult{text, std::move(table), i};
    } catch (const Error& e) {
      note(t, e.what());
    }
  }
  return std::nullopt;
}

// ---- synthesis and audit -------------------------------------------------

namespace {

std::string strip_fences(const std::string& raw) {
  std::istringstream in(raw);
  std::string line, out;
  while (std::getline(in, line)) {
    if (util::trim(line).rfind("```", 0) == 0) continue;
    out += line + "\n";
  }
  return util::trim(out);
}

}  // namespace

SynthesisResult synthesize_cypher(const std::string& schema_text, const std::vector<QueryTemplate>& examples,
                                  const std::string& question, const llm::LlmClient& llm) {
  std::string base =
      "### SYNTHESIZE CYPHER\n"
      "Write one CypherLite query that answers the question. Use only the labels, relationships and properties "
      "in the schema. Reply with the query only.\n"
      "Schema:\n" +
      schema_text + "\nExamples:\n";
  for (const auto& e : examples) base += "Description: " + e.description + "\nQuery: " + e.cypher + "\n";
  base += "Question: " + question + "\n";

  SynthesisResult result;
  std::string prompt = base;
  std::string last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    std::string raw = llm.complete(prompt, {});
    result.attempts.push_back(raw);
    std::string candidate = strip_fences(raw);
    if (candidate.empty()) {
      last_error = "empty output";
    } else {
      try {
        cypher::parse_cypherlite(candidate);
        result.cypher = candidate;
        return result;
      } catch (const ParseError& e) {
        last_error = e.what();
      }
    }
    prompt = base + "Previous attempt:\n" + candidate + "\nError: " + last_error + "\nTry again.\n";
  }
  throw SynthesisFailed("no parseable query after 3 attempts: " + last_error);
}

AuditVerdict audit_cypher(const graph::GraphStore& graph, const std::string& cypher_text, const std::string& question,
                          const llm::LlmClient& llm) {
  AuditVerdict v;
  cypher::QueryAst ast;
  try {
    ast = cypher::parse_cypherlite(cypher_text);
  } catch (const ParseError& e) {
    v.reason = std::string("parse error: ") + e.what();
    return v;
  }
  try {
    v.profile_text = cypher::profile(graph, ast).first.text();
  } catch (const Error& e) {
    v.reason = std::string("profile failed: ") + e.what();
    return v;
  }

  std::string plan_prompt = "### AUDIT PLAN\nQuestion: " + question + "\nQuery: " + cypher_text +
                            "\nProfile:\n" + v.profile_text + "Operators:\n" + cypher::operator_glossary() +
                            "\nDescribe in plain language what this plan does.\n";
  v.plan_text = util::trim(llm.complete(plan_prompt, {}));
  if (v.plan_text.empty() || is_refusal(v.plan_text)) {
    v.plan_text.clear();
    v.reason = "auditor could not describe the plan";
    return v;
  }

  std::string verdict_prompt = "### AUDIT VERDICT\nQuestion: " + question + "\nQuery: " + cypher_text +
                               "\nPlan description: " + v.plan_text +
                               "\nDoes this query answer the question? Reply YES or NO, then the reason.\n";
  std::string reply = util::trim(llm.complete(verdict_prompt, {}));
  std::string upper = reply.substr(0, 3);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  auto rest = [&](std::size_t n) {
    std::string r = reply.substr(std::min(n, reply.size()));
    std::size_t i = 0;
    while (i < r.size() && (std::ispunct(static_cast<unsigned char>(r[i])) || std::isspace(static_cast<unsigned char>(r[i]))))
      ++i;
    return r.substr(i);
  };
  if (upper == "YES") {
    v.valid = true;
    v.reason = rest(3);
  } else if (upper.rfind("NO", 0) == 0) {
    v.reason = rest(2);
    if (v.reason.empty()) v.reason = "auditor rejected the query";
  } else {
    v.reason = "unparseable verdict: " + reply;
  }
  return v;
}

// ---- answers -------------------------------------------------------------

const std::string& abstention_text() {
  static const std::string text = "I cannot answer that from the available sources.";
  return text;
}

bool is_refusal(const std::string& text) {
  std::string t = util::to_lower_ascii(util::trim(text));
  for (const char* p : {"i don't know", "i do not know", "i cannot", "i can't"})
    if (t.rfind(p, 0) == 0) return true;
  return false;
}

namespace {

// Corpus documents behind a result: the pattern re-run returning every node
// variable, Document nodes kept in row order.
std::vector<std::string> supporting_documents(const graph::GraphStore& g, const Corpus& corpus,
                                              const std::string& cypher_text, std::size_t cap) {
  auto ast = cypher::parse_cypherlite(cypher_text);
  ast.profiled = false;
  ast.limit.reset();
  ast.items.clear();
  std::set<std::string> named;
  for (std::size_t i = 0; i < ast.nodes.size(); ++i) {
    auto& n = ast.nodes[i];
    if (n.var.empty()) n.var = "_n" + std::to_string(i);
    if (named.insert(n.var).second) ast.items.push_back({false, n.var});
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& row : cypher::execute(g, ast).rows) {
    for (const auto& v : row) {
      const auto& n = g.nodes()[v.id];
      if (n.key.label != "Document" || !corpus.contains(n.key.key) || !seen.insert(n.key.key).second) continue;
      out.push_back(n.key.key);
      if (out.size() >= cap) return out;
    }
  }
  return out;
}

std::string render_rows_plainly(const graph::GraphStore& g, const cypher::Table& t) {
  if (t.rows.empty()) return "The query returned no rows.";
  std::string out;
  for (const auto& row : t.rows) {
    if (!out.empty()) out += "\n";
    out += row_text(g, row);
  }
  return out;
}

Answer answer_general(const std::string& q, const System& sys, Route route) {
  AuditTrail trail;
  auto fail = [&](std::string reason) {
    auto a = abstain(route, std::move(reason));
    a.audit = trail;
    return a;
  };
  if (!sys.graph || !sys.provider || !sys.corpus) return fail("ConfigError: graph, corpus or provider missing");

  trail.genericized = genericize_question(q, *sys.llm, sys.gazetteer);
  const auto& bindings = trail.genericized.bindings;
  if (auto it = bindings.find("$DOI"); it != bindings.end() && !sys.corpus->contains(canonical_doi(it->second)))
    return fail("UnknownDocument: " + canonical_doi(it->second));

  std::vector<QueryTemplate> retrieved;
  if (sys.templates)
    retrieved = retrieve_templates(trail.genericized.template_q, *sys.templates, *sys.provider, sys.template_k);
  for (const auto& t : retrieved) trail.retrieved.push_back(t.description);

  cypher::Table table;
  if (auto hit = try_retrieved(retrieved, bindings, *sys.graph, sys.gazetteer, &trail.tries)) {
    trail.path = "retrieved";
    trail.cypher = hit->cypher;
    table = std::move(hit->table);
  } else {
    trail.path = "synthesized";
    try {
      auto syn = synthesize_cypher(sys.graph->schema_text(), retrieved, q, *sys.llm);
      trail.synthesis_attempts = syn.attempts;
      trail.cypher = syn.cypher;
    } catch (const SynthesisFailed& e) {
      return fail(e.what());
    }
    trail.verdict = audit_cypher(*sys.graph, trail.cypher, q, *sys.llm);
    if (!trail.verdict->valid) return fail("AuditRejected: " + trail.verdict->reason);
    try {
      table = cypher::execute(*sys.graph, cypher::parse_cypherlite(trail.cypher));
    } catch (const Error& e) {
      return fail(e.what());
    }
  }
  trail.row_count = table.rows.size();

  std::string prompt = "### ANSWER FROM RESULT\nQuestion: " + q + "\nQuery: " + trail.cypher +
                       "\nRows: " + std::to_string(table.rows.size()) + "\n";
  for (std::size_t i = 0; i < table.rows.size() && i < 50; ++i)
    prompt += std::to_string(i + 1) + ". " + row_text(*sys.graph, table.rows[i]) + "\n";
  prompt += "Answer the question using only these rows.\n";

  Answer a;
  a.route = route;
  a.text = util::trim(sys.llm->complete(prompt, {}));
  if (a.text.empty() || is_refusal(a.text)) a.text = render_rows_plainly(*sys.graph, table);

  std::set<std::string> cited;
  if (auto it = bindings.find("$DOI"); it != bindings.end()) {
    auto doi = canonical_doi(it->second);
    cited.insert(doi);
    a.citations.push_back({doi, -1});
  }
  try {
    for (const auto& doi : supporting_documents(*sys.graph, *sys.corpus, trail.cypher, 10))
      if (cited.insert(doi).second) a.citations.push_back({doi, -1});
  } catch (const Error&) {
    // The answer stands without supporting documents.
  }
  a.audit = std::move(trail);
  return a;
}

}  // namespace

Answer answer_question(const std::string& q, const System& sys) {
  if (util::trim(q).empty()) throw EmptyQuestion("question is empty");
  if (!sys.llm) throw ConfigError("no LLM client configured");
  Route route;
  try {
    route = route_question(q, *sys.llm);
    if (!sys.retrieval) {
      std::string prompt = "### ANSWER WITHOUT CONTEXT\nQuestion: " + q +
                           "\nAnswer briefly. If you do not know, say \"I don't know\".\n";
      std::string text = util::trim(sys.llm->complete(prompt, {}));
      if (text.empty() || is_refusal(text)) return abstain(route, "model declined");
      Answer a;
      a.route = route;
      a.text = text;
      return a;
    }
    if (route.kind == RouteKind::SpecificDocument) {
      auto a = run_react(q, default_tools(sys), *sys.llm, sys.max_steps, sys.corpus);
      a.route = route;
      return a;
    }
    return answer_general(q, sys, route);
  } catch (const Error& e) {
    return abstain(route, e.what());
  }
}

// ---- JSON ----------------------------------------------------------------

json react_state_json(const ReactState& s) {
  json tools = json::array();
  for (const auto& t : s.tool_specs)
    tools.push_back({{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}});
  json pad = json::array();
  for (const auto& e : s.scratchpad)
    pad.push_back({{"thought", e.thought},
                   {"action", e.action},
                   {"action_input", e.action_input},
                   {"observation", e.observation}});
  return {{"user_query", s.user_query}, {"tools", tools}, {"scratchpad", pad}, {"step", s.step},
          {"max_steps", s.max_steps}};
}

json answer_json(const Answer& a) {
  json cites = json::array();
  for (const auto& c : a.citations) cites.push_back({{"doi", c.doi}, {"chunk_id", c.chunk_id ? json(*c.chunk_id) : json()}});
  json out{{"text", a.text},
           {"citations", cites},
           {"route", {{"kind", to_string(a.route.kind)}, {"rationale", a.route.rationale}}},
           {"abstained", a.abstained},
           {"abstain_reason", a.abstain_reason}};
  if (a.react) {
    out["transcript"] = {{"type", "react"}, {"state", react_state_json(*a.react)}};
  } else if (a.audit) {
    const auto& t = *a.audit;
    json tries = json::array();
    for (const auto& x : t.tries) tries.push_back({{"description", x.description}, {"outcome", x.outcome}});
    json verdict;
    if (t.verdict)
      verdict = {{"valid", t.verdict->valid},
                 {"plan_text", t.verdict->plan_text},
                 {"reason", t.verdict->reason},
                 {"profile", t.verdict->profile_text}};
    out["transcript"] = {{"type", "audit"},
                         {"template", t.genericized.template_q},
                         {"bindings", t.genericized.bindings},
                         {"retrieved", t.retrieved},
                         {"tries", tries},
                         {"path", t.path},
                         {"cypher", t.cypher},
                         {"synthesis_attempts", t.synthesis_attempts},
                         {"verdict", verdict},
                         {"row_count", t.row_count}};
  } else {
    out["transcript"] = nullptr;
  }
  return out;
}

}  // namespace slic::rag
