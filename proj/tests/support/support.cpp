#include "support.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>

#include "slic/text.hpp"
#include "slic/util.hpp"

namespace slic::testing {

namespace fs = std::filesystem;

fs::path source_dir() { return SLIC_SOURCE_DIR; }
fs::path bundled_config() { return source_dir() / "fixtures" / "bundled" / "config.json"; }

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  util::Rng rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
  path_ = fs::temp_directory_path() /
          ("slic-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
           std::to_string(rng.below(1000000)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

// ---- planted corpora -----------------------------------------------------

namespace {

const std::vector<std::string>& syllables() {
  static const std::vector<std::string> s = {"ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu", "no", "pi",
                                             "qa", "re", "su", "ti", "vo", "wu", "xe", "yo"};
  return s;
}

}  // namespace

static std::string planted_word(int topic, int j) {
  const auto& s = syllables();
  return s[topic % s.size()] + s[j % s.size()] + "r" + s[(topic * 7 + j * 3) % s.size()];
}

PlantedCorpus planted_corpus(int k, int docs, std::uint64_t seed, int words_per_doc, int vocab_per_topic) {
  util::Rng rng(seed);
  PlantedCorpus out;
  for (int t = 0; t < k; ++t) out.heads.push_back(planted_word(t, 0));
  std::vector<Document> list;
  for (int i = 0; i < docs; ++i) {
    int t = i % k;
    Document d;
    char doi[64];
    std::snprintf(doi, sizeof doi, "10.1000/planted.%d.%04d", k, i);
    d.doi = doi;
    std::vector<std::string> words{planted_word(t, 0), planted_word(t, 0)};
    for (int w = 2; w < words_per_doc; ++w) {
      // Zipf-like: low indices are drawn more often.
      double u = rng.uniform01();
      int j = static_cast<int>(u * u * vocab_per_topic);
      words.push_back(planted_word(t, std::min(j, vocab_per_topic - 1)));
    }
    d.title = words[0] + " " + words[2] + " " + words[3];
    d.abstract = util::join(std::vector<std::string>(words.begin() + 1, words.end()), " ");
    d.clean_title = text::clean_text(d.title);
    d.clean_abstract = text::clean_text(d.abstract);
    d.is_core = true;
    list.push_back(std::move(d));
    out.labels.push_back(t);
  }
  out.corpus = Corpus(std::move(list));
  return out;
}

double label_agreement(const std::vector<int>& planted, const std::vector<int>& predicted) {
  if (planted.size() != predicted.size() || planted.empty()) return 0.0;
  int kp = *std::max_element(planted.begin(), planted.end()) + 1;
  int kq = *std::max_element(predicted.begin(), predicted.end()) + 1;
  std::vector<std::vector<int>> count(kq, std::vector<int>(kp, 0));
  for (std::size_t i = 0; i < planted.size(); ++i) ++count[predicted[i]][planted[i]];
  // Exhaustive search over assignments; k is small in every caller.
  std::vector<int> perm(std::max(kp, kq));
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int agree = 0;
    for (int q = 0; q < kq; ++q)
      if (perm[q] < kp) agree += count[q][perm[q]];
    best = std::max(best, agree);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(planted.size());
}

Eigen::MatrixXd random_nonnegative(int rows, int cols, std::uint64_t seed) {
  util::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform01();
  return m;
}

// ---- QA fixture ----------------------------------------------------------

rag::System QaFixture::system(bool retrieval) const {
  rag::System s;
  s.corpus = &corpus;
  s.graph = &graph;
  s.vectors = &vectors;
  s.provider = provider.get();
  s.templates = &templates;
  s.llm = llm.get();
  s.gazetteer = rag::Gazetteer::from_graph(graph);
  s.retrieval = retrieval;
  return s;
}

std::unique_ptr<QaFixture> make_qa_fixture() {
  static const std::vector<std::string> first = {"Ada", "Bo", "Cy", "Dee", "Eli", "Fay", "Gus", "Hal", "Ivy", "Jo"};
  static const std::vector<std::string> last = {"Stone", "Reed", "Marsh", "Hale", "Frost", "Lund", "Park", "Vance"};
  static const std::vector<std::pair<std::string, std::string>> affs = {
      {"Granite University", "Norway"}, {"Harbor Institute", "Chile"}, {"Summit Laboratory", "Kenya"},
      {"Delta College", "India"},       {"Orchard University", "Peru"}};
  static const std::vector<std::string> publishers = {"IEEE", "ACM", "Springer", "Elsevier", "Wiley"};
  static const std::vector<std::string> categories = {
      "Computer Science: Software", "Computer Science: Networks", "Mathematics: Statistics",
      "Engineering: Electrical",    "Physics: Applied",           "Social Sciences: Law",
      "Decision Sciences",          "Materials Science"};

  auto f = std::make_unique<QaFixture>();
  util::Rng rng(424242);
  const int n = 60, k = 10;
  std::vector<Document> docs;
  std::set<std::string> titles;
  auto doi_of = [](int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "10.7777/qa.%03d", i);
    return std::string(buf);
  };
  for (int i = 0; i < n; ++i) {
    int t = i % k;
    Document d;
    d.doi = doi_of(i);
    do {
      d.title = "Notes on " + planted_word(t, static_cast<int>(rng.below(12))) + " and " +
                planted_word(t, static_cast<int>(rng.below(12))) + " " + planted_word(t, 0);
    } while (!titles.insert(d.title).second);
    std::vector<std::string> words;
    for (int w = 0; w < 30; ++w) words.push_back(planted_word(t, static_cast<int>(rng.below(12))));
    d.abstract = "We study " + util::join(words, " ") + ".";

    std::set<std::string> names;
    int na = 1 + static_cast<int>(rng.below(5));
    while (static_cast<int>(names.size()) < na) names.insert(first[rng.below(first.size())] + " " + last[rng.below(last.size())]);
    for (const auto& name : names) {
      const auto& [aff, country] = affs[rng.below(affs.size())];
      d.authors.push_back({name, aff, country});
    }
    d.year = 2015 + static_cast<int>(rng.below(8));
    d.publisher = publishers[rng.below(publishers.size())];
    std::set<std::string> cats;
    int nc = 1 + static_cast<int>(rng.below(4));
    while (static_cast<int>(cats.size()) < nc) cats.insert(categories[rng.below(categories.size())]);
    d.categories.assign(cats.begin(), cats.end());

    std::set<int> cites, refs;
    int nci = static_cast<int>(rng.below(7)), nre = static_cast<int>(rng.below(9));
    while (static_cast<int>(cites.size()) < nci) {
      int j = static_cast<int>(rng.below(n));
      if (j != i) cites.insert(j);
    }
    while (static_cast<int>(refs.size()) < nre) {
      int j = static_cast<int>(rng.below(n));
      if (j != i) refs.insert(j);
    }
    for (int j : cites) d.citations.push_back(doi_of(j));
    for (int j : refs) d.references.push_back(doi_of(j));
    if (rng.below(3) == 0) d.references.push_back("10.9999/external." + std::to_string(i));
    d.source_ids[Source::scopus] = "QA-" + std::to_string(i);
    d.is_core = i < 20;
    d.topic_id = t;
    if (i % 9 == 0)
      d.full_text = "First paragraph about " + planted_word(t, 1) + ".\n\nSecond paragraph about " +
                    planted_word(t, 2) + ".";
    docs.push_back(std::move(d));
  }
  f->corpus = Corpus(std::move(docs));
  text::clean_corpus(f->corpus);

  for (int t = 0; t < k; ++t) {
    factorization::TopicSummary ts;
    ts.topic_id = t;
    ts.label = planted_word(t, 0) + ", " + planted_word(t, 1) + ", " + planted_word(t, 2);
    ts.doc_count = n / k;
    ts.percent = 100.0 * ts.doc_count / n;
    ts.top_terms = {{planted_word(t, 0), 1.0}};
    f->topics.push_back(ts);
  }
  f->graph.merge(graph::emit_triplets(f->corpus, f->topics));
  f->provider = std::make_unique<vs::HashEmbedder>(256);
  f->vectors = vs::index_documents(f->corpus, *f->provider);
  f->templates = rag::load_templates(source_dir() / "assets" / "query_templates.jsonl", *f->provider);
  f->llm = std::make_unique<llm::MockLlm>(llm::MockLlm::load(source_dir() / "assets" / "mock_llm" / "qa.jsonl"));
  return f;
}

std::vector<QaQuestion> qa_questions(const QaFixture& f) {
  std::vector<QaQuestion> out;
  const auto& docs = f.corpus.documents();
  for (int i = 0; i < 20; ++i) {
    const Document& d = docs[i];
    std::vector<std::string> self{d.doi};
    out.push_back({"How many citations are there for " + d.doi + "?", std::to_string(d.citations.size()), "document", self});
    out.push_back({"How many references are there for " + d.doi + "?", std::to_string(d.references.size()), "document", self});
    out.push_back({"How many authors are there for " + d.doi + "?", std::to_string(d.authors.size()), "document", self});
    out.push_back({"What year was " + d.doi + " published?", std::to_string(*d.year), "document", self});
    out.push_back({"Which publisher published " + d.doi + "?", *d.publisher, "document", self});
    out.push_back({"How many scopus categories are assigned to " + d.doi + "?", std::to_string(d.categories.size()),
                   "document", self});
    out.push_back({"What is the title of " + d.doi + "?", d.title, "document", self});
  }
  for (const auto& t : f.topics) {
    std::vector<std::string> members;
    for (const auto& d : docs)
      if (d.topic_id == t.topic_id) members.push_back(d.doi);
    out.push_back({"How many papers are there on the topic of " + t.label + "?", std::to_string(members.size()), "topic",
                   members});
    int year = *f.corpus.find(members.front())->year;
    std::vector<std::string> in_year;
    for (const auto& doi : members)
      if (f.corpus.find(doi)->year == year) in_year.push_back(doi);
    out.push_back({"How many papers were written related to " + t.label + " in " + std::to_string(year) + "?",
                   std::to_string(in_year.size()), "topic", in_year});
  }
  return out;
}

QaScore run_qa(const QaFixture& f, bool retrieval) {
  QaScore s;
  auto sys = f.system(retrieval);
  for (const auto& q : qa_questions(f)) {
    auto a = rag::answer_question(q.text, sys);
    ++s.total;
    if (a.abstained) ++s.abstained;
    bool ok = !a.abstained && a.text == q.expected;
    if (ok) ++s.correct;
    bool cited = std::any_of(a.citations.begin(), a.citations.end(), [&](const rag::Citation& c) {
      return std::find(q.acceptable_dois.begin(), q.acceptable_dois.end(), c.doi) != q.acceptable_dois.end();
    });
    if (cited) ++s.cited_correctly;
    if (!ok || !cited)
      s.failures.push_back(q.text + " -> " + (a.abstained ? "[abstained: " + a.abstain_reason + "]" : a.text) +
                           " (expected " + q.expected + ")");
  }
  return s;
}

// ---- graph oracle --------------------------------------------------------

namespace {

struct LabelSpec {
  std::string label;
  std::string prop;
};

const std::vector<LabelSpec>& random_labels() {
  static const std::vector<LabelSpec> l = {
      {"Document", "title"}, {"Author", "name"}, {"Keyword", "term"}, {"Country", "name"}, {"Year", "year"}};
  return l;
}

const std::vector<std::string>& random_relations() {
  static const std::vector<std::string> r = {"AUTHORED_BY", "HAS_CATEGORY", "LOCATED_IN"};
  return r;
}

const std::vector<std::string>& random_values() {
  static const std::vector<std::string> v = {"alpha", "beta", "gamma", "alphabet", "cybercrime", "crime"};
  return v;
}

}  // namespace

graph::GraphStore random_graph(std::uint64_t seed, int max_nodes, int max_edges) {
  util::Rng rng(seed);
  int n = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(max_nodes)));
  int m = static_cast<int>(rng.below(static_cast<std::size_t>(max_edges) + 1));
  std::vector<graph::NodeRecord> records;
  for (int i = 0; i < n; ++i) {
    const auto& spec = random_labels()[rng.below(random_labels().size())];
    graph::NodeKey key{spec.label, spec.label == "Year" ? std::to_string(2000 + i) : "n" + std::to_string(i)};
    graph::Properties props;
    if (rng.below(4) != 0) props[spec.prop] = random_values()[rng.below(random_values().size())];
    records.push_back({key, props});
  }
  std::vector<graph::Triplet> triplets;
  for (int e = 0; e < m && n > 1; ++e) {
    std::size_t h = rng.below(n), t = rng.below(n);
    if (h == t) continue;
    triplets.push_back({records[h].node, random_relations()[rng.below(random_relations().size())], records[t].node});
  }
  graph::GraphStore g;
  g.merge_properties(records);
  g.merge(triplets);
  return g;
}

std::string random_query(const graph::GraphStore& g, std::uint64_t seed) {
  util::Rng rng(seed);
  int edges = static_cast<int>(rng.below(4));
  static const std::vector<std::string> vars = {"a", "b", "c", "d"};
  std::vector<std::string> slot_var;
  std::map<std::string, std::string> var_label;
  std::string q = rng.below(5) == 0 ? "PROFILE MATCH " : "MATCH ";
  std::vector<std::string> edge_vars;
  for (int i = 0; i <= edges; ++i) {
    std::string v = rng.below(5) == 0 ? "" : vars[rng.below(vars.size())];
    std::string label;
    if (rng.below(2) == 0) label = random_labels()[rng.below(random_labels().size())].label;
    // A variable keeps one label across its occurrences.
    if (!v.empty() && var_label.contains(v) && !var_label[v].empty() && !label.empty()) label = var_label[v];
    if (!v.empty() && (!var_label.contains(v) || var_label[v].empty())) var_label[v] = label;
    slot_var.push_back(v);
    q += "(" + v + (label.empty() ? "" : ":" + label) + ")";
    if (i < edges) {
      std::string ev = rng.below(3) == 0 ? "r" + std::to_string(i) : "";
      if (!ev.empty()) edge_vars.push_back(ev);
      std::string rel = rng.below(2) == 0 ? ":" + random_relations()[rng.below(random_relations().size())] : "";
      q += "-[" + ev + rel + "]-";
    }
  }
  std::vector<std::string> named;
  for (const auto& [v, l] : var_label) named.push_back(v);
  int preds = named.empty() ? 0 : static_cast<int>(rng.below(3));
  for (int p = 0; p < preds; ++p) {
    const auto& v = named[rng.below(named.size())];
    std::string prop = "key";
    for (const auto& spec : random_labels())
      if (spec.label == var_label[v] && rng.below(3) != 0) prop = spec.prop;
    if (var_label[v].empty() && rng.below(2) == 0) prop = "name";
    std::string value;
    if (prop == "key" && g.node_count() > 0)
      value = g.nodes()[rng.below(g.node_count())].key.key;
    else
      value = random_values()[rng.below(random_values().size())];
    bool contains = rng.below(2) == 0;
    if (contains && value.size() > 2) value = value.substr(1, value.size() - 2);
    q += (p == 0 ? " WHERE " : " AND ") + v + "." + prop + (contains ? " CONTAINS '" : " = '") + value + "'";
  }
  std::vector<std::string> items;
  for (const auto& v : named)
    if (rng.below(2) == 0) items.push_back(v);
  for (const auto& e : edge_vars)
    if (rng.below(3) == 0) items.push_back(e);
  if (items.empty() || rng.below(3) == 0) items.push_back("count(*)");
  q += " RETURN " + util::join(items, ", ");
  if (rng.below(4) == 0) q += " LIMIT " + std::to_string(rng.below(6));
  return q;
}

cypher::Table oracle_execute(const graph::GraphStore& g, const cypher::QueryAst& ast) {
  using cypher::Value;
  const std::size_t slots = ast.nodes.size();
  const std::size_t eslots = ast.edges.size();
  std::vector<std::vector<Value>> raw_rows;

  std::vector<graph::NodeId> slot_node(slots);
  std::vector<graph::EdgeId> slot_edge(eslots);

  auto prop_of = [&](graph::NodeId n, const std::string& prop) -> std::optional<std::string> {
    const auto& node = g.nodes()[n];
    if (prop == "key") return node.key.key;
    auto it = node.properties.find(prop);
    if (it == node.properties.end()) return std::nullopt;
    return it->second;
  };

  auto accept = [&]() {
    for (std::size_t i = 0; i < slots; ++i) {
      const auto& np = ast.nodes[i];
      if (np.label && g.nodes()[slot_node[i]].key.label != *np.label) return;
      for (std::size_t j = 0; j < i; ++j) {
        bool same_var = !np.var.empty() && ast.nodes[j].var == np.var;
        if (same_var != (slot_node[j] == slot_node[i])) return;
      }
    }
    for (std::size_t i = 0; i < eslots; ++i) {
      if (ast.edges[i].reltype && g.edges()[slot_edge[i]].relation != *ast.edges[i].reltype) return;
      for (std::size_t j = 0; j < i; ++j)
        if (slot_edge[j] == slot_edge[i]) return;
    }
    for (const auto& p : ast.where) {
      for (std::size_t i = 0; i < slots; ++i) {
        if (ast.nodes[i].var != p.var) continue;
        auto v = prop_of(slot_node[i], p.prop);
        if (!v) return;
        bool ok = p.op == cypher::PredOp::equals ? *v == p.value : v->find(p.value) != std::string::npos;
        if (!ok) return;
        break;
      }
    }
    std::vector<Value> row;
    for (const auto& it : ast.items) {
      if (it.count_star) {
        row.push_back({Value::Kind::integer, 0, 0});
        continue;
      }
      bool found = false;
      for (std::size_t i = 0; i < eslots && !found; ++i)
        if (ast.edges[i].var == it.var) {
          row.push_back({Value::Kind::edge, slot_edge[i], 0});
          found = true;
        }
      for (std::size_t i = 0; i < slots && !found; ++i)
        if (ast.nodes[i].var == it.var) {
          row.push_back({Value::Kind::node, slot_node[i], 0});
          found = true;
        }
    }
    raw_rows.push_back(std::move(row));
  };

  if (eslots == 0) {
    for (graph::NodeId n = 0; n < g.node_count(); ++n) {
      slot_node[0] = n;
      accept();
    }
  } else {
    std::function<void(std::size_t)> loop = [&](std::size_t i) {
      if (i == eslots) {
        accept();
        return;
      }
      for (graph::EdgeId e = 0; e < g.edge_count(); ++e) {
        for (int orient = 0; orient < 2; ++orient) {
          const auto& edge = g.edges()[e];
          graph::NodeId from = orient == 0 ? edge.head : edge.tail;
          graph::NodeId to = orient == 0 ? edge.tail : edge.head;
          if (i > 0 && slot_node[i] != from) continue;
          slot_node[i] = from;
          slot_node[i + 1] = to;
          slot_edge[i] = e;
          loop(i + 1);
        }
      }
    };
    loop(0);
  }

  cypher::Table t;
  for (const auto& it : ast.items) t.columns.push_back(it.count_star ? "count(*)" : it.var);
  bool aggregate = std::any_of(ast.items.begin(), ast.items.end(), [](const auto& it) { return it.count_star; });
  if (!aggregate) {
    t.rows = std::move(raw_rows);
  } else {
    std::vector<std::pair<std::vector<Value>, std::int64_t>> groups;
    for (auto& row : raw_rows) {
      std::vector<Value> key;
      for (std::size_t c = 0; c < row.size(); ++c)
        if (!ast.items[c].count_star) key.push_back(row[c]);
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& gr) { return gr.first == key; });
      if (it == groups.end())
        groups.push_back({key, 1});
      else
        ++it->second;
    }
    bool grouped = std::any_of(ast.items.begin(), ast.items.end(), [](const auto& it) { return !it.count_star; });
    if (groups.empty() && !grouped) groups.push_back({{}, 0});
    for (const auto& [key, count] : groups) {
      std::vector<Value> row;
      std::size_t k = 0;
      for (const auto& it : ast.items) row.push_back(it.count_star ? Value{Value::Kind::integer, 0, count} : key[k++]);
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

std::vector<std::string> row_multiset(const graph::GraphStore&, const cypher::Table& t) {
  std::vector<std::string> out;
  for (const auto& row : t.rows) {
    std::string s;
    for (const auto& v : row) {
      switch (v.kind) {
        case cypher::Value::Kind::node: s += "N" + std::to_string(v.id); break;
        case cypher::Value::Kind::edge: s += "E" + std::to_string(v.id); break;
        case cypher::Value::Kind::integer: s += "I" + std::to_string(v.number); break;
      }
      s += "|";
    }
    out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool tables_agree(const graph::GraphStore& g, const cypher::QueryAst& ast, const cypher::Table& engine,
                  const cypher::Table& oracle) {
  auto a = row_multiset(g, engine);
  auto b = row_multiset(g, oracle);
  if (!ast.limit) return a == b;
  std::size_t want = std::min<std::size_t>(b.size(), static_cast<std::size_t>(*ast.limit));
  return a.size() == want && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// ---- misc ----------------------------------------------------------------

std::string fuzz_string(std::uint64_t seed) {
  static const std::vector<std::string> pieces = {
      "tensor",  "Decomposition", "the",      "of",          "NMF",        "e-mail",     "a@b.org",  "x^2=y",
      "<b>",     "</i>",          "&amp;",    "2024",        "3.14",       "résumé",     "naïve",    "\xE2\x80\x94",
      "中文",    "\xF0\x9F\x98\x80", "\xFF",  "\xC3",        "  ",         "\t",         "\n\n",     "--",
      "non-negative", "state-of-the-art", "In this paper", "we propose", "$\\alpha$", "{x}", "AI", "ok",
      "Ünïcödé", "UPPER",         "mixed123", "123abc",      "well-known", "!!",         "?",        "(",
      "[1]",     "http://x.y/z",  "a",        "an",          "is",         "Anomaly",    "detection", "\r\n"};
  util::Rng rng(seed);
  std::string out;
  int n = static_cast<int>(rng.below(40));
  for (int i = 0; i < n; ++i) {
    out += pieces[rng.below(pieces.size())];
    if (rng.below(3) != 0) out += " ";
    if (rng.below(10) == 0) out.push_back(static_cast<char>(32 + rng.below(95)));
  }
  return out;
}

graph::GraphBatch fixture_batch() {
  auto f = make_qa_fixture();
  return graph::emit_triplets(f->corpus, f->topics);
}

}  // namespace slic::testing
