#include "slic/graph.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::graph {

using nlohmann::json;

const std::vector<std::string>& node_labels() {
  static const std::vector<std::string> labels = {
      "Document", "Author",  "Event",   "Person",      "Location", "Product", "Organization", "GeopoliticalEntity",
      "Publisher", "Acronym", "Keyword", "Affiliation", "Country",  "Year",    "Topic",        "TopicKeyword"};
  return labels;
}

bool is_node_label(const std::string& label) {
  const auto& l = node_labels();
  return std::find(l.begin(), l.end(), label) != l.end();
}

const std::set<std::string>& label_properties(const std::string& label) {
  static const std::map<std::string, std::set<std::string>> schema = [] {
    std::map<std::string, std::set<std::string>> s;
    s["Document"] = {"key", "doi", "title", "abstract", "is_core", "citation_count", "reference_count",
                     "osti_id", "scopus_id", "s2_id"};
    for (const char* named : {"Author", "Event", "Person", "Location", "Product", "Organization",
                              "GeopoliticalEntity", "Publisher", "Affiliation", "Country"})
      s[named] = {"key", "name"};
    s["Acronym"] = {"key", "term"};
    s["TopicKeyword"] = {"key", "term"};
    s["Keyword"] = {"key", "term", "kind"};
    s["Year"] = {"key", "year"};
    s["Topic"] = {"key", "id", "label", "doc_count", "percent"};
    return s;
  }();
  auto it = schema.find(label);
  if (it == schema.end()) throw UnknownLabel(label);
  return it->second;
}

std::string canonical_key(const std::string& label, const std::string& surface) {
  if (label == "Document") return canonical_doi(surface);
  std::string s = util::trim(surface);
  if (label == "Year" || label == "Topic") {
    bool digits = !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
    if (digits) {
      long v = std::stol(s);
      if (label == "Topic") return std::to_string(v);
      std::string y = std::to_string(v);
      return std::string(y.size() < 4 ? 4 - y.size() : 0, '0') + y;
    }
  }
  return util::canonical_surface(s);
}

// ---- emission ------------------------------------------------------------

namespace {

std::string ner_node_label(NerLabel l) {
  switch (l) {
    case NerLabel::event: return "Event";
    case NerLabel::person: return "Person";
    case NerLabel::location: return "Location";
    case NerLabel::product: return "Product";
    case NerLabel::organization: return "Organization";
    case NerLabel::geopolitical_entity: return "GeopoliticalEntity";
  }
  return "Organization";
}

std::string format_percent(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

class Emitter {
public:
  GraphBatch batch;

  NodeKey node(const std::string& label, const std::string& surface, const char* prop) {
    NodeKey k{label, canonical_key(label, surface)};
    if (prop && seen_nodes_.insert(k).second) batch.nodes.push_back({k, {{prop, util::trim(surface)}}});
    return k;
  }

  void edge(const NodeKey& h, const std::string& rel, const NodeKey& t) {
    if (h.key.empty() || t.key.empty() || h == t) return;
    Triplet tr{h, rel, t};
    if (seen_edges_.insert(tr).second) batch.triplets.push_back(std::move(tr));
  }

  void document_node(const Document& d) {
    NodeKey k{"Document", canonical_doi(d.doi)};
    Properties p{{"doi", k.key},
                 {"title", d.title},
                 {"abstract", d.abstract},
                 {"is_core", d.is_core ? "true" : "false"},
                 {"citation_count", std::to_string(d.citations.size())},
                 {"reference_count", std::to_string(d.references.size())}};
    for (const auto& [src, id] : d.source_ids) p[to_string(src) + "_id"] = id;
    seen_nodes_.insert(k);
    batch.nodes.push_back({k, std::move(p)});
  }

  void stub_document(const std::string& doi) {
    NodeKey k{"Document", canonical_doi(doi)};
    if (!k.key.empty() && seen_nodes_.insert(k).second) batch.nodes.push_back({k, {{"doi", k.key}}});
  }

private:
  std::set<NodeKey> seen_nodes_;
  std::set<Triplet> seen_edges_;
};

}  // namespace

GraphBatch emit_triplets(const Corpus& corpus, const std::vector<factorization::TopicSummary>& topics) {
  Emitter e;

  // Real documents first so stubs never shadow their properties.
  for (const auto& d : corpus.documents()) e.document_node(d);

  for (const auto& d : corpus.documents()) {
    NodeKey doc{"Document", canonical_doi(d.doi)};
    for (const auto& a : d.authors)
      if (!util::trim(a.name).empty()) e.edge(doc, "AUTHORED_BY", e.node("Author", a.name, "name"));
    if (d.year) e.edge(doc, "PUBLISHED_IN_YEAR", e.node("Year", std::to_string(*d.year), "year"));
    if (d.publisher && !util::trim(*d.publisher).empty())
      e.edge(doc, "PUBLISHED_BY", e.node("Publisher", *d.publisher, "name"));
    for (const auto& c : d.categories) {
      auto k = e.node("Keyword", c, "term");
      e.batch.nodes.push_back({k, {{"kind", "category"}}});
      e.edge(doc, "HAS_CATEGORY", k);
    }
    for (const auto& c : d.sme_keywords) {
      auto k = e.node("Keyword", c, "term");
      e.batch.nodes.push_back({k, {{"kind", "sme"}}});
      e.edge(doc, "HAS_SME_KEYWORD", k);
    }
    for (const auto& a : d.acronyms) e.edge(doc, "HAS_ACRONYM", e.node("Acronym", a, "term"));

    for (const auto& a : d.authors) {
      if (!a.affiliation || util::trim(*a.affiliation).empty()) continue;
      auto aff = e.node("Affiliation", *a.affiliation, "name");
      e.edge(doc, "AFFILIATED_WITH", aff);
      if (a.country && !util::trim(*a.country).empty()) e.edge(aff, "LOCATED_IN", e.node("Country", *a.country, "name"));
    }
    for (const auto& aff : d.affiliations)
      if (!util::trim(aff).empty()) e.edge(doc, "AFFILIATED_WITH", e.node("Affiliation", aff, "name"));

    for (const auto& ent : d.ner_entities)
      if (!util::trim(ent.text).empty()) e.edge(doc, "MENTIONS", e.node(ner_node_label(ent.label), ent.text, "name"));

    for (const auto& c : d.citations) {
      e.stub_document(c);
      e.edge({"Document", canonical_doi(c)}, "CITES", doc);
    }
    for (const auto& r : d.references) {
      e.stub_document(r);
      e.edge(doc, "REFERENCES", {"Document", canonical_doi(r)});
    }

    if (d.topic_id) {
      NodeKey t{"Topic", std::to_string(*d.topic_id)};
      e.edge(doc, "HAS_TOPIC", t);
    }
  }

  for (const auto& t : topics) {
    NodeKey tk{"Topic", std::to_string(t.topic_id)};
    e.batch.nodes.push_back({tk,
                             {{"id", std::to_string(t.topic_id)},
                              {"label", t.label},
                              {"doc_count", std::to_string(t.doc_count)},
                              {"percent", format_percent(t.percent)}}});
    for (const auto& [term, w] : t.top_terms) e.edge(tk, "HAS_KEYWORD", e.node("TopicKeyword", term, "term"));
  }
  return e.batch;
}

// ---- store ---------------------------------------------------------------

GraphStore::GraphStore(const GraphStore& other) { *this = other; }

GraphStore& GraphStore::operator=(const GraphStore& other) {
  if (this == &other) return *this;
  auto lock = other.read();
  nodes_ = other.nodes_;
  index_ = other.index_;
  edges_ = other.edges_;
  edge_set_ = other.edge_set_;
  adjacency_ = other.adjacency_;
  by_label_ = other.by_label_;
  label_counts_ = other.label_counts_;
  relation_counts_ = other.relation_counts_;
  log_.reset();
  return *this;
}

NodeId GraphStore::intern(const NodeKey& key) {
  if (!is_node_label(key.label)) throw UnknownLabel(key.label);
  if (key.key.empty()) throw FormatError("empty node key for label " + key.label);
  auto [it, inserted] = index_.try_emplace(key, nodes_.size());
  if (inserted) {
    nodes_.push_back({key, {}});
    adjacency_.emplace_back();
    by_label_[key.label].push_back(it->second);
    ++label_counts_[key.label];
  }
  return it->second;
}

bool GraphStore::insert_edge(NodeId h, const std::string& rel, NodeId t) {
  if (rel.empty()) throw FormatError("empty relation");
  if (!edge_set_.emplace(h, rel, t).second) return false;
  EdgeId id = edges_.size();
  edges_.push_back({h, rel, t});
  adjacency_[h].push_back(id);
  if (t != h) adjacency_[t].push_back(id);
  ++relation_counts_[rel];
  return true;
}

std::size_t GraphStore::merge(const std::vector<Triplet>& triplets) {
  std::unique_lock lock(mu_);
  std::size_t added = 0;
  std::string lines;
  for (const auto& t : triplets) {
    NodeId h = intern(t.head);
    NodeId tl = intern(t.tail);
    if (insert_edge(h, t.relation, tl)) ++added;
    if (log_) lines += json(t).dump() + "\n";
  }
  append_log(lines);
  return added;
}

void GraphStore::merge_properties(const std::vector<NodeRecord>& records) {
  std::unique_lock lock(mu_);
  std::string lines;
  for (const auto& r : records) {
    const auto& allowed = label_properties(r.node.label);
    NodeId id = intern(r.node);
    for (const auto& [k, v] : r.properties) {
      if (!allowed.contains(k)) throw UnknownProperty(r.node.label + "." + k);
      nodes_[id].properties.try_emplace(k, v);
    }
    if (log_) lines += json{{"node", r.node}, {"properties", r.properties}}.dump() + "\n";
  }
  append_log(lines);
}

void GraphStore::merge(const GraphBatch& batch) {
  merge_properties(batch.nodes);
  merge(batch.triplets);
}

void GraphStore::append_log(const std::string& lines) {
  if (!log_ || lines.empty()) return;
  *log_ << lines;
  log_->flush();
}

std::size_t GraphStore::label_count(const std::string& label) const {
  auto it = label_counts_.find(label);
  return it == label_counts_.end() ? 0 : it->second;
}

std::size_t GraphStore::relation_count(const std::string& relation) const {
  auto it = relation_counts_.find(relation);
  return it == relation_counts_.end() ? 0 : it->second;
}

const std::vector<NodeId>& GraphStore::nodes_with_label(const std::string& label) const {
  static const std::vector<NodeId> none;
  auto it = by_label_.find(label);
  return it == by_label_.end() ? none : it->second;
}

std::optional<NodeId> GraphStore::find(const NodeKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void GraphStore::attach_log(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto f = std::make_unique<std::ofstream>(path, std::ios::app | std::ios::binary);
  if (!*f) throw FormatError("cannot open graph log " + path.string());
  std::unique_lock lock(mu_);
  log_ = std::move(f);
}

GraphStore GraphStore::load(const std::filesystem::path& path) {
  GraphStore g;
  std::istringstream in(util::read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      if (j.contains("node")) {
        g.merge_properties({{j.at("node").get<NodeKey>(), j.value("properties", Properties{})}});
      } else {
        g.merge(std::vector<Triplet>{j.get<Triplet>()});
      }
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return g;
}

std::string GraphStore::dump() const {
  auto lock = read();
  std::string out;
  for (const auto& n : nodes_) out += json{{"node", n.key}, {"properties", n.properties}}.dump() + "\n";
  for (const auto& e : edges_) out += json(Triplet{nodes_[e.head].key, e.relation, nodes_[e.tail].key}).dump() + "\n";
  return out;
}

void GraphStore::save(const std::filesystem::path& path) const { util::write_file(path, dump()); }

json GraphStore::schema_json() const {
  auto lock = read();
  json labels = json::array();
  for (const auto& l : node_labels()) {
    labels.push_back({{"label", l}, {"count", label_count(l)}, {"properties", label_properties(l)}});
  }
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> patterns;
  for (const auto& e : edges_) ++patterns[{nodes_[e.head].key.label, e.relation, nodes_[e.tail].key.label}];
  json rels = json::array();
  for (const auto& [p, c] : patterns)
    rels.push_back({{"head", std::get<0>(p)}, {"relation", std::get<1>(p)}, {"tail", std::get<2>(p)}, {"count", c}});
  return json{{"labels", labels}, {"relations", rels}, {"nodes", nodes_.size()}, {"edges", edges_.size()}};
}

std::string GraphStore::schema_text() const {
  json s = schema_json();
  std::string out = "Node labels:\n";
  for (const auto& l : s["labels"]) {
    std::vector<std::string> props = l["properties"].get<std::vector<std::string>>();
    out += "  (:" + l["label"].get<std::string>() + " {" + util::join(props, ", ") + "})\n";
  }
  out += "Relationships (stored direction, matched in either direction):\n";
  for (const auto& r : s["relations"])
    out += "  (:" + r["head"].get<std::string>() + ")-[:" + r["relation"].get<std::string>() + "]-(:" +
           r["tail"].get<std::string>() + ")\n";
  return out;
}

// ---- serialization -------------------------------------------------------

void to_json(json& j, const NodeKey& k) { j = json{{"label", k.label}, {"key", k.key}}; }

void from_json(const json& j, NodeKey& k) {
  j.at("label").get_to(k.label);
  j.at("key").get_to(k.key);
}

void to_json(json& j, const Triplet& t) { j = json{{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}}; }

void from_json(const json& j, Triplet& t) {
  j.at("head").get_to(t.head);
  j.at("relation").get_to(t.relation);
  j.at("tail").get_to(t.tail);
}

std::string triplets_to_jsonl(const std::vector<Triplet>& triplets) {
  std::string out;
  for (const auto& t : triplets) out += json(t).dump() + "\n";
  return out;
}

}  // namespace slic::graph
