#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "slic/corpus.hpp"
#include "slic/factorization.hpp"

namespace slic::graph {

// The 16 base node labels, in schema order.
const std::vector<std::string>& node_labels();
bool is_node_label(const std::string& label);
// Property names a node of `label` may carry.
const std::set<std::string>& label_properties(const std::string& label);

// Label-specific key canonicalisation: DOIs via canonical_doi, years
// zero-padded to four digits, topics as plain integers, everything else
// lowercased, trimmed, whitespace-collapsed.
std::string canonical_key(const std::string& label, const std::string& surface);

struct NodeKey {
  std::string label;
  std::string key;

  auto operator<=>(const NodeKey&) const = default;
};

struct Triplet {
  NodeKey head;
  std::string relation;
  NodeKey tail;

  auto operator<=>(const Triplet&) const = default;
};

using Properties = std::map<std::string, std::string>;

struct NodeRecord {
  NodeKey node;
  Properties properties;

  bool operator==(const NodeRecord&) const = default;
};

struct GraphBatch {
  std::vector<Triplet> triplets;
  std::vector<NodeRecord> nodes;
};

// Triplets per document plus the node property records (Document, Topic and
// the display names of entity nodes).
GraphBatch emit_triplets(const Corpus& corpus, const std::vector<factorization::TopicSummary>& topics);

using NodeId = std::size_t;
using EdgeId = std::size_t;

struct Node {
  NodeKey key;
  Properties properties;
};

struct Edge {
  NodeId head;
  std::string relation;
  NodeId tail;
};

// In-memory labeled multigraph with set semantics. Edges are stored directed
// and traversed in both directions. One writer at a time; readers take a
// shared lock through `read()`.
class GraphStore {
public:
  GraphStore() = default;
  GraphStore(const GraphStore& other);
  GraphStore& operator=(const GraphStore& other);

  // Node created iff its key is absent; edge created iff (head, relation,
  // tail) is absent. Returns the number of new edges.
  std::size_t merge(const std::vector<Triplet>& triplets);
  // Creates absent nodes; on existing nodes only missing property keys are
  // filled.
  void merge_properties(const std::vector<NodeRecord>& records);
  void merge(const GraphBatch& batch);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t label_count(const std::string& label) const;
  std::size_t relation_count(const std::string& relation) const;
  const std::map<std::string, std::size_t>& label_counts() const { return label_counts_; }
  const std::map<std::string, std::size_t>& relation_counts() const { return relation_counts_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<EdgeId>& incident(NodeId n) const { return adjacency_[n]; }
  const std::vector<NodeId>& nodes_with_label(const std::string& label) const;
  std::optional<NodeId> find(const NodeKey& key) const;

  std::shared_lock<std::shared_mutex> read() const { return std::shared_lock(mu_); }

  // Every subsequent merge is appended to `path` as line-delimited JSON.
  void attach_log(const std::filesystem::path& path);
  // Replays a log written by attach_log or save().
  static GraphStore load(const std::filesystem::path& path);
  // Full dump in the log format: node property lines, then triplet lines.
  void save(const std::filesystem::path& path) const;
  std::string dump() const;

  // Human-readable summary of labels, relations and properties for prompts.
  std::string schema_text() const;
  nlohmann::json schema_json() const;

private:
  NodeId intern(const NodeKey& key);
  bool insert_edge(NodeId h, const std::string& rel, NodeId t);
  void append_log(const std::string& lines);

  std::vector<Node> nodes_;
  std::map<NodeKey, NodeId> index_;
  std::vector<Edge> edges_;
  std::set<std::tuple<NodeId, std::string, NodeId>> edge_set_;
  std::vector<std::vector<EdgeId>> adjacency_;
  std::map<std::string, std::vector<NodeId>> by_label_;
  std::map<std::string, std::size_t> label_counts_;
  std::map<std::string, std::size_t> relation_counts_;
  std::unique_ptr<std::ofstream> log_;
  mutable std::shared_mutex mu_;
};

void to_json(nlohmann::json& j, const NodeKey& k);
void from_json(const nlohmann::json& j, NodeKey& k);
void to_json(nlohmann::json& j, const Triplet& t);
void from_json(const nlohmann::json& j, Triplet& t);

std::string triplets_to_jsonl(const std::vector<Triplet>& triplets);

}  // namespace slic::graph
