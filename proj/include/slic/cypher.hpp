#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "slic/graph.hpp"

namespace slic::cypher {

struct NodePattern {
  std::string var;  // empty when anonymous
  std::optional<std::string> label;
};

struct EdgePattern {
  std::string var;
  std::optional<std::string> reltype;
};

enum class PredOp { contains, equals };

struct Predicate {
  std::string var;
  std::string prop;
  PredOp op = PredOp::equals;
  std::string value;
};

struct ReturnItem {
  bool count_star = false;
  std::string var;
};

// query := ["PROFILE"] "MATCH" pattern ["WHERE" pred {"AND" pred}]
//          "RETURN" item {"," item} ["LIMIT" int]
struct QueryAst {
  bool profiled = false;
  std::vector<NodePattern> nodes;  // nodes.size() == edges.size() + 1
  std::vector<EdgePattern> edges;
  std::vector<Predicate> where;
  std::vector<ReturnItem> items;
  std::optional<std::int64_t> limit;

  bool has_aggregate() const;
};

// Throws ParseError carrying line, column and the expected-token set.
QueryAst parse_cypherlite(const std::string& text);
// Canonical single-line rendering; parse(render(ast)) == ast.
std::string render(const QueryAst& ast);

struct Value {
  enum class Kind { node, edge, integer } kind = Kind::integer;
  std::size_t id = 0;  // NodeId or EdgeId
  std::int64_t number = 0;

  bool operator==(const Value&) const = default;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
};

struct PlanOperator {
  std::string name;    // ScanByLabel, ScanAll, FilterProperty, ExpandEdge, Project, Aggregate, Limit
  std::string detail;  // e.g. "(k:Keyword)" or "k.term CONTAINS 'x'"
  std::int64_t estimated_rows = 0;
  std::optional<std::int64_t> actual_rows;
};

struct ExecutionPlan {
  std::vector<PlanOperator> operators;

  std::string text() const;
};

// Operator list with estimates only; validates labels and properties.
ExecutionPlan plan(const graph::GraphStore& store, const QueryAst& ast);
Table execute(const graph::GraphStore& store, const QueryAst& ast);
std::pair<ExecutionPlan, Table> profile(const graph::GraphStore& store, const QueryAst& ast);

// Short descriptions of each operator, used when explaining plans.
const std::string& operator_glossary();

// Value rendering shared by the HTTP API and the answer prompts.
nlohmann::json value_json(const graph::GraphStore& store, const Value& v);
nlohmann::json table_json(const graph::GraphStore& store, const Table& t);
std::string value_text(const graph::GraphStore& store, const Value& v);

}  // namespace slic::cypher
