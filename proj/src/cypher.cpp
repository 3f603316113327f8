#include "slic/cypher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::cypher {

using nlohmann::json;

bool QueryAst::has_aggregate() const {
  return std::any_of(items.begin(), items.end(), [](const ReturnItem& i) { return i.count_star; });
}

// ---- lexer ---------------------------------------------------------------

namespace {

enum class Tok { ident, string, integer, punct, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  int line = 1;
  int col = 1;
};

const std::set<std::string> kKeywords = {"PROFILE", "MATCH", "WHERE", "AND", "RETURN", "LIMIT", "CONTAINS"};

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') ++line, col = 1;
      else ++col;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::ident;
      t.text = src.substr(i, j - i);
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Tok::integer;
      t.text = src.substr(i, j - i);
      advance(j - i);
    } else if (c == '\'' || c == '"') {
      t.kind = Tok::string;
      advance(1);
      bool closed = false;
      while (i < src.size()) {
        char d = src[i];
        if (d == '\\' && i + 1 < src.size()) {
          t.text += src[i + 1];
          advance(2);
        } else if (d == c) {
          advance(1);
          closed = true;
          break;
        } else {
          t.text += d;
          advance(1);
        }
      }
      if (!closed) throw ParseError(t.line, t.col, {"closing quote"}, "unterminated string literal");
    } else if (std::string("()[]-:,.=*<>;{}").find(c) != std::string::npos) {
      t.kind = Tok::punct;
      t.text = std::string(1, c);
      advance(1);
    } else {
      throw ParseError(line, col, {}, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  QueryAst parse() {
    QueryAst ast;
    if (is_kw("PROFILE")) {
      ast.profiled = true;
      ++pos_;
      expect_kw("MATCH", {"MATCH"});
    } else {
      expect_kw("MATCH", {"PROFILE", "MATCH"});
    }

    ast.nodes.push_back(node());
    while (is_punct("-") || is_punct("<")) {
      if (is_punct("<")) fail({"-["}, "directed edges are not supported");
      ast.edges.push_back(edge());
      ast.nodes.push_back(node());
    }

    if (is_kw("WHERE")) {
      ++pos_;
      ast.where.push_back(predicate());
      while (is_kw("AND")) {
        ++pos_;
        ast.where.push_back(predicate());
      }
    }

    if (!is_kw("RETURN")) fail(ast.where.empty() ? std::vector<std::string>{"-[", "WHERE", "RETURN"}
                                                 : std::vector<std::string>{"AND", "RETURN"},
                               "expected RETURN");
    ++pos_;
    ast.items.push_back(item());
    while (is_punct(",")) {
      ++pos_;
      ast.items.push_back(item());
    }

    if (is_kw("LIMIT")) {
      ++pos_;
      const Token& t = peek();
      if (t.kind != Tok::integer) fail({"integer"}, "LIMIT needs a non-negative integer");
      try {
        ast.limit = std::stoll(t.text);
      } catch (const std::exception&) {
        fail({"integer"}, "LIMIT value out of range");
      }
      ++pos_;
    }
    if (is_punct(";")) ++pos_;
    if (peek().kind != Tok::end) fail(ast.limit ? std::vector<std::string>{"end of query"}
                                                : std::vector<std::string>{",", "LIMIT", "end of query"},
                                      "unexpected '" + peek().text + "'");
    check_bindings(ast);
    return ast;
  }

private:
  const Token& peek() const { return toks_[pos_]; }
  bool is_kw(const char* kw) const { return peek().kind == Tok::ident && upper(peek().text) == kw; }
  bool is_punct(const char* p) const { return peek().kind == Tok::punct && peek().text == p; }

  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(t.line, t.col, std::move(expected), t.kind == Tok::end ? msg + " at end of input" : msg);
  }

  void expect_kw(const char* kw, std::vector<std::string> expected) {
    if (!is_kw(kw)) fail(std::move(expected), std::string("expected ") + kw);
    ++pos_;
  }

  void expect_punct(const char* p, std::vector<std::string> expected) {
    if (!is_punct(p)) fail(std::move(expected), std::string("expected '") + p + "'");
    ++pos_;
  }

  std::string variable() {
    const Token& t = peek();
    if (kKeywords.contains(upper(t.text))) fail({"variable"}, "reserved word '" + t.text + "' used as variable");
    ++pos_;
    return t.text;
  }

  NodePattern node() {
    expect_punct("(", {"("});
    NodePattern n;
    if (peek().kind == Tok::ident) n.var = variable();
    if (is_punct(":")) {
      ++pos_;
      if (peek().kind != Tok::ident) fail({"label"}, "expected a label");
      n.label = peek().text;
      ++pos_;
    }
    if (is_punct("{")) fail({")"}, "inline property maps are not supported; use WHERE");
    expect_punct(")", n.label ? std::vector<std::string>{")"} : std::vector<std::string>{":", ")"});
    return n;
  }

  EdgePattern edge() {
    expect_punct("-", {"-["});
    if (!is_punct("[")) fail({"["}, "expected '[' after '-'");
    ++pos_;
    EdgePattern e;
    if (peek().kind == Tok::ident) e.var = variable();
    if (is_punct(":")) {
      ++pos_;
      if (peek().kind != Tok::ident) fail({"relationship type"}, "expected a relationship type");
      e.reltype = peek().text;
      ++pos_;
    }
    if (is_punct("*")) fail({"]"}, "variable-length paths are not supported");
    expect_punct("]", e.reltype ? std::vector<std::string>{"]"} : std::vector<std::string>{":", "]"});
    expect_punct("-", {"]-"});
    if (is_punct(">")) fail({"("}, "directed edges are not supported");
    return e;
  }

  Predicate predicate() {
    Predicate p;
    if (peek().kind != Tok::ident) fail({"variable"}, "expected a predicate");
    pred_pos_.push_back({peek().line, peek().col});
    p.var = variable();
    expect_punct(".", {"."});
    if (peek().kind != Tok::ident) fail({"property"}, "expected a property name");
    p.prop = peek().text;
    ++pos_;
    if (is_kw("CONTAINS")) {
      p.op = PredOp::contains;
      ++pos_;
    } else if (is_punct("=")) {
      p.op = PredOp::equals;
      ++pos_;
    } else {
      fail({"CONTAINS", "="}, "expected CONTAINS or =");
    }
    if (peek().kind != Tok::string) fail({"string"}, "expected a quoted string");
    p.value = peek().text;
    ++pos_;
    return p;
  }

  ReturnItem item() {
    ReturnItem r;
    item_pos_.push_back({peek().line, peek().col});
    if (peek().kind == Tok::ident && upper(peek().text) == "COUNT" && toks_[pos_ + 1].text == "(") {
      pos_ += 2;
      expect_punct("*", {"*"});
      expect_punct(")", {")"});
      r.count_star = true;
      return r;
    }
    if (peek().kind != Tok::ident) fail({"variable", "count(*)"}, "expected a return item");
    r.var = variable();
    return r;
  }

  void check_bindings(const QueryAst& ast) const {
    std::set<std::string> node_vars, edge_vars;
    for (const auto& n : ast.nodes)
      if (!n.var.empty()) node_vars.insert(n.var);
    for (std::size_t i = 0; i < ast.edges.size(); ++i) {
      const auto& v = ast.edges[i].var;
      if (v.empty()) continue;
      if (node_vars.contains(v)) throw ParseError(1, 1, {}, "variable '" + v + "' used for both a node and an edge");
      if (!edge_vars.insert(v).second) throw ParseError(1, 1, {}, "edge variable '" + v + "' repeated");
    }
    for (std::size_t i = 0; i < ast.where.size(); ++i) {
      const auto& v = ast.where[i].var;
      if (!node_vars.contains(v) && !edge_vars.contains(v))
        throw ParseError(pred_pos_[i].first, pred_pos_[i].second, {}, "variable '" + v + "' is not bound in MATCH");
    }
    for (std::size_t i = 0; i < ast.items.size(); ++i) {
      const auto& it = ast.items[i];
      if (it.count_star) continue;
      if (!node_vars.contains(it.var) && !edge_vars.contains(it.var))
        throw ParseError(item_pos_[i].first, item_pos_[i].second, {}, "variable '" + it.var + "' is not bound in MATCH");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::pair<int, int>> pred_pos_, item_pos_;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

}  // namespace

QueryAst parse_cypherlite(const std::string& text) { return Parser(lex(text)).parse(); }

std::string render(const QueryAst& ast) {
  std::string out = ast.profiled ? "PROFILE MATCH " : "MATCH ";
  auto node = [](const NodePattern& n) { return "(" + n.var + (n.label ? ":" + *n.label : "") + ")"; };
  out += node(ast.nodes[0]);
  for (std::size_t i = 0; i < ast.edges.size(); ++i) {
    const auto& e = ast.edges[i];
    out += "-[" + e.var + (e.reltype ? ":" + *e.reltype : "") + "]-" + node(ast.nodes[i + 1]);
  }
  for (std::size_t i = 0; i < ast.where.size(); ++i) {
    const auto& p = ast.where[i];
    out += (i == 0 ? " WHERE " : " AND ") + p.var + "." + p.prop +
           (p.op == PredOp::contains ? " CONTAINS " : " = ") + quote(p.value);
  }
  out += " RETURN ";
  for (std::size_t i = 0; i < ast.items.size(); ++i) {
    if (i) out += ", ";
    out += ast.items[i].count_star ? "count(*)" : ast.items[i].var;
  }
  if (ast.limit) out += " LIMIT " + std::to_string(*ast.limit);
  return out;
}

// ---- planning & execution ------------------------------------------------

namespace {

using graph::GraphStore;
using graph::NodeId;
using graph::EdgeId;

enum class OpKind { scan_label, scan_all, filter, expand, project, aggregate, limit };

struct Op {
  OpKind kind;
  int slot = 0;                 // node slot (scan/filter) or edge slot (expand)
  std::vector<std::size_t> preds;  // filter
  double estimate = 0;
};

// Distinct variables in slot order; anonymous slots get their own variable.
struct Layout {
  std::vector<int> slot_var;                     // node slot -> var index
  std::vector<std::string> var_names;            // var index -> name ("" if anonymous)
  std::vector<std::set<std::string>> var_labels;  // required labels per var
  std::map<std::string, int> edge_slot_of;       // edge var -> edge slot
  std::vector<int> first_slot;                   // var index -> first node slot
};

Layout layout_of(const QueryAst& ast) {
  Layout l;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < ast.nodes.size(); ++i) {
    const auto& n = ast.nodes[i];
    int v;
    auto it = n.var.empty() ? index.end() : index.find(n.var);
    if (it == index.end()) {
      v = static_cast<int>(l.var_names.size());
      l.var_names.push_back(n.var);
      l.var_labels.emplace_back();
      l.first_slot.push_back(static_cast<int>(i));
      if (!n.var.empty()) index.emplace(n.var, v);
    } else {
      v = it->second;
    }
    if (n.label) l.var_labels[v].insert(*n.label);
    l.slot_var.push_back(v);
  }
  for (std::size_t i = 0; i < ast.edges.size(); ++i)
    if (!ast.edges[i].var.empty()) l.edge_slot_of[ast.edges[i].var] = static_cast<int>(i);
  return l;
}

int var_index(const Layout& l, const std::string& name) {
  for (std::size_t v = 0; v < l.var_names.size(); ++v)
    if (l.var_names[v] == name) return static_cast<int>(v);
  return -1;
}

void validate(const QueryAst& ast, const Layout& l) {
  for (const auto& n : ast.nodes)
    if (n.label && !graph::is_node_label(*n.label)) throw UnknownLabel(*n.label);
  static const std::set<std::string> any_prop = [] {
    std::set<std::string> s;
    for (const auto& lab : graph::node_labels()) s.insert(graph::label_properties(lab).begin(), graph::label_properties(lab).end());
    return s;
  }();
  for (const auto& p : ast.where) {
    if (l.edge_slot_of.contains(p.var)) throw UnknownProperty(p.var + "." + p.prop + " (edges carry no properties)");
    int v = var_index(l, p.var);
    const auto& labels = l.var_labels[v];
    if (labels.empty()) {
      if (!any_prop.contains(p.prop)) throw UnknownProperty(p.var + "." + p.prop);
    } else {
      for (const auto& lab : labels)
        if (!graph::label_properties(lab).contains(p.prop)) throw UnknownProperty(lab + "." + p.prop);
    }
  }
}

double selectivity(const Predicate& p) { return p.op == PredOp::equals ? 0.1 : 0.25; }

std::vector<Op> build_ops(const GraphStore& g, const QueryAst& ast, const Layout& l) {
  std::vector<Op> ops;
  const double nodes = static_cast<double>(g.node_count());
  auto label_fraction = [&](int var) {
    if (nodes == 0) return 0.0;
    double f = 1.0;
    for (const auto& lab : l.var_labels[var]) f = std::min(f, g.label_count(lab) / nodes);
    return f;
  };
  auto preds_for = [&](int var) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ast.where.size(); ++i)
      if (var_index(l, ast.where[i].var) == var) out.push_back(i);
    return out;
  };

  int v0 = l.slot_var[0];
  Op scan{l.var_labels[v0].empty() ? OpKind::scan_all : OpKind::scan_label, 0, {}, 0};
  scan.estimate = l.var_labels[v0].empty() ? nodes : nodes * label_fraction(v0);
  ops.push_back(scan);
  double est = scan.estimate;
  auto add_filter = [&](int slot) {
    auto preds = preds_for(l.slot_var[slot]);
    if (preds.empty()) return;
    for (auto i : preds) est *= selectivity(ast.where[i]);
    ops.push_back({OpKind::filter, slot, preds, est});
  };
  add_filter(0);

  for (std::size_t i = 0; i < ast.edges.size(); ++i) {
    double rel_edges = ast.edges[i].reltype ? static_cast<double>(g.relation_count(*ast.edges[i].reltype))
                                            : static_cast<double>(g.edge_count());
    double degree = nodes > 0 ? 2.0 * rel_edges / nodes : 0.0;
    int target = l.slot_var[i + 1];
    bool first_visit = l.first_slot[target] == static_cast<int>(i + 1);
    est *= degree * (first_visit ? label_fraction(target) : (nodes > 0 ? 1.0 / nodes : 0.0));
    ops.push_back({OpKind::expand, static_cast<int>(i), {}, est});
    if (first_visit) add_filter(static_cast<int>(i + 1));
  }

  if (ast.has_aggregate()) {
    bool grouped = std::any_of(ast.items.begin(), ast.items.end(), [](const ReturnItem& r) { return !r.count_star; });
    est = grouped ? est : 1.0;
    ops.push_back({OpKind::aggregate, 0, {}, est});
  } else {
    ops.push_back({OpKind::project, 0, {}, est});
  }
  if (ast.limit) ops.push_back({OpKind::limit, 0, {}, std::min(est, static_cast<double>(*ast.limit))});
  return ops;
}

std::string op_name(OpKind k) {
  switch (k) {
    case OpKind::scan_label: return "ScanByLabel";
    case OpKind::scan_all: return "ScanAll";
    case OpKind::filter: return "FilterProperty";
    case OpKind::expand: return "ExpandEdge";
    case OpKind::project: return "Project";
    case OpKind::aggregate: return "Aggregate";
    case OpKind::limit: return "Limit";
  }
  return "?";
}

std::string node_pattern_text(const QueryAst& ast, int slot) {
  const auto& n = ast.nodes[slot];
  return "(" + n.var + (n.label ? ":" + *n.label : "") + ")";
}

std::string op_detail(const QueryAst& ast, const Op& op) {
  switch (op.kind) {
    case OpKind::scan_label:
    case OpKind::scan_all: return node_pattern_text(ast, op.slot);
    case OpKind::filter: {
      std::vector<std::string> parts;
      for (auto i : op.preds) {
        const auto& p = ast.where[i];
        parts.push_back(p.var + "." + p.prop + (p.op == PredOp::contains ? " CONTAINS " : " = ") + quote(p.value));
      }
      return util::join(parts, " AND ");
    }
    case OpKind::expand: {
      const auto& e = ast.edges[op.slot];
      return node_pattern_text(ast, op.slot) + "-[" + e.var + (e.reltype ? ":" + *e.reltype : "") + "]-" +
             node_pattern_text(ast, op.slot + 1);
    }
    case OpKind::project:
    case OpKind::aggregate: {
      std::vector<std::string> parts;
      for (const auto& it : ast.items) parts.push_back(it.count_star ? "count(*)" : it.var);
      return util::join(parts, ", ");
    }
    case OpKind::limit: return std::to_string(*ast.limit);
  }
  return {};
}

ExecutionPlan to_plan(const QueryAst& ast, const std::vector<Op>& ops) {
  ExecutionPlan p;
  for (const auto& op : ops)
    p.operators.push_back({op_name(op.kind), op_detail(ast, op), static_cast<std::int64_t>(std::llround(op.estimate)), {}});
  return p;
}

constexpr NodeId kUnbound = static_cast<NodeId>(-1);

struct Partial {
  std::vector<NodeId> vars;
  std::vector<EdgeId> edges;
};

bool has_labels(const GraphStore& g, NodeId n, const std::set<std::string>& labels) {
  for (const auto& lab : labels)
    if (g.nodes()[n].key.label != lab) return false;
  return true;
}

bool satisfies(const GraphStore& g, NodeId n, const Predicate& p) {
  const auto& node = g.nodes()[n];
  std::string value;
  if (p.prop == "key") {
    value = node.key.key;
  } else {
    auto it = node.properties.find(p.prop);
    if (it == node.properties.end()) return false;
    value = it->second;
  }
  return p.op == PredOp::equals ? value == p.value : value.find(p.value) != std::string::npos;
}

std::vector<std::string> sort_key(const GraphStore& g, const Partial& row) {
  std::vector<std::string> key;
  for (NodeId n : row.vars) {
    key.push_back(g.nodes()[n].key.label);
    key.push_back(g.nodes()[n].key.key);
  }
  for (EdgeId e : row.edges) {
    const auto& edge = g.edges()[e];
    key.push_back(g.nodes()[edge.head].key.label + "\x1f" + g.nodes()[edge.head].key.key);
    key.push_back(edge.relation);
    key.push_back(g.nodes()[edge.tail].key.label + "\x1f" + g.nodes()[edge.tail].key.key);
  }
  return key;
}

std::vector<std::string> value_key(const GraphStore& g, const Value& v) {
  switch (v.kind) {
    case Value::Kind::node: return {g.nodes()[v.id].key.label, g.nodes()[v.id].key.key};
    case Value::Kind::edge: {
      const auto& e = g.edges()[v.id];
      return {g.nodes()[e.head].key.label, g.nodes()[e.head].key.key, e.relation, g.nodes()[e.tail].key.label,
              g.nodes()[e.tail].key.key};
    }
    case Value::Kind::integer: return {std::to_string(v.number)};
  }
  return {};
}

std::pair<ExecutionPlan, Table> run(const GraphStore& g, const QueryAst& ast) {
  Layout l = layout_of(ast);
  validate(ast, l);
  auto lock = g.read();
  std::vector<Op> ops = build_ops(g, ast, l);
  ExecutionPlan plan = to_plan(ast, ops);

  const std::size_t nvars = l.var_names.size();
  std::vector<Partial> rows;
  Table table;
  for (const auto& it : ast.items) table.columns.push_back(it.count_star ? "count(*)" : it.var);

  auto item_value = [&](const Partial& p, const ReturnItem& it) {
    if (l.edge_slot_of.contains(it.var)) return Value{Value::Kind::edge, p.edges[l.edge_slot_of.at(it.var)], 0};
    return Value{Value::Kind::node, p.vars[var_index(l, it.var)], 0};
  };

  for (std::size_t oi = 0; oi < ops.size(); ++oi) {
    const Op& op = ops[oi];
    std::int64_t actual = 0;
    switch (op.kind) {
      case OpKind::scan_label:
      case OpKind::scan_all: {
        int v = l.slot_var[0];
        auto consider = [&](NodeId n) {
          if (!has_labels(g, n, l.var_labels[v])) return;
          Partial p{std::vector<NodeId>(nvars, kUnbound), {}};
          p.vars[v] = n;
          rows.push_back(std::move(p));
        };
        if (op.kind == OpKind::scan_all)
          for (NodeId n = 0; n < g.node_count(); ++n) consider(n);
        else
          for (NodeId n : g.nodes_with_label(*l.var_labels[v].begin())) consider(n);
        actual = static_cast<std::int64_t>(rows.size());
        break;
      }
      case OpKind::filter: {
        int v = l.slot_var[op.slot];
        std::erase_if(rows, [&](const Partial& p) {
          for (auto i : op.preds)
            if (!satisfies(g, p.vars[v], ast.where[i])) return true;
          return false;
        });
        actual = static_cast<std::int64_t>(rows.size());
        break;
      }
      case OpKind::expand: {
        const auto& ep = ast.edges[op.slot];
        int from = l.slot_var[op.slot], to = l.slot_var[op.slot + 1];
        std::vector<Partial> next;
        for (const auto& p : rows) {
          NodeId u = p.vars[from];
          for (EdgeId e : g.incident(u)) {
            const auto& edge = g.edges()[e];
            if (ep.reltype && edge.relation != *ep.reltype) continue;
            if (std::find(p.edges.begin(), p.edges.end(), e) != p.edges.end()) continue;
            NodeId w = edge.head == u ? edge.tail : edge.head;
            if (p.vars[to] != kUnbound) {
              if (p.vars[to] != w) continue;
            } else {
              // Distinct variables bind distinct nodes within one chain.
              if (std::find(p.vars.begin(), p.vars.end(), w) != p.vars.end()) continue;
              if (!has_labels(g, w, l.var_labels[to])) continue;
            }
            Partial q = p;
            q.vars[to] = w;
            q.edges.push_back(e);
            next.push_back(std::move(q));
          }
        }
        rows = std::move(next);
        actual = static_cast<std::int64_t>(rows.size());
        break;
      }
      case OpKind::project: {
        std::vector<std::pair<std::vector<std::string>, const Partial*>> keyed;
        for (const auto& p : rows) keyed.emplace_back(sort_key(g, p), &p);
        std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [k, p] : keyed) {
          std::vector<Value> out;
          for (const auto& it : ast.items) out.push_back(item_value(*p, it));
          table.rows.push_back(std::move(out));
        }
        actual = static_cast<std::int64_t>(table.rows.size());
        break;
      }
      case OpKind::aggregate: {
        std::map<std::vector<std::string>, std::pair<std::vector<Value>, std::int64_t>> groups;
        for (const auto& p : rows) {
          std::vector<std::string> key;
          std::vector<Value> vals;
          for (const auto& it : ast.items) {
            if (it.count_star) continue;
            Value v = item_value(p, it);
            auto k = value_key(g, v);
            key.insert(key.end(), k.begin(), k.end());
            key.push_back("\x1e");
            vals.push_back(v);
          }
          auto [gi, inserted] = groups.try_emplace(key, vals, 0);
          ++gi->second.second;
        }
        bool grouped = std::any_of(ast.items.begin(), ast.items.end(), [](const ReturnItem& r) { return !r.count_star; });
        if (groups.empty() && !grouped) groups[{}] = {{}, 0};
        for (const auto& [k, entry] : groups) {
          std::vector<Value> out;
          std::size_t vi = 0;
          for (const auto& it : ast.items)
            out.push_back(it.count_star ? Value{Value::Kind::integer, 0, entry.second} : entry.first[vi++]);
          table.rows.push_back(std::move(out));
        }
        actual = static_cast<std::int64_t>(table.rows.size());
        break;
      }
      case OpKind::limit: {
        if (table.rows.size() > static_cast<std::size_t>(*ast.limit)) table.rows.resize(static_cast<std::size_t>(*ast.limit));
        actual = static_cast<std::int64_t>(table.rows.size());
        break;
      }
    }
    plan.operators[oi].actual_rows = actual;
  }
  return {std::move(plan), std::move(table)};
}

}  // namespace

ExecutionPlan plan(const graph::GraphStore& store, const QueryAst& ast) {
  Layout l = layout_of(ast);
  validate(ast, l);
  auto lock = store.read();
  return to_plan(ast, build_ops(store, ast, l));
}

Table execute(const graph::GraphStore& store, const QueryAst& ast) { return run(store, ast).second; }

std::pair<ExecutionPlan, Table> profile(const graph::GraphStore& store, const QueryAst& ast) { return run(store, ast); }

std::string ExecutionPlan::text() const {
  std::string out;
  for (std::size_t i = 0; i < operators.size(); ++i) {
    const auto& op = operators[i];
    out += std::to_string(i + 1) + ". " + op.name + " " + op.detail + "  estimated=" + std::to_string(op.estimated_rows);
    if (op.actual_rows) out += " actual=" + std::to_string(*op.actual_rows);
    out += "\n";
  }
  return out;
}

const std::string& operator_glossary() {
  static const std::string text =
      "ScanByLabel: reads every node carrying the given label.\n"
      "ScanAll: reads every node in the graph.\n"
      "FilterProperty: keeps rows whose node property equals or contains the given string.\n"
      "ExpandEdge: follows relationships of the given type (either direction) to a neighbouring node.\n"
      "Project: returns the listed variables for every matched row.\n"
      "Aggregate: groups rows by the listed variables and counts them.\n"
      "Limit: keeps only the first N rows.\n";
  return text;
}

json value_json(const graph::GraphStore& store, const Value& v) {
  switch (v.kind) {
    case Value::Kind::node: {
      const auto& n = store.nodes()[v.id];
      return json{{"label", n.key.label}, {"key", n.key.key}, {"properties", n.properties}};
    }
    case Value::Kind::edge: {
      const auto& e = store.edges()[v.id];
      return json{{"type", e.relation},
                  {"start", store.nodes()[e.head].key},
                  {"end", store.nodes()[e.tail].key}};
    }
    case Value::Kind::integer: return json(v.number);
  }
  return nullptr;
}

json table_json(const graph::GraphStore& store, const Table& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row = json::array();
    for (const auto& v : r) row.push_back(value_json(store, v));
    rows.push_back(std::move(row));
  }
  return json{{"columns", t.columns}, {"rows", rows}};
}

std::string value_text(const graph::GraphStore& store, const Value& v) {
  switch (v.kind) {
    case Value::Kind::node: {
      const auto& n = store.nodes()[v.id];
      std::string out = "(:" + n.key.label + " {key: " + json(n.key.key).dump();
      for (const auto& [k, val] : n.properties) out += ", " + k + ": " + json(val).dump();
      return out + "})";
    }
    case Value::Kind::edge: {
      const auto& e = store.edges()[v.id];
      return "[:" + e.relation + "]";
    }
    case Value::Kind::integer: return std::to_string(v.number);
  }
  return {};
}

}  // namespace slic::cypher
