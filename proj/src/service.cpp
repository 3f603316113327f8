#include "slic/service.hpp"

#include <thread>

#include "httplib.h"
#include "slic/cypher.hpp"
#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::service {

namespace fs = std::filesystem;
using nlohmann::json;

Artifacts load_artifacts(const pipeline::PipelineConfig& cfg, const vs::EmbeddingProvider& provider) {
  namespace files = pipeline::files;
  const fs::path& out = cfg.output;
  Artifacts a;
  if (fs::exists(out / files::corpus)) a.review_corpus = read_corpus(out / files::corpus);
  if (fs::exists(out / files::review))
    a.review = pipeline::review_from_json(json::parse(util::read_file(out / files::review)));
  if (fs::exists(out / files::decisions))
    a.decisions = pruning::decisions_from_jsonl(util::read_file(out / files::decisions));
  if (fs::exists(out / files::pruned)) {
    a.corpus = read_corpus(out / files::pruned);
    try {
      auto lt = pipeline::load_topics(pipeline::factors_dir(out));
      a.topics = lt.topics;
      std::vector<std::string> keys;
      std::vector<int> labels;
      for (const auto& [doi, t] : lt.assignments) {
        keys.push_back(doi);
        labels.push_back(t);
      }
      a.corpus = pipeline::with_topics(a.corpus, keys, labels);
    } catch (const ConfigError&) {
      // Not factorized yet.
    }
  }
  if (fs::exists(out / files::graph)) a.graph = graph::GraphStore::load(out / files::graph);
  if (fs::exists(out / files::vectors)) a.vectors = vs::VectorStore::load(out / files::vectors);
  if (!cfg.templates.empty()) a.templates = rag::load_templates(cfg.templates, provider);
  return a;
}

json error_json(const std::exception& e) {
  json j{{"error", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) j["kind"] = err->kind();
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    j["line"] = pe->line();
    j["column"] = pe->column();
    j["expected"] = pe->expected();
  }
  return j;
}

Service::Service(Artifacts artifacts, std::unique_ptr<vs::EmbeddingProvider> provider,
                 std::unique_ptr<llm::LlmClient> llm, fs::path output)
    : a_(std::move(artifacts)), provider_(std::move(provider)), llm_(std::move(llm)), output_(std::move(output)) {
  system_.corpus = &a_.corpus;
  system_.graph = &a_.graph;
  system_.vectors = &a_.vectors;
  system_.provider = provider_.get();
  system_.templates = &a_.templates;
  system_.llm = llm_.get();
  system_.gazetteer = rag::Gazetteer::from_graph(a_.graph);
}

namespace {

Response bad_request(const std::exception& e) { return {400, error_json(e)}; }

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw FormatError(std::string("request body is not JSON: ") + e.what());
  }
}

std::string snippet(const std::string& s, std::size_t n) {
  if (s.size() <= n) return s;
  return s.substr(0, util::utf8_floor(s, n)) + "...";
}

}  // namespace

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    if (method == "GET" && path == "/health") return {200, {{"status", "ok"}}};
    if (method == "GET" && path == "/review/clusters") return review_clusters();
    if (method == "POST" && path == "/review/decisions") return submit_decisions(body);
    if (method == "POST" && path == "/chat") return chat(body);
    if (method == "POST" && path == "/query") return query(body);
    if (method == "GET" && path == "/graph/schema") {
      auto lock = a_.graph.read();
      return {200, a_.graph.schema_json()};
    }
    if (method == "GET" && path == "/topics") return {200, {{"topics", a_.topics}}};
    if (method == "GET" && path.rfind("/documents/", 0) == 0) return document(path.substr(11));
    return {404, {{"error", "no route for " + method + " " + path}, {"kind", "NotFound"}}};
  } catch (const EmptyQuestion& e) {
    return bad_request(e);
  } catch (const ParseError& e) {
    return bad_request(e);
  } catch (const UnknownLabel& e) {
    return bad_request(e);
  } catch (const UnknownProperty& e) {
    return bad_request(e);
  } catch (const IncompleteDecisions& e) {
    return bad_request(e);
  } catch (const FormatError& e) {
    return bad_request(e);
  } catch (const std::exception& e) {
    return {500, error_json(e)};
  }
}

Response Service::review_clusters() const {
  std::lock_guard lock(review_mu_);
  if (!a_.review || !a_.review_corpus)
    return {404, {{"error", "no review in progress; run the prune stage first"}, {"kind", "NotFound"}}};
  json clusters = json::array();
  for (const auto& c : a_.review->clusters) {
    json j = c;
    std::size_t core = 0;
    for (const auto& doi : c.member_dois)
      if (const auto* d = a_.review_corpus->find(doi); d && d->is_core) ++core;
    j["size"] = c.member_dois.size();
    // Core documents survive a remove verdict.
    j["core_count"] = core;
    j["removable"] = c.member_dois.size() - core;
    if (const auto* d = a_.review_corpus->find(c.centroid_doi))
      j["centroid"] = {{"doi", d->doi}, {"title", d->title}, {"abstract_snippet", snippet(d->abstract, 280)}};
    clusters.push_back(std::move(j));
  }
  json points = pipeline::review_json(*a_.review).at("points");
  return {200,
          {{"state", a_.decisions.empty() ? "awaiting-decisions" : "decided"},
           {"corpus_count", a_.review_corpus->size()},
           {"clusters", clusters},
           {"points", points},
           {"decisions", a_.decisions}}};
}

Response Service::submit_decisions(const std::string& body) {
  json j = parse_body(body);
  if (j.is_object() && j.contains("decisions")) j = j.at("decisions");
  std::vector<pruning::PruneDecision> decisions;
  try {
    decisions = j.get<std::vector<pruning::PruneDecision>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("decisions: ") + e.what());
  }
  std::lock_guard lock(review_mu_);
  if (!a_.review || !a_.review_corpus)
    return {409, {{"error", "no review in progress"}, {"kind", "NoReview"}}};
  Corpus after = pruning::apply_decisions(*a_.review_corpus, decisions, a_.review->clusters);
  a_.decisions = decisions;
  if (!output_.empty()) {
    util::write_file(output_ / pipeline::files::decisions, pruning::decisions_to_jsonl(decisions));
    util::write_file(output_ / pipeline::files::state, json{{"state", "decisions-submitted"}}.dump(2) + "\n");
  }
  return {200,
          {{"status", "accepted"},
           {"corpus_count_before", a_.review_corpus->size()},
           {"corpus_count_after", after.size()},
           {"removed", a_.review_corpus->size() - after.size()}}};
}

Response Service::chat(const std::string& body) const {
  json j = parse_body(body);
  if (!j.is_object() || !j.contains("question") || !j.at("question").is_string())
    throw FormatError("expected {\"question\": string}");
  auto lock = a_.graph.read();
  return {200, rag::answer_json(rag::answer_question(j.at("question").get<std::string>(), system_))};
}

Response Service::query(const std::string& body) const {
  json j = parse_body(body);
  if (!j.is_object() || !j.contains("cypher") || !j.at("cypher").is_string())
    throw FormatError("expected {\"cypher\": string}");
  auto ast = cypher::parse_cypherlite(j.at("cypher").get<std::string>());
  auto lock = a_.graph.read();
  if (!ast.profiled) return {200, cypher::table_json(a_.graph, cypher::execute(a_.graph, ast))};
  auto [plan, table] = cypher::profile(a_.graph, ast);
  json out = cypher::table_json(a_.graph, table);
  json ops = json::array();
  for (const auto& op : plan.operators)
    ops.push_back({{"name", op.name},
                   {"detail", op.detail},
                   {"estimated_rows", op.estimated_rows},
                   {"actual_rows", op.actual_rows ? json(*op.actual_rows) : json()}});
  out["plan"] = {{"text", plan.text()}, {"operators", ops}};
  return {200, out};
}

Response Service::document(const std::string& raw) const {
  std::string doi = canonical_doi(raw);
  const Document* d = a_.corpus.find(doi);
  if (!d && a_.review_corpus) d = a_.review_corpus->find(doi);
  if (!d) return {404, {{"error", "unknown document " + doi}, {"kind", "NotFound"}}};
  json out = *d;
  json chunks = json::array();
  for (const auto& r : a_.vectors.records())
    if (r.doi == doi) chunks.push_back({{"chunk_id", r.chunk_id}, {"text", r.text}});
  out["chunks"] = chunks;
  return {200, out};
}

namespace {

void install_routes(httplib::Server& server, Service& service) {
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", bridge);
  server.Post(".*", bridge);
  // httplib's default adds SO_REUSEPORT, which lets a second server share a
  // busy port instead of failing to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
}

}  // namespace

void serve(Service& service, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, service);
  if (!server.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  server.listen_after_bind();
}

struct BackgroundServer::Impl {
  httplib::Server server;
  std::thread thread;
};

BackgroundServer::BackgroundServer(Service& service, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
  install_routes(impl_->server, service);
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw ConfigError("cannot bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

BackgroundServer::~BackgroundServer() { stop(); }

void BackgroundServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

}  // namespace slic::service
