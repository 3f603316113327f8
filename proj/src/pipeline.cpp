#include "slic/pipeline.hpp"

#include <algorithm>
#include <set>

#include "slic/annotate.hpp"
#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config --------------------------------------------------------------

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void read_path(const json& j, const char* key, const fs::path& base, fs::path& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = resolve(base, j.at(key).get<std::string>());
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  try {
    if (j.contains("sources")) {
      const auto& s = j.at("sources");
      read_opt(s, "mode", c.sources.mode);
      read_path(s, "fixtures", base, c.sources.fixtures);
      read_opt(s, "urls", c.sources.urls);
      read_opt(s, "max_rps", c.sources.max_rps);
    }
    read_path(j, "core", base, c.core);
    read_path(j, "output", base, c.output);
    if (j.contains("assets")) {
      const auto& a = j.at("assets");
      read_path(a, "ner_gazetteer", base, c.ner_gazetteer);
      read_path(a, "sme_terms", base, c.sme_terms);
      read_path(a, "sme_rules", base, c.sme_rules);
      read_path(a, "templates", base, c.templates);
    }
    if (j.contains("expansion")) {
      const auto& e = j.at("expansion");
      read_opt(e, "hops", c.expansion.hops);
      read_opt(e, "per_hop_limit", c.expansion.per_hop_limit);
      read_opt(e, "bigram_query_count", c.expansion.bigram_query_count);
      read_opt(e, "bigram_result_limit", c.expansion.bigram_result_limit);
      read_opt(e, "max_parallel_fetches", c.expansion.max_parallel_fetches);
    }
    if (j.contains("cleaning")) {
      const auto& cl = j.at("cleaning");
      if (cl.contains("passes")) {
        c.cleaning.enabled_passes.clear();
        for (const auto& p : cl.at("passes")) c.cleaning.enabled_passes.push_back(text::pass_from_string(p.get<std::string>()));
      }
      read_opt(cl, "min_word_len", c.cleaning.min_word_len);
      if (cl.contains("extra_stop_words"))
        for (const auto& w : cl.at("extra_stop_words")) c.cleaning.stop_words.insert(w.get<std::string>());
    }
    if (j.contains("pruning")) {
      read_opt(j.at("pruning"), "tau", c.tau);
      read_opt(j.at("pruning"), "clusters", c.review_clusters);
    }
    if (j.contains("factorization")) {
      const auto& f = j.at("factorization");
      read_opt(f, "k_min", c.bleed.k_min);
      read_opt(f, "K", c.bleed.K);
      read_opt(f, "T", c.bleed.T);
      read_opt(f, "seed", c.bleed.seed);
      read_opt(f, "max_iters", c.bleed.max_iters);
      read_opt(f, "tol", c.bleed.tol);
    }
    if (j.contains("vectors")) read_opt(j.at("vectors"), "chunk_chars", c.chunk_chars);
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      read_opt(e, "provider", c.embedding.provider);
      read_opt(e, "dimension", c.embedding.dimension);
      read_opt(e, "url", c.embedding.url);
      read_opt(e, "model", c.embedding.model);
    }
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      read_opt(l, "provider", c.llm.provider);
      read_path(l, "script", base, c.llm.script);
      read_opt(l, "url", c.llm.url);
      read_opt(l, "model", c.llm.model);
    }
    if (j.contains("serve")) {
      read_opt(j.at("serve"), "host", c.host);
      read_opt(j.at("serve"), "port", c.port);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  if (!c.sme_rules.empty()) c.cleaning.sme_substitutions = text::load_sme_rules(c.sme_rules);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void PipelineConfig::validate() const {
  auto must_exist = [](const fs::path& p, const std::string& what) {
    if (p.empty()) throw ConfigError(what + " is not set");
    if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  };
  auto may_exist = [](const fs::path& p, const std::string& what) {
    if (!p.empty() && !fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  };
  if (sources.mode == "fixture") {
    must_exist(sources.fixtures, "sources.fixtures");
  } else if (sources.mode == "http") {
    if (sources.urls.empty()) throw ConfigError("sources.urls is empty");
    for (const auto& [name, url] : sources.urls) source_from_string(name);
  } else {
    throw ConfigError("sources.mode must be fixture or http");
  }
  must_exist(core, "core");
  if (output.empty()) throw ConfigError("output is not set");
  may_exist(ner_gazetteer, "assets.ner_gazetteer");
  may_exist(sme_terms, "assets.sme_terms");
  may_exist(sme_rules, "assets.sme_rules");
  may_exist(templates, "assets.templates");
  try {
    expansion.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (tau < -1.0 || tau > 1.01) throw ConfigError("pruning.tau must be in [-1, 1]");
  if (review_clusters < 1) throw ConfigError("pruning.clusters must be >= 1");
  if (bleed.k_min < 1 || bleed.K < bleed.k_min) throw ConfigError("factorization k range is empty");
  if (bleed.T < -1.0 || bleed.T > 1.0) throw ConfigError("factorization.T must be in [-1, 1]");
  if (bleed.max_iters < 1 || bleed.tol < 0) throw ConfigError("factorization.max_iters/tol out of range");
  if (chunk_chars < 200) throw ConfigError("vectors.chunk_chars must be >= 200");
  if (embedding.provider != "hash" && embedding.provider != "http")
    throw ConfigError("embedding.provider must be hash or http");
  if (embedding.dimension == 0) throw ConfigError("embedding.dimension must be positive");
  if (llm.provider == "mock") {
    may_exist(llm.script, "llm.script");
  } else if (llm.provider == "http") {
    if (llm.url.empty()) throw ConfigError("llm.url is not set");
  } else {
    throw ConfigError("llm.provider must be mock or http");
  }
  if (port < 0 || port > 65535) throw ConfigError("serve.port out of range");
}

json PipelineConfig::fingerprint() const {
  std::vector<std::string> passes;
  for (auto p : cleaning.enabled_passes) passes.push_back(text::to_string(p));
  return {{"sources", sources.mode},
          {"expansion",
           {{"hops", expansion.hops},
            {"per_hop_limit", expansion.per_hop_limit},
            {"bigram_query_count", expansion.bigram_query_count},
            {"bigram_result_limit", expansion.bigram_result_limit}}},
          {"cleaning", {{"passes", passes}, {"min_word_len", cleaning.min_word_len}}},
          {"pruning", {{"tau", tau}, {"clusters", review_clusters}}},
          {"factorization",
           {{"k_min", bleed.k_min},
            {"K", bleed.K},
            {"T", bleed.T},
            {"seed", bleed.seed},
            {"max_iters", bleed.max_iters},
            {"tol", bleed.tol}}},
          {"chunk_chars", chunk_chars},
          {"embedding", embedding.provider == "hash" ? "hash-" + std::to_string(embedding.dimension)
                                                     : "http:" + embedding.model}};
}

std::shared_ptr<const builder::ScholarlySource> make_source(const PipelineConfig& cfg) {
  if (cfg.sources.mode == "fixture") return builder::open_fixture_sources(cfg.sources.fixtures);
  std::vector<std::shared_ptr<const builder::ScholarlySource>> members;
  for (Source s : {Source::scopus, Source::s2, Source::osti}) {
    auto it = cfg.sources.urls.find(to_string(s));
    if (it != cfg.sources.urls.end())
      members.push_back(std::make_shared<builder::HttpSource>(it->second, s, cfg.sources.max_rps));
  }
  return std::make_shared<builder::FederatedSource>(std::move(members));
}

std::unique_ptr<vs::EmbeddingProvider> make_provider(const PipelineConfig& cfg) {
  if (cfg.embedding.provider == "http")
    return std::make_unique<vs::HttpEmbeddingProvider>(cfg.embedding.url, cfg.embedding.model, cfg.embedding.dimension);
  return std::make_unique<vs::HashEmbedder>(cfg.embedding.dimension);
}

std::unique_ptr<llm::LlmClient> make_llm(const PipelineConfig& cfg) {
  if (cfg.llm.provider == "http") return std::make_unique<llm::HttpLlmClient>(cfg.llm.url, cfg.llm.model);
  if (cfg.llm.script.empty()) return std::make_unique<llm::MockLlm>(std::vector<llm::MockRule>{});
  return std::make_unique<llm::MockLlm>(llm::MockLlm::load(cfg.llm.script));
}

// ---- stages --------------------------------------------------------------

Corpus ingest(const PipelineConfig& cfg) {
  auto src = make_source(cfg);
  std::vector<Document> core;
  std::set<std::string> seen;
  for (const auto& line : util::read_lines(cfg.core)) {
    std::string doi = util::trim(line);
    if (doi.empty() || doi[0] == '#') continue;
    doi = canonical_doi(doi);
    if (!seen.insert(doi).second) continue;
    auto rec = src->lookup(doi);
    if (!rec) throw FormatError("core document not found in any source: " + doi);
    std::vector<SourceRecord> one{*rec};
    Document d = merge_source_records(one);
    d.is_core = true;
    core.push_back(std::move(d));
  }
  if (core.empty()) throw ConfigError("core list is empty: " + cfg.core.string());

  Corpus corpus = builder::assemble_corpus(core, *src, cfg.expansion, cfg.cleaning);

  annotate::GazetteerRecognizer ner;
  if (!cfg.ner_gazetteer.empty()) ner = annotate::GazetteerRecognizer::load(cfg.ner_gazetteer);
  std::vector<std::string> terms;
  if (!cfg.sme_terms.empty())
    for (const auto& line : util::read_lines(cfg.sme_terms))
      if (auto t = util::trim(line); !t.empty() && t[0] != '#') terms.push_back(t);
  annotate::annotate_corpus(corpus, ner, terms);
  return corpus;
}

Review review(const Corpus& corpus, const PipelineConfig& cfg) {
  Review rv;
  rv.points = pruning::project_2d(pruning::build_tfidf(corpus));
  int c = std::min<int>(cfg.review_clusters, static_cast<int>(rv.points.size()));
  rv.clusters = pruning::propose_review_clusters(rv.points, std::max(c, 1), cfg.bleed.seed);
  return rv;
}

Corpus prune(const Corpus& corpus, const Review& rv, const std::vector<pruning::PruneDecision>& decisions,
             const PipelineConfig& cfg, const vs::EmbeddingProvider& provider) {
  Corpus reviewed = pruning::apply_decisions(corpus, decisions, rv.clusters);
  auto anchors = pruning::collect_anchors(reviewed, decisions);
  std::map<std::string, std::vector<double>> embeddings;
  for (const auto& d : reviewed.documents()) embeddings[d.doi] = provider.embed(vs::document_text(d));
  auto result = pruning::prune_by_similarity(embeddings, anchors, cfg.tau);
  std::vector<Document> kept;
  for (const auto& d : reviewed.documents())
    if (result.kept.contains(d.doi)) kept.push_back(d);
  Corpus out = reviewed.with_documents(std::move(kept));
  char note[64];
  std::snprintf(note, sizeof note, "tau=%.4g anchors=%zu", cfg.tau, anchors.size());
  out.record("prune", reviewed.size(), out.size(), note);
  return out;
}

Factors factorize(const Corpus& pruned, const PipelineConfig& cfg) {
  auto X = pruning::build_tfidf(pruned);
  Factors f;
  f.doc_keys = X.doc_keys;
  f.selection = factorization::binary_bleed_search(X.values, cfg.bleed);
  if (!f.selection.k_optimal)
    throw DimensionError("no k in [" + std::to_string(cfg.bleed.k_min) + ", " + std::to_string(cfg.bleed.K) +
                         "] scores above T");
  f.pair = factorization::nmf_factorize(X.values, *f.selection.k_optimal, cfg.bleed.seed, cfg.bleed.max_iters,
                                        cfg.bleed.tol);
  f.labels = factorization::assign_clusters(f.pair.H);
  f.topics = factorization::derive_topics(f.pair, X.vocabulary, f.labels);
  return f;
}

Corpus with_topics(const Corpus& corpus, const std::vector<std::string>& doc_keys, const std::vector<int>& labels) {
  std::map<std::string, int> by_doi;
  for (std::size_t i = 0; i < doc_keys.size() && i < labels.size(); ++i) by_doi[doc_keys[i]] = labels[i];
  std::vector<Document> docs = corpus.documents();
  for (auto& d : docs)
    if (auto it = by_doi.find(d.doi); it != by_doi.end()) d.topic_id = it->second;
  return corpus.with_documents(std::move(docs));
}

graph::GraphStore build_graph(const Corpus& corpus, const std::vector<factorization::TopicSummary>& topics) {
  graph::GraphStore g;
  g.merge(graph::emit_triplets(corpus, topics));
  return g;
}

// ---- artifacts -----------------------------------------------------------

json review_json(const Review& rv) {
  json points = json::array();
  for (const auto& p : rv.points) points.push_back({{"doi", p.doi}, {"x", p.x}, {"y", p.y}});
  return {{"points", points}, {"clusters", rv.clusters}};
}

Review review_from_json(const json& j) {
  Review rv;
  try {
    for (const auto& p : j.at("points"))
      rv.points.push_back({p.at("doi").get<std::string>(), p.at("x").get<double>(), p.at("y").get<double>()});
    rv.clusters = j.at("clusters").get<std::vector<pruning::ReviewCluster>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("review.json: ") + e.what());
  }
  return rv;
}

fs::path factors_dir(const fs::path& out) {
  std::vector<fs::path> found;
  if (fs::exists(out))
    for (const auto& e : fs::directory_iterator(out))
      if (e.is_directory() && e.path().filename().string().rfind("factors_k", 0) == 0) found.push_back(e.path());
  if (found.empty()) throw ConfigError("no factors_k<k> directory in " + out.string() + "; run factorize first");
  if (found.size() > 1) throw ConfigError("several factors_k<k> directories in " + out.string());
  return found.front();
}

LoadedTopics load_topics(const fs::path& dir) {
  LoadedTopics lt;
  try {
    auto j = json::parse(util::read_file(dir / "topics.json"));
    lt.topics = j.at("topics").get<std::vector<factorization::TopicSummary>>();
    lt.assignments = j.at("assignments").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw FormatError((dir / "topics.json").string() + ": " + e.what());
  }
  return lt;
}

std::string artifact_hash(const fs::path& path) {
  if (!fs::is_directory(path)) return util::sha256_file(path);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::string listing;
  for (const auto& n : names) listing += n + " " + util::sha256_file(path / n) + "\n";
  return util::sha256_hex(listing);
}

// ---- driver --------------------------------------------------------------

namespace {

void clear_outputs(const fs::path& out) {
  for (const char* f : {files::corpus, files::review, files::pruned, files::graph, files::vectors, files::manifest,
                        files::state})
    fs::remove(out / f);
  if (fs::exists(out))
    for (const auto& e : fs::directory_iterator(out))
      if (e.is_directory() && e.path().filename().string().rfind("factors_k", 0) == 0) fs::remove_all(e.path());
}

}  // namespace

json run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  const fs::path out = cfg.output;
  if (fs::exists(out / files::manifest) && !opts.force)
    throw OutputExists("outputs already exist in " + out.string() + "; pass --force to rebuild");

  // decisions.jsonl survives --force: it is SME input, not a derived artifact.
  clear_outputs(out);
  fs::create_directories(out);

  json manifest{{"config", cfg.fingerprint()}, {"artifacts", json::array()}};
  auto add_artifact = [&](const std::string& name, const fs::path& rel) {
    manifest["artifacts"].push_back({{"name", name}, {"path", rel.generic_string()}, {"sha256", artifact_hash(out / rel)}});
  };
  std::string stage;
  auto provider = make_provider(cfg);
  try {
    stage = "ingest";
    Corpus corpus = ingest(cfg);
    write_corpus(corpus, out / files::corpus);
    add_artifact("corpus", files::corpus);

    stage = "review";
    Review rv = review(corpus, cfg);
    util::write_file(out / files::review, review_json(rv).dump(2) + "\n");
    add_artifact("review", files::review);

    stage = "prune";
    std::vector<pruning::PruneDecision> decisions;
    if (fs::exists(out / files::decisions)) {
      decisions = pruning::decisions_from_jsonl(util::read_file(out / files::decisions));
    } else if (opts.auto_keep) {
      decisions = pruning::auto_keep(rv.clusters);
      util::write_file(out / files::decisions, pruning::decisions_to_jsonl(decisions));
    } else {
      json state{{"state", "awaiting-decisions"}, {"clusters", rv.clusters.size()}, {"corpus_count", corpus.size()}};
      util::write_file(out / files::state, state.dump(2) + "\n");
      throw AwaitingDecisions("submit decisions for " + std::to_string(rv.clusters.size()) +
                              " clusters (POST /review/decisions) or rerun with --auto-keep");
    }
    add_artifact("decisions", files::decisions);
    Corpus pruned = prune(corpus, rv, decisions, cfg, *provider);
    write_corpus(pruned, out / files::pruned);
    add_artifact("pruned", files::pruned);

    stage = "factorize";
    Factors f = factorize(pruned, cfg);
    fs::path fdir = "factors_k" + std::to_string(f.pair.k);
    factorization::write_factors(out / fdir, f.pair, f.selection, f.topics, f.doc_keys, f.labels);
    add_artifact("factors", fdir);

    stage = "graph";
    auto g = build_graph(with_topics(pruned, f.doc_keys, f.labels), f.topics);
    g.save(out / files::graph);
    add_artifact("graph", files::graph);

    stage = "index";
    vs::IndexStats stats;
    auto store = vs::index_documents(pruned, *provider, cfg.chunk_chars, &stats);
    store.save(out / files::vectors);
    add_artifact("vectors", files::vectors);

    manifest["counts"] = {{"corpus", corpus.size()},
                          {"pruned", pruned.size()},
                          {"k", f.pair.k},
                          {"evaluations", f.selection.evaluations()},
                          {"nodes", g.node_count()},
                          {"edges", g.edge_count()},
                          {"vector_records", store.size()},
                          {"chunks", stats.chunks}};
    manifest["provenance"] = pruned.provenance();
  } catch (const AwaitingDecisions&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailed(stage, e.what(), manifest);
  }
  util::write_file(out / files::state, json{{"state", "complete"}}.dump(2) + "\n");
  util::write_file(out / files::manifest, manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace slic::pipeline
