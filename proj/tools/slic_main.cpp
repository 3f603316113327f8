#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "slic/error.hpp"
#include "slic/pipeline.hpp"
#include "slic/service.hpp"
#include "slic/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slic;
using namespace slic::pipeline;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool auto_keep = false;
  bool force = false;
  bool no_retrieval = false;
  std::string question;
};

PipelineConfig load_config(const Options& o) {
  auto cfg = PipelineConfig::load(o.config);
  if (o.seed) cfg.bleed.seed = *o.seed;
  return cfg;
}

void guard(const fs::path& p, const Options& o) {
  if (fs::exists(p) && !o.force) throw OutputExists(p.string() + " exists; pass --force to overwrite");
}

Corpus read_stage_input(const fs::path& p, const char* producer) {
  if (!fs::exists(p)) throw ConfigError(p.string() + " missing; run `slic " + producer + "` first");
  return read_corpus(p);
}

int cmd_ingest(const Options& o) {
  auto cfg = load_config(o);
  guard(cfg.output / files::corpus, o);
  auto corpus = ingest(cfg);
  write_corpus(corpus, cfg.output / files::corpus);
  for (const auto& e : corpus.provenance())
    std::printf("%-8s %zu -> %zu  %s\n", e.stage.c_str(), e.count_before, e.count_after, e.note.c_str());
  std::printf("wrote %s (%zu documents)\n", (cfg.output / files::corpus).c_str(), corpus.size());
  return kExitOk;
}

int cmd_prune(const Options& o) {
  auto cfg = load_config(o);
  guard(cfg.output / files::pruned, o);
  auto corpus = read_stage_input(cfg.output / files::corpus, "ingest");
  auto rv = review(corpus, cfg);
  util::write_file(cfg.output / files::review, review_json(rv).dump(2) + "\n");
  std::vector<pruning::PruneDecision> decisions;
  if (fs::exists(cfg.output / files::decisions)) {
    decisions = pruning::decisions_from_jsonl(util::read_file(cfg.output / files::decisions));
  } else if (o.auto_keep) {
    decisions = pruning::auto_keep(rv.clusters);
    util::write_file(cfg.output / files::decisions, pruning::decisions_to_jsonl(decisions));
  } else {
    json state{{"state", "awaiting-decisions"}, {"clusters", rv.clusters.size()}, {"corpus_count", corpus.size()}};
    util::write_file(cfg.output / files::state, state.dump(2) + "\n");
    throw AwaitingDecisions(std::to_string(rv.clusters.size()) +
                            " clusters await review; submit via POST /review/decisions or pass --auto-keep");
  }
  auto provider = make_provider(cfg);
  auto pruned = prune(corpus, rv, decisions, cfg, *provider);
  write_corpus(pruned, cfg.output / files::pruned);
  std::printf("wrote %s (%zu of %zu documents kept)\n", (cfg.output / files::pruned).c_str(), pruned.size(),
              corpus.size());
  return kExitOk;
}

int cmd_factorize(const Options& o) {
  auto cfg = load_config(o);
  auto pruned = read_stage_input(cfg.output / files::pruned, "prune");
  if (fs::exists(cfg.output)) {
    for (const auto& e : fs::directory_iterator(cfg.output)) {
      if (!e.is_directory() || e.path().filename().string().rfind("factors_k", 0) != 0) continue;
      guard(e.path(), o);
      fs::remove_all(e.path());
    }
  }
  auto f = factorize(pruned, cfg);
  fs::path dir = cfg.output / ("factors_k" + std::to_string(f.pair.k));
  factorization::write_factors(dir, f.pair, f.selection, f.topics, f.doc_keys, f.labels);
  std::printf("k_optimal=%d after %d evaluations (probe order:", f.pair.k, f.selection.evaluations());
  for (int k : f.selection.probe_order) std::printf(" %d", k);
  std::printf(")\n");
  for (const auto& t : f.topics)
    std::printf("  topic %d  %4d docs  %6.2f%%  %s\n", t.topic_id, t.doc_count, t.percent, t.label.c_str());
  std::printf("wrote %s\n", dir.c_str());
  return kExitOk;
}

int cmd_graph(const Options& o) {
  auto cfg = load_config(o);
  guard(cfg.output / files::graph, o);
  auto pruned = read_stage_input(cfg.output / files::pruned, "prune");
  auto lt = load_topics(factors_dir(cfg.output));
  std::vector<std::string> keys;
  std::vector<int> labels;
  for (const auto& [doi, t] : lt.assignments) {
    keys.push_back(doi);
    labels.push_back(t);
  }
  auto g = build_graph(with_topics(pruned, keys, labels), lt.topics);
  g.save(cfg.output / files::graph);
  std::printf("wrote %s (%zu nodes, %zu edges)\n", (cfg.output / files::graph).c_str(), g.node_count(),
              g.edge_count());
  return kExitOk;
}

int cmd_index(const Options& o) {
  auto cfg = load_config(o);
  guard(cfg.output / files::vectors, o);
  auto pruned = read_stage_input(cfg.output / files::pruned, "prune");
  auto provider = make_provider(cfg);
  vs::IndexStats stats;
  auto store = vs::index_documents(pruned, *provider, cfg.chunk_chars, &stats);
  store.save(cfg.output / files::vectors);
  std::printf("wrote %s (%zu documents, %zu chunks)\n", (cfg.output / files::vectors).c_str(), stats.documents,
              stats.chunks);
  return kExitOk;
}

int cmd_ask(const Options& o) {
  auto cfg = load_config(o);
  auto provider = make_provider(cfg);
  auto artifacts = service::load_artifacts(cfg, *provider);
  service::Service svc(std::move(artifacts), std::move(provider), make_llm(cfg), cfg.output);
  rag::System sys = svc.system();
  sys.retrieval = !o.no_retrieval;
  std::cout << rag::answer_json(rag::answer_question(o.question, sys)).dump(2) << "\n";
  return kExitOk;
}

int cmd_serve(const Options& o) {
  auto cfg = load_config(o);
  auto provider = make_provider(cfg);
  auto artifacts = service::load_artifacts(cfg, *provider);
  service::Service svc(std::move(artifacts), std::move(provider), make_llm(cfg), cfg.output);
  std::fprintf(stderr, "listening on http://%s:%d\n", cfg.host.c_str(), cfg.port);
  service::serve(svc, cfg.host, cfg.port);
  return kExitOk;
}

int cmd_run(const Options& o) {
  auto cfg = load_config(o);
  auto manifest = run_pipeline(cfg, {o.auto_keep, o.force});
  std::cout << manifest.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slic: corpus, topic model, knowledge graph and question answering pipeline"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "pipeline config JSON")->required();
    sub->add_option("--seed", seed, "override factorization and review seed");
  };
  std::map<CLI::App*, int (*)(const Options&)> commands;
  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    commands[sub] = fn;
    return sub;
  };
  add("ingest", "assemble, clean and annotate the corpus", cmd_ingest)
      ->add_flag("--force", o.force, "overwrite existing output");
  auto* prune_cmd = add("prune", "project, cluster for review and prune", cmd_prune);
  prune_cmd->add_flag("--auto-keep", o.auto_keep, "keep every cluster without waiting for review");
  prune_cmd->add_flag("--force", o.force, "overwrite existing output");
  add("factorize", "select k and factorize the pruned corpus", cmd_factorize)
      ->add_flag("--force", o.force, "overwrite existing output");
  add("graph", "emit triplets into the knowledge graph", cmd_graph)
      ->add_flag("--force", o.force, "overwrite existing output");
  add("index", "embed documents and paragraphs into the vector store", cmd_index)
      ->add_flag("--force", o.force, "overwrite existing output");
  auto* ask_cmd = add("ask", "answer one question", cmd_ask);
  ask_cmd->add_option("question", o.question, "question text")->required();
  ask_cmd->add_flag("--no-retrieval", o.no_retrieval, "answer from the model alone");
  add("serve", "serve the HTTP API", cmd_serve);
  auto* run_cmd = add("run", "run every stage and write the manifest", cmd_run);
  run_cmd->add_flag("--auto-keep", o.auto_keep, "keep every cluster without waiting for review");
  run_cmd->add_flag("--force", o.force, "rebuild over existing outputs");

  CLI11_PARSE(app, argc, argv);

  for (auto& [sub, fn] : commands) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) o.seed = seed;
    try {
      return fn(o);
    } catch (const ConfigError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    } catch (const OutputExists& e) {
      std::fprintf(stderr, "refused: %s\n", e.what());
      return kExitRefused;
    } catch (const AwaitingDecisions& e) {
      std::fprintf(stderr, "paused: %s\n", e.what());
      return kExitAwaiting;
    } catch (const StageFailed& e) {
      std::fprintf(stderr, "error: %s\npartial manifest:\n%s\n", e.what(), e.partial_manifest().dump(2).c_str());
      return kExitError;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitError;
    }
  }
  return kExitError;
}
