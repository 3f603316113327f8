#include "slic/builder.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>
#include <map>
#include <set>
#include <thread>

#include "httplib.h"
#include "slic/util.hpp"

namespace slic::builder {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- FixtureSource -------------------------------------------------------

FixtureSource::FixtureSource(fs::path root, Source source)
    : dir_(std::move(root) / to_string(source)), source_(source) {}

namespace {

std::optional<json> read_json_file(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  try {
    return json::parse(util::read_file(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

SourceRecord record_from_json(const json& j, Source fallback) {
  SourceRecord r;
  json copy = j;
  if (!copy.contains("source")) copy["source"] = to_string(fallback);
  try {
    from_json(copy, r);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad source record: ") + e.what());
  }
  return r;
}

std::vector<SourceRecord> records_from_json(const json& j, Source fallback) {
  if (!j.is_array()) throw FormatError("expected a JSON array of records");
  std::vector<SourceRecord> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(record_from_json(item, fallback));
  return out;
}

}  // namespace

std::vector<SourceRecord> FixtureSource::read_list(const char* method, const std::string& key) const {
  auto j = read_json_file(dir_ / method / (util::percent_encode(key) + ".json"));
  if (!j) return {};
  return records_from_json(*j, source_);
}

std::optional<SourceRecord> FixtureSource::lookup(const std::string& doi) const {
  auto j = read_json_file(dir_ / "lookup" / (util::percent_encode(canonical_doi(doi)) + ".json"));
  if (!j) return std::nullopt;
  return record_from_json(*j, source_);
}

std::vector<SourceRecord> FixtureSource::cited_by(const std::string& doi) const {
  return read_list("cited_by", canonical_doi(doi));
}

std::vector<SourceRecord> FixtureSource::references(const std::string& doi) const {
  return read_list("references", canonical_doi(doi));
}

std::vector<SourceRecord> FixtureSource::search(const std::string& query, int limit) const {
  auto out = read_list("search", query);
  if (limit >= 0 && out.size() > static_cast<std::size_t>(limit)) out.resize(limit);
  return out;
}

// ---- FederatedSource -----------------------------------------------------

FederatedSource::FederatedSource(std::vector<std::shared_ptr<const ScholarlySource>> members)
    : members_(std::move(members)) {}

std::optional<SourceRecord> FederatedSource::lookup(const std::string& doi) const {
  for (const auto& m : members_)
    if (auto r = m->lookup(doi)) return r;
  return std::nullopt;
}

std::vector<SourceRecord> FederatedSource::cited_by(const std::string& doi) const {
  std::vector<SourceRecord> out;
  for (const auto& m : members_) {
    auto part = m->cited_by(doi);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<SourceRecord> FederatedSource::references(const std::string& doi) const {
  std::vector<SourceRecord> out;
  for (const auto& m : members_) {
    auto part = m->references(doi);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<SourceRecord> FederatedSource::search(const std::string& query, int limit) const {
  std::vector<SourceRecord> out;
  for (const auto& m : members_) {
    auto part = m->search(query, limit);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::string FederatedSource::name() const {
  std::vector<std::string> names;
  for (const auto& m : members_) names.push_back(m->name());
  return util::join(names, "+");
}

std::shared_ptr<FederatedSource> open_fixture_sources(const fs::path& root) {
  std::vector<std::shared_ptr<const ScholarlySource>> members;
  for (Source s : {Source::scopus, Source::s2, Source::osti}) {
    std::error_code ec;
    if (fs::is_directory(root / to_string(s), ec))
      members.push_back(std::make_shared<FixtureSource>(root, s));
  }
  return std::make_shared<FederatedSource>(std::move(members));
}

// ---- HttpSource ----------------------------------------------------------

HttpSource::HttpSource(std::string base_url, Source source, double max_rps)
    : base_url_(std::move(base_url)), source_(source) {
  if (max_rps <= 0) throw ConfigError("max_rps must be positive");
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  min_interval_ = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / max_rps));
}

std::optional<std::string> HttpSource::get(const std::string& method, const std::string& key) const {
  {
    std::unique_lock lock(mu_);
    auto now = std::chrono::steady_clock::now();
    auto slot = std::max(now, next_slot_);
    next_slot_ = slot + min_interval_;
    lock.unlock();
    std::this_thread::sleep_until(slot);
  }

  // Split "scheme://host[:port][/prefix]".
  auto scheme_end = base_url_.find("://");
  auto path_start = base_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  std::string origin = base_url_.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url_.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  httplib::Headers headers;
  std::string env = "SLIC_" + to_string(source_) + "_TOKEN";
  std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) { return std::toupper(c); });
  if (const char* token = std::getenv(env.c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);

  std::string path = prefix + "/" + method + "/" + util::percent_encode(key) + ".json";
  auto res = client.Get(path, headers);
  if (!res) throw SourceUnavailable(name() + ": " + httplib::to_string(res.error()));
  if (res->status == 404) return std::nullopt;
  if (res->status != 200)
    throw SourceUnavailable(name() + ": HTTP " + std::to_string(res->status) + " for " + path);
  return res->body;
}

std::vector<SourceRecord> HttpSource::get_list(const std::string& method, const std::string& key) const {
  auto body = get(method, key);
  if (!body) return {};
  try {
    return records_from_json(json::parse(*body), source_);
  } catch (const json::exception& e) {
    throw FormatError(name() + ": " + e.what());
  }
}

std::optional<SourceRecord> HttpSource::lookup(const std::string& doi) const {
  auto body = get("lookup", canonical_doi(doi));
  if (!body) return std::nullopt;
  try {
    return record_from_json(json::parse(*body), source_);
  } catch (const json::exception& e) {
    throw FormatError(name() + ": " + e.what());
  }
}

std::vector<SourceRecord> HttpSource::cited_by(const std::string& doi) const {
  return get_list("cited_by", canonical_doi(doi));
}

std::vector<SourceRecord> HttpSource::references(const std::string& doi) const {
  return get_list("references", canonical_doi(doi));
}

std::vector<SourceRecord> HttpSource::search(const std::string& query, int limit) const {
  auto out = get_list("search", query);
  if (limit >= 0 && out.size() > static_cast<std::size_t>(limit)) out.resize(limit);
  return out;
}

// ---- expansion -----------------------------------------------------------

void ExpansionConfig::validate() const {
  if (hops < 0 || hops > 4) throw ConfigError("hops must be in [0, 4], got " + std::to_string(hops));
  if (per_hop_limit < 0) throw ConfigError("per_hop_limit must be >= 0");
  if (bigram_query_count < 0) throw ConfigError("bigram_query_count must be >= 0");
  if (bigram_result_limit < 0) throw ConfigError("bigram_result_limit must be >= 0");
  if (max_parallel_fetches < 1) throw ConfigError("max_parallel_fetches must be >= 1");
}

namespace {

// Records grouped by identity, in order of first appearance.
class IdentityGroups {
public:
  void add(SourceRecord r) {
    auto key = identity_key(r);
    auto [it, inserted] = index_.try_emplace(key, groups_.size());
    if (inserted) groups_.push_back({key, {}});
    auto& recs = groups_[it->second].second;
    if (std::find(recs.begin(), recs.end(), r) == recs.end()) recs.push_back(std::move(r));
  }

  const std::vector<std::pair<std::string, std::vector<SourceRecord>>>& groups() const { return groups_; }

private:
  std::map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, std::vector<SourceRecord>>> groups_;
};

struct Neighbourhood {
  std::vector<SourceRecord> records;
};

Neighbourhood fetch_neighbourhood(const Document& doc, const ScholarlySource& src) {
  Neighbourhood n;
  n.records = src.cited_by(doc.doi);
  auto refs = src.references(doc.doi);
  n.records.insert(n.records.end(), refs.begin(), refs.end());

  // Listed links the source did not return as records are looked up directly.
  std::set<std::string> seen;
  for (const auto& r : n.records) seen.insert(identity_key(r));
  for (const auto* list : {&doc.citations, &doc.references}) {
    for (const auto& d : *list) {
      auto key = canonical_doi(d);
      if (key.empty() || key.starts_with("src:") || key == doc.doi || !seen.insert(key).second) continue;
      if (auto r = src.lookup(key)) n.records.push_back(std::move(*r));
    }
  }
  return n;
}

}  // namespace

Corpus expand_citations(const std::vector<Document>& core, const ScholarlySource& src,
                        const ExpansionConfig& cfg) {
  cfg.validate();
  if (core.empty()) throw ConfigError("expand_citations: core is empty");

  Corpus corpus;
  std::set<std::string> visited;
  std::vector<std::size_t> frontier;
  for (auto doc : core) {
    doc.doi = canonical_doi(doc.doi);
    doc.is_core = true;
    if (!visited.insert(doc.doi).second) continue;
    frontier.push_back(corpus.size());
    corpus.add(std::move(doc));
  }

  for (int hop = 1; hop <= cfg.hops && !frontier.empty(); ++hop) {
    std::vector<Neighbourhood> fetched(frontier.size());
    try {
      for (std::size_t start = 0; start < frontier.size(); start += cfg.max_parallel_fetches) {
        std::size_t stop = std::min(frontier.size(), start + cfg.max_parallel_fetches);
        std::vector<std::future<Neighbourhood>> jobs;
        for (std::size_t i = start; i < stop; ++i) {
          const Document& doc = corpus.documents()[frontier[i]];
          jobs.push_back(std::async(std::launch::async, fetch_neighbourhood, std::cref(doc), std::cref(src)));
        }
        for (std::size_t i = start; i < stop; ++i) fetched[i] = jobs[i - start].get();
      }
    } catch (const SourceUnavailable& e) {
      throw SourceUnavailable(std::string(e.what()) + " (during hop " + std::to_string(hop) + ")", corpus);
    }

    IdentityGroups groups;
    for (auto& n : fetched)
      for (auto& r : n.records)
        if (!visited.contains(identity_key(r))) groups.add(std::move(r));

    std::vector<std::size_t> next;
    std::size_t taken = 0;
    for (const auto& [key, recs] : groups.groups()) {
      if (cfg.per_hop_limit > 0 && taken == static_cast<std::size_t>(cfg.per_hop_limit)) break;
      Document doc = merge_source_records(recs);
      doc.is_core = false;
      visited.insert(key);
      next.push_back(corpus.size());
      corpus.add(std::move(doc));
      ++taken;
    }
    frontier = std::move(next);
  }

  corpus.record("expand", core.size(), corpus.size(),
                "hops=" + std::to_string(cfg.hops) + " source=" + src.name());
  return corpus;
}

namespace {

std::vector<std::string> bigram_queries(const std::vector<Document>& core, int count) {
  if (count <= 0) return {};
  Corpus cleaned;
  for (auto doc : core) {
    if (doc.clean_title.empty() && doc.clean_abstract.empty()) {
      doc.clean_title = text::clean_text(doc.title);
      doc.clean_abstract = text::clean_text(doc.abstract);
    }
    cleaned.add(std::move(doc));
  }
  std::vector<std::string> out;
  for (const auto& b : text::extract_bigrams(cleaned, count))
    out.push_back("\"" + b.terms.first + " " + b.terms.second + "\"");
  return out;
}

std::vector<Document> run_searches(const std::vector<std::string>& queries, const std::vector<Document>& core,
                                   const ScholarlySource& src, const ExpansionConfig& cfg,
                                   const Corpus& existing) {
  std::set<std::string> known;
  for (const auto& d : existing.documents()) known.insert(canonical_doi(d.doi));
  for (const auto& d : core) known.insert(canonical_doi(d.doi));

  IdentityGroups groups;
  for (const auto& q : queries)
    for (auto& r : src.search(q, cfg.bigram_result_limit))
      if (!known.contains(identity_key(r))) groups.add(std::move(r));

  std::vector<Document> out;
  for (const auto& [key, recs] : groups.groups()) {
    Document doc = merge_source_records(recs);
    doc.is_core = false;
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace

std::vector<Document> search_by_bigrams(const std::vector<Document>& core, const ScholarlySource& src,
                                        const ExpansionConfig& cfg, const Corpus& existing) {
  cfg.validate();
  return run_searches(bigram_queries(core, cfg.bigram_query_count), core, src, cfg, existing);
}

Corpus assemble_corpus(const std::vector<Document>& core, const ScholarlySource& src,
                       const ExpansionConfig& cfg, const text::CleaningConfig& cleaning) {
  Corpus corpus = expand_citations(core, src, cfg);

  std::vector<Document> cleaned_core;
  for (auto doc : core) {
    doc.clean_title = text::clean_text(doc.title, cleaning);
    doc.clean_abstract = text::clean_text(doc.abstract, cleaning);
    cleaned_core.push_back(std::move(doc));
  }
  auto queries = bigram_queries(cleaned_core, cfg.bigram_query_count);
  std::size_t before = corpus.size();
  try {
    for (auto& doc : run_searches(queries, cleaned_core, src, cfg, corpus)) corpus.add(std::move(doc));
  } catch (const SourceUnavailable& e) {
    throw SourceUnavailable(std::string(e.what()) + " (during bigram search)", corpus);
  }
  corpus.record("search", before, corpus.size(), "queries=" + util::join(queries, ", "));

  text::clean_corpus(corpus, cleaning);
  corpus.record("clean", corpus.size(), corpus.size(), "fields=title,abstract");
  return corpus;
}

}  // namespace slic::builder
