#include "slic/corpus.hpp"

#include <algorithm>
#include <sstream>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic {

using nlohmann::json;

std::string to_string(Source s) {
  switch (s) {
    case Source::osti: return "osti";
    case Source::scopus: return "scopus";
    case Source::s2: return "s2";
  }
  return "unknown";
}

Source source_from_string(const std::string& s) {
  if (s == "osti") return Source::osti;
  if (s == "scopus") return Source::scopus;
  if (s == "s2") return Source::s2;
  throw FormatError("unknown source '" + s + "'");
}

int source_rank(Source s) {
  switch (s) {
    case Source::scopus: return 0;
    case Source::s2: return 1;
    case Source::osti: return 2;
  }
  return 3;
}

std::string to_string(NerLabel l) {
  switch (l) {
    case NerLabel::event: return "event";
    case NerLabel::person: return "person";
    case NerLabel::location: return "location";
    case NerLabel::product: return "product";
    case NerLabel::organization: return "organization";
    case NerLabel::geopolitical_entity: return "geopolitical_entity";
  }
  return "organization";
}

NerLabel ner_label_from_string(const std::string& s) {
  if (s == "event") return NerLabel::event;
  if (s == "person") return NerLabel::person;
  if (s == "location") return NerLabel::location;
  if (s == "product") return NerLabel::product;
  if (s == "organization") return NerLabel::organization;
  if (s == "geopolitical_entity") return NerLabel::geopolitical_entity;
  throw FormatError("unknown NER label '" + s + "'");
}

// ---- Corpus --------------------------------------------------------------

Corpus::Corpus(std::vector<Document> docs) {
  for (auto& d : docs) add(std::move(d));
}

const Document* Corpus::find(const std::string& doi) const {
  auto it = index_.find(doi);
  return it == index_.end() ? nullptr : &documents_[it->second];
}

bool Corpus::add(Document doc) {
  if (index_.contains(doc.doi)) return false;
  index_.emplace(doc.doi, documents_.size());
  documents_.push_back(std::move(doc));
  return true;
}

Corpus Corpus::with_documents(std::vector<Document> docs) const {
  Corpus out(std::move(docs));
  out.vocabulary_ = vocabulary_;
  out.provenance_ = provenance_;
  return out;
}

void Corpus::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < documents_.size(); ++i) index_.emplace(documents_[i].doi, i);
}

void Corpus::record(std::string stage, std::size_t before, std::size_t after, std::string note) {
  PipelineEvent e;
  e.stage = std::move(stage);
  e.timestamp = static_cast<std::int64_t>(provenance_.size());
  e.count_before = before;
  e.count_after = after;
  e.note = std::move(note);
  provenance_.push_back(std::move(e));
}

// ---- identity & merge ----------------------------------------------------

std::string canonical_doi(const std::string& doi) {
  std::string d = util::to_lower_ascii(util::trim(doi));
  for (const char* prefix : {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
                             "http://dx.doi.org/", "doi:"}) {
    if (d.starts_with(prefix)) {
      d.erase(0, std::string_view(prefix).size());
      break;
    }
  }
  return d;
}

std::string identity_key(const SourceRecord& r) {
  if (r.doi && !util::trim(*r.doi).empty()) return canonical_doi(*r.doi);
  return "src:" + to_string(r.source) + ":" + r.source_id;
}

namespace {

template <typename T>
void append_unique(std::vector<T>& out, const T& value) {
  if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
}

void merge_author(std::vector<Author>& out, const Author& a) {
  for (auto& existing : out) {
    if (existing.name == a.name) {
      if (!existing.affiliation && a.affiliation) existing.affiliation = a.affiliation;
      if (!existing.country && a.country) existing.country = a.country;
      return;
    }
  }
  out.push_back(a);
}

bool present(const std::optional<std::string>& s) { return s && !util::trim(*s).empty(); }

}  // namespace

Document merge_source_records(std::span<const SourceRecord> records) {
  if (records.empty()) throw IdentityMismatch("no records to merge");

  std::vector<SourceRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const SourceRecord& a, const SourceRecord& b) {
    if (source_rank(a.source) != source_rank(b.source)) return source_rank(a.source) < source_rank(b.source);
    return a.source_id < b.source_id;
  });

  std::optional<std::string> doi;
  for (const auto& r : sorted) {
    if (!present(r.doi)) continue;
    const std::string d = canonical_doi(*r.doi);
    if (doi && *doi != d) throw IdentityMismatch("records carry distinct DOIs '" + *doi + "' and '" + d + "'");
    doi = d;
  }

  Document doc;
  doc.doi = doi ? *doi : identity_key(sorted.front());
  for (const auto& r : sorted) {
    if (doc.title.empty() && present(r.title)) doc.title = *r.title;
    if (doc.abstract.empty() && present(r.abstract)) doc.abstract = *r.abstract;
    if (!doc.year && r.year) doc.year = r.year;
    if (!doc.publisher && present(r.publisher)) doc.publisher = r.publisher;
    if (!doc.full_text && present(r.full_text)) doc.full_text = r.full_text;
    doc.source_ids.try_emplace(r.source, r.source_id);
    for (const auto& a : r.authors) merge_author(doc.authors, a);
    for (const auto& c : r.categories) append_unique(doc.categories, c);
    for (const auto& c : r.citations) {
      const std::string key = canonical_doi(c);
      if (key != doc.doi) append_unique(doc.citations, key);
    }
    for (const auto& c : r.references) {
      const std::string key = canonical_doi(c);
      if (key != doc.doi) append_unique(doc.references, key);
    }
  }
  for (const auto& a : doc.authors) {
    if (a.affiliation) append_unique(doc.affiliations, *a.affiliation);
    if (a.country) append_unique(doc.affiliation_countries, *a.country);
  }
  return doc;
}

SourceRecord as_record(const Document& doc, Source source) {
  SourceRecord r;
  r.source = source;
  auto it = doc.source_ids.find(source);
  r.source_id = it != doc.source_ids.end() ? it->second : doc.doi;
  if (!doc.doi.starts_with("src:")) r.doi = doc.doi;
  if (!doc.title.empty()) r.title = doc.title;
  if (!doc.abstract.empty()) r.abstract = doc.abstract;
  r.authors = doc.authors;
  r.year = doc.year;
  r.publisher = doc.publisher;
  r.categories = doc.categories;
  r.citations = doc.citations;
  r.references = doc.references;
  r.full_text = doc.full_text;
  return r;
}

ValidationReport validate_document(const Document& doc) {
  ValidationReport report;
  if (util::trim(doc.doi).empty()) report.push_back({"doi", "required"});
  if (util::trim(doc.title).empty() && util::trim(doc.abstract).empty()) {
    report.push_back({"title", "title+abstract non-empty"});
  }
  if (doc.year && (*doc.year < 1800 || *doc.year > 2100)) report.push_back({"year", "year range"});
  auto check_list = [&](const std::vector<std::string>& list, const char* field) {
    std::set<std::string> seen;
    bool self = false, dup = false;
    for (const auto& x : list) {
      if (x == doc.doi) self = true;
      if (!seen.insert(x).second) dup = true;
    }
    if (self) report.push_back({field, "self-citation"});
    if (dup) report.push_back({field, "duplicate entry"});
  };
  check_list(doc.citations, "citations");
  check_list(doc.references, "references");
  for (const auto& a : doc.authors) {
    if (util::trim(a.name).empty()) {
      report.push_back({"authors", "empty name"});
      break;
    }
  }
  return report;
}

LinkReport classify_links(const Corpus& corpus) {
  LinkReport out;
  for (const auto& d : corpus.documents()) {
    for (const auto* list : {&d.citations, &d.references}) {
      for (const auto& x : *list) {
        if (x != d.doi && corpus.contains(x)) {
          out.internal.insert(x);
        } else {
          out.external.insert(x);
        }
      }
    }
  }
  return out;
}

// ---- JSON ----------------------------------------------------------------

namespace {

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
void get_opt(const json& j, const char* key, std::optional<T>& v) {
  auto it = j.find(key);
  if (it != j.end() && !it->is_null()) v = it->template get<T>();
}

template <typename T>
void get_or(const json& j, const char* key, T& v) {
  auto it = j.find(key);
  if (it != j.end() && !it->is_null()) v = it->template get<T>();
}

}  // namespace

void to_json(json& j, const Author& a) {
  j = json{{"name", a.name}};
  put_opt(j, "affiliation", a.affiliation);
  put_opt(j, "country", a.country);
}

void from_json(const json& j, Author& a) {
  a = Author{};
  if (j.is_string()) {
    a.name = j.get<std::string>();
    return;
  }
  get_or(j, "name", a.name);
  get_opt(j, "affiliation", a.affiliation);
  get_opt(j, "country", a.country);
}

void to_json(json& j, const SourceRecord& r) {
  j = json{{"source", to_string(r.source)},
           {"source_id", r.source_id},
           {"authors", r.authors},
           {"categories", r.categories},
           {"citations", r.citations},
           {"references", r.references}};
  put_opt(j, "doi", r.doi);
  put_opt(j, "title", r.title);
  put_opt(j, "abstract", r.abstract);
  put_opt(j, "year", r.year);
  put_opt(j, "publisher", r.publisher);
  put_opt(j, "full_text", r.full_text);
}

void from_json(const json& j, SourceRecord& r) {
  r = SourceRecord{};
  if (j.contains("source")) r.source = source_from_string(j.at("source").get<std::string>());
  get_or(j, "source_id", r.source_id);
  get_opt(j, "doi", r.doi);
  get_opt(j, "title", r.title);
  get_opt(j, "abstract", r.abstract);
  get_or(j, "authors", r.authors);
  get_opt(j, "year", r.year);
  get_opt(j, "publisher", r.publisher);
  get_or(j, "categories", r.categories);
  get_or(j, "citations", r.citations);
  get_or(j, "references", r.references);
  get_opt(j, "full_text", r.full_text);
}

void to_json(json& j, const Document& d) {
  json ner = json::array();
  for (const auto& e : d.ner_entities) ner.push_back({{"label", to_string(e.label)}, {"text", e.text}});
  json ids = json::object();
  for (const auto& [s, id] : d.source_ids) ids[to_string(s)] = id;
  j = json{{"doi", d.doi},
           {"title", d.title},
           {"abstract", d.abstract},
           {"authors", d.authors},
           {"categories", d.categories},
           {"affiliations", d.affiliations},
           {"affiliation_countries", d.affiliation_countries},
           {"acronyms", d.acronyms},
           {"sme_keywords", d.sme_keywords},
           {"ner_entities", ner},
           {"source_ids", ids},
           {"citations", d.citations},
           {"references", d.references},
           {"is_core", d.is_core},
           {"clean_title", d.clean_title},
           {"clean_abstract", d.clean_abstract}};
  put_opt(j, "year", d.year);
  put_opt(j, "publisher", d.publisher);
  put_opt(j, "topic_id", d.topic_id);
  put_opt(j, "full_text", d.full_text);
}

void from_json(const json& j, Document& d) {
  d = Document{};
  j.at("doi").get_to(d.doi);
  get_or(j, "title", d.title);
  get_or(j, "abstract", d.abstract);
  get_or(j, "authors", d.authors);
  get_opt(j, "year", d.year);
  get_opt(j, "publisher", d.publisher);
  get_or(j, "categories", d.categories);
  get_or(j, "affiliations", d.affiliations);
  get_or(j, "affiliation_countries", d.affiliation_countries);
  get_or(j, "acronyms", d.acronyms);
  get_or(j, "sme_keywords", d.sme_keywords);
  if (auto it = j.find("ner_entities"); it != j.end()) {
    for (const auto& e : *it) {
      d.ner_entities.push_back({ner_label_from_string(e.at("label").get<std::string>()),
                                e.at("text").get<std::string>()});
    }
  }
  if (auto it = j.find("source_ids"); it != j.end()) {
    for (const auto& [k, v] : it->items()) d.source_ids[source_from_string(k)] = v.get<std::string>();
  }
  get_or(j, "citations", d.citations);
  get_or(j, "references", d.references);
  get_or(j, "is_core", d.is_core);
  get_opt(j, "topic_id", d.topic_id);
  get_opt(j, "full_text", d.full_text);
  get_or(j, "clean_title", d.clean_title);
  get_or(j, "clean_abstract", d.clean_abstract);
}

void to_json(json& j, const PipelineEvent& e) {
  j = json{{"stage", e.stage},
           {"timestamp", e.timestamp},
           {"count_before", e.count_before},
           {"count_after", e.count_after},
           {"note", e.note}};
}

void from_json(const json& j, PipelineEvent& e) {
  j.at("stage").get_to(e.stage);
  get_or(j, "timestamp", e.timestamp);
  get_or(j, "count_before", e.count_before);
  get_or(j, "count_after", e.count_after);
  get_or(j, "note", e.note);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    out += json(d).dump();
    out += '\n';
  }
  return out;
}

Corpus corpus_from_jsonl(const std::string& text) {
  Corpus corpus;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      if (!corpus.add(json::parse(line).get<Document>()))
        throw FormatError("corpus line " + std::to_string(lineno) + ": duplicate doi");
    } catch (const json::exception& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  util::write_file(path, corpus_to_jsonl(corpus));
}

Corpus read_corpus(const std::filesystem::path& path) { return corpus_from_jsonl(util::read_file(path)); }

}  // namespace slic
