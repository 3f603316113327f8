#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace slic {

enum class Source { osti, scopus, s2 };

std::string to_string(Source s);
Source source_from_string(const std::string& s);
// Scalar-conflict precedence, lower wins: scopus, s2, osti.
int source_rank(Source s);

struct Author {
  std::string name;
  std::optional<std::string> affiliation;
  std::optional<std::string> country;

  bool operator==(const Author&) const = default;
};

// One publication record as returned by a single scholarly API.
struct SourceRecord {
  Source source = Source::scopus;
  std::string source_id;
  std::optional<std::string> doi;
  std::optional<std::string> title;
  std::optional<std::string> abstract;
  std::vector<Author> authors;
  std::optional<int> year;
  std::optional<std::string> publisher;
  std::vector<std::string> categories;
  std::vector<std::string> citations;   // works citing this record
  std::vector<std::string> references;  // works this record cites
  std::optional<std::string> full_text;

  bool operator==(const SourceRecord&) const = default;
};

enum class NerLabel { event, person, location, product, organization, geopolitical_entity };

std::string to_string(NerLabel l);
NerLabel ner_label_from_string(const std::string& s);

struct NerEntity {
  NerLabel label = NerLabel::organization;
  std::string text;

  bool operator==(const NerEntity&) const = default;
  auto operator<=>(const NerEntity&) const = default;
};

struct Document {
  std::string doi;
  std::string title;
  std::string abstract;
  std::vector<Author> authors;
  std::optional<int> year;
  std::optional<std::string> publisher;
  std::vector<std::string> categories;
  std::vector<std::string> affiliations;
  std::vector<std::string> affiliation_countries;
  std::vector<std::string> acronyms;
  std::vector<std::string> sme_keywords;
  std::vector<NerEntity> ner_entities;
  std::map<Source, std::string> source_ids;
  std::vector<std::string> citations;
  std::vector<std::string> references;
  bool is_core = false;
  std::optional<int> topic_id;
  std::optional<std::string> full_text;
  // Cleaned copies of title/abstract; the originals stay intact for display,
  // graph properties and exact-match answers.
  std::string clean_title;
  std::string clean_abstract;

  bool operator==(const Document&) const = default;
};

struct PipelineEvent {
  std::string stage;
  std::int64_t timestamp = 0;  // logical clock: index within provenance
  std::size_t count_before = 0;
  std::size_t count_after = 0;
  std::string note;

  bool operator==(const PipelineEvent&) const = default;
};

class Corpus {
public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> docs);

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::vector<Document>& mutable_documents() noexcept { return documents_; }
  const std::vector<PipelineEvent>& provenance() const noexcept { return provenance_; }
  const std::optional<std::vector<std::string>>& vocabulary() const noexcept { return vocabulary_; }
  void set_vocabulary(std::vector<std::string> v) { vocabulary_ = std::move(v); }

  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const Document* find(const std::string& doi) const;
  bool contains(const std::string& doi) const { return find(doi) != nullptr; }

  // Appends a document; a DOI already present is rejected.
  bool add(Document doc);
  // Same vocabulary and provenance, different documents.
  Corpus with_documents(std::vector<Document> docs) const;
  void rebuild_index();
  void record(std::string stage, std::size_t before, std::size_t after, std::string note = {});

private:
  std::vector<Document> documents_;
  std::optional<std::vector<std::string>> vocabulary_;
  std::vector<PipelineEvent> provenance_;
  std::map<std::string, std::size_t> index_;
};

// Lowercased, trimmed DOI with any resolver prefix removed.
std::string canonical_doi(const std::string& doi);
// Identity key used for merging: the canonical DOI, else "src:<source>:<id>".
std::string identity_key(const SourceRecord& r);

// Unifies records describing one publication. Scalars follow source
// precedence (scopus > s2 > osti); list fields are unioned in precedence
// order. Throws IdentityMismatch when two distinct DOIs are present.
Document merge_source_records(std::span<const SourceRecord> records);

// Re-wraps a document as a record of the given source, carrying every field
// a record can hold.
SourceRecord as_record(const Document& doc, Source source);

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};
using ValidationReport = std::vector<Violation>;

ValidationReport validate_document(const Document& doc);

struct LinkReport {
  std::set<std::string> internal;  // DOIs resolving to another corpus document
  std::set<std::string> external;
};
LinkReport classify_links(const Corpus& corpus);

// ---- serialization -------------------------------------------------------

void to_json(nlohmann::json& j, const Author& a);
void from_json(const nlohmann::json& j, Author& a);
void to_json(nlohmann::json& j, const SourceRecord& r);
void from_json(const nlohmann::json& j, SourceRecord& r);
void to_json(nlohmann::json& j, const Document& d);
void from_json(const nlohmann::json& j, Document& d);
void to_json(nlohmann::json& j, const PipelineEvent& e);
void from_json(const nlohmann::json& j, PipelineEvent& e);

std::string corpus_to_jsonl(const Corpus& corpus);
Corpus corpus_from_jsonl(const std::string& text);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

}  // namespace slic
