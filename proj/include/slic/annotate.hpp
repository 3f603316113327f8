#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slic/corpus.hpp"

namespace slic::annotate {

class EntityRecognizer {
public:
  virtual ~EntityRecognizer() = default;
  // Entities in order of first occurrence, each surface reported once.
  virtual std::vector<NerEntity> recognize(const std::string& text) const = 0;
};

// Dictionary lookup (case-insensitive, whole words, longest match first)
// plus one heuristic: a run of capitalised words ending in an organisation
// suffix such as "University" or "Laboratory" is an organization.
class GazetteerRecognizer final : public EntityRecognizer {
public:
  GazetteerRecognizer() = default;
  explicit GazetteerRecognizer(std::vector<NerEntity> entries);

  // TSV lines `label<TAB>surface`; `#` comments.
  static GazetteerRecognizer load(const std::filesystem::path& path);

  std::vector<NerEntity> recognize(const std::string& text) const override;

private:
  std::vector<NerEntity> entries_;  // sorted by surface length, longest first
};

// Upper-case tokens of 2 to 8 characters (digits allowed after the first
// letter), e.g. "NMF", "SCADA", "CP-APR" is split as "CP", "APR".
std::vector<std::string> extract_acronyms(const std::string& text);

// Glossary terms that occur as whole words, case-insensitively.
std::vector<std::string> match_terms(const std::string& text, const std::vector<std::string>& terms);

// Unions recognised entities, acronyms and SME glossary terms found in
// title + abstract into each document.
void annotate_corpus(Corpus& corpus, const EntityRecognizer& ner, const std::vector<std::string>& sme_terms);

}  // namespace slic::annotate
