#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "slic/corpus.hpp"

namespace slic::text {

// Cleaning passes, listed in their default order.
enum class Pass {
  sme_substitutions,
  non_english,
  stop_phrases,
  formulas_emails,
  formatting,
  html_tags,
  non_ascii,
  lowercase,
  hyphens,
  stop_words,
  numbers,
  short_words,
  whitespace,
};

std::string to_string(Pass p);
Pass pass_from_string(const std::string& s);
const std::vector<Pass>& default_passes();

struct SubstitutionRule {
  // Literal text; a leading and/or trailing "\b" anchors that side to a word
  // boundary.
  std::string pattern;
  std::string replacement;
};

const std::set<std::string>& default_stop_words();
const std::vector<std::string>& default_stop_phrases();

struct CleaningConfig {
  std::vector<Pass> enabled_passes = default_passes();
  std::vector<SubstitutionRule> sme_substitutions;
  std::set<std::string> stop_words = default_stop_words();
  std::vector<std::string> stop_phrases = default_stop_phrases();
  int min_word_len = 3;
};

std::string clean_text(const std::string& raw, const CleaningConfig& cfg = {});

// Single left-to-right pass; at each position the longest matching pattern
// wins, ties going to the earlier rule. Replaced text is not rescanned.
std::string apply_sme_substitutions(const std::string& text, const std::vector<SubstitutionRule>& rules);

// Reads `pattern<TAB>replacement` lines; blank lines and `#` comments skipped.
std::vector<SubstitutionRule> load_sme_rules(const std::filesystem::path& path);
std::vector<SubstitutionRule> parse_sme_rules(const std::string& tsv);

// Fills clean_title / clean_abstract for every document.
void clean_corpus(Corpus& corpus, const CleaningConfig& cfg = {});

struct BigramStat {
  std::pair<std::string, std::string> terms;
  int count = 0;
  int doc_frequency = 0;

  bool operator==(const BigramStat&) const = default;
};

// Counts adjacent token pairs inside each cleaned field (title, abstract);
// pairs never span two fields. Ordered by count desc, then terms ascending.
std::vector<BigramStat> extract_bigrams(const Corpus& corpus, int top_n);

}  // namespace slic::text
