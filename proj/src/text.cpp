#include "slic/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <sstream>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::text {

namespace {

struct PassName {
  Pass pass;
  const char* name;
};

constexpr std::array<PassName, 13> kPassNames{{
    {Pass::sme_substitutions, "sme_substitutions"},
    {Pass::non_english, "non_english"},
    {Pass::stop_phrases, "stop_phrases"},
    {Pass::formulas_emails, "formulas_emails"},
    {Pass::formatting, "formatting"},
    {Pass::html_tags, "html_tags"},
    {Pass::non_ascii, "non_ascii"},
    {Pass::lowercase, "lowercase"},
    {Pass::hyphens, "hyphens"},
    {Pass::stop_words, "stop_words"},
    {Pass::numbers, "numbers"},
    {Pass::short_words, "short_words"},
    {Pass::whitespace, "whitespace"},
}};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// ASCII spellings for U+00C0..U+017F; "" means drop the character.
constexpr std::array<const char*, 192> kLatinFold{{
    // U+00C0
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
    "D", "N", "O", "O", "O", "O", "O", "", "O", "U", "U", "U", "U", "Y", "TH", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",
    // U+0100
    "A", "a", "A", "a", "A", "a", "C", "c", "C", "c", "C", "c", "C", "c", "D", "d",
    "D", "d", "E", "e", "E", "e", "E", "e", "E", "e", "E", "e", "G", "g", "G", "g",
    "G", "g", "G", "g", "H", "h", "H", "h", "I", "i", "I", "i", "I", "i", "I", "i",
    "I", "i", "IJ", "ij", "J", "j", "K", "k", "k", "L", "l", "L", "l", "L", "l", "L",
    "l", "L", "l", "N", "n", "N", "n", "N", "n", "n", "N", "n", "O", "o", "O", "o",
    "O", "o", "OE", "oe", "R", "r", "R", "r", "R", "r", "S", "s", "S", "s", "S", "s",
    "S", "s", "T", "t", "T", "t", "T", "t", "U", "u", "U", "u", "U", "u", "U", "u",
    "U", "u", "U", "u", "W", "w", "Y", "y", "Y", "Z", "z", "Z", "z", "Z", "z", "s",
}};

bool is_dash(char32_t cp) {
  return (cp >= 0x2010 && cp <= 0x2015) || cp == 0x2212 || cp == 0xFE58 || cp == 0xFE63 ||
         cp == 0xFF0D || cp == 0x00AD;
}

// ---- individual passes ---------------------------------------------------

std::string drop_non_english(const std::string& s) {
  std::string out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('\n', start);
    if (end == std::string::npos) end = s.size();
    const std::string_view passage(s.data() + start, end - start);
    std::size_t total = 0, ascii = 0;
    for (char32_t cp : util::utf8_decode(passage)) {
      if (cp < 0x80 && std::isspace(static_cast<int>(cp))) continue;
      ++total;
      if (cp < 0x80 && std::isgraph(static_cast<int>(cp))) ++ascii;
    }
    // A passage is kept when >= 80% of its visible characters are ASCII.
    if (total == 0 || ascii * 5 >= total * 4) out.append(passage);
    if (end == s.size()) break;
    out.push_back('\n');
    start = end + 1;
  }
  return out;
}

void blank_range(std::string& s, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to && i < s.size(); ++i) s[i] = ' ';
}

std::string remove_stop_phrases(std::string s, const std::vector<std::string>& phrases) {
  // Copyright notices run from the marker to the end of their sentence.
  {
    const std::string lower = util::to_lower_ascii(s);
    for (const char* marker : {"\xC2\xA9", "copyright"}) {
      std::size_t pos = 0;
      while ((pos = lower.find(marker, pos)) != std::string::npos) {
        std::size_t end = s.find_first_of(".\n", pos);
        end = end == std::string::npos ? s.size() : end + 1;
        blank_range(s, pos, end);
        pos = end;
      }
    }
  }
  for (const auto& phrase : phrases) {
    if (phrase.empty()) continue;
    const std::string needle = util::to_lower_ascii(phrase);
    std::string lower = util::to_lower_ascii(s);
    std::size_t pos = 0;
    while ((pos = lower.find(needle, pos)) != std::string::npos) {
      blank_range(s, pos, pos + needle.size());
      blank_range(lower, pos, pos + needle.size());
      pos += needle.size();
    }
  }
  return s;
}

std::string remove_formulas_emails(std::string s) {
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    bool drop = false;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) {
      const char c = s[j];
      if (c == '=' || c == '^' || c == '\\' || c == '{' || c == '}' || c == '_' || c == '$' || c == '@') {
        drop = true;
      }
      ++j;
    }
    if (drop) blank_range(s, i, j);
    i = j;
  }
  return s;
}

std::string remove_formatting(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : util::utf8_decode(s)) {
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      if (std::isalnum(static_cast<unsigned char>(c)) || c == ' ' || c == '<' || c == '>' || c == '/' ||
          c == '-') {
        out.push_back(c);
      } else {
        out.push_back(' ');  // newlines, brackets, parentheses, punctuation
      }
    } else if (cp >= 0xC0 && cp < 0x180) {
      const char* fold = kLatinFold[cp - 0xC0];
      out += *fold ? fold : " ";
    } else if (is_dash(cp)) {
      out.push_back('-');
    } else {
      out += util::utf8_encode(std::u32string(1, cp));
    }
  }
  return out;
}

std::string strip_html(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<') {
      const std::size_t close = s.find_first_of("<>", i + 1);
      if (close != std::string::npos && s[close] == '>') {
        out.push_back(' ');
        i = close + 1;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string keep_ascii(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : util::utf8_decode(s)) {
    const bool keep = cp < 0x80 && (std::isalnum(static_cast<int>(cp)) || cp == '-' || cp == ' ');
    out.push_back(keep ? static_cast<char>(cp) : ' ');
  }
  return out;
}

template <typename Pred>
std::string drop_tokens(const std::string& s, Pred drop) {
  std::vector<std::string> kept;
  for (auto& tok : util::split_ws(s)) {
    if (!drop(tok)) kept.push_back(std::move(tok));
  }
  return util::join(kept, " ");
}

bool all_digits(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string apply_pass(Pass p, const std::string& s, const CleaningConfig& cfg) {
  switch (p) {
    case Pass::sme_substitutions: return apply_sme_substitutions(s, cfg.sme_substitutions);
    case Pass::non_english: return drop_non_english(s);
    case Pass::stop_phrases: return remove_stop_phrases(s, cfg.stop_phrases);
    case Pass::formulas_emails: return remove_formulas_emails(s);
    case Pass::formatting: return remove_formatting(s);
    case Pass::html_tags: return strip_html(s);
    case Pass::non_ascii: return keep_ascii(s);
    case Pass::lowercase: return util::to_lower_ascii(s);
    case Pass::hyphens: {
      std::string out = s;
      std::replace(out.begin(), out.end(), '-', ' ');
      return out;
    }
    case Pass::stop_words:
      return drop_tokens(s, [&](const std::string& t) { return cfg.stop_words.contains(util::to_lower_ascii(t)); });
    case Pass::numbers: return drop_tokens(s, all_digits);
    case Pass::short_words:
      return drop_tokens(s, [&](const std::string& t) {
        return static_cast<int>(util::utf8_decode(t).size()) < cfg.min_word_len;
      });
    case Pass::whitespace: return util::join(util::split_ws(s), " ");
  }
  return s;
}

}  // namespace

std::string to_string(Pass p) {
  for (const auto& pn : kPassNames) {
    if (pn.pass == p) return pn.name;
  }
  return "unknown";
}

Pass pass_from_string(const std::string& s) {
  for (const auto& pn : kPassNames) {
    if (s == pn.name) return pn.pass;
  }
  throw ConfigError("unknown cleaning pass '" + s + "'");
}

const std::vector<Pass>& default_passes() {
  static const std::vector<Pass> passes = [] {
    std::vector<Pass> v;
    for (const auto& pn : kPassNames) v.push_back(pn.pass);
    return v;
  }();
  return passes;
}

const std::set<std::string>& default_stop_words() {
  static const std::set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are",
      "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
      "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either", "etc", "few",
      "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herein",
      "him", "his", "how", "however", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may",
      "me", "might", "more", "most", "must", "my", "no", "nor", "not", "now", "of", "off", "on", "once",
      "only", "or", "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so", "some",
      "such", "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they", "this",
      "those", "through", "thus", "to", "too", "under", "until", "up", "upon", "us", "very", "via", "was",
      "we", "were", "what", "when", "where", "whereas", "which", "while", "who", "whom", "whose", "why",
      "will", "with", "within", "without", "would", "yet", "you", "your", "yours", "paper", "study",
      "propose", "proposed", "using", "used", "use", "based", "new", "show", "shows", "shown",
  };
  return words;
}

const std::vector<std::string>& default_stop_phrases() {
  static const std::vector<std::string> phrases = {
      "all rights reserved", "published by elsevier", "this article is protected by copyright",
      "licensee mdpi", "creative commons attribution",
  };
  return phrases;
}

std::string clean_text(const std::string& raw, const CleaningConfig& cfg) {
  if (cfg.min_word_len < 1) throw ConfigError("min_word_len must be >= 1");
  std::string text = raw;
  bool first = true;
  // Later passes can expose material an earlier pass targets (an accented
  // "cöpyright" folds to "copyright"), so the non-substitution passes are
  // re-applied until the text stops changing.
  for (int round = 0; round < 8; ++round) {
    std::string next = text;
    for (Pass p : cfg.enabled_passes) {
      if (p == Pass::sme_substitutions && !first) continue;
      next = apply_pass(p, next, cfg);
    }
    const bool stable = !first && next == text;
    text = std::move(next);
    first = false;
    if (stable) break;
  }
  return text;
}

std::string apply_sme_substitutions(const std::string& text, const std::vector<SubstitutionRule>& rules) {
  struct Compiled {
    std::string core;
    bool left = false;
    bool right = false;
    const std::string* replacement = nullptr;
  };
  std::vector<Compiled> compiled;
  std::map<std::string, std::string> seen;
  for (const auto& r : rules) {
    if (auto it = seen.find(r.pattern); it != seen.end()) {
      if (it->second != r.replacement) throw OverlappingRules("pattern '" + r.pattern + "' has two replacements");
      continue;
    }
    seen.emplace(r.pattern, r.replacement);
    Compiled c;
    c.core = r.pattern;
    if (c.core.starts_with("\\b")) {
      c.left = true;
      c.core.erase(0, 2);
    }
    if (c.core.size() >= 2 && c.core.ends_with("\\b")) {
      c.right = true;
      c.core.erase(c.core.size() - 2);
    }
    c.replacement = &r.replacement;
    if (!c.core.empty()) compiled.push_back(std::move(c));
  }
  if (compiled.empty()) return text;

  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const Compiled* best = nullptr;
    for (const auto& c : compiled) {
      if (text.compare(i, c.core.size(), c.core) != 0) continue;
      if (c.left && i > 0 && is_word_char(text[i - 1])) continue;
      const std::size_t end = i + c.core.size();
      if (c.right && end < text.size() && is_word_char(text[end])) continue;
      if (!best || c.core.size() > best->core.size()) best = &c;
    }
    if (best) {
      out += *best->replacement;
      i += best->core.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

std::vector<SubstitutionRule> parse_sme_rules(const std::string& tsv) {
  std::vector<SubstitutionRule> rules;
  std::istringstream in(tsv);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (util::trim(line).empty() || util::trim(line).starts_with("#")) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("SME rules line " + std::to_string(lineno) + ": missing tab");
    rules.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return rules;
}

std::vector<SubstitutionRule> load_sme_rules(const std::filesystem::path& path) {
  return parse_sme_rules(util::read_file(path));
}

void clean_corpus(Corpus& corpus, const CleaningConfig& cfg) {
  for (auto& d : corpus.mutable_documents()) {
    d.clean_title = clean_text(d.title, cfg);
    d.clean_abstract = clean_text(d.abstract, cfg);
  }
}

std::vector<BigramStat> extract_bigrams(const Corpus& corpus, int top_n) {
  struct Acc {
    int count = 0;
    int docs = 0;
    std::size_t last_doc = static_cast<std::size_t>(-1);
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  const auto& docs = corpus.documents();
  for (std::size_t di = 0; di < docs.size(); ++di) {
    for (const auto* field : {&docs[di].clean_title, &docs[di].clean_abstract}) {
      const auto toks = util::split_ws(*field);
      for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        auto& a = acc[{toks[i], toks[i + 1]}];
        ++a.count;
        if (a.last_doc != di) {
          ++a.docs;
          a.last_doc = di;
        }
      }
    }
  }
  std::vector<BigramStat> out;
  out.reserve(acc.size());
  for (const auto& [terms, a] : acc) out.push_back({terms, a.count, a.docs});
  std::stable_sort(out.begin(), out.end(), [](const BigramStat& x, const BigramStat& y) {
    if (x.count != y.count) return x.count > y.count;
    return x.terms < y.terms;
  });
  if (top_n < 0) top_n = 0;
  if (out.size() > static_cast<std::size_t>(top_n)) out.resize(static_cast<std::size_t>(top_n));
  return out;
}

}  // namespace slic::text
