#include "slic/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::annotate {

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// Whole-word, case-insensitive occurrence positions of `needle` in `hay`.
std::size_t find_word(const std::string& lower_hay, const std::string& lower_needle, std::size_t from) {
  if (lower_needle.empty()) return std::string::npos;
  for (std::size_t pos = lower_hay.find(lower_needle, from); pos != std::string::npos;
       pos = lower_hay.find(lower_needle, pos + 1)) {
    bool left = pos == 0 || !word_char(lower_hay[pos - 1]);
    std::size_t end = pos + lower_needle.size();
    bool right = end >= lower_hay.size() || !word_char(lower_hay[end]);
    if (left && right) return pos;
  }
  return std::string::npos;
}

const std::set<std::string>& org_suffixes() {
  static const std::set<std::string> s = {"University", "Laboratory", "Laboratories", "Institute", "Agency",
                                          "Corporation", "Inc",        "Center",       "Centre",    "College",
                                          "Foundation", "Company",     "Department",   "Council"};
  return s;
}

}  // namespace

GazetteerRecognizer::GazetteerRecognizer(std::vector<NerEntity> entries) : entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const NerEntity& a, const NerEntity& b) { return a.text.size() > b.text.size(); });
}

GazetteerRecognizer GazetteerRecognizer::load(const std::filesystem::path& path) {
  std::vector<NerEntity> entries;
  int lineno = 0;
  for (const auto& raw : util::read_lines(path)) {
    ++lineno;
    std::string line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto tab = raw.find('\t');
    if (tab == std::string::npos) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing tab");
    try {
      entries.push_back({ner_label_from_string(util::trim(raw.substr(0, tab))), util::trim(raw.substr(tab + 1))});
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return GazetteerRecognizer(std::move(entries));
}

std::vector<NerEntity> GazetteerRecognizer::recognize(const std::string& text) const {
  std::string lower = util::to_lower_ascii(text);
  std::vector<bool> taken(text.size(), false);
  std::vector<std::pair<std::size_t, NerEntity>> found;

  for (const auto& e : entries_) {
    std::string needle = util::to_lower_ascii(e.text);
    for (std::size_t pos = find_word(lower, needle, 0); pos != std::string::npos;
         pos = find_word(lower, needle, pos + 1)) {
      if (std::any_of(taken.begin() + pos, taken.begin() + pos + needle.size(), [](bool b) { return b; })) continue;
      std::fill(taken.begin() + pos, taken.begin() + pos + needle.size(), true);
      found.emplace_back(pos, e);
    }
  }

  // Runs of capitalised words (joined by single spaces, "of"/"for"/"and"
  // allowed inside) that contain an organisation suffix.
  std::vector<std::pair<std::size_t, std::size_t>> words;  // [begin, end)
  for (std::size_t i = 0; i < text.size();) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    words.emplace_back(i, j);
    i = j;
  }
  auto word = [&](std::size_t w) { return text.substr(words[w].first, words[w].second - words[w].first); };
  auto capital = [&](std::size_t w) { return std::isupper(static_cast<unsigned char>(text[words[w].first])) != 0; };
  auto joined = [&](std::size_t w) { return words[w].second + 1 == words[w + 1].first && text[words[w].second] == ' '; };
  auto connector = [&](std::size_t w) {
    auto x = word(w);
    return x == "of" || x == "for" || x == "and";
  };
  for (std::size_t w = 0; w < words.size();) {
    if (!capital(w)) {
      ++w;
      continue;
    }
    std::size_t last = w;
    bool org = org_suffixes().contains(word(w));
    for (std::size_t k = w; k + 1 < words.size() && joined(k);) {
      if (capital(k + 1)) {
        last = ++k;
      } else if (connector(k + 1) && k + 2 < words.size() && joined(k + 1) && capital(k + 2)) {
        last = k += 2;
      } else {
        break;
      }
      org = org || org_suffixes().contains(word(last));
    }
    if (org && last > w) {
      std::size_t b = words[w].first, e = words[last].second;
      if (std::none_of(taken.begin() + b, taken.begin() + e, [](bool t) { return t; })) {
        std::fill(taken.begin() + b, taken.begin() + e, true);
        found.emplace_back(b, NerEntity{NerLabel::organization, text.substr(b, e - b)});
      }
    }
    w = last + 1;
  }

  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<NerEntity> out;
  std::set<std::pair<NerLabel, std::string>> seen;
  for (auto& [pos, e] : found) {
    // Report the surface as written in the text.
    NerEntity ent{e.label, text.substr(pos, e.text.size())};
    if (seen.emplace(ent.label, util::canonical_surface(ent.text)).second) out.push_back(std::move(ent));
  }
  return out;
}

std::vector<std::string> extract_acronyms(const std::string& text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < text.size();) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    std::string tok = text.substr(i, j - i);
    bool shape = tok.size() >= 2 && tok.size() <= 8 && std::isupper(static_cast<unsigned char>(tok[0])) &&
                 std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isupper(c) || std::isdigit(c); }) &&
                 std::count_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isupper(c); }) >= 2;
    if (shape && seen.insert(tok).second) out.push_back(tok);
    i = j;
  }
  return out;
}

std::vector<std::string> match_terms(const std::string& text, const std::vector<std::string>& terms) {
  std::string lower = util::to_lower_ascii(text);
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : terms) {
    std::string needle = util::canonical_surface(t);
    if (needle.empty() || seen.contains(needle)) continue;
    if (find_word(lower, needle, 0) != std::string::npos) {
      seen.insert(needle);
      out.push_back(t);
    }
  }
  return out;
}

void annotate_corpus(Corpus& corpus, const EntityRecognizer& ner, const std::vector<std::string>& sme_terms) {
  auto union_into = [](auto& dst, const auto& src) {
    for (const auto& x : src)
      if (std::find(dst.begin(), dst.end(), x) == dst.end()) dst.push_back(x);
  };
  for (auto& d : corpus.mutable_documents()) {
    std::string text = d.title + "\n" + d.abstract;
    union_into(d.ner_entities, ner.recognize(text));
    union_into(d.acronyms, extract_acronyms(text));
    union_into(d.sme_keywords, match_terms(text, sme_terms));
  }
}

}  // namespace slic::annotate
