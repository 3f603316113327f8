#include "slic/vector_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "slic/error.hpp"
#include "slic/text.hpp"
#include "slic/util.hpp"

namespace slic::vs {

using nlohmann::json;

// ---- providers -----------------------------------------------------------

HashEmbedder::HashEmbedder(std::size_t d) : d_(d) {
  if (d == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<double> HashEmbedder::embed(const std::string& raw) const {
  std::vector<double> v(d_, 0.0);
  for (const auto& tok : util::split_ws(text::clean_text(raw))) v[util::fnv1a64(tok) % d_] += 1.0;
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm == 0) {
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::string model, std::size_t d)
    : base_url_(std::move(base_url)), model_(std::move(model)), d_(d) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::vector<double> HttpEmbeddingProvider::embed(const std::string& text) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  httplib::Headers headers;
  if (const char* token = std::getenv("SLIC_EMBEDDING_TOKEN"); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);
  json body{{"model", model_}, {"input", text}};
  auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
  if (!res) throw LlmUnavailable("embedding endpoint: " + httplib::to_string(res.error()));
  if (res->status != 200) throw LlmUnavailable("embedding endpoint returned HTTP " + std::to_string(res->status));
  std::vector<double> v;
  try {
    v = json::parse(res->body).at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("embedding response: ") + e.what());
  }
  if (v.size() != d_)
    throw EmbeddingDimensionMismatch("expected " + std::to_string(d_) + ", got " + std::to_string(v.size()));
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm == 0) throw ZeroVector("embedding endpoint returned a zero vector");
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// ---- text utilities ------------------------------------------------------

std::vector<std::pair<int, std::string>> chunk_fulltext(const std::string& text, std::size_t max_chars) {
  if (max_chars < 200) throw ConfigError("max_chars must be >= 200");
  std::vector<std::string> paragraphs;
  std::string current;
  std::istringstream in(text);
  std::string line;
  auto flush = [&] {
    auto p = util::trim(current);
    if (!p.empty()) paragraphs.push_back(p);
    current.clear();
  };
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) {
      flush();
      continue;
    }
    if (!current.empty()) current += '\n';
    current += line;
  }
  flush();

  std::vector<std::pair<int, std::string>> out;
  for (auto& p : paragraphs) {
    std::string rest = p;
    while (rest.size() > max_chars) {
      std::size_t cut = std::string::npos;
      for (std::size_t i = 0; i + 1 < rest.size() && i + 1 <= max_chars; ++i)
        if ((rest[i] == '.' || rest[i] == '!' || rest[i] == '?') && std::isspace(static_cast<unsigned char>(rest[i + 1])))
          cut = i + 1;
      if (cut == std::string::npos || cut == 0) cut = util::utf8_floor(rest, max_chars);
      if (cut == 0) cut = std::min(rest.size(), max_chars);
      out.emplace_back(static_cast<int>(out.size()), util::trim(rest.substr(0, cut)));
      rest = util::trim(rest.substr(cut));
    }
    if (!rest.empty()) out.emplace_back(static_cast<int>(out.size()), rest);
  }
  return out;
}

std::size_t levenshtein(const std::string& a8, const std::string& b8) {
  auto a = util::utf8_decode(a8), b = util::utf8_decode(b8);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double normalized_levenshtein(const std::string& a, const std::string& b) {
  std::size_t la = util::utf8_decode(a).size(), lb = util::utf8_decode(b).size();
  std::size_t m = std::max(la, lb);
  if (m == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(m);
}

std::string document_text(const Document& d) {
  if (d.abstract.empty()) return d.title;
  if (d.title.empty()) return d.abstract;
  return d.title + "\n" + d.abstract;
}

// ---- store ---------------------------------------------------------------

const VectorRecord* VectorStore::find(const std::string& doi, int chunk_id) const {
  auto it = index_.find({doi, chunk_id});
  return it == index_.end() ? nullptr : &records_[it->second];
}

void VectorStore::add(VectorRecord r) {
  if (d_ == 0) d_ = r.vector.size();
  if (r.vector.size() != d_)
    throw EmbeddingDimensionMismatch("store dimension " + std::to_string(d_) + ", record has " +
                                     std::to_string(r.vector.size()));
  if (!index_.emplace(std::make_pair(r.doi, r.chunk_id), records_.size()).second)
    throw FormatError("duplicate vector record " + r.doi + "#" + std::to_string(r.chunk_id));
  records_.push_back(std::move(r));
}

namespace {

void sort_hits(std::vector<Hit>& hits, std::size_t k) {
  auto cmp = [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.doi != b.doi) return a.doi < b.doi;
    return a.chunk_id < b.chunk_id;
  };
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), cmp);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), cmp);
  }
}

}  // namespace

std::vector<Hit> VectorStore::knn_cosine(const std::vector<double>& query, std::size_t k) const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (records_.empty()) throw EmptyStore("vector store is empty");
  if (query.size() != d_)
    throw EmbeddingDimensionMismatch("query has " + std::to_string(query.size()) + " dims, store " + std::to_string(d_));
  double qn = 0;
  for (double x : query) qn += x * x;
  if (qn == 0) throw ZeroVector("query vector");
  qn = std::sqrt(qn);

  std::vector<Hit> hits;
  hits.reserve(records_.size());
  for (const auto& r : records_) {
    double dot = 0, rn = 0;
    for (std::size_t i = 0; i < d_; ++i) {
      dot += query[i] * r.vector[i];
      rn += static_cast<double>(r.vector[i]) * r.vector[i];
    }
    double score = rn > 0 ? dot / (qn * std::sqrt(rn)) : 0.0;
    hits.push_back({r.doi, r.chunk_id, score, r.text});
  }
  sort_hits(hits, k);
  return hits;
}

std::vector<Hit> VectorStore::knn_levenshtein(const std::string& query, std::size_t k, LevenshteinField field) const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (records_.empty()) throw EmptyStore("vector store is empty");
  std::string q = util::to_lower_ascii(query);
  std::vector<Hit> hits;
  for (const auto& r : records_) {
    if (field == LevenshteinField::title && r.chunk_id != -1) continue;
    const std::string target = field == LevenshteinField::title ? r.norm_title : util::to_lower_ascii(r.text);
    hits.push_back({r.doi, r.chunk_id, -normalized_levenshtein(q, target), r.text});
  }
  sort_hits(hits, k);
  return hits;
}

std::string VectorStore::serialize() const {
  std::string out = json{{"d", d_}, {"count", records_.size()}}.dump() + "\n";
  std::vector<std::uint8_t> bytes;
  for (const auto& r : records_) {
    bytes.clear();
    for (float f : r.vector) {
      auto bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    out += json{{"doi", r.doi},
                {"chunk_id", r.chunk_id},
                {"text", r.text},
                {"norm_title", r.norm_title},
                {"vector", util::base64_encode(bytes)}}
               .dump() +
           "\n";
  }
  return out;
}

VectorStore VectorStore::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("vector store: missing header");
  std::size_t d = 0, count = 0;
  try {
    auto h = json::parse(line);
    d = h.at("d").get<std::size_t>();
    count = h.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("vector store header: ") + e.what());
  }
  VectorStore store(d);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      VectorRecord r;
      r.doi = j.at("doi").get<std::string>();
      r.chunk_id = j.at("chunk_id").get<int>();
      r.text = j.at("text").get<std::string>();
      r.norm_title = j.value("norm_title", std::string());
      auto bytes = util::base64_decode(j.at("vector").get<std::string>());
      if (bytes.size() % 4) throw FormatError("vector byte length not a multiple of 4");
      for (std::size_t i = 0; i < bytes.size(); i += 4) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i + b]) << (8 * b);
        r.vector.push_back(std::bit_cast<float>(bits));
      }
      store.add(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError("vector store line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (store.size() != count)
    throw FormatError("vector store header says " + std::to_string(count) + " records, found " +
                      std::to_string(store.size()));
  return store;
}

void VectorStore::save(const std::filesystem::path& path) const { util::write_file(path, serialize()); }

VectorStore VectorStore::load(const std::filesystem::path& path) { return deserialize(util::read_file(path)); }

VectorStore index_documents(const Corpus& corpus, const EmbeddingProvider& provider, std::size_t max_chars,
                            IndexStats* stats) {
  VectorStore store(provider.dimension());
  IndexStats s;
  auto to_float = [&](const std::vector<double>& v) {
    if (v.size() != provider.dimension())
      throw EmbeddingDimensionMismatch("provider " + provider.name() + " returned " + std::to_string(v.size()) + " dims");
    return std::vector<float>(v.begin(), v.end());
  };
  for (const auto& d : corpus.documents()) {
    std::string norm_title = util::to_lower_ascii(d.title);
    std::string text = document_text(d);
    store.add({d.doi, -1, text, to_float(provider.embed(text)), norm_title});
    ++s.documents;
    if (!d.full_text) continue;
    for (auto& [id, para] : chunk_fulltext(*d.full_text, max_chars)) {
      store.add({d.doi, id, para, to_float(provider.embed(para)), norm_title});
      ++s.chunks;
    }
  }
  if (stats) *stats = s;
  return store;
}

}  // namespace slic::vs
