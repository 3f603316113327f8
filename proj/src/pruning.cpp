#include "slic/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "slic/error.hpp"
#include "slic/text.hpp"
#include "slic/util.hpp"

namespace slic::pruning {

using nlohmann::json;

// ---- TF-IDF --------------------------------------------------------------

TfidfMatrix build_tfidf(const std::vector<std::string>& keys, const std::vector<std::string>& texts) {
  if (keys.size() != texts.size()) throw DimensionError("build_tfidf: keys and texts differ in length");
  const std::size_t n = texts.size();

  std::vector<std::map<std::string, int>> counts(n);
  std::map<std::string, int> df;
  for (std::size_t j = 0; j < n; ++j) {
    for (auto& tok : util::split_ws(texts[j])) ++counts[j][tok];
    for (const auto& [tok, c] : counts[j]) ++df[tok];
  }
  if (df.empty()) throw EmptyVocabulary("no tokens in any document");

  TfidfMatrix X;
  X.doc_keys = keys;
  std::map<std::string, Eigen::Index> row;
  for (const auto& [tok, c] : df) {
    row.emplace(tok, static_cast<Eigen::Index>(X.vocabulary.size()));
    X.vocabulary.push_back(tok);
  }
  X.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(X.vocabulary.size()), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& [tok, tf] : counts[j]) {
      double idf = std::log((1.0 + n) / (1.0 + df[tok])) + 1.0;
      X.values(row[tok], static_cast<Eigen::Index>(j)) = tf * idf;
    }
  }
  return X;
}

TfidfMatrix build_tfidf(const Corpus& corpus) {
  std::vector<std::string> keys, texts;
  for (const auto& d : corpus.documents()) {
    keys.push_back(d.doi);
    if (d.clean_title.empty() && d.clean_abstract.empty())
      texts.push_back(text::clean_text(d.title) + " " + text::clean_text(d.abstract));
    else
      texts.push_back(d.clean_title + " " + d.clean_abstract);
  }
  return build_tfidf(keys, texts);
}

// ---- projection ----------------------------------------------------------

std::vector<ProjectedPoint> project_2d(const TfidfMatrix& X) {
  const Eigen::Index n = X.cols();
  std::vector<ProjectedPoint> out(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) out[j].doi = X.doc_keys.at(j);
  if (n == 0) return out;

  Eigen::MatrixXd centered = X.values.colwise() - X.values.rowwise().mean();
  Eigen::MatrixXd gram = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const auto& vals = eig.eigenvalues();
  const auto& vecs = eig.eigenvectors();

  for (int axis = 0; axis < 2 && axis < n; ++axis) {
    Eigen::Index col = n - 1 - axis;
    double lambda = vals(col);
    if (!(lambda > 1e-12 * std::max(1.0, vals(n - 1)))) continue;
    Eigen::VectorXd v = vecs.col(col);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < n; ++j)
      if (std::abs(v(j)) > std::abs(v(arg)) + 1e-12) arg = j;
    if (v(arg) < 0) v = -v;
    double scale = std::sqrt(lambda);
    for (Eigen::Index j = 0; j < n; ++j) (axis == 0 ? out[j].x : out[j].y) = v(j) * scale;
  }
  return out;
}

// ---- clustering ----------------------------------------------------------

std::vector<int> kmeans(const Eigen::MatrixXd& points, int c, std::uint64_t seed, int iterations) {
  const Eigen::Index n = points.rows();
  if (c < 1 || c > n) throw ConfigError("kmeans: need 1 <= c <= n");

  util::Rng rng(seed);
  std::vector<Eigen::Index> chosen{static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)))};
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (points.row(i) - points.row(chosen[0])).squaredNorm();
  while (static_cast<int>(chosen.size()) < c) {
    double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0) {
      double r = rng.uniform01() * total, acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2(i) <= 0) continue;
        acc += d2(i);
        pick = i;
        if (acc >= r) break;
      }
    } else {
      // All remaining points coincide with a centre; take the first unused index.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i)
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
    }
    chosen.push_back(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (points.row(i) - points.row(pick)).squaredNorm());
  }

  Eigen::MatrixXd centres(c, points.cols());
  for (int k = 0; k < c; ++k) centres.row(k) = points.row(chosen[k]);

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < c; ++k) {
        double d = (points.row(i) - centres.row(k)).squaredNorm();
        if (d < best_d) best_d = d, best = k;
      }
      if (it == 0 || labels[i] != best) changed = true;
      labels[i] = best;
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(c, points.cols());
    std::vector<int> sizes(c, 0);
    for (Eigen::Index i = 0; i < n; ++i) sums.row(labels[i]) += points.row(i), ++sizes[labels[i]];
    for (int k = 0; k < c; ++k)
      if (sizes[k] > 0) centres.row(k) = sums.row(k) / sizes[k];
  }

  std::map<int, int> renumber;
  for (auto& l : labels) {
    auto [it, ins] = renumber.try_emplace(l, static_cast<int>(renumber.size()));
    l = it->second;
  }
  return labels;
}

std::vector<ReviewCluster> propose_review_clusters(const std::vector<ProjectedPoint>& points, int c,
                                                   std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd P(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) P(i, 0) = points[i].x, P(i, 1) = points[i].y;
  auto labels = kmeans(P, c, seed, 100);

  int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<ReviewCluster> out(static_cast<std::size_t>(clusters));
  std::vector<Eigen::Vector2d> mean(clusters, Eigen::Vector2d::Zero());
  std::vector<int> size(clusters, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& cl = out[labels[i]];
    cl.cluster_id = labels[i];
    cl.member_dois.push_back(points[i].doi);
    mean[labels[i]] += P.row(i).transpose();
    ++size[labels[i]];
  }
  for (int k = 0; k < clusters; ++k) {
    mean[k] /= size[k];
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[i] != k) continue;
      double d = (P.row(i).transpose() - mean[k]).norm();
      if (d < best || (d == best && points[i].doi < out[k].centroid_doi)) {
        best = d;
        out[k].centroid_doi = points[i].doi;
        out[k].centroid_x = points[i].x;
        out[k].centroid_y = points[i].y;
      }
    }
  }
  return out;
}

// ---- decisions & pruning -------------------------------------------------

PruneResult prune_by_similarity(const std::map<std::string, std::vector<double>>& embeddings,
                                const std::set<std::string>& anchors, double tau) {
  auto norm = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  std::vector<std::pair<const std::vector<double>*, double>> anchor_vecs;
  for (const auto& a : anchors) {
    auto it = embeddings.find(a);
    if (it == embeddings.end()) throw MissingAnchor(a);
    anchor_vecs.emplace_back(&it->second, norm(it->second));
  }
  for (const auto& [doi, v] : embeddings)
    if (norm(v) == 0) throw ZeroVector(doi);

  PruneResult r;
  for (const auto& [doi, v] : embeddings) {
    if (anchors.contains(doi)) {
      r.kept.insert(doi);
      continue;
    }
    double nv = norm(v), best = -std::numeric_limits<double>::infinity();
    for (const auto& [a, na] : anchor_vecs) {
      if (a->size() != v.size()) throw DimensionError("embedding dimension differs for " + doi);
      double dot = 0;
      for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * (*a)[i];
      best = std::max(best, dot / (nv * na));
    }
    (best >= tau ? r.kept : r.removed).insert(doi);
  }
  return r;
}

Corpus apply_decisions(const Corpus& corpus, const std::vector<PruneDecision>& decisions,
                       const std::vector<ReviewCluster>& clusters) {
  std::map<int, const PruneDecision*> by_cluster;
  for (const auto& d : decisions)
    if (!by_cluster.emplace(d.cluster_id, &d).second)
      throw IncompleteDecisions("cluster " + std::to_string(d.cluster_id) + " decided twice");
  std::set<std::string> drop;
  std::vector<int> missing;
  for (const auto& c : clusters) {
    auto it = by_cluster.find(c.cluster_id);
    if (it == by_cluster.end()) {
      missing.push_back(c.cluster_id);
      continue;
    }
    if (it->second->verdict == Verdict::remove) drop.insert(c.member_dois.begin(), c.member_dois.end());
  }
  if (!missing.empty()) {
    std::vector<std::string> ids;
    for (int m : missing) ids.push_back(std::to_string(m));
    throw IncompleteDecisions("no decision for cluster(s) " + util::join(ids, ", "));
  }

  std::vector<Document> docs;
  for (const auto& d : corpus.documents())
    if (d.is_core || !drop.contains(d.doi)) docs.push_back(d);
  Corpus out = corpus.with_documents(std::move(docs));
  int removed_clusters = static_cast<int>(std::count_if(decisions.begin(), decisions.end(),
                                                        [](const auto& d) { return d.verdict == Verdict::remove; }));
  out.record("review", corpus.size(), out.size(), "remove_clusters=" + std::to_string(removed_clusters));
  return out;
}

std::set<std::string> collect_anchors(const Corpus& corpus, const std::vector<PruneDecision>& decisions) {
  std::set<std::string> anchors;
  for (const auto& d : corpus.documents())
    if (d.is_core) anchors.insert(d.doi);
  for (const auto& dec : decisions)
    for (const auto& a : dec.anchor_dois_added)
      if (corpus.contains(canonical_doi(a))) anchors.insert(canonical_doi(a));
  return anchors;
}

std::vector<PruneDecision> auto_keep(const std::vector<ReviewCluster>& clusters) {
  std::vector<PruneDecision> out;
  for (const auto& c : clusters) out.push_back({c.cluster_id, Verdict::keep, DecidedBy::automatic, {}});
  return out;
}

// ---- serialization -------------------------------------------------------

void to_json(json& j, const ReviewCluster& c) {
  j = json{{"cluster_id", c.cluster_id},
           {"member_dois", c.member_dois},
           {"centroid_doi", c.centroid_doi},
           {"centroid_xy", {c.centroid_x, c.centroid_y}}};
}

void from_json(const json& j, ReviewCluster& c) {
  j.at("cluster_id").get_to(c.cluster_id);
  j.at("member_dois").get_to(c.member_dois);
  j.at("centroid_doi").get_to(c.centroid_doi);
  const auto& xy = j.at("centroid_xy");
  c.centroid_x = xy.at(0).get<double>();
  c.centroid_y = xy.at(1).get<double>();
}

void to_json(json& j, const PruneDecision& d) {
  j = json{{"cluster_id", d.cluster_id},
           {"verdict", d.verdict == Verdict::keep ? "keep" : "remove"},
           {"decided_by", d.decided_by == DecidedBy::sme ? "sme" : "auto"},
           {"anchor_dois_added", d.anchor_dois_added}};
}

void from_json(const json& j, PruneDecision& d) {
  j.at("cluster_id").get_to(d.cluster_id);
  auto verdict = j.at("verdict").get<std::string>();
  if (verdict == "keep") d.verdict = Verdict::keep;
  else if (verdict == "remove") d.verdict = Verdict::remove;
  else throw FormatError("verdict must be keep or remove, got " + verdict);
  auto by = j.value("decided_by", std::string("sme"));
  if (by == "sme") d.decided_by = DecidedBy::sme;
  else if (by == "auto") d.decided_by = DecidedBy::automatic;
  else throw FormatError("decided_by must be sme or auto, got " + by);
  d.anchor_dois_added = j.value("anchor_dois_added", std::vector<std::string>{});
}

std::string decisions_to_jsonl(const std::vector<PruneDecision>& decisions) {
  std::string out;
  for (const auto& d : decisions) out += json(d).dump() + "\n";
  return out;
}

std::vector<PruneDecision> decisions_from_jsonl(const std::string& text) {
  std::vector<PruneDecision> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).get<PruneDecision>());
    } catch (const json::exception& e) {
      throw FormatError("decisions line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace slic::pruning
