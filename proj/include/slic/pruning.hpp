#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "slic/corpus.hpp"

namespace slic::pruning {

// m terms x n documents, nonnegative.
struct TfidfMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> vocabulary;
  std::vector<std::string> doc_keys;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Tokens are the whitespace-separated words of clean_title + clean_abstract.
TfidfMatrix build_tfidf(const Corpus& corpus);
// Same weighting over arbitrary pre-tokenized texts.
TfidfMatrix build_tfidf(const std::vector<std::string>& keys, const std::vector<std::string>& texts);

struct ProjectedPoint {
  std::string doi;
  double x = 0;
  double y = 0;
};

// Rank-2 projection of the centered document columns onto their top two
// principal directions. Each axis is sign-fixed so that its largest-magnitude
// document loading is positive.
std::vector<ProjectedPoint> project_2d(const TfidfMatrix& X);

struct ReviewCluster {
  int cluster_id = 0;
  std::vector<std::string> member_dois;
  std::string centroid_doi;
  double centroid_x = 0;
  double centroid_y = 0;
};

// k-means++ seeded init followed by `iterations` Lloyd steps. Returns one
// label per row of `points`; labels are renumbered 0.. in order of first
// appearance after empty clusters are dropped.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int c, std::uint64_t seed, int iterations = 100);

std::vector<ReviewCluster> propose_review_clusters(const std::vector<ProjectedPoint>& points, int c,
                                                   std::uint64_t seed = 0);

enum class Verdict { keep, remove };
enum class DecidedBy { sme, automatic };

struct PruneDecision {
  int cluster_id = 0;
  Verdict verdict = Verdict::keep;
  DecidedBy decided_by = DecidedBy::sme;
  std::vector<std::string> anchor_dois_added;

  bool operator==(const PruneDecision&) const = default;
};

struct PruneResult {
  std::set<std::string> kept;
  std::set<std::string> removed;
};

// A document is kept iff it is an anchor or its best cosine similarity to any
// anchor is >= tau.
PruneResult prune_by_similarity(const std::map<std::string, std::vector<double>>& embeddings,
                                const std::set<std::string>& anchors, double tau);

// Drops the members of remove-verdict clusters, except core documents.
Corpus apply_decisions(const Corpus& corpus, const std::vector<PruneDecision>& decisions,
                       const std::vector<ReviewCluster>& clusters);

// Core documents plus every anchor added by the decisions that is still in
// the corpus.
std::set<std::string> collect_anchors(const Corpus& corpus, const std::vector<PruneDecision>& decisions);

// Keep-all decisions made without a reviewer.
std::vector<PruneDecision> auto_keep(const std::vector<ReviewCluster>& clusters);

void to_json(nlohmann::json& j, const ReviewCluster& c);
void from_json(const nlohmann::json& j, ReviewCluster& c);
void to_json(nlohmann::json& j, const PruneDecision& d);
void from_json(const nlohmann::json& j, PruneDecision& d);

std::string decisions_to_jsonl(const std::vector<PruneDecision>& decisions);
std::vector<PruneDecision> decisions_from_jsonl(const std::string& text);

}  // namespace slic::pruning
