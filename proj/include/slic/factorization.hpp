#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "slic/pruning.hpp"

namespace slic::factorization {

struct FactorPair {
  Eigen::MatrixXd W;  // m x k
  Eigen::MatrixXd H;  // k x n
  int k = 0;
  std::vector<double> objective_trace;  // ||X - WH||_F, entry 0 is the initial guess
  std::uint64_t seed = 0;
};

// Multiplicative-update NMF. Stops after max_iters updates or when the
// relative objective change drops below tol.
FactorPair nmf_factorize(const Eigen::MatrixXd& X, int k, std::uint64_t seed, int max_iters = 500,
                         double tol = 1e-6);

// Column argmax of H, ties to the lowest row.
std::vector<int> assign_clusters(const Eigen::MatrixXd& H);

// Per-point silhouette values (rows of `points` are the points). Points in a
// singleton cluster get 0.
std::vector<double> silhouette_samples(const Eigen::MatrixXd& points, const std::vector<int>& labels);
// Mean of silhouette_samples. Throws DegenerateLabels with fewer than two
// distinct labels.
double silhouette_score(const Eigen::MatrixXd& points, const std::vector<int>& labels);

enum class SilhouetteSpace {
  documents,  // TF-IDF document columns, unit L2
  topic_mix,  // H columns, unit L1
};

enum class SilhouetteAggregate {
  min_cluster_mean,  // worst cluster's mean silhouette
  mean,              // mean over all points
};

struct BleedConfig {
  int k_min = 1;
  int K = 45;
  double T = 0.25;
  std::uint64_t seed = 0;
  int max_iters = 500;
  double tol = 1e-6;
  SilhouetteSpace space = SilhouetteSpace::documents;
  SilhouetteAggregate aggregate = SilhouetteAggregate::min_cluster_mean;
  int threads = 0;  // exhaustive scan only; 0 = hardware concurrency
};

struct KSelection {
  int k_min = 1;
  int K = 0;
  double T = 0;
  std::map<int, double> scores;
  std::set<int> visited;
  std::set<int> skipped;
  std::optional<int> k_optimal;
  std::vector<int> probe_order;

  int evaluations() const { return static_cast<int>(visited.size()); }
};

// S(f(k)) for one k under the configured space and aggregate. Returns -1 when
// the argmax labels realise fewer than k clusters.
double score_k(const Eigen::MatrixXd& X, int k, const BleedConfig& cfg);

// k_optimal = max{k : S(f(k)) > T}. Probes midpoints of the open range,
// upper half first; once some k passes, every smaller k is skipped unevaluated.
KSelection binary_bleed_search(const Eigen::MatrixXd& X, const BleedConfig& cfg);

// Reference: evaluates every k in [max(2,k_min), K].
KSelection exhaustive_scan(const Eigen::MatrixXd& X, const BleedConfig& cfg);

struct TopicSummary {
  int topic_id = 0;
  std::string label;
  int doc_count = 0;
  double percent = 0;
  std::vector<std::pair<std::string, double>> top_terms;
};

std::vector<TopicSummary> derive_topics(const FactorPair& pair, const std::vector<std::string>& vocab,
                                        const std::vector<int>& labels, int top_n = 10);

void to_json(nlohmann::json& j, const KSelection& s);
void from_json(const nlohmann::json& j, KSelection& s);
void to_json(nlohmann::json& j, const TopicSummary& t);
void from_json(const nlohmann::json& j, TopicSummary& t);

// Headerless, row-major, one matrix row per line.
std::string matrix_to_csv(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_csv(const std::string& text);

// Writes W.csv, H.csv, selection.json and topics.json into `dir`.
void write_factors(const std::filesystem::path& dir, const FactorPair& pair, const KSelection& selection,
                   const std::vector<TopicSummary>& topics, const std::vector<std::string>& doc_keys,
                   const std::vector<int>& labels);

}  // namespace slic::factorization
