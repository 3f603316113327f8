#include "slic/factorization.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <numeric>
#include <sstream>
#include <thread>

#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::factorization {

using nlohmann::json;

namespace {

constexpr double kEps = 1e-12;

double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W, const Eigen::MatrixXd& H) {
  return (X - W * H).norm();
}

}  // namespace

FactorPair nmf_factorize(const Eigen::MatrixXd& X, int k, std::uint64_t seed, int max_iters, double tol) {
  const Eigen::Index m = X.rows(), n = X.cols();
  if (k < 1 || k > std::min(m, n))
    throw DimensionError("k=" + std::to_string(k) + " outside [1, min(m,n)=" + std::to_string(std::min(m, n)) + "]");
  if (X.size() > 0 && X.minCoeff() < 0) throw DimensionError("X has negative entries");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");

  FactorPair p;
  p.k = k;
  p.seed = seed;
  util::Rng rng(seed);
  double scale = std::sqrt(X.mean() / k);
  p.W.resize(m, k);
  p.H.resize(k, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index s = 0; s < k; ++s) p.W(i, s) = rng.uniform01() * scale;
  for (Eigen::Index s = 0; s < k; ++s)
    for (Eigen::Index j = 0; j < n; ++j) p.H(s, j) = rng.uniform01() * scale;

  double prev = objective(X, p.W, p.H);
  p.objective_trace.push_back(prev);
  for (int it = 0; it < max_iters && prev > 0; ++it) {
    Eigen::MatrixXd WtX = p.W.transpose() * X;
    Eigen::MatrixXd WtWH = (p.W.transpose() * p.W) * p.H;
    p.H = p.H.cwiseProduct(WtX.cwiseQuotient((WtWH.array() + kEps).matrix()));

    Eigen::MatrixXd XHt = X * p.H.transpose();
    Eigen::MatrixXd WHHt = p.W * (p.H * p.H.transpose());
    p.W = p.W.cwiseProduct(XHt.cwiseQuotient((WHHt.array() + kEps).matrix()));

    double cur = objective(X, p.W, p.H);
    p.objective_trace.push_back(cur);
    bool converged = (prev - cur) / prev < tol;
    prev = cur;
    if (converged) break;
  }
  return p;
}

std::vector<int> assign_clusters(const Eigen::MatrixXd& H) {
  std::vector<int> out(static_cast<std::size_t>(H.cols()), 0);
  for (Eigen::Index j = 0; j < H.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index s = 1; s < H.rows(); ++s)
      if (H(s, j) > H(best, j)) best = s;
    out[j] = static_cast<int>(best);
  }
  return out;
}

std::vector<double> silhouette_samples(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  const Eigen::Index n = points.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw DimensionError("silhouette: labels/points mismatch");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw DegenerateLabels("silhouette needs at least two clusters");

  std::map<int, int> slot;
  for (int l : distinct) slot.emplace(l, static_cast<int>(slot.size()));
  std::vector<int> size(slot.size(), 0);
  for (int l : labels) ++size[slot[l]];

  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  std::vector<double> sum(slot.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    int own = slot[labels[i]];
    if (size[own] == 1) continue;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sum[slot[labels[j]]] += (points.row(i) - points.row(j)).norm();
    double a = sum[own] / (size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c)
      if (static_cast<int>(c) != own) b = std::min(b, sum[c] / size[c]);
    double denom = std::max(a, b);
    s[i] = denom > 0 ? (b - a) / denom : 0.0;
  }
  return s;
}

double silhouette_score(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  auto s = silhouette_samples(points, labels);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double score_k(const Eigen::MatrixXd& X, int k, const BleedConfig& cfg) {
  FactorPair p = nmf_factorize(X, k, cfg.seed, cfg.max_iters, cfg.tol);
  auto labels = assign_clusters(p.H);
  std::set<int> distinct(labels.begin(), labels.end());
  if (static_cast<int>(distinct.size()) < k) return -1.0;

  Eigen::MatrixXd points;
  if (cfg.space == SilhouetteSpace::documents) {
    points = X.transpose();
    for (Eigen::Index j = 0; j < points.rows(); ++j) {
      double nrm = points.row(j).norm();
      if (nrm > 0) points.row(j) /= nrm;
    }
  } else {
    points = p.H.transpose();
    for (Eigen::Index j = 0; j < points.rows(); ++j) {
      double sum = points.row(j).sum();
      if (sum > 0) points.row(j) /= sum;
    }
  }

  auto s = silhouette_samples(points, labels);
  if (cfg.aggregate == SilhouetteAggregate::mean)
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  std::map<int, std::pair<double, int>> per;
  for (std::size_t i = 0; i < s.size(); ++i) {
    per[labels[i]].first += s[i];
    per[labels[i]].second += 1;
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [l, acc] : per) worst = std::min(worst, acc.first / acc.second);
  return worst;
}

namespace {

std::pair<int, int> k_bounds(const Eigen::MatrixXd& X, const BleedConfig& cfg) {
  if (cfg.K < 2) throw ConfigError("K must be >= 2");
  if (cfg.k_min < 1 || cfg.k_min > cfg.K) throw ConfigError("k_min must be in [1, K]");
  if (!(cfg.T > -1 && cfg.T < 1)) throw ConfigError("T must be in (-1, 1)");
  int hi = static_cast<int>(std::min<Eigen::Index>(cfg.K, std::min(X.rows(), X.cols())));
  return {std::max(2, cfg.k_min), hi};
}

KSelection empty_selection(const BleedConfig& cfg) {
  KSelection s;
  s.k_min = cfg.k_min;
  s.K = cfg.K;
  s.T = cfg.T;
  for (int k = cfg.k_min; k < 2; ++k) s.skipped.insert(k);
  return s;
}

}  // namespace

KSelection binary_bleed_search(const Eigen::MatrixXd& X, const BleedConfig& cfg) {
  KSelection sel = empty_selection(cfg);
  auto [lo, hi] = k_bounds(X, cfg);
  for (int k = hi + 1; k <= cfg.K; ++k) sel.skipped.insert(k);

  std::function<void(int, int)> search = [&](int a, int b) {
    if (a > b) return;
    if (sel.k_optimal && *sel.k_optimal >= b) {
      for (int k = a; k <= b; ++k) sel.skipped.insert(k);
      return;
    }
    int mid = a + (b - a + 1) / 2;
    double score = score_k(X, mid, cfg);
    sel.scores[mid] = score;
    sel.visited.insert(mid);
    sel.probe_order.push_back(mid);
    if (score > cfg.T && (!sel.k_optimal || mid > *sel.k_optimal)) sel.k_optimal = mid;
    search(mid + 1, b);
    search(a, mid - 1);
  };
  search(lo, hi);
  return sel;
}

KSelection exhaustive_scan(const Eigen::MatrixXd& X, const BleedConfig& cfg) {
  KSelection sel = empty_selection(cfg);
  auto [lo, hi] = k_bounds(X, cfg);
  for (int k = hi + 1; k <= cfg.K; ++k) sel.skipped.insert(k);
  if (lo > hi) return sel;

  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<double> scores(static_cast<std::size_t>(hi - lo + 1));
  std::atomic<int> next{lo};
  std::vector<std::future<void>> pool;
  for (int w = 0; w < workers; ++w)
    pool.push_back(std::async(std::launch::async, [&] {
      for (int k = next++; k <= hi; k = next++) scores[k - lo] = score_k(X, k, cfg);
    }));
  for (auto& f : pool) f.get();

  for (int k = lo; k <= hi; ++k) {
    sel.scores[k] = scores[k - lo];
    sel.visited.insert(k);
    sel.probe_order.push_back(k);
    if (scores[k - lo] > cfg.T) sel.k_optimal = k;
  }
  return sel;
}

std::vector<TopicSummary> derive_topics(const FactorPair& pair, const std::vector<std::string>& vocab,
                                        const std::vector<int>& labels, int top_n) {
  if (static_cast<Eigen::Index>(vocab.size()) != pair.W.rows())
    throw DimensionError("vocabulary size differs from W rows");
  const double n = static_cast<double>(labels.size());
  std::vector<TopicSummary> out;
  for (int s = 0; s < pair.k; ++s) {
    TopicSummary t;
    t.topic_id = s;
    std::vector<std::size_t> order(vocab.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pair.W(a, s) > pair.W(b, s); });
    std::size_t take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(0, top_n)));
    std::vector<std::string> head;
    for (std::size_t i = 0; i < take; ++i) {
      t.top_terms.emplace_back(vocab[order[i]], pair.W(order[i], s));
      if (head.size() < 3) head.push_back(vocab[order[i]]);
    }
    t.label = util::join(head, ", ");
    t.doc_count = static_cast<int>(std::count(labels.begin(), labels.end(), s));
    t.percent = n > 0 ? 100.0 * t.doc_count / n : 0.0;
    out.push_back(std::move(t));
  }
  return out;
}

// ---- serialization -------------------------------------------------------

void to_json(json& j, const KSelection& s) {
  json scores = json::object();
  for (const auto& [k, v] : s.scores) scores[std::to_string(k)] = v;
  j = json{{"k_range", {s.k_min, s.K}},
           {"threshold", s.T},
           {"scores", scores},
           {"visited", s.visited},
           {"skipped", s.skipped},
           {"probe_order", s.probe_order},
           {"k_optimal", s.k_optimal ? json(*s.k_optimal) : json(nullptr)}};
}

void from_json(const json& j, KSelection& s) {
  s.k_min = j.at("k_range").at(0).get<int>();
  s.K = j.at("k_range").at(1).get<int>();
  s.T = j.at("threshold").get<double>();
  s.scores.clear();
  for (const auto& [k, v] : j.at("scores").items()) s.scores[std::stoi(k)] = v.get<double>();
  s.visited = j.at("visited").get<std::set<int>>();
  s.skipped = j.at("skipped").get<std::set<int>>();
  s.probe_order = j.value("probe_order", std::vector<int>{});
  if (j.contains("k_optimal") && !j["k_optimal"].is_null()) s.k_optimal = j["k_optimal"].get<int>();
  else s.k_optimal.reset();
}

void to_json(json& j, const TopicSummary& t) {
  json terms = json::array();
  for (const auto& [term, w] : t.top_terms) terms.push_back({{"term", term}, {"weight", w}});
  j = json{{"topic_id", t.topic_id},
           {"label", t.label},
           {"doc_count", t.doc_count},
           {"percent", t.percent},
           {"top_terms", terms}};
}

void from_json(const json& j, TopicSummary& t) {
  j.at("topic_id").get_to(t.topic_id);
  j.at("label").get_to(t.label);
  j.at("doc_count").get_to(t.doc_count);
  j.at("percent").get_to(t.percent);
  t.top_terms.clear();
  for (const auto& e : j.at("top_terms")) t.top_terms.emplace_back(e.at("term").get<std::string>(), e.at("weight").get<double>());
}

std::string matrix_to_csv(const Eigen::MatrixXd& M) {
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (util::trim(line).empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("bad matrix cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError("ragged matrix csv");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_factors(const std::filesystem::path& dir, const FactorPair& pair, const KSelection& selection,
                   const std::vector<TopicSummary>& topics, const std::vector<std::string>& doc_keys,
                   const std::vector<int>& labels) {
  util::write_file(dir / "W.csv", matrix_to_csv(pair.W));
  util::write_file(dir / "H.csv", matrix_to_csv(pair.H));
  util::write_file(dir / "selection.json", json(selection).dump(2) + "\n");
  json assignments = json::object();
  for (std::size_t i = 0; i < doc_keys.size() && i < labels.size(); ++i) assignments[doc_keys[i]] = labels[i];
  json doc{{"k", pair.k}, {"seed", pair.seed}, {"topics", topics}, {"assignments", assignments}};
  util::write_file(dir / "topics.json", doc.dump(2) + "\n");
}

}  // namespace slic::factorization
