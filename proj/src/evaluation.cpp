#include "hiermet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace hiermet {

namespace {

// Cosine distance on arbitrary nonzero vectors; raw standardized features go
// through here too, so normalize explicitly. Near-zero rows get their norm
// floored, which keeps the result finite and deterministic.
double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double na = std::max(norm(a), 1e-12);
  const double nb = std::max(norm(b), 1e-12);
  return 1.0 - dot(a, b) / (na * nb);
}

}  // namespace

double silhouette_cosine(const Matrix& points, const std::vector<int>& cluster_ids) {
  const std::size_t n = points.rows;
  if (n < 2) throw ValidationError("silhouette needs at least 2 samples");
  if (cluster_ids.size() != n)
    throw ValidationError("one cluster id is required per sample");

  int num_clusters = 0;
  for (int c : cluster_ids) {
    if (c < 0) throw ValidationError("cluster ids must be non-negative");
    num_clusters = std::max(num_clusters, c + 1);
  }
  std::vector<std::size_t> cluster_size(num_clusters, 0);
  for (int c : cluster_ids) ++cluster_size[c];
  if (std::count_if(cluster_size.begin(), cluster_size.end(),
                    [](std::size_t s) { return s > 0; }) < 2)
    throw ValidationError("silhouette is undefined with a single cluster");

  double total = 0.0;
  std::vector<double> sum_to_cluster(num_clusters);
  for (std::size_t i = 0; i < n; ++i) {
    const int own = cluster_ids[i];
    if (cluster_size[own] == 1) continue;  // singleton coefficient is 0

    std::fill(sum_to_cluster.begin(), sum_to_cluster.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to_cluster[cluster_ids[j]] += cosine_distance(points.row(i), points.row(j));
    }

    const double a = sum_to_cluster[own] / static_cast<double>(cluster_size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_clusters; ++c) {
      if (c == own || cluster_size[c] == 0) continue;
      b = std::min(b, sum_to_cluster[c] / static_cast<double>(cluster_size[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette_cosine(const Matrix& points, const std::vector<std::string>& labels) {
  std::map<std::string, int> ids;
  std::vector<int> cluster_ids;
  cluster_ids.reserve(labels.size());
  for (const auto& l : labels) {
    auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
    cluster_ids.push_back(it->second);
  }
  return silhouette_cosine(points, cluster_ids);
}

SilhouetteReport multilevel_silhouette(const Matrix& points,
                                       const std::vector<LabelPath>& labels) {
  if (points.rows != labels.size())
    throw ValidationError("one label path is required per sample");
  std::size_t depth = 0;
  for (const auto& l : labels) depth = std::max(depth, l.depth());
  if (depth == 0) throw ValidationError("no labels to evaluate");

  SilhouetteReport report;
  double sum = 0.0;
  int available = 0;
  for (std::size_t level = 1; level <= depth; ++level) {
    std::vector<std::size_t> rows;
    std::vector<std::string> keys;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].depth() < level) continue;  // label unknown at this level
      rows.push_back(i);
      keys.push_back(labels[i].prefix(level).str());
    }

    std::map<std::string, int> distinct;
    for (const auto& k : keys) distinct.emplace(k, 0);
    if (rows.size() < 2 || distinct.size() < 2) {
      report.per_level.push_back(std::nullopt);
      continue;
    }

    Matrix subset(rows.size(), points.cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy(points.row(rows[r]).begin(), points.row(rows[r]).end(),
                subset.row(r).begin());
    const double score = silhouette_cosine(subset, keys);
    report.per_level.push_back(score);
    sum += score;
    ++available;
  }

  if (available == 0)
    throw ValidationError("no hierarchy level has two distinct labels");
  report.average = sum / available;
  return report;
}

EarlyStopper::Decision EarlyStopper::update(double score) {
  if (!std::isfinite(score)) throw ValidationError("validation score is not finite");
  Decision d;
  if (score > best_) {
    best_ = score;
    stale_ = 0;
    d.improved = true;
  } else {
    ++stale_;
    d.stop = stale_ >= patience_;
  }
  return d;
}

}  // namespace hiermet
