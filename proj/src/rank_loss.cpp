#include "hiermet/rank_loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace hiermet {

std::vector<PairDistance> pairwise_cosine_distances(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows;
  if (n < 2) throw ValidationError("need at least 2 embeddings for pairwise distances");
  for (std::size_t r = 0; r < n; ++r) {
    const double nr = norm(embeddings.row(r));
    if (std::abs(nr - 1.0) > 1e-6)
      throw ValidationError("embedding row " + std::to_string(r) +
                            " is not unit-norm (|e| = " + std::to_string(nr) + ")");
  }

  std::vector<PairDistance> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 1.0 - dot(embeddings.row(i), embeddings.row(j));
      d = std::clamp(d, 0.0, 2.0);  // guards float drift outside the cosine range
      out.push_back({static_cast<int>(i), static_cast<int>(j), d});
    }
  }
  return out;
}

std::pair<RankSpans, PairTable> assign_targets(
    const std::vector<PairDistance>& distances,
    const std::vector<std::optional<int>>& ranks) {
  if (distances.size() != ranks.size())
    throw ValidationError("one rank is required per pair");

  PairTable table;
  table.pairs.resize(distances.size());
  std::vector<int> included;  // indices into table.pairs
  for (std::size_t p = 0; p < distances.size(); ++p) {
    auto& e = table.pairs[p];
    e.i = distances[p].i;
    e.j = distances[p].j;
    e.dist = distances[p].dist;
    e.rank = ranks[p];
    e.included = ranks[p].has_value();
    if (e.included) included.push_back(static_cast<int>(p));
  }
  table.included_count = static_cast<int>(included.size());
  if (included.empty())
    throw ValidationError("all pairs have undetermined rank; nothing to score");

  // sorted order of included pairs; exact ties keep enumeration order
  std::vector<int> order = included;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return table.pairs[a].dist < table.pairs[b].dist;
  });
  std::vector<double> sorted_dist(order.size());
  for (std::size_t q = 0; q < order.size(); ++q) {
    table.pairs[order[q]].pos = static_cast<int>(q);
    sorted_dist[q] = table.pairs[order[q]].dist;
  }

  // spans per present rank, ascending
  std::map<int, int> counts;
  for (int p : included) ++counts[*table.pairs[p].rank];

  RankSpans spans;
  int start = 0;
  for (auto [rank, count] : counts) {
    RankSpan s;
    s.rank = rank;
    s.start = start;
    s.count = count;
    s.target = sorted_dist[start + count / 2];  // median position of the span
    spans.spans.push_back(s);
    start += count;
  }

  for (int p : included) {
    auto& e = table.pairs[p];
    const RankSpan& s = *spans.find(*e.rank);
    e.target = s.target;
    // lenient ties: any sorted position carrying this exact distance counts
    auto lo = std::lower_bound(sorted_dist.begin(), sorted_dist.end(), e.dist);
    auto hi = std::upper_bound(sorted_dist.begin(), sorted_dist.end(), e.dist);
    const int first = static_cast<int>(lo - sorted_dist.begin());
    const int last = static_cast<int>(hi - sorted_dist.begin()) - 1;
    e.correct = first <= s.start + s.count - 1 && last >= s.start;
  }

  return {std::move(spans), std::move(table)};
}

RblResult rbl_forward(const Matrix& embeddings,
                      const std::vector<std::optional<int>>& ranks) {
  RblResult result;
  auto distances = pairwise_cosine_distances(embeddings);
  std::tie(result.spans, result.table) = assign_targets(distances, ranks);

  double loss = 0.0;
  for (const auto& e : result.table.pairs) {
    if (!e.included || e.correct) continue;
    const double diff = e.dist - e.target;
    loss += diff * diff;
  }
  result.loss = loss / result.table.included_count;
  return result;
}

Matrix rbl_backward(const PairTable& table, const Matrix& embeddings) {
  for (const auto& e : table.pairs) {
    if (static_cast<std::size_t>(e.i) >= embeddings.rows ||
        static_cast<std::size_t>(e.j) >= embeddings.rows)
      throw ValidationError("pair table does not match the embedding matrix");
  }

  Matrix grad(embeddings.rows, embeddings.cols);
  const double scale = 2.0 / table.included_count;
  for (const auto& e : table.pairs) {
    if (!e.included || e.correct) continue;
    // d dist/d e_i = -e_j for dist = 1 - <e_i, e_j>
    const double w = scale * (e.dist - e.target);
    auto ei = embeddings.row(e.i);
    auto ej = embeddings.row(e.j);
    auto gi = grad.row(e.i);
    auto gj = grad.row(e.j);
    for (std::size_t k = 0; k < embeddings.cols; ++k) {
      gi[k] -= w * ej[k];
      gj[k] -= w * ei[k];
    }
  }
  return grad;
}

}  // namespace hiermet
