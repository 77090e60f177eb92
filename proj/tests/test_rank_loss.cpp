#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hiermet/gradcheck.hpp"
#include "hiermet/label_tree.hpp"
#include "hiermet/rank_loss.hpp"
#include "test_support.hpp"

using namespace hiermet;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
  return m;
}

Matrix unit_circle(const std::vector<double>& degrees) {
  Matrix m(degrees.size(), 2);
  for (std::size_t r = 0; r < degrees.size(); ++r) {
    const double rad = degrees[r] * M_PI / 180.0;
    m.at(r, 0) = std::cos(rad);
    m.at(r, 1) = std::sin(rad);
  }
  return m;
}

std::vector<std::optional<int>> ranks_of(std::initializer_list<int> rs) {
  std::vector<std::optional<int>> out;
  for (int r : rs) out.push_back(r);
  return out;
}

// Ranks for a batch of label paths through a fresh tree, in pair order.
std::vector<std::optional<int>> ranks_for(const std::vector<std::string>& labels) {
  std::vector<LabelPath> paths;
  for (const auto& l : labels) paths.push_back(LabelPath::parse(l));
  const auto tree = build_tree(paths);
  std::vector<std::optional<int>> ranks;
  for (std::size_t i = 0; i + 1 < paths.size(); ++i)
    for (std::size_t j = i + 1; j < paths.size(); ++j)
      ranks.push_back(tree.pair_rank(paths[i], paths[j]));
  return ranks;
}

}  // namespace

TEST_CASE("pairwise cosine distances") {
  const Matrix emb = from_rows({{1, 0}, {1, 0}, {0, 1}, {-1, 0}});
  const auto dist = pairwise_cosine_distances(emb);
  REQUIRE(dist.size() == 6);
  CHECK(dist[0].dist == doctest::Approx(0.0));   // identical
  CHECK(dist[1].dist == doctest::Approx(1.0));   // orthogonal
  CHECK(dist[2].dist == doctest::Approx(2.0));   // antipodal
  CHECK(dist[0].i == 0);
  CHECK(dist[0].j == 1);

  const Matrix ten_deg = unit_circle({0.0, 10.0});
  const auto d10 = pairwise_cosine_distances(ten_deg);
  CHECK(d10[0].dist == doctest::Approx(1.0 - std::cos(10.0 * M_PI / 180.0)).epsilon(1e-12));

  CHECK_THROWS_AS(pairwise_cosine_distances(from_rows({{1, 0}})), ValidationError);
  CHECK_THROWS_AS(pairwise_cosine_distances(from_rows({{1, 0}, {2, 0}})), ValidationError);
}

TEST_CASE("assign_targets reproduces the worked three-pair batch") {
  const std::vector<PairDistance> dist = {
      {0, 1, 0.01519}, {0, 2, 0.82635}, {1, 2, 1.0}};
  const auto [spans, table] = assign_targets(dist, ranks_of({1, 1, 0}));

  REQUIRE(spans.spans.size() == 2);
  CHECK(spans.spans[0].rank == 0);
  CHECK(spans.spans[0].start == 0);
  CHECK(spans.spans[0].count == 1);
  CHECK(spans.spans[0].target == doctest::Approx(0.01519));
  CHECK(spans.spans[1].rank == 1);
  CHECK(spans.spans[1].start == 1);
  CHECK(spans.spans[1].count == 2);
  CHECK(spans.spans[1].target == doctest::Approx(1.0));

  CHECK_FALSE(table.pairs[0].correct);  // rank 1 at position 0
  CHECK(table.pairs[1].correct);        // rank 1 at position 1
  CHECK_FALSE(table.pairs[2].correct);  // rank 0 at position 2
  CHECK(table.pairs[0].target == doctest::Approx(1.0));
  CHECK(table.pairs[2].target == doctest::Approx(0.01519));
}

TEST_CASE("ties are lenient") {
  const std::vector<PairDistance> dist = {{0, 1, 0.5}, {0, 2, 0.5}, {1, 2, 0.5}};
  const auto [spans, table] = assign_targets(dist, ranks_of({2, 0, 1}));
  for (const auto& e : table.pairs) CHECK(e.correct);
}

TEST_CASE("undetermined pairs are excluded, all-excluded is an error") {
  const std::vector<PairDistance> dist = {{0, 1, 0.3}, {0, 2, 0.6}, {1, 2, 0.9}};
  std::vector<std::optional<int>> ranks = {std::nullopt, 1, std::nullopt};
  const auto [spans, table] = assign_targets(dist, ranks);
  CHECK(table.included_count == 1);
  CHECK(table.pairs[1].correct);  // single included pair is trivially in span
  CHECK_FALSE(table.pairs[0].included);

  std::vector<std::optional<int>> none = {std::nullopt, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(assign_targets(dist, none), ValidationError);
}

TEST_CASE("rbl_forward on a perfectly ordered batch is zero") {
  // same-leaf pair closest, same-coarse next, cross-coarse furthest
  const Matrix emb = unit_circle({0.0, 5.0, 40.0, 120.0});
  const auto ranks = ranks_for({"A/x", "A/x", "A/y", "B/z"});
  const auto res = rbl_forward(emb, ranks);
  CHECK(res.loss == 0.0);
  for (const auto& e : res.table.pairs) CHECK(e.correct);
}

TEST_CASE("rbl_forward matches the hand-evaluated three-pair batch") {
  // pair distances come out as (1-cos10, 1-cos80, 1.0) with ranks (1, 1, 0):
  // the rank-0 pair sits at the far end of the sorted vector
  const Matrix emb = unit_circle({0.0, 10.0, -80.0});
  const auto ranks = ranks_of({1, 1, 0});
  const auto res = rbl_forward(emb, ranks);

  const double d01 = 1.0 - std::cos(10.0 * M_PI / 180.0);
  const double expected = ((1.0 - d01) * (1.0 - d01) + (d01 - 1.0) * (d01 - 1.0)) / 3.0;
  CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(res.loss == doctest::Approx(0.64656).epsilon(1e-4));
  CHECK(res.loss ==
        doctest::Approx(oracle::reference_rbl_loss(emb, ranks)).epsilon(1e-12));
}

TEST_CASE("single included pair gives zero loss") {
  const Matrix emb = unit_circle({0.0, 10.0, 90.0});
  std::vector<std::optional<int>> ranks = {1, std::nullopt, std::nullopt};
  CHECK(rbl_forward(emb, ranks).loss == 0.0);
}

TEST_CASE("rbl_backward formula on a manually built table") {
  const Matrix emb = unit_circle({0.0, 60.0});
  PairTable table;
  table.included_count = 1;
  PairEntry e;
  e.i = 0;
  e.j = 1;
  e.dist = 1.0 - std::cos(60.0 * M_PI / 180.0);
  e.rank = 1;
  e.included = true;
  e.correct = false;
  e.target = 0.1;
  table.pairs.push_back(e);

  const Matrix grad = rbl_backward(table, emb);
  const double w = 2.0 * (e.dist - e.target);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(grad.at(0, k) == doctest::Approx(-w * emb.at(1, k)).epsilon(1e-12));
    CHECK(grad.at(1, k) == doctest::Approx(-w * emb.at(0, k)).epsilon(1e-12));
  }
}

TEST_CASE("zero-loss batches give a zero gradient") {
  const Matrix emb = unit_circle({0.0, 5.0, 40.0, 120.0});
  const auto res = rbl_forward(emb, ranks_for({"A/x", "A/x", "A/y", "B/z"}));
  const Matrix grad = rbl_backward(res.table, emb);
  for (double g : grad.data) CHECK(g == 0.0);
}

TEST_CASE("analytic gradient matches finite differences") {
  const auto suite = gradcheck_rbl(123, 8);
  CHECK(suite.pass);
  CHECK(suite.max_rel_err < 1e-4);
}

TEST_CASE("a sign-flipped backward is caught by finite differences") {
  Rng rng(5);
  const Matrix emb = oracle::random_unit_rows(rng, 5, 3);
  const auto ranks = ranks_for({"A/x", "A/x", "A/y", "B/z", "B/z"});
  const auto res = rbl_forward(emb, ranks);
  REQUIRE(res.loss > 0.0);
  Matrix flipped = rbl_backward(res.table, emb);
  for (double& g : flipped.data) g = -g;

  double max_err = 0.0;
  Matrix probe = emb;
  for (std::size_t k = 0; k < probe.data.size(); ++k) {
    const double saved = probe.data[k];
    auto frozen = [&]() {
      double loss = 0.0;
      for (const auto& e : res.table.pairs) {
        if (!e.included || e.correct) continue;
        const double d = 1.0 - dot(probe.row(e.i), probe.row(e.j));
        loss += (d - e.target) * (d - e.target);
      }
      return loss / res.table.included_count;
    };
    probe.data[k] = saved + 1e-5;
    const double up = frozen();
    probe.data[k] = saved - 1e-5;
    const double down = frozen();
    probe.data[k] = saved;
    const double numeric = (up - down) / 2e-5;
    const double denom = std::max(std::abs(numeric), std::abs(flipped.data[k]));
    if (denom > 1e-7)
      max_err = std::max(max_err, std::abs(numeric - flipped.data[k]) / denom);
  }
  CHECK(max_err > 1e-2);
}

TEST_CASE("loss is permutation equivariant") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5;
    const Matrix emb = oracle::random_unit_rows(rng, n, 3);
    const auto ranks = ranks_for({"A/x", "A/x", "A/y", "B/z", "B/w"});
    const auto base = rbl_forward(emb, ranks);
    const Matrix grad = rbl_backward(base.table, emb);

    // rotate the batch rows by one
    std::vector<std::size_t> perm = {1, 2, 3, 4, 0};
    Matrix permuted(n, 3);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 3; ++c) permuted.at(r, c) = emb.at(perm[r], c);
    const std::vector<std::string> labels = {"A/x", "A/y", "B/z", "B/w", "A/x"};
    const auto permuted_res = rbl_forward(permuted, ranks_for(labels));
    CHECK(permuted_res.loss == doctest::Approx(base.loss).epsilon(1e-12));

    const Matrix permuted_grad = rbl_backward(permuted_res.table, permuted);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(permuted_grad.at(r, c) ==
              doctest::Approx(grad.at(perm[r], c)).epsilon(1e-9));
  }
}

TEST_CASE("targets are monotone in rank") {
  Rng rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + uniform_index(rng, 4);
    const Matrix emb = oracle::random_unit_rows(rng, n, 3);
    std::vector<std::optional<int>> ranks;
    for (std::size_t p = 0; p < n * (n - 1) / 2; ++p)
      ranks.push_back(static_cast<int>(uniform_index(rng, 3)));
    const auto res = rbl_forward(emb, ranks);
    for (std::size_t s = 1; s < res.spans.spans.size(); ++s) {
      CHECK(res.spans.spans[s - 1].rank < res.spans.spans[s].rank);
      CHECK(res.spans.spans[s - 1].target <= res.spans.spans[s].target);
    }
  }
}

TEST_CASE("loss is zero exactly when every included pair is in its span") {
  Rng rng(31337);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + uniform_index(rng, 3);
    const Matrix emb = oracle::random_unit_rows(rng, n, 3);
    std::vector<std::optional<int>> ranks;
    for (std::size_t p = 0; p < n * (n - 1) / 2; ++p)
      ranks.push_back(static_cast<int>(uniform_index(rng, 3)));
    const auto res = rbl_forward(emb, ranks);
    bool all_correct = true;
    for (const auto& e : res.table.pairs)
      if (e.included && !e.correct) all_correct = false;
    CHECK((res.loss == 0.0) == all_correct);
    CHECK(res.loss >= 0.0);
  }
}

TEST_CASE("moving a wrong pair toward its target never increases the loss") {
  Rng rng(2718);
  int exercised = 0;
  while (exercised < 30) {
    const Matrix emb = oracle::random_unit_rows(rng, 5, 3);
    std::vector<std::optional<int>> ranks;
    for (std::size_t p = 0; p < 10; ++p)
      ranks.push_back(static_cast<int>(uniform_index(rng, 3)));
    const auto res = rbl_forward(emb, ranks);
    if (res.loss == 0.0) continue;

    for (std::size_t p = 0; p < res.table.pairs.size(); ++p) {
      const auto& e = res.table.pairs[p];
      if (!e.included || e.correct) continue;
      // frozen spans and targets; shrink the residual of this one pair
      auto frozen_with = [&](double dist_p) {
        double loss = 0.0;
        for (std::size_t q = 0; q < res.table.pairs.size(); ++q) {
          const auto& f = res.table.pairs[q];
          if (!f.included || f.correct) continue;
          const double d = q == p ? dist_p : f.dist;
          loss += (d - f.target) * (d - f.target);
        }
        return loss / res.table.included_count;
      };
      const double nudged = e.dist + 0.5 * (e.target - e.dist);
      CHECK(frozen_with(nudged) <= frozen_with(e.dist));
      ++exercised;
    }
  }
}

TEST_CASE("rbl_forward equals the literal reference on random small batches") {
  Rng rng(60601);
  for (int trial = 0; trial < 150; ++trial) {
    const auto tax = oracle::random_taxonomy(rng, 3, 12);
    const std::size_t n = 3 + uniform_index(rng, 4);
    std::vector<LabelPath> batch_paths;
    std::vector<std::vector<std::string>> raw_paths;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& leaf = tax.leaves[uniform_index(rng, tax.leaves.size())];
      batch_paths.push_back(LabelPath(leaf));
      raw_paths.push_back(leaf);
    }
    const auto tree = build_tree(batch_paths);
    std::vector<std::optional<int>> ranks;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        ranks.push_back(tree.pair_rank(batch_paths[i], batch_paths[j]));

    const Matrix emb = oracle::random_unit_rows(rng, n, 3);
    const auto res = rbl_forward(emb, ranks);
    const double reference = oracle::reference_rbl_loss(emb, ranks);
    CHECK(std::abs(res.loss - reference) < 1e-12);
  }
}
