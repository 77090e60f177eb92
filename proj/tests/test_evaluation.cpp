#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hiermet/evaluation.hpp"
#include "test_support.hpp"

using namespace hiermet;

namespace {

Matrix unit_circle(const std::vector<double>& degrees) {
  Matrix m(degrees.size(), 2);
  for (std::size_t r = 0; r < degrees.size(); ++r) {
    const double rad = degrees[r] * M_PI / 180.0;
    m.at(r, 0) = std::cos(rad);
    m.at(r, 1) = std::sin(rad);
  }
  return m;
}

std::vector<LabelPath> labels_of(const std::vector<std::string>& texts) {
  std::vector<LabelPath> out;
  for (const auto& t : texts) out.push_back(LabelPath::parse(t));
  return out;
}

}  // namespace

TEST_CASE("two tight antipodal clusters score near one") {
  const Matrix points = unit_circle({0.0, 5.0, 180.0, 185.0});
  const double score = silhouette_cosine(points, std::vector<int>{0, 0, 1, 1});

  const double cos5 = std::cos(5.0 * M_PI / 180.0);
  const double a = 1.0 - cos5;
  const double b = (2.0 + 1.0 + cos5) / 2.0;
  const double expected = (b - a) / b;  // identical for all four points
  CHECK(score == doctest::Approx(expected).epsilon(1e-12));
  CHECK(score == doctest::Approx(0.998).epsilon(1e-3));
}

TEST_CASE("random labels on one blob score near zero") {
  for (std::uint32_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    const Matrix points = oracle::random_unit_rows(rng, 40, 3);
    std::vector<int> ids;
    for (int i = 0; i < 40; ++i) ids.push_back(static_cast<int>(uniform_index(rng, 2)));
    if (std::count(ids.begin(), ids.end(), 0) == 0 ||
        std::count(ids.begin(), ids.end(), 1) == 0)
      continue;
    CHECK(std::abs(silhouette_cosine(points, ids)) < 0.15);
  }
}

TEST_CASE("singleton conventions and failure modes") {
  Rng rng(3);
  const Matrix points = oracle::random_unit_rows(rng, 4, 3);
  // every sample its own cluster: all coefficients 0 by convention
  CHECK(silhouette_cosine(points, std::vector<int>{0, 1, 2, 3}) == 0.0);
  // a single cluster is undefined
  CHECK_THROWS_AS(silhouette_cosine(points, std::vector<int>{0, 0, 0, 0}),
                  ValidationError);
  CHECK_THROWS_AS(silhouette_cosine(Matrix(1, 3, 1.0), std::vector<int>{0}),
                  ValidationError);
}

TEST_CASE("silhouette is invariant to relabeling and sample order") {
  Rng rng(17);
  const std::size_t n = 12;
  const Matrix points = oracle::random_unit_rows(rng, n, 3);
  std::vector<int> ids;
  for (std::size_t i = 0; i < n; ++i)
    ids.push_back(static_cast<int>(uniform_index(rng, 3)));
  ids[0] = 0; ids[1] = 1; ids[2] = 2;
  const double base = silhouette_cosine(points, ids);

  // permute cluster names
  std::vector<int> renamed;
  for (int c : ids) renamed.push_back((c + 1) % 3);
  CHECK(silhouette_cosine(points, renamed) == doctest::Approx(base).epsilon(1e-12));

  // permute sample order
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i * 5 + 3) % n;
  Matrix shuffled(n, 3);
  std::vector<int> shuffled_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    shuffled_ids[i] = ids[perm[i]];
    for (std::size_t c = 0; c < 3; ++c) shuffled.at(i, c) = points.at(perm[i], c);
  }
  CHECK(silhouette_cosine(shuffled, shuffled_ids) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("silhouette is invariant under rotations of unit embeddings") {
  Rng rng(23);
  const std::size_t n = 10;
  const Matrix points = oracle::random_unit_rows(rng, n, 3);
  std::vector<int> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(i < n / 2 ? 0 : 1);
  const double base = silhouette_cosine(points, ids);

  // coordinate permutation with a sign flip is exactly orthogonal
  Matrix reflected(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    reflected.at(i, 0) = -points.at(i, 2);
    reflected.at(i, 1) = points.at(i, 0);
    reflected.at(i, 2) = points.at(i, 1);
  }
  CHECK(silhouette_cosine(reflected, ids) == doctest::Approx(base).epsilon(1e-12));

  // a generic rotation about the z axis
  const double theta = 0.83;
  Matrix rotated(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    rotated.at(i, 0) = std::cos(theta) * points.at(i, 0) - std::sin(theta) * points.at(i, 1);
    rotated.at(i, 1) = std::sin(theta) * points.at(i, 0) + std::cos(theta) * points.at(i, 1);
    rotated.at(i, 2) = points.at(i, 2);
  }
  CHECK(silhouette_cosine(rotated, ids) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("multilevel report on a clean hierarchical layout") {
  // fine clusters tight, coarse groups far apart
  const Matrix points = unit_circle({0.0, 1.0, 20.0, 21.0, 180.0, 181.0, 200.0, 201.0});
  const auto labels = labels_of({"A/x", "A/x", "A/y", "A/y",
                                 "B/u", "B/u", "B/v", "B/v"});
  const auto report = multilevel_silhouette(points, labels);
  REQUIRE(report.per_level.size() == 2);
  REQUIRE(report.per_level[0].has_value());
  REQUIRE(report.per_level[1].has_value());
  CHECK(*report.per_level[0] > 0.9);  // coarse
  CHECK(*report.per_level[1] > 0.9);  // fine
  CHECK(report.average ==
        doctest::Approx((*report.per_level[0] + *report.per_level[1]) / 2.0));
}

TEST_CASE("coarse structure only: coarse high, fine at or below zero") {
  // fine classes interleaved within each coarse blob
  const Matrix points = unit_circle({0.0, 2.0, 1.0, 3.0, 180.0, 182.0, 181.0, 183.0});
  const auto labels = labels_of({"A/x", "A/x", "A/y", "A/y",
                                 "B/u", "B/u", "B/v", "B/v"});
  const auto report = multilevel_silhouette(points, labels);
  CHECK(*report.per_level[0] > 0.9);
  CHECK(*report.per_level[1] <= 0.05);
}

TEST_CASE("levels without two distinct labels are unavailable") {
  const Matrix points = unit_circle({0.0, 5.0, 180.0, 185.0});
  const auto labels = labels_of({"A/x", "A/x", "A/y", "A/y"});
  const auto report = multilevel_silhouette(points, labels);
  CHECK_FALSE(report.per_level[0].has_value());  // single coarse label
  REQUIRE(report.per_level[1].has_value());
  CHECK(report.average == doctest::Approx(*report.per_level[1]));

  // nothing available at all
  const auto one_label = labels_of({"A/x", "A/x", "A/x", "A/x"});
  CHECK_THROWS_AS(multilevel_silhouette(points, one_label), ValidationError);
}

TEST_CASE("incomplete labels are skipped per level") {
  const Matrix points = unit_circle({0.0, 5.0, 180.0, 185.0, 90.0});
  const auto labels = labels_of({"A/x", "A/x", "B/y", "B/y", "A"});
  const auto report = multilevel_silhouette(points, labels);
  REQUIRE(report.per_level.size() == 2);
  CHECK(report.per_level[0].has_value());  // truncated row still counts here

  // the fine level must ignore the truncated row entirely
  const Matrix four = unit_circle({0.0, 5.0, 180.0, 185.0});
  const auto four_labels = labels_of({"A/x", "A/x", "B/y", "B/y"});
  const auto fine_only = multilevel_silhouette(four, four_labels);
  CHECK(*report.per_level[1] == doctest::Approx(*fine_only.per_level[1]).epsilon(1e-12));
}

TEST_CASE("early stopper protocol") {
  SUBCASE("stops on the 20th consecutive non-improving epoch") {
    EarlyStopper stopper(20);
    CHECK(stopper.update(0.1).improved);
    CHECK(stopper.update(0.2).improved);
    for (int i = 1; i < 20; ++i) {
      const auto d = stopper.update(0.2 - 0.001 * i);
      CHECK_FALSE(d.improved);
      CHECK_FALSE(d.stop);
    }
    const auto last = stopper.update(0.15);
    CHECK(last.stop);
    CHECK(stopper.best_score() == doctest::Approx(0.2));
  }

  SUBCASE("monotonically rising scores never stop") {
    EarlyStopper stopper(20);
    for (int i = 0; i < 500; ++i) {
      const auto d = stopper.update(0.001 * i);
      CHECK(d.improved);
      CHECK_FALSE(d.stop);
    }
  }

  SUBCASE("improvement on the would-be stopping epoch resets the counter") {
    EarlyStopper stopper(20);
    stopper.update(0.5);
    for (int i = 0; i < 19; ++i) CHECK_FALSE(stopper.update(0.4).stop);
    const auto d = stopper.update(0.6);  // 20th epoch after the best, improves
    CHECK(d.improved);
    CHECK_FALSE(d.stop);
    CHECK(stopper.epochs_since_improvement() == 0);
  }

  SUBCASE("equal score is not an improvement") {
    EarlyStopper stopper(2);
    stopper.update(0.5);
    CHECK_FALSE(stopper.update(0.5).improved);
    CHECK(stopper.update(0.5).stop);
  }
}
