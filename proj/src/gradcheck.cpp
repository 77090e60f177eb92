#include "hiermet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "hiermet/matrix.hpp"
#include "hiermet/projection.hpp"
#include "hiermet/quadruplet_loss.hpp"
#include "hiermet/rank_loss.hpp"

namespace hiermet {

namespace {

constexpr double kStep = 1e-5;
constexpr double kTolerance = 1e-4;

double rel_err(double analytic, double numeric) {
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom < 1e-7) return 0.0;  // both effectively zero
  return std::abs(analytic - numeric) / denom;
}

Matrix random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    double nr = 0.0;
    do {
      for (std::size_t k = 0; k < d; ++k) m.at(r, k) = normal01(rng);
      nr = norm(m.row(r));
    } while (nr < 1e-6);
    for (std::size_t k = 0; k < d; ++k) m.at(r, k) /= nr;
  }
  return m;
}

// Random two-level labels, occasionally missing the fine level so some
// pairs come out undetermined.
struct TwoLevelLabel {
  int coarse = 0;
  std::optional<int> fine;
};

std::vector<std::optional<int>> random_pair_ranks(Rng& rng, std::size_t n,
                                                  bool allow_truncated) {
  std::vector<TwoLevelLabel> labels(n);
  for (auto& l : labels) {
    l.coarse = static_cast<int>(uniform_index(rng, 3));
    if (allow_truncated && uniform01(rng) < 0.15) l.fine = std::nullopt;
    else l.fine = static_cast<int>(uniform_index(rng, 3));
  }
  std::vector<std::optional<int>> ranks;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i].coarse != labels[j].coarse) {
        ranks.push_back(2);
      } else if (!labels[i].fine || !labels[j].fine) {
        ranks.push_back(std::nullopt);
      } else {
        ranks.push_back(labels[i].fine == labels[j].fine ? 0 : 1);
      }
    }
  }
  return ranks;
}

// hinge loss evaluated without the unit-norm precondition, so finite
// differences can nudge embeddings off the sphere
double quad_loss_raw(const Matrix& emb, const std::vector<Quadruplet>& quads,
                     const Margins& margins) {
  double loss = 0.0;
  for (const auto& q : quads) {
    const double d_pos =
        std::clamp(1.0 - dot(emb.row(q.anchor), emb.row(q.positive)), 0.0, 2.0);
    const double d_nf =
        std::clamp(1.0 - dot(emb.row(q.anchor), emb.row(q.neg_fine)), 0.0, 2.0);
    const double d_nc =
        std::clamp(1.0 - dot(emb.row(q.anchor), emb.row(q.neg_coarse)), 0.0, 2.0);
    loss += std::max(0.0, d_pos - d_nf + margins.fine);
    loss += std::max(0.0, d_pos - d_nc + margins.coarse);
  }
  return loss / static_cast<double>(quads.size());
}

// forward value with the table's targets and flags held constant
double frozen_rbl_loss(const Matrix& emb, const PairTable& table) {
  double loss = 0.0;
  for (const auto& e : table.pairs) {
    if (!e.included || e.correct) continue;
    const double d = std::clamp(1.0 - dot(emb.row(e.i), emb.row(e.j)), 0.0, 2.0);
    loss += (d - e.target) * (d - e.target);
  }
  return loss / table.included_count;
}

bool has_included_pair(const std::vector<std::optional<int>>& ranks) {
  return std::any_of(ranks.begin(), ranks.end(),
                     [](const auto& r) { return r.has_value(); });
}

}  // namespace

GradcheckResult gradcheck_rbl(std::uint32_t seed, int trials) {
  GradcheckResult result{"rbl", trials, 0.0, false};
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, t));
    const std::size_t n = 4 + uniform_index(rng, 5);
    Matrix emb = random_unit_rows(rng, n, 3);
    auto ranks = random_pair_ranks(rng, n, t % 3 == 0);
    if (!has_included_pair(ranks)) ranks[0] = 0;

    const RblResult forward = rbl_forward(emb, ranks);
    const Matrix analytic = rbl_backward(forward.table, emb);

    for (std::size_t k = 0; k < emb.data.size(); ++k) {
      const double saved = emb.data[k];
      emb.data[k] = saved + kStep;
      const double up = frozen_rbl_loss(emb, forward.table);
      emb.data[k] = saved - kStep;
      const double down = frozen_rbl_loss(emb, forward.table);
      emb.data[k] = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic.data[k], numeric));
    }
  }
  result.pass = result.max_rel_err < kTolerance;
  return result;
}

GradcheckResult gradcheck_quadruplet(std::uint32_t seed, int trials) {
  GradcheckResult result{"quadruplet", trials, 0.0, false};
  const Margins margins;
  const std::vector<std::string> pool = {"A/x", "A/x", "A/y", "B/z",
                                         "A/x", "A/y", "B/z", "B/w"};
  std::vector<LabelPath> labels;
  for (const auto& s : pool) labels.push_back(LabelPath::parse(s));

  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, 0x9000 + t));
    const auto quads = mine_quadruplets(labels, mix_seed(seed, 0x5000 + t));

    // stay away from hinge kinks so the finite differences are honest
    Matrix emb;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      emb = random_unit_rows(rng, labels.size(), 3);
      ok = true;
      for (const auto& q : quads) {
        const double d_pos = 1.0 - dot(emb.row(q.anchor), emb.row(q.positive));
        const double d_nf = 1.0 - dot(emb.row(q.anchor), emb.row(q.neg_fine));
        const double d_nc = 1.0 - dot(emb.row(q.anchor), emb.row(q.neg_coarse));
        if (std::abs(d_pos - d_nf + margins.fine) < 1e-3 ||
            std::abs(d_pos - d_nc + margins.coarse) < 1e-3) {
          ok = false;
          break;
        }
      }
    }

    const Matrix analytic = quad_backward(emb, quads, margins);
    for (std::size_t k = 0; k < emb.data.size(); ++k) {
      const double saved = emb.data[k];
      emb.data[k] = saved + kStep;
      const double up = quad_loss_raw(emb, quads, margins);
      emb.data[k] = saved - kStep;
      const double down = quad_loss_raw(emb, quads, margins);
      emb.data[k] = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic.data[k], numeric));
    }
  }
  result.pass = result.max_rel_err < kTolerance;
  return result;
}

GradcheckResult gradcheck_chain(std::uint32_t seed, int trials) {
  GradcheckResult result{"chain", trials, 0.0, false};
  const int d_in = 16;
  const int d_out = 3;
  const std::size_t n = 6;

  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, 0x2000 + t));
    Matrix raw(n, d_in);
    for (double& v : raw.data) v = 2.0 * normal01(rng) + uniform_in(rng, -1.0, 1.0);
    const FeatureStats stats = compute_feature_stats(raw);
    const Matrix x = standardize(raw, stats);

    ProjectionModel model = init_projection(mix_seed(seed, 0x3000 + t), d_in, d_out);
    auto ranks = random_pair_ranks(rng, n, false);

    ForwardCache cache;
    const Matrix emb = project_forward(model, x, &cache);
    const RblResult forward = rbl_forward(emb, ranks);
    const Matrix grad_emb = rbl_backward(forward.table, emb);
    const ParamGrads analytic = project_backward(cache, grad_emb);

    auto loss_at = [&]() {
      return frozen_rbl_loss(project_forward(model, x), forward.table);
    };
    auto check_param = [&](double& p, double analytic_grad) {
      const double saved = p;
      p = saved + kStep;
      const double up = loss_at();
      p = saved - kStep;
      const double down = loss_at();
      p = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic_grad, numeric));
    };

    for (std::size_t k = 0; k < model.weights.data.size(); ++k)
      check_param(model.weights.data[k], analytic.weights.data[k]);
    for (std::size_t k = 0; k < model.bias.size(); ++k)
      check_param(model.bias[k], analytic.bias[k]);
  }
  result.pass = result.max_rel_err < kTolerance;
  return result;
}

}  // namespace hiermet
