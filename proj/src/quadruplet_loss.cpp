#include "hiermet/quadruplet_loss.hpp"

#include <algorithm>
#include <cmath>

namespace hiermet {

namespace {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return std::clamp(1.0 - dot(a, b), 0.0, 2.0);
}

void check_unit_rows(const Matrix& embeddings) {
  for (std::size_t r = 0; r < embeddings.rows; ++r) {
    if (std::abs(norm(embeddings.row(r)) - 1.0) > 1e-6)
      throw ValidationError("embedding row " + std::to_string(r) + " is not unit-norm");
  }
}

}  // namespace

std::vector<Quadruplet> mine_quadruplets(const std::vector<LabelPath>& labels,
                                         std::uint32_t seed) {
  for (const auto& l : labels) {
    if (l.depth() != 2)
      throw ValidationError("quadruplet mining needs two-level full labels, got '" +
                            l.str() + "'");
  }

  Rng rng(seed);
  std::vector<Quadruplet> quads;
  const int n = static_cast<int>(labels.size());
  for (int a = 0; a < n; ++a) {
    std::vector<int> positives, neg_fine, neg_coarse;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      if (labels[b].segments[0] != labels[a].segments[0]) {
        neg_coarse.push_back(b);
      } else if (labels[b].segments[1] != labels[a].segments[1]) {
        neg_fine.push_back(b);
      } else {
        positives.push_back(b);
      }
    }
    if (positives.empty() || neg_fine.empty() || neg_coarse.empty()) continue;
    Quadruplet q;
    q.anchor = a;
    q.positive = positives[uniform_index(rng, positives.size())];
    q.neg_fine = neg_fine[uniform_index(rng, neg_fine.size())];
    q.neg_coarse = neg_coarse[uniform_index(rng, neg_coarse.size())];
    quads.push_back(q);
  }
  return quads;
}

double quad_forward(const Matrix& embeddings, const std::vector<Quadruplet>& quads,
                    const Margins& margins) {
  margins.validate();
  if (quads.empty())
    throw ValidationError("no quadruplets in batch; batch is unusable for this loss");
  check_unit_rows(embeddings);

  double loss = 0.0;
  for (const auto& q : quads) {
    const double d_pos = cosine_distance(embeddings.row(q.anchor), embeddings.row(q.positive));
    const double d_nf = cosine_distance(embeddings.row(q.anchor), embeddings.row(q.neg_fine));
    const double d_nc = cosine_distance(embeddings.row(q.anchor), embeddings.row(q.neg_coarse));
    loss += std::max(0.0, d_pos - d_nf + margins.fine);
    loss += std::max(0.0, d_pos - d_nc + margins.coarse);
  }
  return loss / static_cast<double>(quads.size());
}

Matrix quad_backward(const Matrix& embeddings, const std::vector<Quadruplet>& quads,
                     const Margins& margins) {
  margins.validate();
  if (quads.empty())
    throw ValidationError("no quadruplets in batch; batch is unusable for this loss");
  check_unit_rows(embeddings);

  Matrix grad(embeddings.rows, embeddings.cols);
  const double scale = 1.0 / static_cast<double>(quads.size());

  // +1 on d(a,p), -1 on d(a,neg) when the hinge is active;
  // d(x,y) = 1 - <x,y> so d grad wrt x is -y.
  auto add_pair = [&](int x, int y, double w) {
    auto ex = embeddings.row(x);
    auto ey = embeddings.row(y);
    auto gx = grad.row(x);
    auto gy = grad.row(y);
    for (std::size_t k = 0; k < embeddings.cols; ++k) {
      gx[k] -= w * ey[k];
      gy[k] -= w * ex[k];
    }
  };

  for (const auto& q : quads) {
    const double d_pos = cosine_distance(embeddings.row(q.anchor), embeddings.row(q.positive));
    const double d_nf = cosine_distance(embeddings.row(q.anchor), embeddings.row(q.neg_fine));
    const double d_nc = cosine_distance(embeddings.row(q.anchor), embeddings.row(q.neg_coarse));
    if (d_pos - d_nf + margins.fine > 0.0) {
      add_pair(q.anchor, q.positive, scale);
      add_pair(q.anchor, q.neg_fine, -scale);
    }
    if (d_pos - d_nc + margins.coarse > 0.0) {
      add_pair(q.anchor, q.positive, scale);
      add_pair(q.anchor, q.neg_coarse, -scale);
    }
  }
  return grad;
}

}  // namespace hiermet
