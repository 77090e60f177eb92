#pragma once

#include <vector>

#include "hiermet/label_tree.hpp"
#include "hiermet/matrix.hpp"

namespace hiermet {

// Two-hinge baseline over (anchor, positive, same-coarse negative,
// different-coarse negative) built from a two-level taxonomy.

struct Quadruplet {
  int anchor = 0;
  int positive = 0;    // same full label as anchor
  int neg_fine = 0;    // same coarse label, different fine label
  int neg_coarse = 0;  // different coarse label
};

struct Margins {
  double fine = 0.25;
  double coarse = 0.5;

  void validate() const {
    if (!(fine >= 0.0) || !(coarse > fine))
      throw ValidationError("margins must satisfy coarse > fine >= 0");
  }
};

// One quadruplet per anchor that has at least one partner of every role;
// partners are drawn uniformly. Anchors missing a role are skipped, so the
// result may be empty. Labels must be two-level full paths.
std::vector<Quadruplet> mine_quadruplets(const std::vector<LabelPath>& labels,
                                         std::uint32_t seed);

// mean over quadruplets of
//   max(0, d(a,p) - d(a,n_fine) + m_fine) + max(0, d(a,p) - d(a,n_coarse) + m_coarse)
double quad_forward(const Matrix& embeddings, const std::vector<Quadruplet>& quads,
                    const Margins& margins);

// Subgradient; terms with an inactive hinge contribute nothing.
Matrix quad_backward(const Matrix& embeddings, const std::vector<Quadruplet>& quads,
                     const Margins& margins);

}  // namespace hiermet
