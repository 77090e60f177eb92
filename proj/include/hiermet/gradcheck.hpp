#pragma once

#include <string>

#include "hiermet/common.hpp"

namespace hiermet {

// Central finite-difference checks of the analytic gradients. The rank-based
// suites evaluate the loss with the batch's targets and correctness flags
// frozen, matching the detached-constant semantics of the backward pass.

struct GradcheckResult {
  std::string name;
  int trials = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

GradcheckResult gradcheck_rbl(std::uint32_t seed, int trials = 20);
GradcheckResult gradcheck_quadruplet(std::uint32_t seed, int trials = 20);
// standardize -> linear -> normalize -> rank-based loss, differentiated
// with respect to the layer weights and bias
GradcheckResult gradcheck_chain(std::uint32_t seed, int trials = 20);

}  // namespace hiermet
