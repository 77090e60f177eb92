#pragma once

#include <vector>

#include "hiermet/dataio.hpp"
#include "hiermet/label_tree.hpp"

namespace hiermet {

enum class BatchMode { Balanced, Unconstrained };

// Batches of dataset row indices drawn from the training split. In balanced
// mode every batch's induced pair set realizes every rank of the training
// rank map at least once; unconstrained batches are plain shuffled chunks.
struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
  BatchMode mode = BatchMode::Balanced;
  std::uint32_t seed = 0;
};

// Greedy per batch: seed a rank-covering skeleton around a leaf class with
// at least two training examples, then fill the remaining slots uniformly at
// random. Throws a coverage error naming the first rank with no realizable
// training pair. Batch count is ceil(train size / batch_size).
BatchPlan plan_balanced(const Dataset& dataset, const RankMap& rank_map,
                        std::size_t batch_size, std::uint32_t seed);

// Uniform shuffle chopped into consecutive chunks; a trailing chunk smaller
// than 2 is dropped.
BatchPlan plan_unconstrained(const Dataset& dataset, std::size_t batch_size,
                             std::uint32_t seed);

}  // namespace hiermet
