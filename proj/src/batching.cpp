#include "hiermet/batching.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace hiermet {

namespace {

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

BatchPlan plan_balanced(const Dataset& dataset, const RankMap& rank_map,
                        std::size_t batch_size, std::uint32_t seed) {
  const auto train = dataset.rows_in(Split::Train);
  if (train.size() < 2)
    throw ValidationError("balanced batching needs at least 2 training examples");
  const std::size_t effective_size = std::min(batch_size, train.size());
  if (effective_size < 2) throw ValidationError("batch size must be at least 2");

  // Coverage is over every rank the taxonomy admits (0..height), so a
  // dataset that cannot realize a rank fails loudly instead of silently
  // training on a trivial hierarchy.
  const int num_ranks = static_cast<int>(rank_map.tree_height()) + 1;

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs_by_rank(num_ranks);
  for (std::size_t a = 0; a < train.size(); ++a) {
    for (std::size_t b = a + 1; b < train.size(); ++b) {
      auto r = rank_map.rank(dataset.labels[train[a]], dataset.labels[train[b]]);
      if (r) pairs_by_rank[*r].push_back({train[a], train[b]});
    }
  }
  for (int r = 0; r < num_ranks; ++r) {
    if (pairs_by_rank[r].empty())
      throw ValidationError("training split has no pair of rank " +
                            std::to_string(r) + "; balanced batches are impossible");
  }

  Rng rng(seed);
  BatchPlan plan;
  plan.mode = BatchMode::Balanced;
  plan.seed = seed;

  const std::size_t num_batches = (train.size() + effective_size - 1) / effective_size;
  for (std::size_t bi = 0; bi < num_batches; ++bi) {
    std::vector<std::size_t> batch;
    std::set<std::size_t> members;
    auto add = [&](std::size_t row) {
      if (members.insert(row).second) batch.push_back(row);
    };

    // skeleton: two examples of one leaf class cover rank 0, then one
    // partner per remaining rank relative to that leaf where possible
    const auto& rank0 = pairs_by_rank[0];
    const auto [s0, s1] = rank0[uniform_index(rng, rank0.size())];
    add(s0);
    add(s1);
    const LabelPath& spine = dataset.labels[s0];

    for (int r = 1; r < num_ranks; ++r) {
      bool covered = false;
      for (std::size_t m : batch) {
        for (std::size_t m2 : batch) {
          if (m < m2 && rank_map.rank(dataset.labels[m], dataset.labels[m2]) == r) {
            covered = true;
            break;
          }
        }
        if (covered) break;
      }
      if (covered) continue;

      std::vector<std::size_t> partners;
      for (std::size_t row : train) {
        if (members.count(row)) continue;
        if (rank_map.rank(spine, dataset.labels[row]) == r) partners.push_back(row);
      }
      if (!partners.empty() && batch.size() < effective_size) {
        add(partners[uniform_index(rng, partners.size())]);
        continue;
      }
      // no partner for this spine; fall back to any training pair of rank r
      const auto& candidates = pairs_by_rank[r];
      const auto [p0, p1] = candidates[uniform_index(rng, candidates.size())];
      add(p0);
      add(p1);
      if (batch.size() > effective_size)
        throw ValidationError("batch size " + std::to_string(effective_size) +
                              " is too small to cover all " +
                              std::to_string(num_ranks) + " ranks");
    }

    // fill the remaining slots uniformly, no duplicates within the batch
    std::vector<std::size_t> rest;
    for (std::size_t row : train)
      if (!members.count(row)) rest.push_back(row);
    shuffle_indices(rest, rng);
    for (std::size_t k = 0; batch.size() < effective_size && k < rest.size(); ++k)
      add(rest[k]);

    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

BatchPlan plan_unconstrained(const Dataset& dataset, std::size_t batch_size,
                             std::uint32_t seed) {
  auto train = dataset.rows_in(Split::Train);
  if (train.size() < 2)
    throw ValidationError("need at least 2 training examples");
  if (batch_size < 2) throw ValidationError("batch size must be at least 2");

  Rng rng(seed);
  shuffle_indices(train, rng);

  BatchPlan plan;
  plan.mode = BatchMode::Unconstrained;
  plan.seed = seed;
  for (std::size_t start = 0; start < train.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, train.size());
    if (end - start < 2) break;  // drop a trailing chunk of one
    plan.batches.emplace_back(train.begin() + start, train.begin() + end);
  }
  return plan;
}

}  // namespace hiermet
