#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hiermet/matrix.hpp"

namespace hiermet {

// Loss over a batch of unit-norm embeddings: every pair gets a target
// distance read off the sorted batch-distance vector at the block of
// positions its rank owns, and wrongly placed pairs are pulled toward that
// target by squared error. Targets, spans and correctness flags are
// constants per batch; only the distances of wrong pairs carry gradient.

struct PairDistance {
  int i = 0;
  int j = 0;        // i < j, enumeration order (0,1), (0,2), ...
  double dist = 0;  // cosine distance, clamped to [0, 2]
};

struct PairEntry {
  int i = 0;
  int j = 0;
  double dist = 0;
  std::optional<int> rank;  // nullopt = undetermined, pair excluded
  bool included = false;
  int pos = -1;        // position among sorted included distances
  double target = 0;   // target distance of the pair's rank
  bool correct = false;
};

struct PairTable {
  std::vector<PairEntry> pairs;
  int included_count = 0;
};

struct RankSpan {
  int rank = 0;
  int start = 0;  // first sorted position owned by this rank
  int count = 0;
  double target = 0;
};

// Spans partition the sorted positions of included pairs, in ascending rank
// order over the ranks actually present in the batch.
struct RankSpans {
  std::vector<RankSpan> spans;

  const RankSpan* find(int rank) const {
    for (const auto& s : spans)
      if (s.rank == rank) return &s;
    return nullptr;
  }
};

// All i<j cosine distances. Rows must be unit-norm within 1e-6.
std::vector<PairDistance> pairwise_cosine_distances(const Matrix& embeddings);

// Sorts included distances (stable on the enumeration order for exact ties),
// carves spans per present rank, picks each span's median position as the
// rank's target, and flags a pair correct when any sorted position holding
// its exact distance value falls inside its rank's span.
std::pair<RankSpans, PairTable> assign_targets(
    const std::vector<PairDistance>& distances,
    const std::vector<std::optional<int>>& ranks);

struct RblResult {
  double loss = 0;
  PairTable table;
  RankSpans spans;
};

// ranks[p] aligns with the pair enumeration order of
// pairwise_cosine_distances.
RblResult rbl_forward(const Matrix& embeddings,
                      const std::vector<std::optional<int>>& ranks);

// d(loss)/d(embeddings) with the table's targets and flags held constant.
Matrix rbl_backward(const PairTable& table, const Matrix& embeddings);

}  // namespace hiermet
