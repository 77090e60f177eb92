#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hiermet/label_tree.hpp"
#include "hiermet/matrix.hpp"

namespace hiermet {

// Mean silhouette coefficient (b - a) / max(a, b) under cosine distance.
// a = mean distance to same-cluster points, b = mean distance to the nearest
// other cluster. Singleton clusters contribute 0. Throws when fewer than two
// distinct clusters exist.
double silhouette_cosine(const Matrix& points, const std::vector<int>& cluster_ids);
double silhouette_cosine(const Matrix& points, const std::vector<std::string>& labels);

// One silhouette per hierarchy level (cluster = label prefix of that depth)
// plus their mean. per_level[k] scores prefix depth k+1, so index 0 is the
// coarsest level and the last entry the finest. A level with fewer than two
// distinct labels is unavailable (nullopt) and left out of the average.
// Samples whose label is too short for a level are skipped at that level.
struct SilhouetteReport {
  std::vector<std::optional<double>> per_level;
  double average = 0.0;
};

SilhouetteReport multilevel_silhouette(const Matrix& points,
                                       const std::vector<LabelPath>& labels);

// Tracks the best validation score; stops after `patience` consecutive
// epochs without strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience = 20) : patience_(patience) {
    if (patience < 1) throw ValidationError("patience must be at least 1");
  }

  struct Decision {
    bool improved = false;
    bool stop = false;
  };

  Decision update(double score);

  double best_score() const { return best_; }
  int epochs_since_improvement() const { return stale_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

}  // namespace hiermet
