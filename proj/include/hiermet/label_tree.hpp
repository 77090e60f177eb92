#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hiermet/common.hpp"

namespace hiermet {

// One hierarchical label: segments from the root-most level down. A path
// shorter than the tree height is an incomplete label (the finer levels are
// unknown). Serialized form is '/'-joined; '/' is forbidden inside a segment.
struct LabelPath {
  std::vector<std::string> segments;

  LabelPath() = default;
  explicit LabelPath(std::vector<std::string> segs) : segments(std::move(segs)) {}

  static LabelPath parse(const std::string& text);
  std::string str() const;

  std::size_t depth() const { return segments.size(); }
  LabelPath prefix(std::size_t levels) const;

  bool operator==(const LabelPath& other) const = default;
  auto operator<=>(const LabelPath& other) const = default;
};

// Rooted taxonomy built from label paths. The root sits at level 0 and
// carries no label; every other node has exactly one parent. Height is the
// maximum path depth seen at build time; shorter paths are treated as
// incomplete labels and only create internal nodes.
class LabelTree {
 public:
  struct Node {
    std::string label;
    int parent = -1;
    int level = 0;
  };

  static LabelTree build(const std::vector<LabelPath>& paths);

  std::size_t height() const { return height_; }
  std::size_t node_count() const { return nodes_.size(); }  // includes root
  std::size_t count_at_level(int level) const;
  bool contains(const LabelPath& path) const;

  // L - depth(LCA), so 0 means identical full-depth labels and larger values
  // mean the lowest common ancestor sits higher in the tree. Returns nullopt
  // when an incomplete label leaves the answer undecidable.
  std::optional<int> pair_rank(const LabelPath& a, const LabelPath& b) const;

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
  std::map<std::pair<int, std::string>, int> child_index_;
  std::size_t height_ = 0;

  int find(const LabelPath& path) const;
};

// Precomputed pair_rank lookup over a fixed set of paths.
class RankMap {
 public:
  RankMap(const LabelTree& tree, const std::vector<LabelPath>& paths);

  // nullopt = undetermined (incomplete labels). Throws if either path was
  // not in the set the map was built from.
  std::optional<int> rank(const LabelPath& a, const LabelPath& b) const;

  int num_ranks() const { return num_ranks_; }    // R = 1 + max observed rank
  std::size_t tree_height() const { return height_; }

 private:
  std::map<std::pair<std::string, std::string>, std::optional<int>> table_;
  int num_ranks_ = 1;
  std::size_t height_ = 0;
};

LabelTree build_tree(const std::vector<LabelPath>& paths);
RankMap build_rank_map(const LabelTree& tree, const std::vector<LabelPath>& paths);

}  // namespace hiermet
