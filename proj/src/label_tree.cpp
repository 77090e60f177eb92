#include "hiermet/label_tree.hpp"

#include <algorithm>

namespace hiermet {

LabelPath LabelPath::parse(const std::string& text) {
  std::vector<std::string> segs;
  std::string current;
  for (char c : text) {
    if (c == '/') {
      if (current.empty())
        throw ValidationError("label path '" + text + "' has an empty segment");
      segs.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (current.empty())
    throw ValidationError("label path '" + text + "' has an empty segment");
  segs.push_back(current);
  return LabelPath(std::move(segs));
}

std::string LabelPath::str() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out.push_back('/');
    out += segments[i];
  }
  return out;
}

LabelPath LabelPath::prefix(std::size_t levels) const {
  LabelPath p;
  p.segments.assign(segments.begin(),
                    segments.begin() + std::min(levels, segments.size()));
  return p;
}

namespace {

void validate_path(const LabelPath& path) {
  if (path.segments.empty()) throw ValidationError("empty label path");
  for (const auto& seg : path.segments) {
    if (seg.empty())
      throw ValidationError("label path '" + path.str() + "' has an empty segment");
    if (seg.find('/') != std::string::npos)
      throw ValidationError("label '" + seg + "' contains '/'");
  }
}

}  // namespace

LabelTree LabelTree::build(const std::vector<LabelPath>& paths) {
  if (paths.empty()) throw ValidationError("cannot build a tree from no paths");

  LabelTree tree;
  tree.nodes_.push_back(Node{"", -1, 0});  // root

  for (const auto& path : paths) {
    validate_path(path);
    tree.height_ = std::max(tree.height_, path.depth());
    int parent = 0;
    for (const auto& seg : path.segments) {
      // sibling labels are unique by construction
      auto key = std::make_pair(parent, seg);
      auto it = tree.child_index_.find(key);
      if (it == tree.child_index_.end()) {
        int id = static_cast<int>(tree.nodes_.size());
        tree.nodes_.push_back(Node{seg, parent, tree.nodes_[parent].level + 1});
        tree.child_index_.emplace(key, id);
        parent = id;
      } else {
        parent = it->second;
      }
    }
  }
  return tree;
}

std::size_t LabelTree::count_at_level(int level) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(),
                    [&](const Node& n) { return n.level == level; }));
}

int LabelTree::find(const LabelPath& path) const {
  int current = 0;
  for (const auto& seg : path.segments) {
    auto it = child_index_.find(std::make_pair(current, seg));
    if (it == child_index_.end()) return -1;
    current = it->second;
  }
  return current;
}

bool LabelTree::contains(const LabelPath& path) const { return find(path) >= 0; }

std::optional<int> LabelTree::pair_rank(const LabelPath& a, const LabelPath& b) const {
  if (find(a) < 0)
    throw ValidationError("path '" + a.str() + "' is not in the tree");
  if (find(b) < 0)
    throw ValidationError("path '" + b.str() + "' is not in the tree");

  const std::size_t overlap = std::min(a.depth(), b.depth());
  for (std::size_t i = 0; i < overlap; ++i) {
    if (a.segments[i] != b.segments[i])
      return static_cast<int>(height_) - static_cast<int>(i);
  }
  // One path is a prefix of the other. Only two identical full-depth labels
  // pin the LCA; anything involving an incomplete label stays open.
  if (a.depth() == height_ && b.depth() == height_) return 0;
  return std::nullopt;
}

RankMap::RankMap(const LabelTree& tree, const std::vector<LabelPath>& paths) {
  if (paths.empty()) throw ValidationError("cannot build a rank map from no paths");
  height_ = tree.height();

  std::vector<LabelPath> unique = paths;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  int max_rank = 0;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    for (std::size_t j = i; j < unique.size(); ++j) {
      auto r = tree.pair_rank(unique[i], unique[j]);
      table_.emplace(std::make_pair(unique[i].str(), unique[j].str()), r);
      if (r) max_rank = std::max(max_rank, *r);
    }
  }
  num_ranks_ = max_rank + 1;
}

std::optional<int> RankMap::rank(const LabelPath& a, const LabelPath& b) const {
  auto key = std::make_pair(a.str(), b.str());
  if (key.first > key.second) std::swap(key.first, key.second);
  auto it = table_.find(key);
  if (it == table_.end())
    throw ValidationError("pair (" + a.str() + ", " + b.str() +
                          ") is not covered by the rank map");
  return it->second;
}

LabelTree build_tree(const std::vector<LabelPath>& paths) {
  return LabelTree::build(paths);
}

RankMap build_rank_map(const LabelTree& tree, const std::vector<LabelPath>& paths) {
  return RankMap(tree, paths);
}

}  // namespace hiermet
