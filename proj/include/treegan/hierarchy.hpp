// Copyright 2026 The TreeGAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Class hierarchy: a balanced rooted tree of named classes. The root sits at
// level 0 and is not a classification target; levels 1..K are.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace treegan {

using ClassId = std::size_t;

struct ClassNode {
  ClassId id = 0;
  std::string name;
  std::optional<ClassId> parent;
  int level = 0;

  bool operator==(const ClassNode&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ClassHierarchy {
 public:
  ClassHierarchy() = default;

  // Validates and builds a hierarchy from explicit nodes. Node ids must equal
  // their position. Throws std::invalid_argument on any violated invariant.
  static ClassHierarchy from_nodes(std::vector<ClassNode> nodes) {
    ClassHierarchy h;
    h.nodes_ = std::move(nodes);
    h.validate_and_index();
    return h;
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<ClassNode>& nodes() const { return nodes_; }
  const ClassNode& node(ClassId id) const {
    check_id(id);
    return nodes_[id];
  }
  const std::string& name(ClassId id) const { return node(id).name; }
  ClassId root() const { return root_; }

  // Number of classification levels (root excluded).
  int depth() const { return depth_; }

  const std::vector<ClassId>& leaves() const { return leaves_; }
  bool is_leaf(ClassId id) const {
    return id < nodes_.size() && nodes_[id].level == depth_ && depth_ > 0;
  }

  std::optional<ClassId> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  ClassId id_of(std::string_view name) const {
    auto id = find(name);
    if (!id) throw std::out_of_range("unknown class '" + std::string(name) + "'");
    return *id;
  }

  const std::vector<ClassId>& children(ClassId id) const {
    check_id(id);
    return children_[id];
  }

  // Classes at level k (1 <= k <= K), ordered by id.
  const std::vector<ClassId>& level_classes(int k) const {
    check_level(k);
    return levels_[static_cast<std::size_t>(k)];
  }

  std::size_t level_size(int k) const { return level_classes(k).size(); }

  // Position of a class within level_classes(node.level).
  std::size_t level_index(ClassId id) const {
    check_id(id);
    return level_pos_[id];
  }

  // a_k(y): the ancestor of leaf y at level k; a_K(y) = y.
  ClassId ancestor(ClassId leaf, int k) const {
    check_level(k);
    if (!is_leaf(leaf)) {
      throw std::invalid_argument("class " + std::to_string(leaf) +
                                  " is not a leaf");
    }
    ClassId cur = leaf;
    for (int l = depth_; l > k; --l) cur = *nodes_[cur].parent;
    return cur;
  }

  // (a_1(y), ..., a_K(y)).
  std::vector<ClassId> ancestor_path(ClassId leaf) const {
    std::vector<ClassId> path(static_cast<std::size_t>(depth_));
    for (int k = 1; k <= depth_; ++k) {
      path[static_cast<std::size_t>(k - 1)] = ancestor(leaf, k);
    }
    return path;
  }

  // One (parent, child) pair per non-root node, in child id order.
  std::vector<std::pair<ClassId, ClassId>> parent_child_pairs() const {
    std::vector<std::pair<ClassId, ClassId>> out;
    for (const auto& n : nodes_) {
      if (n.parent) out.emplace_back(*n.parent, n.id);
    }
    return out;
  }

  bool is_parent_child(ClassId p, ClassId c) const {
    return c < nodes_.size() && nodes_[c].parent && *nodes_[c].parent == p;
  }

  std::string path(ClassId id) const {
    std::vector<const std::string*> parts;
    for (std::optional<ClassId> cur = id; cur; cur = nodes_[*cur].parent) {
      parts.push_back(&nodes_[*cur].name);
    }
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      if (!out.empty()) out += '/';
      out += **it;
    }
    return out;
  }

  // Emits one path per line in id order; parse_hierarchy reads it back.
  std::string serialize() const {
    std::string out;
    for (const auto& n : nodes_) {
      out += path(n.id);
      out += '\n';
    }
    return out;
  }

  bool operator==(const ClassHierarchy& o) const { return nodes_ == o.nodes_; }

 private:
  void check_id(ClassId id) const {
    if (id >= nodes_.size()) {
      throw std::out_of_range("class id " + std::to_string(id) + " out of range");
    }
  }
  void check_level(int k) const {
    if (k < 1 || k > depth_) {
      throw std::out_of_range("level " + std::to_string(k) +
                              " outside 1.." + std::to_string(depth_));
    }
  }

  void validate_and_index() {
    if (nodes_.empty()) throw std::invalid_argument("hierarchy has no nodes");
    const std::size_t n = nodes_.size();
    std::optional<ClassId> root;
    by_name_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& node = nodes_[i];
      if (node.id != i) throw std::invalid_argument("node ids must equal their position");
      if (node.name.empty()) throw std::invalid_argument("empty class name");
      if (!by_name_.emplace(node.name, i).second) {
        throw std::invalid_argument("duplicate class name '" + node.name + "'");
      }
      if (!node.parent) {
        if (root) throw std::invalid_argument("more than one root");
        root = i;
      } else if (*node.parent >= n) {
        throw std::invalid_argument("node '" + node.name + "' has unknown parent");
      }
    }
    if (!root) throw std::invalid_argument("hierarchy has no root");
    root_ = *root;

    // Every node must reach the root within n parent hops.
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t hops = 0;
      ClassId cur = i;
      while (nodes_[cur].parent) {
        cur = *nodes_[cur].parent;
        if (++hops > n) {
          throw std::invalid_argument("cycle through node '" + nodes_[i].name + "'");
        }
      }
    }
    if (nodes_[root_].level != 0) throw std::invalid_argument("root level must be 0");
    for (const auto& node : nodes_) {
      if (node.parent && node.level != nodes_[*node.parent].level + 1) {
        throw std::invalid_argument("node '" + node.name +
                                    "' level is not parent level + 1");
      }
    }

    children_.assign(n, {});
    depth_ = 0;
    for (const auto& node : nodes_) {
      if (node.parent) children_[*node.parent].push_back(node.id);
      depth_ = std::max(depth_, node.level);
    }
    leaves_.clear();
    for (const auto& node : nodes_) {
      if (children_[node.id].empty() && node.id != root_) {
        if (node.level != depth_) {
          throw std::invalid_argument("leaf '" + node.name + "' at level " +
                                      std::to_string(node.level) +
                                      " but deepest level is " +
                                      std::to_string(depth_));
        }
        leaves_.push_back(node.id);
      }
    }
    levels_.assign(static_cast<std::size_t>(depth_) + 1, {});
    level_pos_.assign(n, 0);
    for (const auto& node : nodes_) {
      auto& lvl = levels_[static_cast<std::size_t>(node.level)];
      level_pos_[node.id] = lvl.size();
      lvl.push_back(node.id);
    }
  }

  std::vector<ClassNode> nodes_;
  std::map<std::string, ClassId> by_name_;
  std::vector<std::vector<ClassId>> children_;
  std::vector<std::vector<ClassId>> levels_;
  std::vector<std::size_t> level_pos_;
  std::vector<ClassId> leaves_;
  ClassId root_ = 0;
  int depth_ = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Parses the line format: one `root/child/.../name` path per line, `#`
// starting a comment, blank lines ignored. Ids follow file order.
inline ClassHierarchy parse_hierarchy(std::string_view text) {
  std::vector<ClassNode> nodes;
  std::map<std::string, ClassId, std::less<>> by_path;
  std::map<std::string, std::size_t, std::less<>> name_line;
  std::vector<std::size_t> line_of;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto slash = line.rfind('/');
    const std::string name(slash == std::string_view::npos ? line
                                                           : line.substr(slash + 1));
    if (name.empty()) throw ParseError(line_no, "empty class name in '" + std::string(line) + "'");
    if (auto it = name_line.find(name); it != name_line.end()) {
      throw ParseError(line_no, "duplicate class name '" + name +
                                    "' (first defined on line " +
                                    std::to_string(it->second) + ")");
    }

    ClassNode node;
    node.id = nodes.size();
    node.name = name;
    if (slash == std::string_view::npos) {
      if (!nodes.empty()) {
        throw ParseError(line_no, "second root '" + name + "'; every line after the first must be a path under the root");
      }
      node.level = 0;
    } else {
      if (nodes.empty()) {
        throw ParseError(line_no, "first node must be the root, got path '" + std::string(line) + "'");
      }
      const auto parent_path = line.substr(0, slash);
      auto it = by_path.find(parent_path);
      if (it == by_path.end()) {
        throw ParseError(line_no, "orphan reference: parent '" +
                                      std::string(parent_path) +
                                      "' is not defined on an earlier line");
      }
      node.parent = it->second;
      node.level = nodes[it->second].level + 1;
    }
    by_path.emplace(std::string(line), node.id);
    name_line.emplace(name, line_no);
    line_of.push_back(line_no);
    nodes.push_back(std::move(node));
  }
  if (nodes.empty()) throw ParseError(line_no, "hierarchy is empty");

  // Balance check reported against the first shallow leaf.
  std::vector<bool> has_child(nodes.size(), false);
  int depth = 0;
  for (const auto& n : nodes) {
    if (n.parent) has_child[*n.parent] = true;
    depth = std::max(depth, n.level);
  }
  for (const auto& n : nodes) {
    if (n.parent && !has_child[n.id] && n.level != depth) {
      throw ParseError(line_of[n.id], "unbalanced hierarchy: leaf '" + n.name +
                                          "' is at level " + std::to_string(n.level) +
                                          " but the deepest leaf is at level " +
                                          std::to_string(depth));
    }
  }
  return ClassHierarchy::from_nodes(std::move(nodes));
}

// Nine-node animal tree (two branch classes, six leaves) used as the default
// hierarchy throughout.
inline constexpr std::string_view kAnimalHierarchyText =
    "root\n"
    "root/canine\n"
    "root/canine/fox\n"
    "root/canine/wolf\n"
    "root/canine/dog\n"
    "root/feline\n"
    "root/feline/cat\n"
    "root/feline/lion\n"
    "root/feline/tiger\n";

}  // namespace treegan
