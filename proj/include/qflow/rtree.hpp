#pragma once

// Bulk-loaded (sort-tile-recursive) R-tree over rectangles. Immutable after
// build; queries are safe to run concurrently. Query results are canonical
// (ascending id) so downstream reports stay deterministic.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "qflow/geometry.hpp"

namespace qflow::geom {

class SpatialIndex {
public:
  static constexpr std::size_t kFanout = 16;

  struct Entry {
    Rect rect;
    std::uint32_t id = 0;
  };

  SpatialIndex() = default;

  explicit SpatialIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
    build();
  }

  static SpatialIndex from_rects(const std::vector<Rect>& rects) {
    std::vector<Entry> es;
    es.reserve(rects.size());
    for (std::size_t i = 0; i < rects.size(); ++i)
      es.push_back({rects[i], static_cast<std::uint32_t>(i)});
    return SpatialIndex(std::move(es));
  }

  std::size_t size() const { return entries_.size(); }

  // ids whose stored rect intersects `r` (touching counts), ascending
  std::vector<std::uint32_t> query(const Rect& r) const {
    std::vector<std::uint32_t> out;
    if (nodes_.empty()) return out;
    collect(nodes_.size() - 1, r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  template <typename Fn>
  void visit(const Rect& r, Fn&& fn) const {
    for (std::uint32_t id : query(r)) fn(id);
  }

private:
  struct Node {
    Rect bbox = Rect::empty();
    std::uint32_t first = 0;  // first child node or first entry
    std::uint32_t count = 0;
    bool leaf = true;
  };

  void build() {
    nodes_.clear();
    if (entries_.empty()) return;
    // STR: slice by x-center, then sort slices by y-center, pack leaves
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      auto ca = a.rect.lo.x + a.rect.hi.x, cb = b.rect.lo.x + b.rect.hi.x;
      if (ca != cb) return ca < cb;
      return a.id < b.id;
    });
    const std::size_t n = entries_.size();
    const std::size_t leaves = (n + kFanout - 1) / kFanout;
    std::size_t slices = 1;
    while (slices * slices < leaves) ++slices;
    const std::size_t per_slice = slices * kFanout;
    for (std::size_t s = 0; s * per_slice < n; ++s) {
      auto b = entries_.begin() + static_cast<std::ptrdiff_t>(s * per_slice);
      auto e = entries_.begin() +
               static_cast<std::ptrdiff_t>(std::min(n, (s + 1) * per_slice));
      std::sort(b, e, [](const Entry& a, const Entry& c) {
        auto ca = a.rect.lo.y + a.rect.hi.y, cb = c.rect.lo.y + c.rect.hi.y;
        if (ca != cb) return ca < cb;
        return a.id < c.id;
      });
    }
    std::vector<std::uint32_t> level;  // node indices of the current level
    for (std::size_t i = 0; i < n; i += kFanout) {
      Node node;
      node.leaf = true;
      node.first = static_cast<std::uint32_t>(i);
      node.count = static_cast<std::uint32_t>(std::min(kFanout, n - i));
      for (std::uint32_t k = 0; k < node.count; ++k)
        node.bbox.include(entries_[node.first + k].rect);
      level.push_back(static_cast<std::uint32_t>(nodes_.size()));
      nodes_.push_back(node);
    }
    while (level.size() > 1) {
      std::vector<std::uint32_t> next;
      for (std::size_t i = 0; i < level.size(); i += kFanout) {
        Node node;
        node.leaf = false;
        node.first = level[i];
        node.count = static_cast<std::uint32_t>(std::min(kFanout, level.size() - i));
        for (std::uint32_t k = 0; k < node.count; ++k)
          node.bbox.include(nodes_[level[i] + k].bbox);
        next.push_back(static_cast<std::uint32_t>(nodes_.size()));
        nodes_.push_back(node);
      }
      level = std::move(next);
    }
  }

  void collect(std::size_t node_idx, const Rect& r,
               std::vector<std::uint32_t>& out) const {
    const Node& node = nodes_[node_idx];
    if (!node.bbox.intersects(r)) return;
    if (node.leaf) {
      for (std::uint32_t k = 0; k < node.count; ++k)
        if (entries_[node.first + k].rect.intersects(r))
          out.push_back(entries_[node.first + k].id);
      return;
    }
    for (std::uint32_t k = 0; k < node.count; ++k) collect(node.first + k, r, out);
  }

  std::vector<Entry> entries_;
  std::vector<Node> nodes_;
};

}  // namespace qflow::geom
