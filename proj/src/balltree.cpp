#include "gazebar/balltree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gazebar/rng.hpp"

namespace gazebar {

double label_distance(const GazeLabel& a, const GazeLabel& b) noexcept {
  const double dp = a.pitch - b.pitch;
  const double dy = a.yaw - b.yaw;
  return std::sqrt(dp * dp + dy * dy);
}

namespace {

// Pruning slack that absorbs rounding in the triangle-inequality bound.
constexpr double kPruneSlack = 1e-12;

bool closer(const Neighbor& a, const Neighbor& b) noexcept {
  return a.distance < b.distance || (a.distance == b.distance && a.sample_id < b.sample_id);
}

bool eligible(const LabeledPoint& p, const LabeledPoint& anchor) noexcept {
  return p.subject_id != anchor.subject_id && p.sample_id != anchor.sample_id;
}

/// Bounded list of the best k candidates, kept sorted.
class CandidateList {
 public:
  explicit CandidateList(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  bool full() const noexcept { return items_.size() == k_; }
  const Neighbor& worst() const noexcept { return items_.back(); }

  void offer(const Neighbor& n) {
    if (full() && !closer(n, worst())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), n, closer);
    items_.insert(pos, n);
    if (items_.size() > k_) items_.pop_back();
  }

  std::vector<Neighbor> take() && { return std::move(items_); }

 private:
  std::size_t k_;
  std::vector<Neighbor> items_;
};

}  // namespace

LabelIndex LabelIndex::build(std::vector<LabeledPoint> points, std::size_t leaf_capacity) {
  if (points.empty()) throw std::invalid_argument("build_index: no labels");
  if (leaf_capacity == 0) throw std::invalid_argument("build_index: leaf_capacity must be positive");
  if (points.size() > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("build_index: too many labels");
  LabelIndex index;
  index.points_ = std::move(points);
  index.leaf_capacity_ = leaf_capacity;
  index.order_.resize(index.points_.size());
  std::iota(index.order_.begin(), index.order_.end(), 0u);
  index.build_node(0, static_cast<std::uint32_t>(index.points_.size()));
  return index;
}

std::int32_t LabelIndex::build_node(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();

  double sp = 0.0, sy = 0.0;
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-lo[0], -lo[1]};
  for (std::uint32_t i = begin; i < end; ++i) {
    const GazeLabel& g = points_[order_[i]].label;
    sp += g.pitch;
    sy += g.yaw;
    lo[0] = std::min(lo[0], g.pitch);
    hi[0] = std::max(hi[0], g.pitch);
    lo[1] = std::min(lo[1], g.yaw);
    hi[1] = std::max(hi[1], g.yaw);
  }
  const double count = static_cast<double>(end - begin);
  const GazeLabel center{sp / count, sy / count};
  double radius = 0.0;
  for (std::uint32_t i = begin; i < end; ++i) radius = std::max(radius, label_distance(center, points_[order_[i]].label));

  Node node;
  node.center_pitch = center.pitch;
  node.center_yaw = center.yaw;
  node.radius = radius;
  node.begin = begin;
  node.end = end;

  if (end - begin > leaf_capacity_) {
    const int axis = (hi[1] - lo[1]) > (hi[0] - lo[0]) ? 1 : 0;
    auto coord = [&](std::uint32_t p) { return axis == 0 ? points_[p].label.pitch : points_[p].label.yaw; };
    std::sort(order_.begin() + begin, order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
      const double ca = coord(a), cb = coord(b);
      return ca < cb || (ca == cb && a < b);
    });
    const std::uint32_t mid = begin + (end - begin) / 2;
    node.left = build_node(begin, mid);
    node.right = build_node(mid, end);
  }
  nodes_[static_cast<std::size_t>(id)] = node;
  return id;
}

PositiveSet LabelIndex::query_knn(const LabeledPoint& anchor, std::size_t k, QueryStats* stats) const {
  if (k == 0) throw std::invalid_argument("query_knn: k must be at least 1");
  CandidateList best(k);
  QueryStats local;

  // Depth-first, nearer child first.
  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    ++local.nodes_visited;
    if (best.full()) {
      const double lower = label_distance(anchor.label, GazeLabel{node.center_pitch, node.center_yaw}) - node.radius;
      if (lower > best.worst().distance + kPruneSlack) return;
    }
    if (node.is_leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const LabeledPoint& p = points_[order_[i]];
        if (!eligible(p, anchor)) continue;
        ++local.distance_evals;
        best.offer(Neighbor{p.sample_id, label_distance(anchor.label, p.label)});
      }
      return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    const double dl = label_distance(anchor.label, GazeLabel{l.center_pitch, l.center_yaw}) - l.radius;
    const double dr = label_distance(anchor.label, GazeLabel{r.center_pitch, r.center_yaw}) - r.radius;
    if (dl <= dr) {
      self(self, node.left);
      self(self, node.right);
    } else {
      self(self, node.right);
      self(self, node.left);
    }
  };
  visit(visit, 0);

  if (stats) *stats = local;
  PositiveSet out{anchor.sample_id, std::move(best).take()};
  if (out.neighbors.empty()) {
    throw NoPositiveError("no positive available for sample " + std::to_string(anchor.sample_id) + " (subject " +
                          std::to_string(anchor.subject_id) + ")");
  }
  return out;
}

PositiveSet brute_force_knn(std::span<const LabeledPoint> points, const LabeledPoint& anchor, std::size_t k) {
  if (k == 0) throw std::invalid_argument("brute_force_knn: k must be at least 1");
  std::vector<Neighbor> all;
  for (const auto& p : points) {
    if (eligible(p, anchor)) all.push_back(Neighbor{p.sample_id, label_distance(anchor.label, p.label)});
  }
  if (all.empty()) throw NoPositiveError("no positive available for sample " + std::to_string(anchor.sample_id));
  std::sort(all.begin(), all.end(), closer);
  if (all.size() > k) all.resize(k);
  return PositiveSet{anchor.sample_id, std::move(all)};
}

std::uint64_t draw_positive(const PositiveSet& positives, Rng& rng) {
  if (positives.neighbors.empty()) throw std::invalid_argument("draw_positive: empty positive set");
  return positives.neighbors[rng.below(positives.neighbors.size())].sample_id;
}

}  // namespace gazebar
