#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gazebar/gaze.hpp"

namespace gazebar {

class Rng;

struct LabeledPoint {
  GazeLabel label;
  std::uint64_t sample_id = 0;
  std::uint64_t subject_id = 0;
};

struct Neighbor {
  std::uint64_t sample_id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Neighbors of one anchor, nearest first; equal distances ordered by
/// ascending sample_id. Never contains the anchor's subject.
struct PositiveSet {
  std::uint64_t anchor_id = 0;
  std::vector<Neighbor> neighbors;
};

/// Raised when every indexed point belongs to the anchor's subject.
class NoPositiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Euclidean distance in (pitch, yaw) space.
double label_distance(const GazeLabel& a, const GazeLabel& b) noexcept;

struct QueryStats {
  std::size_t distance_evals = 0;
  std::size_t nodes_visited = 0;
};

/// Exact k-nearest-neighbor index over gaze labels (ball tree).
///
/// Nodes split on the coordinate of largest spread at the median, with ties
/// ordered by insertion index, so construction is deterministic.
class LabelIndex {
 public:
  struct Node {
    double center_pitch = 0.0;
    double center_yaw = 0.0;
    double radius = 0.0;
    std::uint32_t begin = 0;  // range into the point order
    std::uint32_t end = 0;
    std::int32_t left = -1;   // -1 for leaves
    std::int32_t right = -1;

    bool is_leaf() const noexcept { return left < 0; }
  };

  static LabelIndex build(std::vector<LabeledPoint> points, std::size_t leaf_capacity = 16);

  /// The k eligible points nearest to `anchor.label`, excluding points of
  /// `anchor.subject_id` and the anchor's own sample_id. Fewer than k are
  /// returned only when fewer are eligible; none eligible throws NoPositiveError.
  PositiveSet query_knn(const LabeledPoint& anchor, std::size_t k, QueryStats* stats = nullptr) const;

  std::span<const LabeledPoint> points() const noexcept { return points_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  /// Point indices in tree order; node ranges index into this.
  std::span<const std::uint32_t> order() const noexcept { return order_; }
  std::size_t leaf_capacity() const noexcept { return leaf_capacity_; }

 private:
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end);

  std::vector<LabeledPoint> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_capacity_ = 16;
};

/// Linear scan with the same exclusion and tie rules as LabelIndex::query_knn.
PositiveSet brute_force_knn(std::span<const LabeledPoint> points, const LabeledPoint& anchor, std::size_t k);

/// Uniform choice among the returned neighbors.
std::uint64_t draw_positive(const PositiveSet& positives, Rng& rng);

}  // namespace gazebar
