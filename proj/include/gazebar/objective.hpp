#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gazebar/gaze.hpp"
#include "gazebar/gradcheck.hpp"
#include "gazebar/losses.hpp"
#include "gazebar/model.hpp"

namespace gazebar {

/// Which auxiliary terms take part. The augmented forward pass runs when
/// either `aug` or `mmd` is on, since the MMD term compares original and
/// augmented features.
struct BranchSet {
  bool aug = true;
  bool con = true;
  bool mmd = true;

  bool needs_augmented() const noexcept { return aug || mmd; }
  friend bool operator==(const BranchSet&, const BranchSet&) = default;
};

struct BatchItem {
  const Tensor* image = nullptr;
  GazeLabel label;
  const Tensor* augmented = nullptr;  // same content, photometrically perturbed
  const Tensor* positive = nullptr;   // cross-subject neighbor; null when none was found
  GazeLabel positive_label;
};

struct ObjectiveOptions {
  BranchSet branches;
  LossWeights weights;
  /// Kernel bandwidth for the MMD term; the median heuristic over the batch
  /// features is used when unset. Either way it is a constant for gradients.
  std::optional<double> mmd_sigma;
  /// Fill BatchResult::pattern.
  bool record_pattern = false;
};

struct BatchResult {
  LossReport report;
  double mmd_sigma = 0.0;
  std::size_t contrast_pairs = 0;
  /// Hash of every branch choice the loss depends on: ReLU masks, pooling
  /// winners, and the signs inside the absolute-value losses. Two parameter
  /// settings with equal patterns lie on the same smooth piece.
  std::uint64_t pattern = 0;
};

/// Weighted loss
///   l_ori + la l_aug + lm l_mmd + lc l_con
/// over one batch, all branches through the same `net`. With
/// `accumulate_grad` the parameter gradients of l_total are added to the
/// network's gradient buffers.
BatchResult evaluate_batch(GazeNet& net, std::span<const BatchItem> batch, const ObjectiveOptions& options,
                           bool accumulate_grad);

/// ParamRefs over every weight and bias of the network, for grad_check.
std::vector<ParamRef> parameter_refs(GazeNet& net);

}  // namespace gazebar
