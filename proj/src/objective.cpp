#include "gazebar/objective.hpp"

#include <stdexcept>
#include <string>

namespace gazebar {

namespace {

Tensor label_tensor(const GazeLabel& g) { return Tensor(Shape{2}, {g.pitch, g.yaw}); }

Tensor scaled(const Tensor& t, double s) {
  Tensor out = t;
  for (double& v : out.values()) v *= s;
  return out;
}

class PatternHash {
 public:
  void add(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xff;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add_signs(const Tensor& t) noexcept {
    std::uint64_t word = 0;
    std::size_t bits = 0;
    for (double v : t.values()) {
      word = (word << 1) | (v > 0.0 ? 1u : 0u);
      if (++bits == 64) {
        add(word);
        word = 0;
        bits = 0;
      }
    }
    add(word);
  }
  void add(const ForwardCache& c) noexcept {
    add_signs(c.conv1_pre);
    add_signs(c.conv2_pre);
    add_signs(c.dense1_pre);
    for (std::size_t i : c.pool1.argmax) add(i);
    for (std::size_t i : c.pool2.argmax) add(i);
  }
  void add_residual_signs(const Tensor& pred, const GazeLabel& target) noexcept {
    add(static_cast<std::uint64_t>((pred[0] > target.pitch) * 2 + (pred[0] < target.pitch)));
    add(static_cast<std::uint64_t>((pred[1] > target.yaw) * 2 + (pred[1] < target.yaw)));
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

BatchResult evaluate_batch(GazeNet& net, std::span<const BatchItem> batch, const ObjectiveOptions& options,
                           bool accumulate_grad) {
  if (batch.empty()) throw std::invalid_argument("evaluate_batch: empty batch");
  options.weights.validate();
  const BranchSet& br = options.branches;
  const std::size_t n = batch.size();

  std::vector<Tensor> targets;
  targets.reserve(n);
  for (const auto& item : batch) targets.push_back(label_tensor(item.label));

  // Original branch.
  std::vector<ForwardCache> ori_cache(n);
  std::vector<Tensor> ori_gaze(n), ori_feat(n);
  for (std::size_t i = 0; i < n; ++i) {
    NetOutput out = forward(net, *batch[i].image, ori_cache[i]);
    ori_gaze[i] = std::move(out.gaze);
    ori_feat[i] = std::move(out.features);
  }

  // Augmentation branch.
  std::vector<ForwardCache> aug_cache;
  std::vector<Tensor> aug_gaze, aug_feat;
  if (br.needs_augmented()) {
    aug_cache.resize(n);
    aug_gaze.resize(n);
    aug_feat.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!batch[i].augmented) throw std::invalid_argument("evaluate_batch: augmented image missing");
      NetOutput out = forward(net, *batch[i].augmented, aug_cache[i]);
      aug_gaze[i] = std::move(out.gaze);
      aug_feat[i] = std::move(out.features);
    }
  }

  // Contrast branch: only items that carry a positive.
  std::vector<std::size_t> con_items;
  std::vector<ForwardCache> con_cache;
  std::vector<Tensor> con_gaze;
  if (br.con) {
    for (std::size_t i = 0; i < n; ++i) {
      if (batch[i].positive) con_items.push_back(i);
    }
    con_cache.resize(con_items.size());
    con_gaze.resize(con_items.size());
    for (std::size_t k = 0; k < con_items.size(); ++k) {
      con_gaze[k] = forward(net, *batch[con_items[k]].positive, con_cache[k]).gaze;
    }
  }

  const bool g = accumulate_grad;
  BatchResult result;
  LossReport parts;
  std::vector<Tensor> d_ori, d_aug, d_feat_ori, d_feat_aug, d_con_con, d_con_ori;
  parts.l_ori = l1_gaze(targets, ori_gaze, g ? &d_ori : nullptr);
  if (br.aug) parts.l_aug = l1_gaze(targets, aug_gaze, g ? &d_aug : nullptr);
  if (br.mmd) {
    result.mmd_sigma = options.mmd_sigma ? *options.mmd_sigma : median_bandwidth(ori_feat, aug_feat);
    parts.l_mmd = mmd(ori_feat, aug_feat, result.mmd_sigma, g ? &d_feat_ori : nullptr, g ? &d_feat_aug : nullptr);
  }
  if (br.con) {
    std::vector<ContrastPair> pairs;
    pairs.reserve(con_items.size());
    for (std::size_t k = 0; k < con_items.size(); ++k) {
      const BatchItem& item = batch[con_items[k]];
      pairs.push_back(ContrastPair{&con_gaze[k], &ori_gaze[con_items[k]], item.positive_label, item.label});
    }
    parts.l_con = contrast_loss(pairs, g ? &d_con_con : nullptr, g ? &d_con_ori : nullptr);
    result.contrast_pairs = pairs.size();
  }
  result.report = total_loss(parts, options.weights);
  if (options.record_pattern) {
    PatternHash ph;
    for (std::size_t i = 0; i < n; ++i) {
      ph.add(ori_cache[i]);
      ph.add_residual_signs(ori_gaze[i], batch[i].label);
    }
    for (std::size_t i = 0; i < aug_cache.size(); ++i) {
      ph.add(aug_cache[i]);
      if (br.aug) ph.add_residual_signs(aug_gaze[i], batch[i].label);
    }
    for (std::size_t k = 0; k < con_items.size(); ++k) {
      ph.add(con_cache[k]);
      const BatchItem& item = batch[con_items[k]];
      Tensor diff = con_gaze[k];
      diff[0] -= ori_gaze[con_items[k]][0];
      diff[1] -= ori_gaze[con_items[k]][1];
      ph.add_residual_signs(diff, GazeLabel{item.positive_label.pitch - item.label.pitch,
                                            item.positive_label.yaw - item.label.yaw});
    }
    result.pattern = ph.value();
  }
  if (!g) return result;

  const LossWeights& w = options.weights;
  std::vector<Tensor> ori_grad = d_ori;
  if (br.con) {
    for (std::size_t k = 0; k < con_items.size(); ++k) {
      Tensor& dst = ori_grad[con_items[k]];
      for (std::size_t c = 0; c < 2; ++c) dst[c] += w.lambda_c * d_con_ori[k][c];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    backward(net, ori_cache[i], ori_grad[i], br.mmd ? scaled(d_feat_ori[i], w.lambda_m) : Tensor());
  }
  if (br.needs_augmented()) {
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor grad_gaze = br.aug ? scaled(d_aug[i], w.lambda_a) : Tensor(Shape{2});
      backward(net, aug_cache[i], grad_gaze, br.mmd ? scaled(d_feat_aug[i], w.lambda_m) : Tensor());
    }
  }
  for (std::size_t k = 0; k < con_items.size(); ++k) {
    backward(net, con_cache[k], scaled(d_con_con[k], w.lambda_c));
  }
  return result;
}

std::vector<ParamRef> parameter_refs(GazeNet& net) {
  std::vector<ParamRef> refs;
  const char* names[] = {"conv1", "conv2", "dense1", "head"};
  std::size_t i = 0;
  for (LayerParams* l : net.layers()) {
    const std::string base = i < 4 ? names[i] : "layer" + std::to_string(i);
    refs.push_back(ParamRef{base + ".weights", &l->weights, &l->grad_weights});
    refs.push_back(ParamRef{base + ".bias", &l->bias, &l->grad_bias});
    ++i;
  }
  return refs;
}

}  // namespace gazebar
