#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazebar/augment.hpp"
#include "gazebar/checkpoint.hpp"
#include "gazebar/losses.hpp"
#include "gazebar/objective.hpp"
#include "gazebar/shard.hpp"

namespace gazebar {

/// One cross-domain task for the ablation harness.
struct TaskSpec {
  std::string name;
  std::filesystem::path train_data;
  std::filesystem::path test_data;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::size_t epochs = 30;
  /// Stop after this many optimizer steps; 0 means run all epochs.
  std::size_t max_steps = 0;
  LossWeights weights;
  AugmentConfig augment;
  std::size_t knn_k = 5;
  std::size_t leaf_capacity = 16;
  BranchSet branches;
  std::filesystem::path train_data;
  std::filesystem::path test_data;
  std::filesystem::path out_dir;
  /// Wall-clock seconds in the metrics log; off keeps logs byte-reproducible.
  bool log_wall_time = false;
  std::vector<TaskSpec> tasks;

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected. Relative paths resolve against `base_dir`.
  static TrainConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static TrainConfig load(const std::filesystem::path& path);
};

struct MetricRecord {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  LossReport losses;
  double wall_time = 0.0;

  nlohmann::json to_json() const;
};

/// Raised when a loss or network output turns non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<std::size_t> batch_ids)
      : std::runtime_error(what), batch_ids_(std::move(batch_ids)) {}
  const std::vector<std::size_t>& batch_ids() const noexcept { return batch_ids_; }

 private:
  std::vector<std::size_t> batch_ids_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricRecord> metrics;
  /// Samples whose contrast term was skipped because no positive existed.
  std::size_t missing_positives = 0;
};

/// Called after every optimizer step with the step number (1-based).
using StepObserver = std::function<void(std::uint64_t step, const GazeNet& net)>;

/// Three-branch training on an in-memory shard. Randomness comes from
/// separate streams of config.seed ("init", "shuffle", "augment",
/// "positive"); disabled branches draw nothing from their streams.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const StepObserver& observer = {});

/// Loads config.train_data, trains, writes out_dir/checkpoint.gbc and
/// out_dir/metrics.jsonl.
TrainResult train(const TrainConfig& config);

void write_metrics_jsonl(const std::vector<MetricRecord>& metrics, const std::filesystem::path& path);

struct Inference {
  std::vector<GazeLabel> predictions;
  std::vector<double> errors_deg;
  double mean_error_deg = 0.0;
};

/// Original branch only.
Inference infer(const GazeNet& net, const Dataset& data);

}  // namespace gazebar
