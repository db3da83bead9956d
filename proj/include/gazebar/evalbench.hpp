#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazebar/gradcheck.hpp"
#include "gazebar/pca.hpp"
#include "gazebar/trainer.hpp"

namespace gazebar {

struct TaskResult {
  std::string name;
  std::vector<double> seed_errors;  // mean test angular error per seed, degrees
  double mean = 0.0;
  double std = 0.0;  // sample std over seeds, 0 for a single seed

  nlohmann::json to_json() const;
};

/// Mean and sample standard deviation; std is 0 for fewer than two values.
std::pair<double, double> mean_and_std(const std::vector<double>& values);

/// Rejects shards sharing any subject id.
void require_disjoint_subjects(const Dataset& train_set, const Dataset& test_set);

/// Trains with seeds config.seed + 0 .. n_seeds-1 and evaluates each model
/// on `test_set`.
TaskResult run_task(const std::string& name, const Dataset& train_set, const Dataset& test_set,
                    const TrainConfig& config, std::size_t n_seeds);

struct LoadedTask {
  std::string name;
  Dataset train_set;
  Dataset test_set;
};

/// Branch subsets in the order of the ablation table: baseline, the three
/// singles, the three pairs, all.
std::array<BranchSet, 8> ablation_branch_sets();
std::string branch_label(const BranchSet& branches);

struct AblationRow {
  BranchSet branches;
  std::vector<TaskResult> tasks;
  double average = 0.0;
  /// (baseline - row) / baseline on the task averages.
  double relative_improvement = 0.0;
};

struct AblationGrid {
  std::vector<std::string> task_names;
  std::size_t n_seeds = 0;
  std::vector<AblationRow> rows;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

AblationGrid run_ablation(const std::vector<LoadedTask>& tasks, const TrainConfig& config, std::size_t n_seeds);

struct ProjectionRow {
  double x = 0.0;
  double y = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

struct Projection {
  Pca pca;
  std::vector<ProjectionRow> rows;
};

/// Extractor features of every sample, one row each.
std::vector<std::vector<double>> extract_features(const GazeNet& net, const Dataset& data);

/// 2-D PCA of the test-set features, centered.
Projection project_features(const GazeNet& net, const Dataset& data);

void write_projection_csv(const Projection& projection, const std::filesystem::path& path);
Projection export_projection(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                             const std::filesystem::path& out_csv);

/// max(|corr(x, yaw)|, |corr(y, yaw)|).
double yaw_correlation(const Projection& projection);

struct ModelGradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
  GradCheckOptions check;
};

/// Finite-difference check of the full three-branch loss on a freshly
/// initialized network and a synthetic batch with augmented views and
/// cross-subject positives.
GradCheckReport check_total_loss_gradient(const ModelGradCheckOptions& options = {});

}  // namespace gazebar
