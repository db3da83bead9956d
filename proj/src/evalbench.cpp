#include "gazebar/evalbench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "gazebar/augment.hpp"
#include "gazebar/balltree.hpp"
#include "gazebar/objective.hpp"
#include "gazebar/rng.hpp"
#include "gazebar/synthdata.hpp"

namespace gazebar {

using nlohmann::json;

json TaskResult::to_json() const {
  return {{"name", name}, {"seed_errors", seed_errors}, {"mean", mean}, {"std", std}};
}

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  if (values.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

void require_disjoint_subjects(const Dataset& train_set, const Dataset& test_set) {
  const std::set<std::uint64_t> seen(train_set.subject_ids.begin(), train_set.subject_ids.end());
  for (std::uint64_t s : test_set.subject_ids) {
    if (seen.count(s)) {
      throw std::invalid_argument("train and test shards share subject " + std::to_string(s));
    }
  }
}

TaskResult run_task(const std::string& name, const Dataset& train_set, const Dataset& test_set,
                    const TrainConfig& config, std::size_t n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("run_task: n_seeds must be at least 1");
  require_disjoint_subjects(train_set, test_set);
  TaskResult r;
  r.name = name;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    TrainConfig c = config;
    c.seed = config.seed + s;
    const TrainResult trained = train(c, train_set);
    r.seed_errors.push_back(infer(trained.checkpoint.net, test_set).mean_error_deg);
  }
  std::tie(r.mean, r.std) = mean_and_std(r.seed_errors);
  return r;
}

std::array<BranchSet, 8> ablation_branch_sets() {
  return {BranchSet{false, false, false}, BranchSet{true, false, false}, BranchSet{false, true, false},
          BranchSet{false, false, true},  BranchSet{true, true, false},  BranchSet{true, false, true},
          BranchSet{false, true, true},   BranchSet{true, true, true}};
}

std::string branch_label(const BranchSet& b) {
  std::string s = "L_ori";
  if (b.aug) s += "+L_aug";
  if (b.con) s += "+L_con";
  if (b.mmd) s += "+L_mmd";
  return s;
}

AblationGrid run_ablation(const std::vector<LoadedTask>& tasks, const TrainConfig& config, std::size_t n_seeds) {
  if (tasks.empty()) throw std::invalid_argument("run_ablation: need at least one task");
  AblationGrid grid;
  grid.n_seeds = n_seeds;
  for (const auto& t : tasks) grid.task_names.push_back(t.name);
  for (const BranchSet& b : ablation_branch_sets()) {
    TrainConfig c = config;
    c.branches = b;
    AblationRow row;
    row.branches = b;
    for (const auto& t : tasks) {
      row.tasks.push_back(run_task(t.name, t.train_set, t.test_set, c, n_seeds));
      row.average += row.tasks.back().mean;
    }
    row.average /= static_cast<double>(tasks.size());
    grid.rows.push_back(std::move(row));
  }
  const double base = grid.rows.front().average;
  for (auto& row : grid.rows) row.relative_improvement = base > 0.0 ? (base - row.average) / base : 0.0;
  return grid;
}

json AblationGrid::to_json() const {
  json rows_json = json::array();
  for (const auto& row : rows) {
    json t = json::array();
    for (const auto& task : row.tasks) t.push_back(task.to_json());
    rows_json.push_back({{"label", branch_label(row.branches)},
                         {"aug", row.branches.aug},
                         {"con", row.branches.con},
                         {"mmd", row.branches.mmd},
                         {"tasks", t},
                         {"average", row.average},
                         {"relative_improvement", row.relative_improvement}});
  }
  return {{"tasks", task_names}, {"n_seeds", n_seeds}, {"std_over", "seeds"}, {"rows", rows_json}};
}

std::string AblationGrid::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << std::left << std::setw(26) << "losses";
  for (const auto& name : task_names) out << std::setw(22) << name;
  out << std::setw(10) << "average" << "change\n";
  for (const auto& row : rows) {
    out << std::setw(26) << branch_label(row.branches);
    for (const auto& t : row.tasks) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << t.mean << " +- " << t.std;
      out << std::setw(22) << cell.str();
    }
    out << std::setw(10) << row.average << std::setprecision(2) << 100.0 * row.relative_improvement << "%\n"
        << std::setprecision(3);
  }
  out << "(+- is the sample std over " << n_seeds << " seeds; angular error in degrees)\n";
  return out.str();
}

std::vector<std::vector<double>> extract_features(const GazeNet& net, const Dataset& data) {
  std::vector<std::vector<double>> rows;
  rows.reserve(data.size());
  for (const auto& img : data.images) {
    const Tensor f = forward(net, img).features;
    rows.emplace_back(f.values().begin(), f.values().end());
  }
  return rows;
}

Projection project_features(const GazeNet& net, const Dataset& data) {
  data.validate();
  const auto features = extract_features(net, data);
  Projection p;
  p.pca = fit_pca(features, 2);
  p.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto xy = p.pca.project(features[i]);
    p.rows.push_back(ProjectionRow{xy[0], xy[1], data.labels[i].pitch, data.labels[i].yaw});
  }
  return p;
}

void write_projection_csv(const Projection& projection, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io, "cannot open " + path.string() + " for writing");
  out << "x,y,pitch,yaw\n";
  char line[160];
  for (const auto& r : projection.rows) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", r.x, r.y, r.pitch, r.yaw);
    out << line;
  }
  if (!out) throw FormatError(FormatErrc::io, "write failed for " + path.string());
}

Projection export_projection(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                             const std::filesystem::path& out_csv) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset test_set = load_dataset(data);
  Projection p = project_features(ckpt.net, test_set);
  write_projection_csv(p, out_csv);
  return p;
}

double yaw_correlation(const Projection& projection) {
  std::vector<double> x, y, yaw;
  for (const auto& r : projection.rows) {
    x.push_back(r.x);
    y.push_back(r.y);
    yaw.push_back(r.yaw);
  }
  return std::max(std::abs(pearson(x, yaw)), std::abs(pearson(y, yaw)));
}

GradCheckReport check_total_loss_gradient(const ModelGradCheckOptions& options) {
  if (options.batch_size < 2) throw std::invalid_argument("grad check needs a batch of at least 2");
  // Two subjects so every sample has a cross-subject positive.
  GenerateOptions gen;
  gen.seed = options.seed;
  gen.n_subjects = 2;
  gen.samples_per_subject = options.batch_size;
  gen.domain = domain_preset("bright-clean");
  const Dataset data = generate(gen);

  std::vector<LabeledPoint> points;
  for (std::size_t i = 0; i < data.size(); ++i) points.push_back(LabeledPoint{data.labels[i], i, data.subject_ids[i]});
  const LabelIndex index = LabelIndex::build(points);

  Rng aug_rng = Rng::stream(options.seed, "augment");
  Rng pos_rng = Rng::stream(options.seed, "positive");
  std::vector<Tensor> augmented;
  std::vector<BatchItem> batch(options.batch_size);
  augmented.reserve(options.batch_size);
  for (std::size_t k = 0; k < options.batch_size; ++k) {
    // Alternate subjects within the batch.
    const std::size_t i = (k % 2) * options.batch_size + k / 2;
    augmented.push_back(augment(data.images[i], AugmentConfig{}, aug_rng));
    const std::uint64_t pos = draw_positive(index.query_knn(points[i], 5), pos_rng);
    batch[k] = BatchItem{&data.images[i], data.labels[i], &augmented.back(), &data.images[pos], data.labels[pos]};
  }

  Rng init_rng = Rng::stream(options.seed, "init");
  GazeNet net = GazeNet::initialized(init_rng);
  ObjectiveOptions objective;
  // The bandwidth is held at its value for the unperturbed parameters.
  objective.mmd_sigma = evaluate_batch(net, batch, objective, false).mmd_sigma;
  net.zero_grad();
  objective.record_pattern = true;
  std::uint64_t last_pattern = 0;
  const LossFn loss = [&](bool with_grad) {
    const BatchResult r = evaluate_batch(net, batch, objective, with_grad);
    last_pattern = r.pattern;
    return r.report.l_total;
  };
  GradCheckOptions check = options.check;
  check.seed = options.seed;
  return grad_check(loss, parameter_refs(net), check, [&] { return last_pattern; });
}

}  // namespace gazebar
