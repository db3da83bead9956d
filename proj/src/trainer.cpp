#include "gazebar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <optional>

#include "gazebar/adam.hpp"
#include "gazebar/balltree.hpp"
#include "gazebar/rng.hpp"

namespace gazebar {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (branches.mmd && batch_size < 2) throw std::invalid_argument("batch_size must be at least 2 when mmd is enabled");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (knn_k < 1) throw std::invalid_argument("knn_k must be at least 1");
  if (leaf_capacity < 1) throw std::invalid_argument("leaf_capacity must be at least 1");
  weights.validate();
  augment.validate();
}

namespace {

json range_json(const FactorRange& r) { return json::array({r.lo, r.hi}); }

FactorRange range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("factor range must be [lo, hi]");
  return FactorRange{j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument("unknown " + where + " field '" + key + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

json TrainConfig::to_json() const {
  json br = json::array();
  if (branches.aug) br.push_back("aug");
  if (branches.con) br.push_back("con");
  if (branches.mmd) br.push_back("mmd");
  json t = json::array();
  for (const auto& task : tasks) {
    t.push_back({{"name", task.name}, {"train", task.train_data.string()}, {"test", task.test_data.string()}});
  }
  return {{"seed", seed},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"loss_weights", {{"lambda_a", weights.lambda_a}, {"lambda_m", weights.lambda_m}, {"lambda_c", weights.lambda_c}}},
          {"augment",
           {{"brightness", range_json(augment.brightness)},
            {"contrast", range_json(augment.contrast)},
            {"saturation", range_json(augment.saturation)}}},
          {"knn_k", knn_k},
          {"leaf_capacity", leaf_capacity},
          {"branches", br},
          {"train_data", train_data.string()},
          {"test_data", test_data.string()},
          {"out_dir", out_dir.string()},
          {"log_wall_time", log_wall_time},
          {"tasks", t}};
}

TrainConfig TrainConfig::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j,
                 {"seed", "batch_size", "learning_rate", "epochs", "max_steps", "loss_weights", "augment", "knn_k",
                  "leaf_capacity", "branches", "train_data", "test_data", "out_dir", "log_wall_time", "tasks"},
                 "config");
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  if (j.contains("loss_weights")) {
    const json& w = j["loss_weights"];
    reject_unknown(w, {"lambda_a", "lambda_m", "lambda_c"}, "loss_weights");
    c.weights.lambda_a = w.value("lambda_a", 1.0);
    c.weights.lambda_m = w.value("lambda_m", 1.0);
    c.weights.lambda_c = w.value("lambda_c", 1.0);
  }
  if (j.contains("augment")) {
    const json& a = j["augment"];
    reject_unknown(a, {"brightness", "contrast", "saturation"}, "augment");
    if (a.contains("brightness")) c.augment.brightness = range_from(a["brightness"]);
    if (a.contains("contrast")) c.augment.contrast = range_from(a["contrast"]);
    if (a.contains("saturation")) c.augment.saturation = range_from(a["saturation"]);
  }
  c.knn_k = j.value("knn_k", c.knn_k);
  c.leaf_capacity = j.value("leaf_capacity", c.leaf_capacity);
  if (j.contains("branches")) {
    c.branches = BranchSet{false, false, false};
    for (const auto& b : j["branches"]) {
      const auto name = b.get<std::string>();
      if (name == "aug") c.branches.aug = true;
      else if (name == "con") c.branches.con = true;
      else if (name == "mmd") c.branches.mmd = true;
      else throw std::invalid_argument("unknown branch '" + name + "'");
    }
  }
  if (j.contains("train_data")) c.train_data = resolve(base_dir, j["train_data"].get<std::string>());
  if (j.contains("test_data")) c.test_data = resolve(base_dir, j["test_data"].get<std::string>());
  if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j["out_dir"].get<std::string>());
  c.log_wall_time = j.value("log_wall_time", c.log_wall_time);
  if (j.contains("tasks")) {
    for (const auto& t : j["tasks"]) {
      reject_unknown(t, {"name", "train", "test"}, "task");
      c.tasks.push_back(TaskSpec{t.value("name", std::string()), resolve(base_dir, t.at("train").get<std::string>()),
                                 resolve(base_dir, t.at("test").get<std::string>())});
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrc::io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(FormatErrc::bad_manifest, "config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json MetricRecord::to_json() const {
  return {{"step", step},
          {"epoch", epoch},
          {"l_ori", losses.l_ori},
          {"l_aug", losses.l_aug},
          {"l_mmd", losses.l_mmd},
          {"l_con", losses.l_con},
          {"l_total", losses.l_total},
          {"wall_time", wall_time}};
}

void write_metrics_jsonl(const std::vector<MetricRecord>& metrics, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrc::io, "cannot open " + path.string() + " for writing");
  for (const auto& m : metrics) out << m.to_json().dump() << '\n';
  if (!out) throw FormatError(FormatErrc::io, "write failed for " + path.string());
}

TrainResult train(const TrainConfig& config, const Dataset& data, const StepObserver& observer) {
  config.validate();
  data.validate();
  const std::size_t n = data.size();
  const std::size_t batches_per_epoch = n / config.batch_size;  // partial final batch dropped
  if (batches_per_epoch == 0) {
    throw std::invalid_argument("training set has " + std::to_string(n) + " samples, fewer than batch_size " +
                                std::to_string(config.batch_size));
  }
  const auto clock_start = std::chrono::steady_clock::now();
  const BranchSet& br = config.branches;

  Rng init_rng = Rng::stream(config.seed, "init");
  Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
  Rng augment_rng = Rng::stream(config.seed, "augment");
  Rng positive_rng = Rng::stream(config.seed, "positive");

  TrainResult result;
  result.checkpoint.seed = config.seed;
  GazeNet& net = result.checkpoint.net;
  net = GazeNet::initialized(init_rng);
  std::vector<LayerAdam> adam;
  for (const LayerParams* l : net.layers()) adam.push_back(LayerAdam::for_layer(*l, config.learning_rate));

  // Labels never change, so the index and each sample's neighbor list are built once.
  std::vector<std::optional<PositiveSet>> positives;
  if (br.con) {
    std::vector<LabeledPoint> points(n);
    for (std::size_t i = 0; i < n; ++i) points[i] = LabeledPoint{data.labels[i], i, data.subject_ids[i]};
    const LabelIndex index = LabelIndex::build(points, config.leaf_capacity);
    positives.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      try {
        positives[i] = index.query_knn(points[i], config.knn_k);
      } catch (const NoPositiveError&) {
        positives[i].reset();
      }
    }
  }

  ObjectiveOptions objective{br, config.weights, std::nullopt};
  std::vector<std::size_t> order(n);
  std::vector<Tensor> augmented(config.batch_size);
  std::vector<BatchItem> items(config.batch_size);
  std::uint64_t step = 0;
  bool done = false;

  for (std::size_t epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      if (config.max_steps && step >= config.max_steps) {
        done = true;
        break;
      }
      std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(b * config.batch_size),
                                   order.begin() + static_cast<std::ptrdiff_t>((b + 1) * config.batch_size));
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const std::size_t i = ids[k];
        BatchItem& item = items[k];
        item = BatchItem{&data.images[i], data.labels[i], nullptr, nullptr, {}};
        if (br.needs_augmented()) {
          augmented[k] = augment(data.images[i], config.augment, augment_rng);
          item.augmented = &augmented[k];
        }
        if (br.con) {
          if (positives[i]) {
            const std::uint64_t pos = draw_positive(*positives[i], positive_rng);
            item.positive = &data.images[pos];
            item.positive_label = data.labels[pos];
          } else {
            ++result.missing_positives;
          }
        }
      }

      BatchResult batch;
      try {
        batch = evaluate_batch(net, items, objective, true);
        for (std::size_t l = 0; l < adam.size(); ++l) adam_step(*net.layers()[l], adam[l]);
      } catch (const std::runtime_error& e) {
        throw TrainingDiverged(std::string("training diverged at step ") + std::to_string(step + 1) + ": " + e.what(),
                               ids);
      }
      ++step;

      MetricRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.losses = batch.report;
      if (config.log_wall_time) {
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
      }
      result.metrics.push_back(rec);
      if (observer) observer(step, net);
    }
  }
  result.checkpoint.step = step;
  return result;
}

TrainResult train(const TrainConfig& config) {
  if (config.train_data.empty()) throw std::invalid_argument("config has no train_data");
  if (config.out_dir.empty()) throw std::invalid_argument("config has no out_dir");
  const Dataset data = load_dataset(config.train_data);
  TrainResult result = train(config, data);
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw FormatError(FormatErrc::io, "cannot create " + config.out_dir.string() + ": " + ec.message());
  save_checkpoint(result.checkpoint, config.out_dir / "checkpoint.gbc");
  write_metrics_jsonl(result.metrics, config.out_dir / "metrics.jsonl");
  return result;
}

Inference infer(const GazeNet& net, const Dataset& data) {
  data.validate();
  Inference inf;
  inf.predictions.reserve(data.size());
  inf.errors_deg.reserve(data.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const GazeLabel pred = to_label(forward(net, data.images[i]).gaze);
    const double err = angular_error_deg(data.labels[i], pred);
    inf.predictions.push_back(pred);
    inf.errors_deg.push_back(err);
    sum += err;
  }
  inf.mean_error_deg = data.size() ? sum / static_cast<double>(data.size()) : 0.0;
  return inf;
}

}  // namespace gazebar
