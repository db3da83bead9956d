#include "gazebar/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "gazebar/balltree.hpp"
#include "gazebar/binary_io.hpp"
#include "gazebar/evalbench.hpp"
#include "gazebar/rng.hpp"
#include "gazebar/synthdata.hpp"
#include "gazebar/trainer.hpp"

namespace gazebar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

DomainSpec resolve_domain(const std::string& value) {
  for (const auto& name : domain_preset_names()) {
    if (value == name) return domain_preset(name);
  }
  std::ifstream in(value);
  if (!in) {
    throw FormatError(FormatErrc::io, "domain '" + value + "' is neither a preset nor a readable file");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(FormatErrc::bad_manifest, "domain file " + value + ": " + e.what());
  }
  return DomainSpec::from_json(j);
}

int cmd_gen_data(std::uint64_t seed, std::size_t subjects, std::size_t per_subject, const std::string& domain,
                 const fs::path& out_path, std::ostream& out, std::ostream& err) {
  GenerateOptions opt{seed, subjects, per_subject, resolve_domain(domain)};
  const Dataset data = generate(opt);
  save_dataset(data, out_path);
  out << json{{"path", out_path.string()}, {"n_samples", data.size()}, {"domain", opt.domain.name}}.dump() << '\n';
  err << "wrote " << data.size() << " samples (" << subjects << " subjects, domain " << opt.domain.name << ") to "
      << out_path.string() << '\n';
  return kExitOk;
}

int cmd_train(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  const TrainConfig config = TrainConfig::load(config_path);
  const TrainResult r = train(config);
  const double last = r.metrics.empty() ? 0.0 : r.metrics.back().losses.l_total;
  out << json{{"checkpoint", (config.out_dir / "checkpoint.gbc").string()},
              {"metrics", (config.out_dir / "metrics.jsonl").string()},
              {"steps", r.checkpoint.step},
              {"final_l_total", last},
              {"missing_positives", r.missing_positives}}
             .dump()
      << '\n';
  err << "trained " << r.checkpoint.step << " steps, final l_total " << last << '\n';
  if (r.missing_positives) err << "warning: " << r.missing_positives << " samples had no cross-subject positive\n";
  return kExitOk;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& data_path, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset data = load_dataset(data_path);
  const Inference inf = infer(ckpt.net, data);
  std::vector<double> sorted = inf.errors_deg;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  out << json{{"mean_error_deg", inf.mean_error_deg}, {"median_error_deg", median}, {"n_samples", data.size()}}.dump()
      << '\n';
  err << "mean angular error " << inf.mean_error_deg << " deg over " << data.size() << " samples\n";
  return kExitOk;
}

int cmd_ablate(const fs::path& config_path, std::size_t seeds, const fs::path& out_path, std::ostream& out,
               std::ostream& err) {
  const TrainConfig config = TrainConfig::load(config_path);
  std::vector<LoadedTask> tasks;
  if (config.tasks.empty()) {
    if (config.train_data.empty() || config.test_data.empty()) {
      throw std::invalid_argument("ablate: config needs either tasks or train_data and test_data");
    }
    tasks.push_back(LoadedTask{"task", load_dataset(config.train_data), load_dataset(config.test_data)});
  } else {
    for (const auto& t : config.tasks) {
      tasks.push_back(LoadedTask{t.name, load_dataset(t.train_data), load_dataset(t.test_data)});
    }
  }
  const AblationGrid grid = run_ablation(tasks, config, seeds);
  std::ofstream file(out_path, std::ios::trunc);
  if (!file) throw FormatError(FormatErrc::io, "cannot open " + out_path.string() + " for writing");
  file << grid.to_json().dump(2) << '\n';
  if (!file) throw FormatError(FormatErrc::io, "write failed for " + out_path.string());
  fs::path table_path = out_path;
  table_path.replace_extension(".txt");
  std::ofstream table(table_path, std::ios::trunc);
  table << grid.to_table();
  if (!table) throw FormatError(FormatErrc::io, "write failed for " + table_path.string());
  out << grid.to_json().dump() << '\n';
  err << grid.to_table();
  return kExitOk;
}

int cmd_project(const fs::path& ckpt, const fs::path& data, const fs::path& out_path, std::ostream& out,
                std::ostream& err) {
  const Projection p = export_projection(ckpt, data, out_path);
  const double corr = yaw_correlation(p);
  out << json{{"path", out_path.string()},
              {"rows", p.rows.size()},
              {"eigenvalues", p.pca.eigenvalues},
              {"yaw_correlation", corr}}
             .dump()
      << '\n';
  err << "projected " << p.rows.size() << " samples, |corr(axis, yaw)| = " << corr << '\n';
  return kExitOk;
}

int cmd_knn_check(const fs::path& data_path, std::size_t queries, const std::vector<std::size_t>& ks,
                  std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const Dataset data = load_dataset(data_path);
  if (data.size() == 0) throw std::invalid_argument("knn-check: empty dataset");
  std::vector<LabeledPoint> points;
  for (std::size_t i = 0; i < data.size(); ++i) points.push_back(LabeledPoint{data.labels[i], i, data.subject_ids[i]});
  const LabelIndex index = LabelIndex::build(points);
  Rng rng = Rng::stream(seed, "knn-check");
  std::size_t checked = 0, mismatches = 0, tree_evals = 0;
  for (std::size_t q = 0; q < queries; ++q) {
    const LabeledPoint& anchor = points[rng.below(points.size())];
    for (std::size_t k : ks) {
      std::optional<PositiveSet> fast, slow;
      QueryStats stats;
      try {
        fast = index.query_knn(anchor, k, &stats);
      } catch (const NoPositiveError&) {
      }
      try {
        slow = brute_force_knn(points, anchor, k);
      } catch (const NoPositiveError&) {
      }
      ++checked;
      tree_evals += stats.distance_evals;
      const bool same = fast.has_value() == slow.has_value() && (!fast || fast->neighbors == slow->neighbors);
      if (!same) ++mismatches;
    }
  }
  const double mean_evals = checked ? static_cast<double>(tree_evals) / static_cast<double>(checked) : 0.0;
  out << json{{"points", points.size()},
              {"queries", queries},
              {"k", ks},
              {"checked", checked},
              {"mismatches", mismatches},
              {"mean_distance_evals", mean_evals},
              {"brute_force_distance_evals", points.size()}}
             .dump()
      << '\n';
  err << "knn-check: " << checked << " queries, " << mismatches << " mismatches, " << mean_evals
      << " distance evaluations per query vs " << points.size() << " brute force\n";
  return mismatches == 0 ? kExitOk : kExitFailure;
}

int cmd_grad_check(std::uint64_t seed, std::size_t batch, std::size_t coords, std::ostream& out, std::ostream& err) {
  ModelGradCheckOptions opt;
  opt.seed = seed;
  opt.batch_size = batch;
  opt.check.min_coords = coords;
  const GradCheckReport r = check_total_loss_gradient(opt);
  out << json{{"max_relative_error", r.max_relative_error},
              {"coords_checked", r.coords_checked},
              {"coords_skipped_at_kinks", r.coords_skipped},
              {"tolerance", opt.check.tol},
              {"worst_param", r.worst_param},
              {"worst_index", r.worst_index},
              {"worst_analytic", r.worst_analytic},
              {"worst_numeric", r.worst_numeric},
              {"passed", r.passed}}
             .dump()
      << '\n';
  err << "grad-check: max relative error " << r.max_relative_error << " over " << r.coords_checked
      << " coordinates (" << (r.passed ? "pass" : "FAIL") << ")\n";
  return r.passed ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze estimation with branch-out auxiliary regularization", "gazebar"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::size_t subjects = 20, per_subject = 200;
  std::string domain;
  std::string out_path, config_path, ckpt_path, data_path;
  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset shard");
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--subjects", subjects, "number of subjects")->required();
  gen->add_option("--per-subject", per_subject, "samples per subject")->required();
  gen->add_option("--domain", domain, "preset name or domain JSON file")->required();
  gen->add_option("--out", out_path, "output shard")->required();

  auto* tr = app.add_subcommand("train", "train a model from a JSON config");
  tr->add_option("--config", config_path, "config file")->required();

  auto* ev = app.add_subcommand("eval", "mean angular error of a checkpoint on a shard");
  ev->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  ev->add_option("--data", data_path, "dataset shard")->required();

  std::size_t n_seeds = 3;
  auto* ab = app.add_subcommand("ablate", "run the 8-row loss ablation grid");
  ab->add_option("--config", config_path, "config file")->required();
  ab->add_option("--seeds", n_seeds, "seeds per cell")->required()->check(CLI::PositiveNumber);
  ab->add_option("--out", out_path, "grid JSON output")->required();

  auto* pr = app.add_subcommand("project", "export a 2-D PCA projection of test features");
  pr->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  pr->add_option("--data", data_path, "dataset shard")->required();
  pr->add_option("--out", out_path, "CSV output")->required();

  std::size_t queries = 50;
  std::vector<std::size_t> ks{1, 5, 10};
  auto* kc = app.add_subcommand("knn-check", "compare the ball tree against brute force");
  kc->add_option("--data", data_path, "dataset shard")->required();
  kc->add_option("--queries", queries, "number of query points");
  kc->add_option("--k", ks, "neighbor counts")->delimiter(',');
  kc->add_option("--seed", seed, "query sampling seed");

  std::size_t batch = 8, coords = 200;
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the total loss gradient");
  gc->add_option("--seed", seed, "seed for data and initialization");
  gc->add_option("--batch", batch, "batch size")->check(CLI::Range(2, 1024));
  gc->add_option("--coords", coords, "coordinates to check")->check(CLI::PositiveNumber);

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(seed, subjects, per_subject, domain, out_path, out, err);
    if (*tr) return cmd_train(config_path, out, err);
    if (*ev) return cmd_eval(ckpt_path, data_path, out, err);
    if (*ab) return cmd_ablate(config_path, n_seeds, out_path, out, err);
    if (*pr) return cmd_project(ckpt_path, data_path, out_path, out, err);
    if (*kc) return cmd_knn_check(data_path, queries, ks, seed, out, err);
    if (*gc) return cmd_grad_check(seed, batch, coords, out, err);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const nlohmann::json::exception& e) {
    err << "error: bad JSON value: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace gazebar
