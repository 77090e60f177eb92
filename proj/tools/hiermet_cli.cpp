#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hiermet/dataio.hpp"
#include "hiermet/evaluation.hpp"
#include "hiermet/gradcheck.hpp"
#include "hiermet/projection.hpp"
#include "hiermet/trainer.hpp"

namespace {

using namespace hiermet;

struct TrainFlags {
  std::string config_path;
  std::optional<std::string> loss, batch_mode, optimizer, dataset, out_dir;
  std::optional<std::size_t> batch_size;
  std::optional<int> d_out, patience, max_epochs, synth_holdout;
  std::optional<double> lr, margin_fine, margin_coarse;
  std::optional<std::uint32_t> seed;
  std::vector<std::string> holdout_fine;
  std::optional<int> synth_coarse, synth_fine, synth_per_class, synth_d_in;
  std::optional<double> synth_sigma_coarse, synth_sigma_fine, synth_sigma_noise;
  std::optional<std::uint32_t> synth_seed;
};

TrainConfig resolve_config(const TrainFlags& f) {
  TrainConfig cfg;
  if (!f.config_path.empty()) cfg = TrainConfig::from_json_file(f.config_path);

  if (f.loss) {
    if (*f.loss == "rbl") cfg.loss = LossKind::RankBased;
    else if (*f.loss == "quadruplet") cfg.loss = LossKind::Quadruplet;
    else throw ValidationError("--loss must be rbl or quadruplet");
  }
  if (f.batch_mode) {
    if (*f.batch_mode == "balanced") cfg.batch_mode = BatchMode::Balanced;
    else if (*f.batch_mode == "unconstrained") cfg.batch_mode = BatchMode::Unconstrained;
    else throw ValidationError("--batch-mode must be balanced or unconstrained");
  }
  if (f.optimizer) {
    if (*f.optimizer == "adam") cfg.optimizer = OptimAlgo::Adam;
    else if (*f.optimizer == "sgd") cfg.optimizer = OptimAlgo::Sgd;
    else throw ValidationError("--optimizer must be adam or sgd");
  }
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.d_out) cfg.d_out = *f.d_out;
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.margin_fine) cfg.margins.fine = *f.margin_fine;
  if (f.margin_coarse) cfg.margins.coarse = *f.margin_coarse;
  if (f.patience) cfg.patience = *f.patience;
  if (f.max_epochs) cfg.max_epochs = *f.max_epochs;
  if (f.seed) cfg.seed = *f.seed;
  if (f.dataset) {
    cfg.dataset_csv = *f.dataset;
    cfg.synth.reset();
  }
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (!f.holdout_fine.empty()) cfg.holdout_fine = f.holdout_fine;
  if (f.synth_holdout) cfg.synth_holdout_per_coarse = *f.synth_holdout;

  const bool any_synth_flag = f.synth_coarse || f.synth_fine || f.synth_per_class ||
                              f.synth_d_in || f.synth_sigma_coarse ||
                              f.synth_sigma_fine || f.synth_sigma_noise || f.synth_seed;
  if (any_synth_flag) {
    if (!cfg.synth) cfg.synth = SynthSpec{};
    cfg.dataset_csv.clear();
    if (f.synth_coarse) cfg.synth->coarse = *f.synth_coarse;
    if (f.synth_fine) cfg.synth->fine_per_coarse = *f.synth_fine;
    if (f.synth_per_class) cfg.synth->samples_per_fine = *f.synth_per_class;
    if (f.synth_d_in) cfg.synth->d_in = *f.synth_d_in;
    if (f.synth_sigma_coarse) cfg.synth->sigma_coarse = *f.synth_sigma_coarse;
    if (f.synth_sigma_fine) cfg.synth->sigma_fine = *f.synth_sigma_fine;
    if (f.synth_sigma_noise) cfg.synth->sigma_noise = *f.synth_sigma_noise;
    if (f.synth_seed) cfg.synth->seed = *f.synth_seed;
  }
  return cfg;
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override it");
  cmd->add_option("--loss", f.loss, "rbl | quadruplet");
  cmd->add_option("--batch-mode", f.batch_mode, "balanced | unconstrained");
  cmd->add_option("--batch-size", f.batch_size);
  cmd->add_option("--d-out", f.d_out, "embedding dimension");
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--margin-fine", f.margin_fine);
  cmd->add_option("--margin-coarse", f.margin_coarse);
  cmd->add_option("--patience", f.patience, "early-stopping patience");
  cmd->add_option("--max-epochs", f.max_epochs);
  cmd->add_option("--seed", f.seed);
  cmd->add_option("--dataset", f.dataset, "dataset CSV path");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--holdout-fine", f.holdout_fine,
                  "fine classes moved to the unseen-class test set");
  cmd->add_option("--synth-coarse", f.synth_coarse);
  cmd->add_option("--synth-fine", f.synth_fine, "fine classes per coarse class");
  cmd->add_option("--synth-per-class", f.synth_per_class, "samples per fine class");
  cmd->add_option("--synth-d-in", f.synth_d_in);
  cmd->add_option("--synth-sigma-coarse", f.synth_sigma_coarse);
  cmd->add_option("--synth-sigma-fine", f.synth_sigma_fine);
  cmd->add_option("--synth-sigma-noise", f.synth_sigma_noise);
  cmd->add_option("--synth-seed", f.synth_seed);
  cmd->add_option("--synth-holdout-per-coarse", f.synth_holdout,
                  "fine classes held out of each coarse class");
}

int cmd_train(const TrainFlags& flags) {
  const TrainConfig cfg = resolve_config(flags);
  const TrainResult result = run_training(cfg);

  nlohmann::ordered_json summary;
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_avSil"] = result.best_val_avsil;
  summary["epochs_run"] = result.epochs_run;
  summary["stopped_by_patience"] = result.stopped_by_patience;
  summary["test"] = report_to_json(result.test_report);
  summary["alt_test"] = result.alt_test_report
                            ? report_to_json(*result.alt_test_report)
                            : nlohmann::ordered_json(nullptr);
  summary["epoch0"]["test"] = report_to_json(result.epoch0_test_report);
  summary["epoch0"]["alt_test"] =
      result.epoch0_alt_test_report ? report_to_json(*result.epoch0_alt_test_report)
                                    : nlohmann::ordered_json(nullptr);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset_path,
             const std::string& splits_path, const std::string& split_tag,
             bool raw_features) {
  const auto [model, stats] = load_checkpoint(checkpoint);
  const Dataset dataset = load_csv(dataset_path);
  if (dataset.features.cols != stats.mean.size())
    throw ValidationError("dataset has " + std::to_string(dataset.features.cols) +
                          " features but the checkpoint expects " +
                          std::to_string(stats.mean.size()));

  std::vector<std::size_t> rows;
  if (!splits_path.empty()) {
    std::ifstream in(splits_path);
    if (!in) throw ValidationError("cannot open splits file " + splits_path);
    std::map<std::string, Split> by_id;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw ValidationError("malformed splits line: " + line);
      by_id[line.substr(0, comma)] = split_from_name(line.substr(comma + 1));
    }
    const Split wanted = split_from_name(split_tag);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      auto it = by_id.find(dataset.ids[i]);
      if (it != by_id.end() && it->second == wanted) rows.push_back(i);
    }
    if (rows.empty())
      throw ValidationError("no rows tagged '" + split_tag + "' in " + splits_path);
  } else {
    rows.resize(dataset.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  }

  Matrix features(rows.size(), dataset.features.cols);
  std::vector<LabelPath> labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(dataset.features.row(rows[r]).begin(),
              dataset.features.row(rows[r]).end(), features.row(r).begin());
    labels.push_back(dataset.labels[rows[r]]);
  }

  const Matrix standardized = standardize(features, stats);
  const Matrix points = raw_features ? standardized
                                     : project_forward(model, standardized);
  const SilhouetteReport report = multilevel_silhouette(points, labels);
  std::cout << report_to_json(report).dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(std::uint32_t seed, int trials) {
  bool all_pass = true;
  for (const auto& suite : {gradcheck_rbl(seed, trials),
                            gradcheck_quadruplet(seed, trials),
                            gradcheck_chain(seed, trials)}) {
    std::printf("%-12s trials=%-4d max_rel_err=%.3e  %s\n", suite.name.c_str(),
                suite.trials, suite.max_rel_err, suite.pass ? "PASS" : "FAIL");
    all_pass = all_pass && suite.pass;
  }
  return all_pass ? 0 : 2;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_path) {
  const Dataset dataset = synth_generate(spec);
  save_csv(dataset, out_path);
  std::cout << "wrote " << dataset.size() << " rows to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical metric learning on precomputed feature vectors"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a projection and report silhouettes");
  add_train_flags(train, train_flags);

  std::string eval_checkpoint, eval_dataset, eval_splits, eval_split = "test";
  bool eval_raw = false;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_checkpoint)->required();
  eval->add_option("--dataset", eval_dataset, "dataset CSV")->required();
  eval->add_option("--splits", eval_splits, "splits.csv from a training run");
  eval->add_option("--split", eval_split, "split to score when --splits is given");
  eval->add_flag("--raw-features", eval_raw,
                 "score the standardized features without projecting");

  std::uint32_t gc_seed = 7;
  int gc_trials = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--trials", gc_trials);

  SynthSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a nested-Gaussian dataset CSV");
  synth->add_option("--coarse", synth_spec.coarse);
  synth->add_option("--fine", synth_spec.fine_per_coarse, "fine classes per coarse");
  synth->add_option("--per-class", synth_spec.samples_per_fine);
  synth->add_option("--d-in", synth_spec.d_in);
  synth->add_option("--sigma-coarse", synth_spec.sigma_coarse);
  synth->add_option("--sigma-fine", synth_spec.sigma_fine);
  synth->add_option("--sigma-noise", synth_spec.sigma_noise);
  synth->add_option("--seed", synth_spec.seed);
  synth->add_option("--out", synth_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags);
    if (eval->parsed())
      return cmd_eval(eval_checkpoint, eval_dataset, eval_splits, eval_split, eval_raw);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_trials);
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
  } catch (const hiermet::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const hiermet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
