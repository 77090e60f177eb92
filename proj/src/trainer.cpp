#include "hiermet/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "hiermet/rank_loss.hpp"

namespace hiermet {

void TrainConfig::validate() const {
  if (dataset_csv.empty() == !synth.has_value())
    throw ValidationError("exactly one data source is required: dataset_csv or synth");
  if (synth) synth->validate();
  if (batch_size < 2) throw ValidationError("batch_size must be at least 2");
  if (d_out < 1) throw ValidationError("d_out must be at least 1");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (max_epochs < 0) throw ValidationError("max_epochs must be non-negative");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
  if (loss == LossKind::Quadruplet) margins.validate();
  if (synth_holdout_per_coarse < 0)
    throw ValidationError("synth_holdout_per_coarse must be non-negative");
  if (synth && synth_holdout_per_coarse >= synth->fine_per_coarse)
    throw ValidationError("synth_holdout_per_coarse must leave at least one fine class");
  if (!holdout_fine.empty() && dataset_csv.empty())
    throw ValidationError("holdout_fine applies to CSV datasets only");
}

namespace {

const std::set<std::string> kConfigKeys = {
    "loss",         "batch_mode",  "batch_size",   "d_out",
    "optimizer",    "learning_rate", "margin_fine", "margin_coarse",
    "patience",     "max_epochs",  "seed",         "dataset_csv",
    "synth",        "holdout_fine", "synth_holdout_per_coarse", "out_dir"};

const std::set<std::string> kSynthKeys = {
    "coarse",       "fine_per_coarse", "samples_per_fine", "d_in",
    "sigma_coarse", "sigma_fine",      "sigma_noise",      "seed"};

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ValidationError("unknown config key '" + key + "' in " + where);
}

}  // namespace

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed config " + path + ": " + e.what());
  }

  TrainConfig cfg;
  try {
    check_keys(j, kConfigKeys, path);
    if (j.contains("loss")) {
      const auto name = j["loss"].get<std::string>();
      if (name == "rbl") cfg.loss = LossKind::RankBased;
      else if (name == "quadruplet") cfg.loss = LossKind::Quadruplet;
      else throw ValidationError("loss must be 'rbl' or 'quadruplet'");
    }
    if (j.contains("batch_mode")) {
      const auto name = j["batch_mode"].get<std::string>();
      if (name == "balanced") cfg.batch_mode = BatchMode::Balanced;
      else if (name == "unconstrained") cfg.batch_mode = BatchMode::Unconstrained;
      else throw ValidationError("batch_mode must be 'balanced' or 'unconstrained'");
    }
    if (j.contains("optimizer")) {
      const auto name = j["optimizer"].get<std::string>();
      if (name == "adam") cfg.optimizer = OptimAlgo::Adam;
      else if (name == "sgd") cfg.optimizer = OptimAlgo::Sgd;
      else throw ValidationError("optimizer must be 'adam' or 'sgd'");
    }
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("d_out")) cfg.d_out = j["d_out"].get<int>();
    if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("margin_fine")) cfg.margins.fine = j["margin_fine"].get<double>();
    if (j.contains("margin_coarse")) cfg.margins.coarse = j["margin_coarse"].get<double>();
    if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
    if (j.contains("max_epochs")) cfg.max_epochs = j["max_epochs"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint32_t>();
    if (j.contains("dataset_csv")) cfg.dataset_csv = j["dataset_csv"].get<std::string>();
    if (j.contains("holdout_fine"))
      cfg.holdout_fine = j["holdout_fine"].get<std::vector<std::string>>();
    if (j.contains("synth_holdout_per_coarse"))
      cfg.synth_holdout_per_coarse = j["synth_holdout_per_coarse"].get<int>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("synth") && !j["synth"].is_null()) {
      check_keys(j["synth"], kSynthKeys, path + " synth");
      SynthSpec spec;
      const auto& s = j["synth"];
      if (s.contains("coarse")) spec.coarse = s["coarse"].get<int>();
      if (s.contains("fine_per_coarse")) spec.fine_per_coarse = s["fine_per_coarse"].get<int>();
      if (s.contains("samples_per_fine")) spec.samples_per_fine = s["samples_per_fine"].get<int>();
      if (s.contains("d_in")) spec.d_in = s["d_in"].get<int>();
      if (s.contains("sigma_coarse")) spec.sigma_coarse = s["sigma_coarse"].get<double>();
      if (s.contains("sigma_fine")) spec.sigma_fine = s["sigma_fine"].get<double>();
      if (s.contains("sigma_noise")) spec.sigma_noise = s["sigma_noise"].get<double>();
      if (s.contains("seed")) spec.seed = s["seed"].get<std::uint32_t>();
      cfg.synth = spec;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad config value in " + path + ": " + e.what());
  }
  return cfg;
}

namespace {

Matrix gather_rows(const Matrix& features, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), features.cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(features.row(rows[r]).begin(), features.row(rows[r]).end(),
              out.row(r).begin());
  return out;
}

std::vector<LabelPath> gather_labels(const Dataset& data,
                                     const std::vector<std::size_t>& rows) {
  std::vector<LabelPath> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data.labels[r]);
  return out;
}

SilhouetteReport report_for(const Dataset& data, const std::vector<std::size_t>& rows,
                            const ProjectionModel& model, const FeatureStats& stats) {
  const Matrix x = standardize(gather_rows(data.features, rows), stats);
  const Matrix emb = project_forward(model, x);
  return multilevel_silhouette(emb, gather_labels(data, rows));
}

nlohmann::ordered_json metrics_line(int epoch, const std::string& split,
                                    const SilhouetteReport& report,
                                    const nlohmann::ordered_json& loss) {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["split"] = split;
  j["sil_per_level"] = nlohmann::json::array();
  for (const auto& s : report.per_level) {
    if (s) j["sil_per_level"].push_back(*s);
    else j["sil_per_level"].push_back(nullptr);
  }
  j["avSil"] = report.average;
  j["loss"] = loss;
  return j;
}

}  // namespace

nlohmann::ordered_json report_to_json(const SilhouetteReport& report) {
  nlohmann::ordered_json j;
  j["sil_per_level"] = nlohmann::json::array();
  for (const auto& s : report.per_level) {
    if (s) j["sil_per_level"].push_back(*s);
    else j["sil_per_level"].push_back(nullptr);
  }
  j["avSil"] = report.average;
  return j;
}

Dataset prepare_dataset(const TrainConfig& config) {
  Dataset data = config.synth ? synth_generate(*config.synth)
                              : load_csv(config.dataset_csv);

  std::vector<std::string> held_out = config.holdout_fine;
  if (config.synth && config.synth_holdout_per_coarse > 0) {
    // hold out the highest-numbered fine classes of each coarse class
    for (int ci = 0; ci < config.synth->coarse; ++ci)
      for (int h = 0; h < config.synth_holdout_per_coarse; ++h)
        held_out.push_back("c" + std::to_string(ci) + "/f" + std::to_string(ci) +
                           "_" + std::to_string(config.synth->fine_per_coarse - 1 - h));
  }

  if (!held_out.empty()) {
    std::set<std::string> observed;
    for (const auto& l : data.labels) observed.insert(l.str());
    for (const auto& h : held_out)
      if (!observed.count(h))
        throw ValidationError("holdout class '" + h + "' is not in the dataset");

    std::vector<std::string> dev_classes;
    std::set<std::string> held(held_out.begin(), held_out.end());
    for (const auto& cls : observed)
      if (!held.count(cls)) dev_classes.push_back(cls);
    if (dev_classes.empty())
      throw ValidationError("holdout removes every fine class");

    const Dataset alt = make_unseen_class_testset(data, dev_classes);
    std::set<std::string> alt_ids(alt.ids.begin(), alt.ids.end());
    for (std::size_t i = 0; i < data.size(); ++i)
      if (alt_ids.count(data.ids[i])) data.split[i] = Split::AltTest;
  }

  split_dataset(data, config.seed);
  return data;
}

TrainResult run_training(const TrainConfig& config) {
  config.validate();
  Dataset data = prepare_dataset(config);

  const auto train_rows = data.rows_in(Split::Train);
  const auto val_rows = data.rows_in(Split::Val);
  const auto test_rows = data.rows_in(Split::Test);
  const auto alt_rows = data.rows_in(Split::AltTest);

  const auto train_paths = gather_labels(data, train_rows);
  const LabelTree tree = build_tree(train_paths);
  const RankMap rank_map = build_rank_map(tree, train_paths);

  TrainResult result;
  result.stats = compute_feature_stats(gather_rows(data.features, train_rows));

  ProjectionModel model = init_projection(
      config.seed, static_cast<int>(data.features.cols), config.d_out);
  const ProjectionModel initial = model;
  OptimizerState opt = OptimizerState::make(config.optimizer, config.learning_rate,
                                            model.d_in, model.d_out);

  EarlyStopper stopper(config.patience);
  const SilhouetteReport val0 = report_for(data, val_rows, model, result.stats);
  stopper.update(val0.average);
  result.best_model = model;
  result.best_epoch = 0;
  result.best_val_avsil = val0.average;
  result.history.push_back({0, 0.0, val0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const BatchPlan plan =
        config.batch_mode == BatchMode::Balanced
            ? plan_balanced(data, rank_map, config.batch_size, mix_seed(config.seed, epoch))
            : plan_unconstrained(data, config.batch_size, mix_seed(config.seed, epoch));

    double loss_sum = 0.0;
    int scored_batches = 0;
    for (std::size_t bi = 0; bi < plan.batches.size(); ++bi) {
      const auto& batch = plan.batches[bi];
      const Matrix x = standardize(gather_rows(data.features, batch), result.stats);
      ForwardCache cache;
      const Matrix emb = project_forward(model, x, &cache);

      double batch_loss = 0.0;
      Matrix grad_emb;
      if (config.loss == LossKind::RankBased) {
        std::vector<std::optional<int>> ranks;
        ranks.reserve(batch.size() * (batch.size() - 1) / 2);
        bool any = false;
        for (std::size_t i = 0; i + 1 < batch.size(); ++i)
          for (std::size_t j = i + 1; j < batch.size(); ++j) {
            ranks.push_back(rank_map.rank(data.labels[batch[i]], data.labels[batch[j]]));
            any = any || ranks.back().has_value();
          }
        if (!any) continue;  // every pair undetermined, nothing to learn from
        const RblResult res = rbl_forward(emb, ranks);
        batch_loss = res.loss;
        grad_emb = rbl_backward(res.table, emb);
      } else {
        const auto quads = mine_quadruplets(
            gather_labels(data, batch),
            mix_seed(config.seed, (static_cast<std::uint64_t>(epoch) << 32) | (bi + 1)));
        if (quads.empty()) continue;  // no usable quadruplet in this batch
        batch_loss = quad_forward(emb, quads, config.margins);
        grad_emb = quad_backward(emb, quads, config.margins);
      }

      const ParamGrads grads = project_backward(cache, grad_emb);
      optimizer_step(model, opt, grads);
      loss_sum += batch_loss;
      ++scored_batches;
    }

    const double mean_loss = scored_batches > 0 ? loss_sum / scored_batches : 0.0;
    const SilhouetteReport val = report_for(data, val_rows, model, result.stats);
    result.history.push_back({epoch, mean_loss, val});
    result.epochs_run = epoch;

    const auto decision = stopper.update(val.average);
    if (decision.improved) {
      result.best_model = model;
      result.best_epoch = epoch;
      result.best_val_avsil = val.average;
    }
    if (decision.stop) {
      result.stopped_by_patience = true;
      break;
    }
  }

  result.test_report = report_for(data, test_rows, result.best_model, result.stats);
  result.epoch0_test_report = report_for(data, test_rows, initial, result.stats);
  if (!alt_rows.empty()) {
    result.alt_test_report = report_for(data, alt_rows, result.best_model, result.stats);
    result.epoch0_alt_test_report = report_for(data, alt_rows, initial, result.stats);
  }

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const fs::path out(config.out_dir);

    std::ofstream metrics(out / "metrics.jsonl");
    if (!metrics) throw ValidationError("cannot write metrics to " + config.out_dir);
    for (const auto& rec : result.history) {
      const nlohmann::ordered_json loss_field =
          rec.epoch == 0 ? nlohmann::ordered_json(nullptr)
                         : nlohmann::ordered_json(rec.loss);
      metrics << metrics_line(rec.epoch, "val", rec.val, loss_field) << "\n";
    }
    metrics << metrics_line(result.best_epoch, "test", result.test_report, nullptr)
            << "\n";
    if (result.alt_test_report)
      metrics << metrics_line(result.best_epoch, "alt_test", *result.alt_test_report,
                              nullptr)
              << "\n";

    save_checkpoint((out / "best_model.json").string(), result.best_model,
                    result.stats);

    nlohmann::ordered_json final_report;
    final_report["best_epoch"] = result.best_epoch;
    final_report["best_val_avSil"] = result.best_val_avsil;
    final_report["epochs_run"] = result.epochs_run;
    final_report["stopped_by_patience"] = result.stopped_by_patience;
    final_report["test"] = report_to_json(result.test_report);
    final_report["alt_test"] = result.alt_test_report
                                   ? report_to_json(*result.alt_test_report)
                                   : nlohmann::ordered_json(nullptr);
    final_report["epoch0"]["test"] = report_to_json(result.epoch0_test_report);
    final_report["epoch0"]["alt_test"] =
        result.epoch0_alt_test_report ? report_to_json(*result.epoch0_alt_test_report)
                                      : nlohmann::ordered_json(nullptr);
    std::ofstream fr(out / "final_report.json");
    fr << final_report.dump(2) << "\n";

    std::ofstream splits(out / "splits.csv");
    splits << "id,split\n";
    for (std::size_t i = 0; i < data.size(); ++i)
      splits << data.ids[i] << "," << split_name(data.split[i]) << "\n";

    if (config.synth) save_csv(data, (out / "dataset.csv").string());
  }

  return result;
}

}  // namespace hiermet
