#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiermet/batching.hpp"
#include "hiermet/dataio.hpp"
#include "hiermet/evaluation.hpp"
#include "hiermet/projection.hpp"
#include "hiermet/quadruplet_loss.hpp"

namespace hiermet {

enum class LossKind { RankBased, Quadruplet };

struct TrainConfig {
  LossKind loss = LossKind::RankBased;
  BatchMode batch_mode = BatchMode::Balanced;
  std::size_t batch_size = 12;
  int d_out = 3;

  OptimAlgo optimizer = OptimAlgo::Adam;
  double learning_rate = 1e-3;
  Margins margins;

  int patience = 20;
  int max_epochs = 200;
  std::uint32_t seed = 1;

  // exactly one data source: a CSV file or a synthetic spec
  std::string dataset_csv;
  std::optional<SynthSpec> synth;

  // unseen-class holdout: explicit fine classes (CSV datasets), or one
  // random fine class per coarse class (synthetic datasets)
  std::vector<std::string> holdout_fine;
  int synth_holdout_per_coarse = 0;

  std::string out_dir;  // empty = keep results in memory only

  void validate() const;

  static TrainConfig from_json_file(const std::string& path);
};

struct TrainResult {
  ProjectionModel best_model;
  FeatureStats stats;
  int best_epoch = 0;
  double best_val_avsil = 0.0;
  int epochs_run = 0;
  bool stopped_by_patience = false;

  SilhouetteReport test_report;
  std::optional<SilhouetteReport> alt_test_report;
  SilhouetteReport epoch0_test_report;
  std::optional<SilhouetteReport> epoch0_alt_test_report;

  // per-epoch validation trace: (epoch, mean train loss, avSil)
  struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    SilhouetteReport val;
  };
  std::vector<EpochRecord> history;
};

// Full protocol: resolve the dataset, tag the unseen-class holdout, split
// 70/20/10, train with per-epoch validation silhouettes and early stopping,
// then score the best checkpoint on test and alt_test. When out_dir is set,
// writes metrics.jsonl, best_model.json, final_report.json and splits.csv.
TrainResult run_training(const TrainConfig& config);

// The dataset the config describes, with alt_test tagged and splits
// assigned. Exposed so `eval` and tests can reproduce a run's data.
Dataset prepare_dataset(const TrainConfig& config);

nlohmann::ordered_json report_to_json(const SilhouetteReport& report);

}  // namespace hiermet
