#pragma once

#include <string>
#include <vector>

#include "hiermet/label_tree.hpp"
#include "hiermet/matrix.hpp"

namespace hiermet {

enum class Split { None, Train, Val, Test, AltTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// Feature matrix plus hierarchical labels; CSV format is
//   id,labels,f0,...,f{d-1}
// with the labels column '/'-joined. Rows with shorter label paths carry
// incomplete labels.
struct Dataset {
  Matrix features;
  std::vector<LabelPath> labels;
  std::vector<std::string> ids;
  std::vector<Split> split;

  std::size_t size() const { return ids.size(); }
  std::vector<std::size_t> rows_in(Split s) const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

Dataset load_csv(const std::string& path);
void save_csv(const Dataset& dataset, const std::string& path);

// 70/20/10 train/val/test over rows not already tagged alt_test, stratified
// by fine class when every fine class has at least 3 examples. Global counts
// land within one example of the exact proportions.
void split_dataset(Dataset& dataset, std::uint32_t seed);

// Rows whose fine class (full serialized path) is not in dev_fine_classes,
// returned as a slice tagged alt_test. Throws when nothing is left over.
Dataset make_unseen_class_testset(const Dataset& pool,
                                  const std::vector<std::string>& dev_fine_classes);

// Nested Gaussians: coarse centers, fine centers offset from their coarse
// center, samples around each fine center. Labels are c{i}/f{i}_{j}.
struct SynthSpec {
  int coarse = 3;
  int fine_per_coarse = 3;
  int samples_per_fine = 20;
  int d_in = 128;
  double sigma_coarse = 1.0;
  double sigma_fine = 0.3;
  double sigma_noise = 0.1;
  std::uint32_t seed = 0;

  void validate() const;
};

Dataset synth_generate(const SynthSpec& spec);

}  // namespace hiermet
