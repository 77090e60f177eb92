#include "hiermet/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace hiermet {

std::string format_double(double value) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::AltTest: return "alt_test";
    default: return "none";
  }
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  if (name == "alt_test") return Split::AltTest;
  if (name == "none") return Split::None;
  throw ValidationError("unknown split name '" + name + "'");
}

std::vector<std::size_t> Dataset::rows_in(Split s) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) rows.push_back(i);
  return rows;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features = Matrix(rows.size(), features.cols);
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  out.split.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(features.row(rows[r]).begin(), features.row(rows[r]).end(),
              out.features.row(r).begin());
    out.labels.push_back(labels[rows[r]]);
    out.ids.push_back(ids[rows[r]]);
    out.split.push_back(split[rows[r]]);
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "labels")
    throw ValidationError(path + ": header must be id,labels,f0,...");
  const std::size_t d_in = header.size() - 2;
  for (std::size_t c = 0; c < d_in; ++c) {
    if (header[c + 2] != "f" + std::to_string(c))
      throw ValidationError(path + ": feature column " + std::to_string(c + 2) +
                            " must be named f" + std::to_string(c));
  }

  std::vector<std::vector<double>> rows;
  Dataset dataset;
  std::set<std::string> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != d_in + 2)
      throw ValidationError(where + ": expected " + std::to_string(d_in + 2) +
                            " fields, got " + std::to_string(fields.size()));
    if (!seen_ids.insert(fields[0]).second)
      throw ValidationError(where + ": duplicate id '" + fields[0] + "'");

    std::vector<double> feats(d_in);
    for (std::size_t c = 0; c < d_in; ++c) {
      const std::string& text = fields[c + 2];
      char* end = nullptr;
      feats[c] = std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(feats[c]))
        throw ValidationError(where + ": feature f" + std::to_string(c) +
                              " is not a finite number: '" + text + "'");
    }

    try {
      dataset.labels.push_back(LabelPath::parse(fields[1]));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    dataset.ids.push_back(fields[0]);
    dataset.split.push_back(Split::None);
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw ValidationError(path + ": no data rows");

  dataset.features = Matrix(rows.size(), d_in);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), dataset.features.row(r).begin());
  return dataset;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset to " + path);
  out << "id,labels";
  for (std::size_t c = 0; c < dataset.features.cols; ++c) out << ",f" << c;
  out << "\n";
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    out << dataset.ids[r] << "," << dataset.labels[r].str();
    for (double v : dataset.features.row(r)) out << "," << format_double(v);
    out << "\n";
  }
}

namespace {

// Largest-remainder quotas: per-class counts that hit the global target
// exactly while staying close to ratio * class size. `capacity` bounds each
// class's quota.
std::vector<std::size_t> quotas_for(const std::vector<std::size_t>& class_sizes,
                                    const std::vector<std::size_t>& capacity,
                                    double ratio, std::size_t target) {
  const std::size_t k = class_sizes.size();
  std::vector<std::size_t> quota(k);
  std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, class)
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double ideal = ratio * static_cast<double>(class_sizes[c]);
    quota[c] = std::min(static_cast<std::size_t>(ideal), capacity[c]);
    assigned += quota[c];
    remainders.push_back({-(ideal - static_cast<double>(quota[c])), c});
  }
  std::sort(remainders.begin(), remainders.end());
  std::size_t cursor = 0;
  while (assigned < target && cursor < remainders.size()) {
    const std::size_t c = remainders[cursor].second;
    if (quota[c] < capacity[c]) {
      ++quota[c];
      ++assigned;
    }
    ++cursor;
  }
  // spill anything the remainder pass could not place into spare capacity
  for (std::size_t c = 0; assigned < target && c < k; ++c) {
    while (assigned < target && quota[c] < capacity[c]) {
      ++quota[c];
      ++assigned;
    }
  }
  if (assigned != target)
    throw ValidationError("split quotas cannot reach the requested proportions");
  return quota;
}

}  // namespace

void split_dataset(Dataset& dataset, std::uint32_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.split[i] != Split::AltTest) pool.push_back(i);
  if (pool.size() < 10)
    throw ValidationError("need at least 10 examples to split, got " +
                          std::to_string(pool.size()));

  const std::size_t n = pool.size();
  const std::size_t n_train = static_cast<std::size_t>(std::lround(0.7 * n));
  const std::size_t n_val = static_cast<std::size_t>(std::lround(0.2 * n));

  // group the pool by fine class (full serialized path)
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t row : pool) by_class[dataset.labels[row].str()].push_back(row);
  const bool stratified =
      std::all_of(by_class.begin(), by_class.end(),
                  [](const auto& kv) { return kv.second.size() >= 3; });

  Rng rng(seed);
  if (!stratified) {
    std::vector<std::size_t> shuffled = pool;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[uniform_index(rng, i)]);
    for (std::size_t k = 0; k < shuffled.size(); ++k) {
      dataset.split[shuffled[k]] = k < n_train            ? Split::Train
                                   : k < n_train + n_val ? Split::Val
                                                         : Split::Test;
    }
    return;
  }

  std::vector<std::vector<std::size_t>> classes;
  for (auto& [_, members] : by_class) {
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[uniform_index(rng, i)]);
    classes.push_back(members);
  }

  std::vector<std::size_t> sizes, cap_train, cap_val;
  for (const auto& members : classes) sizes.push_back(members.size());
  cap_train = sizes;
  const auto train_quota = quotas_for(sizes, cap_train, 0.7, n_train);
  for (std::size_t c = 0; c < classes.size(); ++c)
    cap_val.push_back(sizes[c] - train_quota[c]);
  const auto val_quota = quotas_for(sizes, cap_val, 0.2, n_val);

  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& members = classes[c];
    for (std::size_t k = 0; k < members.size(); ++k) {
      dataset.split[members[k]] = k < train_quota[c] ? Split::Train
                                  : k < train_quota[c] + val_quota[c]
                                      ? Split::Val
                                      : Split::Test;
    }
  }
}

Dataset make_unseen_class_testset(const Dataset& pool,
                                  const std::vector<std::string>& dev_fine_classes) {
  std::set<std::string> dev(dev_fine_classes.begin(), dev_fine_classes.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!dev.count(pool.labels[i].str())) rows.push_back(i);
  if (rows.empty())
    throw ValidationError("no examples outside the development fine classes");
  Dataset out = pool.subset(rows);
  std::fill(out.split.begin(), out.split.end(), Split::AltTest);
  return out;
}

void SynthSpec::validate() const {
  if (coarse < 1 || fine_per_coarse < 1 || samples_per_fine < 1 || d_in < 1)
    throw ValidationError("synthetic counts must be at least 1");
  if (!(sigma_coarse > 0.0) || !(sigma_fine > 0.0) || !(sigma_noise > 0.0))
    throw ValidationError("synthetic spreads must be positive");
}

Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  const std::size_t n = static_cast<std::size_t>(spec.coarse) *
                        spec.fine_per_coarse * spec.samples_per_fine;
  Dataset dataset;
  dataset.features = Matrix(n, spec.d_in);
  dataset.labels.reserve(n);
  dataset.ids.reserve(n);
  dataset.split.assign(n, Split::None);

  std::vector<double> coarse_center(spec.d_in), fine_center(spec.d_in);
  std::size_t row = 0;
  for (int ci = 0; ci < spec.coarse; ++ci) {
    for (double& v : coarse_center) v = spec.sigma_coarse * normal01(rng);
    for (int fi = 0; fi < spec.fine_per_coarse; ++fi) {
      for (std::size_t k = 0; k < fine_center.size(); ++k)
        fine_center[k] = coarse_center[k] + spec.sigma_fine * normal01(rng);
      const LabelPath label({"c" + std::to_string(ci),
                             "f" + std::to_string(ci) + "_" + std::to_string(fi)});
      for (int s = 0; s < spec.samples_per_fine; ++s) {
        auto out = dataset.features.row(row);
        for (std::size_t k = 0; k < out.size(); ++k)
          out[k] = fine_center[k] + spec.sigma_noise * normal01(rng);
        dataset.labels.push_back(label);
        dataset.ids.push_back("e" + std::to_string(row));
        ++row;
      }
    }
  }
  return dataset;
}

}  // namespace hiermet
