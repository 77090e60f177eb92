#pragma once

#include <string>
#include <vector>

#include "hiermet/matrix.hpp"

namespace hiermet {

// Per-dimension training-set statistics used to standardize input features.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at 1e-8 so constant dimensions survive
};

FeatureStats compute_feature_stats(const Matrix& features);
Matrix standardize(const Matrix& features, const FeatureStats& stats);

// Single trainable linear layer; forward output rows are normalized to unit
// norm, which is where all the backprop subtlety lives.
struct ProjectionModel {
  int d_in = 128;
  int d_out = 3;
  Matrix weights;            // d_out x d_in
  std::vector<double> bias;  // d_out
};

// W entries uniform in +-sqrt(1/d_in), bias zero, deterministic per seed.
ProjectionModel init_projection(std::uint32_t seed, int d_in = 128, int d_out = 3);

struct ForwardCache {
  Matrix input;                // N x d_in
  Matrix embeddings;           // N x d_out, unit rows
  std::vector<double> norms;   // |z| per row before normalization
};

// e = (x W^T + b) / |x W^T + b| per row. Throws NumericError when a
// pre-normalization row norm is below 1e-12.
Matrix project_forward(const ProjectionModel& model, const Matrix& x,
                       ForwardCache* cache = nullptr);

struct ParamGrads {
  Matrix weights;            // d_out x d_in
  std::vector<double> bias;  // d_out
};

// Chain rule through the row normalization: grad_z = (g - (g.e) e) / |z|.
ParamGrads project_backward(const ForwardCache& cache, const Matrix& grad_embeddings);

enum class OptimAlgo { Sgd, Adam };

struct OptimizerState {
  OptimAlgo algo = OptimAlgo::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  Matrix m_weights, v_weights;
  std::vector<double> m_bias, v_bias;

  static OptimizerState make(OptimAlgo algo, double lr, int d_in, int d_out);
};

// Throws NumericError on non-finite gradients so the epoch can abort.
void optimizer_step(ProjectionModel& model, OptimizerState& state,
                    const ParamGrads& grads);

// Checkpoint JSON: d_in, d_out, W (row-major), b, feature_mean, feature_std.
void save_checkpoint(const std::string& path, const ProjectionModel& model,
                     const FeatureStats& stats);
std::pair<ProjectionModel, FeatureStats> load_checkpoint(const std::string& path);

}  // namespace hiermet
