#include "hiermet/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace hiermet {

FeatureStats compute_feature_stats(const Matrix& features) {
  if (features.rows == 0) throw ValidationError("no rows to compute feature stats");
  FeatureStats stats;
  stats.mean.assign(features.cols, 0.0);
  stats.std.assign(features.cols, 0.0);
  for (std::size_t r = 0; r < features.rows; ++r)
    for (std::size_t c = 0; c < features.cols; ++c)
      stats.mean[c] += features.at(r, c);
  for (double& m : stats.mean) m /= static_cast<double>(features.rows);
  for (std::size_t r = 0; r < features.rows; ++r)
    for (std::size_t c = 0; c < features.cols; ++c) {
      const double d = features.at(r, c) - stats.mean[c];
      stats.std[c] += d * d;
    }
  for (double& s : stats.std)
    s = std::max(std::sqrt(s / static_cast<double>(features.rows)), 1e-8);
  return stats;
}

Matrix standardize(const Matrix& features, const FeatureStats& stats) {
  if (features.cols != stats.mean.size() || features.cols != stats.std.size())
    throw ValidationError("feature width does not match the stats");
  Matrix out(features.rows, features.cols);
  for (std::size_t r = 0; r < features.rows; ++r)
    for (std::size_t c = 0; c < features.cols; ++c)
      out.at(r, c) = (features.at(r, c) - stats.mean[c]) / stats.std[c];
  return out;
}

ProjectionModel init_projection(std::uint32_t seed, int d_in, int d_out) {
  if (d_in < 1 || d_out < 1)
    throw ValidationError("projection dimensions must be positive");
  ProjectionModel model;
  model.d_in = d_in;
  model.d_out = d_out;
  model.weights = Matrix(d_out, d_in);
  model.bias.assign(d_out, 0.0);
  Rng rng(seed);
  const double bound = std::sqrt(1.0 / d_in);
  for (double& w : model.weights.data) w = uniform_in(rng, -bound, bound);
  return model;
}

Matrix project_forward(const ProjectionModel& model, const Matrix& x,
                       ForwardCache* cache) {
  if (x.cols != static_cast<std::size_t>(model.d_in))
    throw ValidationError("input width " + std::to_string(x.cols) +
                          " does not match model d_in " + std::to_string(model.d_in));

  Matrix emb(x.rows, model.d_out);
  std::vector<double> norms(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (int o = 0; o < model.d_out; ++o)
      emb.at(r, o) = dot(x.row(r), model.weights.row(o)) + model.bias[o];
    const double nz = norm(emb.row(r));
    if (nz < 1e-12)
      throw NumericError("degenerate pre-normalization output at row " +
                         std::to_string(r));
    norms[r] = nz;
    for (int o = 0; o < model.d_out; ++o) emb.at(r, o) /= nz;
  }

  if (cache) {
    cache->input = x;
    cache->embeddings = emb;
    cache->norms = std::move(norms);
  }
  return emb;
}

ParamGrads project_backward(const ForwardCache& cache, const Matrix& grad_embeddings) {
  if (!grad_embeddings.same_shape(cache.embeddings))
    throw ValidationError("embedding gradient shape does not match the cache");

  const std::size_t n = cache.input.rows;
  const std::size_t d_in = cache.input.cols;
  const std::size_t d_out = cache.embeddings.cols;

  ParamGrads grads;
  grads.weights = Matrix(d_out, d_in);
  grads.bias.assign(d_out, 0.0);

  std::vector<double> grad_z(d_out);
  for (std::size_t r = 0; r < n; ++r) {
    auto e = cache.embeddings.row(r);
    auto g = grad_embeddings.row(r);
    const double radial = dot(g, e);
    for (std::size_t o = 0; o < d_out; ++o)
      grad_z[o] = (g[o] - radial * e[o]) / cache.norms[r];
    auto x = cache.input.row(r);
    for (std::size_t o = 0; o < d_out; ++o) {
      grads.bias[o] += grad_z[o];
      auto wrow = grads.weights.row(o);
      for (std::size_t c = 0; c < d_in; ++c) wrow[c] += grad_z[o] * x[c];
    }
  }
  return grads;
}

OptimizerState OptimizerState::make(OptimAlgo algo, double lr, int d_in, int d_out) {
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  OptimizerState state;
  state.algo = algo;
  state.lr = lr;
  state.m_weights = Matrix(d_out, d_in);
  state.v_weights = Matrix(d_out, d_in);
  state.m_bias.assign(d_out, 0.0);
  state.v_bias.assign(d_out, 0.0);
  return state;
}

namespace {

void adam_update(std::vector<double>& param, std::vector<double>& m,
                 std::vector<double>& v, const std::vector<double>& grad,
                 const OptimizerState& s, double bias1, double bias2) {
  for (std::size_t k = 0; k < param.size(); ++k) {
    m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * grad[k];
    v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * grad[k] * grad[k];
    const double mhat = m[k] / bias1;
    const double vhat = v[k] / bias2;
    param[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

void optimizer_step(ProjectionModel& model, OptimizerState& state,
                    const ParamGrads& grads) {
  if (!grads.weights.same_shape(model.weights) ||
      grads.bias.size() != model.bias.size())
    throw ValidationError("gradient shapes do not match the model");
  if (!all_finite(grads.weights) ||
      std::any_of(grads.bias.begin(), grads.bias.end(),
                  [](double g) { return !std::isfinite(g); }))
    throw NumericError("non-finite gradient; aborting the epoch");

  if (state.algo == OptimAlgo::Sgd) {
    for (std::size_t k = 0; k < model.weights.data.size(); ++k)
      model.weights.data[k] -= state.lr * grads.weights.data[k];
    for (std::size_t k = 0; k < model.bias.size(); ++k)
      model.bias[k] -= state.lr * grads.bias[k];
    ++state.step_count;
    return;
  }

  ++state.step_count;
  const double bias1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bias2 = 1.0 - std::pow(state.beta2, state.step_count);
  adam_update(model.weights.data, state.m_weights.data, state.v_weights.data,
              grads.weights.data, state, bias1, bias2);
  adam_update(model.bias, state.m_bias, state.v_bias, grads.bias, state, bias1,
              bias2);
}

void save_checkpoint(const std::string& path, const ProjectionModel& model,
                     const FeatureStats& stats) {
  nlohmann::ordered_json j;
  j["d_in"] = model.d_in;
  j["d_out"] = model.d_out;
  j["W"] = model.weights.data;
  j["b"] = model.bias;
  j["feature_mean"] = stats.mean;
  j["feature_std"] = stats.std;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint to " + path);
  out << j.dump(2) << "\n";
}

std::pair<ProjectionModel, FeatureStats> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path + ": " + e.what());
  }

  ProjectionModel model;
  FeatureStats stats;
  try {
    model.d_in = j.at("d_in").get<int>();
    model.d_out = j.at("d_out").get<int>();
    model.weights = Matrix(model.d_out, model.d_in);
    model.weights.data = j.at("W").get<std::vector<double>>();
    model.bias = j.at("b").get<std::vector<double>>();
    stats.mean = j.at("feature_mean").get<std::vector<double>>();
    stats.std = j.at("feature_std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path + ": " + e.what());
  }
  if (model.weights.data.size() !=
          static_cast<std::size_t>(model.d_in) * model.d_out ||
      model.bias.size() != static_cast<std::size_t>(model.d_out) ||
      stats.mean.size() != static_cast<std::size_t>(model.d_in) ||
      stats.std.size() != static_cast<std::size_t>(model.d_in))
    throw ValidationError("checkpoint field sizes are inconsistent in " + path);
  return {std::move(model), std::move(stats)};
}

}  // namespace hiermet
