#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "agirisk/rng.hpp"
#include "agirisk/types.hpp"

namespace agirisk {
namespace nn {

enum class Architecture : int { lstm = 0, bilstm = 1 };

std::string_view architecture_name(Architecture a);
Architecture architecture_from_name(std::string_view name);

struct TrainConfig {
  Architecture architecture = Architecture::lstm;
  int hidden = 200;
  int batch = 32;
  int epochs = 300;
  double dropout = 0.4;
  bool layer_norm = false;
  bool class_weights = false;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// One direction's parameters; gate rows stacked i, f, o, g.
struct LstmBundle {
  Matrix w_input;  // 4H x D
  Matrix w_recur;  // 4H x H
  Vector bias;     // 4H
};

struct ModelParams {
  Architecture architecture = Architecture::lstm;
  int hidden = 0;
  bool layer_norm = false;
  LstmBundle fwd;
  LstmBundle bwd;  // empty unless bilstm
  Matrix w_head;   // C x rep_dim
  Vector b_head;   // C
  Vector ln_gain;  // rep_dim when layer_norm, else empty
  Vector ln_bias;

  // Head input width: H, or 2H for the bidirectional concatenation.
  int rep_dim() const {
    return architecture == Architecture::bilstm ? 2 * hidden : hidden;
  }
};

// Gradients are shape-congruent with the parameters they differentiate.
using GradientBundle = ModelParams;

namespace detail {
template <typename First, typename... Rest>
First& first_param(First& first, Rest&...) {
  return first;
}
}  // namespace detail

// Visits every learnable array in declared order; this order is the
// serialization and flattening contract.
template <typename Fn, typename... Params>
void zip_param_arrays(Fn&& fn, Params&... params) {
  const auto& head = detail::first_param(params...);
  fn(params.fwd.w_input...);
  fn(params.fwd.w_recur...);
  fn(params.fwd.bias...);
  if (head.architecture == Architecture::bilstm) {
    fn(params.bwd.w_input...);
    fn(params.bwd.w_recur...);
    fn(params.bwd.bias...);
  }
  fn(params.w_head...);
  fn(params.b_head...);
  if (head.layer_norm) {
    fn(params.ln_gain...);
    fn(params.ln_bias...);
  }
}

GradientBundle zeros_like(const ModelParams& params);
std::int64_t param_count(const ModelParams& params);
double& param_coeff(ModelParams& params, std::int64_t flat_index);

struct AdamState {
  ModelParams m;  // first moments, zero-initialized
  ModelParams v;  // second moments
  std::int64_t t = 0;

  static AdamState init(const ModelParams& params);
};

// Glorot-uniform input/recurrent/head weights, zero biases except the
// forget-gate bias slice which starts at 1.
ModelParams init_params(const TrainConfig& config, std::uint64_t seed);

// Single cell step. h and c are H-vectors; entries of h lie in (-1, 1).
// Throws Error on non-finite input.
void lstm_cell(const Eigen::Ref<const Vector>& x_t,
               const Eigen::Ref<const Vector>& h_prev,
               const Eigen::Ref<const Vector>& c_prev,
               const LstmBundle& bundle, Vector& h_out, Vector& c_out);

enum class Mode { train, eval };

struct DirectionCache {
  std::vector<Vector> x;  // step inputs, in consumption order
  std::vector<Vector> gate_i, gate_f, gate_o, gate_g;
  std::vector<Vector> c, tanh_c, h;
};

struct ForwardCache {
  DirectionCache fwd;
  DirectionCache bwd;        // populated for bilstm only
  Vector rep;                // final hidden state(s) before dropout
  Vector dropout_mask;       // scaled keep mask; empty when inactive
  Vector rep_dropped;
  bool layer_norm = false;   // layer-norm cache below valid when set
  Vector ln_xhat;
  double ln_inv_sigma = 0.0;
  Vector head_in;
  Vector log_probs;          // C, logsumexp-stabilized
};

// Runs the 6 cell steps (both directions for bilstm, the backward
// direction consuming the time-reversed sequence), dropout with inverted
// scaling in train mode, optional layer normalization, affine head,
// log-softmax. rng supplies the dropout mask in train mode.
ForwardCache forward(const Matrix& sample, const ModelParams& params,
                     const TrainConfig& config, Mode mode, Rng* rng = nullptr);

ForwardCache forward_seeded(const Matrix& sample, const ModelParams& params,
                            const TrainConfig& config, Mode mode,
                            std::uint64_t seed);

// Re-runs a train-mode forward with a pinned scaled dropout mask, so a
// gradient can be checked against finite differences of the same loss.
ForwardCache forward_with_mask(const Matrix& sample, const ModelParams& params,
                               const TrainConfig& config, const Vector& mask);

// loss = -weight * log_probs[label].
double nll_loss(const Vector& log_probs, int label, double weight = 1.0);

// w_c = N_total / (2 * N_c); {1, 1} when disabled. Throws Error when a
// class is absent.
std::array<double, kNumClasses> class_weights(std::int64_t n_no_agitation,
                                              std::int64_t n_agitation,
                                              bool enabled);

// Exact BPTT gradient of nll_loss through the cached forward pass,
// including the dropout mask actually sampled.
GradientBundle backward(const ForwardCache& cache, int label,
                        const ModelParams& params, const TrainConfig& config,
                        double label_weight = 1.0);

void accumulate(GradientBundle& acc, const GradientBundle& grad);
void scale(GradientBundle& grad, double factor);

// Bias-corrected Adam update; increments the step counter.
void adam_step(ModelParams& params, const GradientBundle& grads,
               AdamState& state, const TrainConfig& config);

// Per-epoch seeded shuffle, sequential mini-batches (final partial batch
// kept), Adam on the batch-mean gradient; returns the parameters after the
// last epoch. Throws Error on an empty or single-class training set.
ModelParams train(const std::vector<Matrix>& samples,
                  const std::vector<int>& labels, const TrainConfig& config);

struct Prediction {
  int cls = kNoAgitation;
  double p_agitation = 0.0;
};

// Eval-mode argmax; an exact tie predicts no_agitation.
Prediction predict(const Matrix& sample, const ModelParams& params,
                   const TrainConfig& config);

// Mean eval-mode NLL with unit weights (training-quality probe).
double mean_nll(const std::vector<Matrix>& samples,
                const std::vector<int>& labels, const ModelParams& params,
                const TrainConfig& config);

// Versioned binary checkpoint: config echo plus parameter arrays in
// declared order, little-endian 64-bit floats.
void save_model(const std::string& path, const ModelParams& params,
                const TrainConfig& config);
struct LoadedModel {
  ModelParams params;
  TrainConfig config;
};
LoadedModel load_model(const std::string& path);

}  // namespace nn
}  // namespace agirisk
