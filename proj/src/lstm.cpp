#include "agirisk/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "agirisk/error.hpp"

namespace agirisk {
namespace nn {
namespace {

constexpr double kLayerNormEpsilon = 1e-5;
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"
constexpr std::uint64_t kMaskStream = 0x6d61736b;     // "mask"

Vector sigmoid(const Vector& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

// One step through a direction; records gate activations in the cache.
void step_direction(const LstmBundle& bundle, const Vector& x_t, Vector& h,
                    Vector& c, DirectionCache& cache) {
  const auto H = bundle.w_recur.cols();
  const Vector pre = bundle.w_input * x_t + bundle.w_recur * h + bundle.bias;
  Vector i = sigmoid(pre.segment(0, H));
  Vector f = sigmoid(pre.segment(H, H));
  Vector o = sigmoid(pre.segment(2 * H, H));
  Vector g = pre.segment(3 * H, H).array().tanh().matrix();
  c = (f.array() * c.array() + i.array() * g.array()).matrix();
  Vector tc = c.array().tanh().matrix();
  h = (o.array() * tc.array()).matrix();
  cache.x.push_back(x_t);
  cache.gate_i.push_back(std::move(i));
  cache.gate_f.push_back(std::move(f));
  cache.gate_o.push_back(std::move(o));
  cache.gate_g.push_back(std::move(g));
  cache.c.push_back(c);
  cache.tanh_c.push_back(std::move(tc));
  cache.h.push_back(h);
}

// Runs a full direction over the rows of `sample` in the given order and
// returns the final hidden state.
Vector run_direction(const LstmBundle& bundle, const Matrix& sample,
                     bool reversed, int hidden, DirectionCache& cache) {
  const auto T = sample.rows();
  cache.x.reserve(static_cast<size_t>(T));
  Vector h = Vector::Zero(hidden);
  Vector c = Vector::Zero(hidden);
  for (Index step = 0; step < T; ++step) {
    const Index t = reversed ? T - 1 - step : step;
    const Vector x_t = sample.row(t).transpose();
    step_direction(bundle, x_t, h, c, cache);
  }
  return h;
}

// BPTT through one direction. d_final is the gradient w.r.t. the final
// hidden state of the pass.
void backward_direction(const LstmBundle& bundle, const DirectionCache& cache,
                        const Vector& d_final, LstmBundle& grad) {
  const auto H = bundle.w_recur.cols();
  const auto T = static_cast<Index>(cache.x.size());
  Vector dh = d_final;
  Vector dc = Vector::Zero(H);
  for (Index t = T - 1; t >= 0; --t) {
    const Vector& i = cache.gate_i[static_cast<size_t>(t)];
    const Vector& f = cache.gate_f[static_cast<size_t>(t)];
    const Vector& o = cache.gate_o[static_cast<size_t>(t)];
    const Vector& g = cache.gate_g[static_cast<size_t>(t)];
    const Vector& tc = cache.tanh_c[static_cast<size_t>(t)];
    const Vector c_prev = t > 0 ? cache.c[static_cast<size_t>(t - 1)]
                                : Vector::Zero(H);
    const Vector h_prev = t > 0 ? cache.h[static_cast<size_t>(t - 1)]
                                : Vector::Zero(H);

    const Vector d_o = (dh.array() * tc.array()).matrix();
    dc.array() += dh.array() * o.array() * (1.0 - tc.array().square());

    const Vector d_i = (dc.array() * g.array()).matrix();
    const Vector d_g = (dc.array() * i.array()).matrix();
    const Vector d_f = (dc.array() * c_prev.array()).matrix();

    Vector d_pre(4 * H);
    d_pre.segment(0, H) = (d_i.array() * i.array() * (1.0 - i.array())).matrix();
    d_pre.segment(H, H) = (d_f.array() * f.array() * (1.0 - f.array())).matrix();
    d_pre.segment(2 * H, H) =
        (d_o.array() * o.array() * (1.0 - o.array())).matrix();
    d_pre.segment(3 * H, H) = (d_g.array() * (1.0 - g.array().square())).matrix();

    grad.w_input.noalias() += d_pre * cache.x[static_cast<size_t>(t)].transpose();
    grad.w_recur.noalias() += d_pre * h_prev.transpose();
    grad.bias += d_pre;

    dh.noalias() = bundle.w_recur.transpose() * d_pre;
    dc = (dc.array() * f.array()).matrix();
  }
}

LstmBundle zero_bundle(int hidden, int input_dim) {
  return LstmBundle{Matrix::Zero(4 * hidden, input_dim),
                    Matrix::Zero(4 * hidden, hidden),
                    Vector::Zero(4 * hidden)};
}

void glorot_fill(Matrix& w, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
}

void init_bundle(LstmBundle& bundle, int hidden, int input_dim, Rng& rng) {
  bundle = zero_bundle(hidden, input_dim);
  glorot_fill(bundle.w_input, input_dim, hidden, rng);
  glorot_fill(bundle.w_recur, hidden, hidden, rng);
  bundle.bias.segment(hidden, hidden).setOnes();  // forget gate
}

void write_bytes(std::ofstream& out, const void* data, size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void read_bytes(std::ifstream& in, void* data, size_t len) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (!in) throw IoError("model checkpoint truncated");
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  return a == Architecture::lstm ? "lstm" : "bilstm";
}

Architecture architecture_from_name(std::string_view name) {
  if (name == "lstm") return Architecture::lstm;
  if (name == "bilstm") return Architecture::bilstm;
  throw ParseError("unknown architecture: '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (hidden <= 0) throw ConfigError("train: hidden must be > 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("train: dropout must lie in [0, 1)");
  if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be > 0");
}

GradientBundle zeros_like(const ModelParams& params) {
  GradientBundle g;
  g.architecture = params.architecture;
  g.hidden = params.hidden;
  g.layer_norm = params.layer_norm;
  const int D = static_cast<int>(params.fwd.w_input.cols());
  g.fwd = zero_bundle(params.hidden, D);
  if (params.architecture == Architecture::bilstm)
    g.bwd = zero_bundle(params.hidden, D);
  g.w_head = Matrix::Zero(params.w_head.rows(), params.w_head.cols());
  g.b_head = Vector::Zero(params.b_head.size());
  if (params.layer_norm) {
    g.ln_gain = Vector::Zero(params.ln_gain.size());
    g.ln_bias = Vector::Zero(params.ln_bias.size());
  }
  return g;
}

std::int64_t param_count(const ModelParams& params) {
  std::int64_t n = 0;
  zip_param_arrays([&](const auto& a) { n += a.size(); },
                   const_cast<ModelParams&>(params));
  return n;
}

double& param_coeff(ModelParams& params, std::int64_t flat_index) {
  double* out = nullptr;
  std::int64_t offset = 0;
  zip_param_arrays(
      [&](auto& a) {
        if (!out && flat_index < offset + a.size())
          out = a.data() + (flat_index - offset);
        offset += a.size();
      },
      params);
  if (!out) throw Error("param_coeff: flat index out of range");
  return *out;
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.t = 0;
  return s;
}

ModelParams init_params(const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.architecture = config.architecture;
  p.hidden = config.hidden;
  p.layer_norm = config.layer_norm;
  Rng rng(mix_seed({seed, 0x696e6974}));  // "init"
  init_bundle(p.fwd, config.hidden, kNumFeatures, rng);
  if (config.architecture == Architecture::bilstm)
    init_bundle(p.bwd, config.hidden, kNumFeatures, rng);
  const int rep = p.rep_dim();
  p.w_head = Matrix::Zero(kNumClasses, rep);
  glorot_fill(p.w_head, rep, kNumClasses, rng);
  p.b_head = Vector::Zero(kNumClasses);
  if (config.layer_norm) {
    p.ln_gain = Vector::Ones(rep);
    p.ln_bias = Vector::Zero(rep);
  }
  return p;
}

void lstm_cell(const Eigen::Ref<const Vector>& x_t,
               const Eigen::Ref<const Vector>& h_prev,
               const Eigen::Ref<const Vector>& c_prev,
               const LstmBundle& bundle, Vector& h_out, Vector& c_out) {
  if (!x_t.allFinite() || !h_prev.allFinite() || !c_prev.allFinite())
    throw Error("lstm_cell: non-finite input");
  const auto H = bundle.w_recur.cols();
  const Vector pre =
      bundle.w_input * x_t + bundle.w_recur * h_prev + bundle.bias;
  const Vector i = sigmoid(pre.segment(0, H));
  const Vector f = sigmoid(pre.segment(H, H));
  const Vector o = sigmoid(pre.segment(2 * H, H));
  const Vector g = pre.segment(3 * H, H).array().tanh().matrix();
  c_out = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  h_out = (o.array() * c_out.array().tanh()).matrix();
}

namespace {

ForwardCache forward_impl(const Matrix& sample, const ModelParams& params,
                          const TrainConfig& config, Mode mode, Rng* rng,
                          const Vector* pinned_mask) {
  if (sample.rows() != kNumTimesteps || sample.cols() != kNumFeatures)
    throw Error("forward: sample must be 6 x 24");
  if (!sample.allFinite()) throw Error("forward: non-finite input");

  ForwardCache cache;
  cache.rep = Vector(params.rep_dim());
  cache.rep.segment(0, params.hidden) =
      run_direction(params.fwd, sample, /*reversed=*/false, params.hidden,
                    cache.fwd);
  if (params.architecture == Architecture::bilstm) {
    cache.rep.segment(params.hidden, params.hidden) =
        run_direction(params.bwd, sample, /*reversed=*/true, params.hidden,
                      cache.bwd);
  }

  if (pinned_mask) {
    cache.dropout_mask = *pinned_mask;
    cache.rep_dropped =
        (cache.rep.array() * cache.dropout_mask.array()).matrix();
  } else if (mode == Mode::train && config.dropout > 0.0) {
    if (!rng) throw Error("forward: train mode needs an rng for dropout");
    const double keep_scale = 1.0 / (1.0 - config.dropout);
    cache.dropout_mask = Vector(cache.rep.size());
    for (Index k = 0; k < cache.dropout_mask.size(); ++k)
      cache.dropout_mask[k] = rng->bernoulli(config.dropout) ? 0.0 : keep_scale;
    cache.rep_dropped =
        (cache.rep.array() * cache.dropout_mask.array()).matrix();
  } else {
    cache.rep_dropped = cache.rep;
  }

  if (params.layer_norm) {
    cache.layer_norm = true;
    const double mu = cache.rep_dropped.mean();
    const double var =
        (cache.rep_dropped.array() - mu).square().sum() /
        static_cast<double>(cache.rep_dropped.size());
    cache.ln_inv_sigma = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    cache.ln_xhat =
        ((cache.rep_dropped.array() - mu) * cache.ln_inv_sigma).matrix();
    cache.head_in = (params.ln_gain.array() * cache.ln_xhat.array() +
                     params.ln_bias.array())
                        .matrix();
  } else {
    cache.head_in = cache.rep_dropped;
  }

  const Vector logits = params.w_head * cache.head_in + params.b_head;
  const double zmax = logits.maxCoeff();
  const double lse = zmax + std::log((logits.array() - zmax).exp().sum());
  cache.log_probs = (logits.array() - lse).matrix();
  return cache;
}

}  // namespace

ForwardCache forward(const Matrix& sample, const ModelParams& params,
                     const TrainConfig& config, Mode mode, Rng* rng) {
  return forward_impl(sample, params, config, mode, rng, nullptr);
}

ForwardCache forward_seeded(const Matrix& sample, const ModelParams& params,
                            const TrainConfig& config, Mode mode,
                            std::uint64_t seed) {
  Rng rng(mix_seed({seed, kMaskStream}));
  return forward_impl(sample, params, config, mode, &rng, nullptr);
}

ForwardCache forward_with_mask(const Matrix& sample, const ModelParams& params,
                               const TrainConfig& config, const Vector& mask) {
  return forward_impl(sample, params, config, Mode::train, nullptr, &mask);
}

double nll_loss(const Vector& log_probs, int label, double weight) {
  return -weight * log_probs[label];
}

std::array<double, kNumClasses> class_weights(std::int64_t n_no_agitation,
                                              std::int64_t n_agitation,
                                              bool enabled) {
  if (n_no_agitation <= 0 || n_agitation <= 0)
    throw Error("class_weights: a class is absent from the training data");
  if (!enabled) return {1.0, 1.0};
  const double total = static_cast<double>(n_no_agitation + n_agitation);
  return {total / (2.0 * static_cast<double>(n_no_agitation)),
          total / (2.0 * static_cast<double>(n_agitation))};
}

GradientBundle backward(const ForwardCache& cache, int label,
                        const ModelParams& params, const TrainConfig& config,
                        double label_weight) {
  (void)config;
  GradientBundle grad = zeros_like(params);

  // d loss / d logits for loss = -w * log_softmax(logits)[label].
  Vector d_logits = cache.log_probs.array().exp().matrix() * label_weight;
  d_logits[label] -= label_weight;

  grad.w_head.noalias() = d_logits * cache.head_in.transpose();
  grad.b_head = d_logits;
  Vector d_head_in = params.w_head.transpose() * d_logits;

  Vector d_rep_dropped;
  if (params.layer_norm) {
    grad.ln_gain = (d_head_in.array() * cache.ln_xhat.array()).matrix();
    grad.ln_bias = d_head_in;
    const Vector d_xhat = (d_head_in.array() * params.ln_gain.array()).matrix();
    const double n = static_cast<double>(d_xhat.size());
    const double mean_dxhat = d_xhat.mean();
    const double mean_dxhat_xhat =
        (d_xhat.array() * cache.ln_xhat.array()).sum() / n;
    d_rep_dropped = (cache.ln_inv_sigma *
                     (d_xhat.array() - mean_dxhat -
                      cache.ln_xhat.array() * mean_dxhat_xhat))
                        .matrix();
  } else {
    d_rep_dropped = d_head_in;
  }

  Vector d_rep;
  if (cache.dropout_mask.size() > 0) {
    d_rep = (d_rep_dropped.array() * cache.dropout_mask.array()).matrix();
  } else {
    d_rep = d_rep_dropped;
  }

  backward_direction(params.fwd, cache.fwd, d_rep.segment(0, params.hidden),
                     grad.fwd);
  if (params.architecture == Architecture::bilstm) {
    backward_direction(params.bwd, cache.bwd,
                       d_rep.segment(params.hidden, params.hidden), grad.bwd);
  }
  return grad;
}

void accumulate(GradientBundle& acc, const GradientBundle& grad) {
  zip_param_arrays([](auto& a, const auto& b) { a += b; }, acc,
                   const_cast<GradientBundle&>(grad));
}

void scale(GradientBundle& grad, double factor) {
  zip_param_arrays([factor](auto& a) { a *= factor; }, grad);
}

void adam_step(ModelParams& params, const GradientBundle& grads,
               AdamState& state, const TrainConfig& config) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  zip_param_arrays(
      [&](auto& p, const auto& g, auto& m, auto& v) {
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = (config.beta2 * v.array() +
             (1.0 - config.beta2) * g.array().square())
                .matrix();
        p.array() -= config.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + config.epsilon);
      },
      params, const_cast<GradientBundle&>(grads), state.m, state.v);
}

ModelParams train(const std::vector<Matrix>& samples,
                  const std::vector<int>& labels, const TrainConfig& config) {
  config.validate();
  if (samples.empty() || samples.size() != labels.size())
    throw Error("train: empty training set or size mismatch");
  std::int64_t n_pos = 0;
  for (int y : labels) n_pos += y == kAgitation;
  const std::int64_t n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error("train: training set is single-class");

  const auto weights = class_weights(n_neg, n_pos, config.class_weights);
  ModelParams params = init_params(config, config.seed);
  AdamState state = AdamState::init(params);

  std::vector<std::int64_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::int64_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed({config.seed, kShuffleStream,
                              static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch)) {
      const size_t stop =
          std::min(order.size(), start + static_cast<size_t>(config.batch));
      // Accumulate in ascending sample order so the update depends on batch
      // membership only, not on the visiting order within the batch.
      std::vector<std::int64_t> batch(order.begin() + static_cast<long>(start),
                                      order.begin() + static_cast<long>(stop));
      std::sort(batch.begin(), batch.end());
      GradientBundle batch_grad = zeros_like(params);
      for (const auto idx : batch) {
        // The dropout mask is keyed to the sample, not to its position in
        // the batch, so batch composition alone determines the update.
        Rng mask_rng(mix_seed({config.seed, kMaskStream,
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(idx)}));
        const ForwardCache cache =
            forward(samples[static_cast<size_t>(idx)], params, config,
                    Mode::train, &mask_rng);
        const GradientBundle g =
            backward(cache, labels[static_cast<size_t>(idx)], params, config,
                     weights[static_cast<size_t>(
                         labels[static_cast<size_t>(idx)])]);
        accumulate(batch_grad, g);
      }
      scale(batch_grad, 1.0 / static_cast<double>(batch.size()));
      adam_step(params, batch_grad, state, config);
    }
  }
  return params;
}

Prediction predict(const Matrix& sample, const ModelParams& params,
                   const TrainConfig& config) {
  const ForwardCache cache =
      forward_impl(sample, params, config, Mode::eval, nullptr, nullptr);
  Prediction p;
  p.cls = cache.log_probs[kAgitation] > cache.log_probs[kNoAgitation]
              ? kAgitation
              : kNoAgitation;
  p.p_agitation = std::exp(cache.log_probs[kAgitation]);
  return p;
}

double mean_nll(const std::vector<Matrix>& samples,
                const std::vector<int>& labels, const ModelParams& params,
                const TrainConfig& config) {
  if (samples.empty()) throw Error("mean_nll: empty sample set");
  double total = 0.0;
  for (size_t k = 0; k < samples.size(); ++k) {
    const ForwardCache cache =
        forward_impl(samples[k], params, config, Mode::eval, nullptr, nullptr);
    total += nll_loss(cache.log_probs, labels[k]);
  }
  return total / static_cast<double>(samples.size());
}

namespace {
constexpr char kModelMagic[8] = {'A', 'G', 'R', 'K', 'M', 'D', 'L', '1'};
}

void save_model(const std::string& path, const ModelParams& params,
                const TrainConfig& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  write_bytes(out, kModelMagic, sizeof(kModelMagic));
  const std::int32_t header[6] = {
      static_cast<std::int32_t>(config.architecture),
      config.hidden,
      config.layer_norm ? 1 : 0,
      config.class_weights ? 1 : 0,
      config.batch,
      config.epochs,
  };
  write_bytes(out, header, sizeof(header));
  const double fheader[5] = {config.dropout, config.learning_rate,
                             config.beta1, config.beta2, config.epsilon};
  write_bytes(out, fheader, sizeof(fheader));
  const std::uint64_t seed = config.seed;
  write_bytes(out, &seed, sizeof(seed));
  zip_param_arrays(
      [&](auto& a) {
        const std::int64_t rows = a.rows(), cols = a.cols();
        write_bytes(out, &rows, sizeof(rows));
        write_bytes(out, &cols, sizeof(cols));
        write_bytes(out, a.data(), sizeof(double) * static_cast<size_t>(a.size()));
      },
      const_cast<ModelParams&>(params));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  read_bytes(in, magic, sizeof(magic));
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw IoError("not a model checkpoint: " + path);
  std::int32_t header[6];
  read_bytes(in, header, sizeof(header));
  double fheader[5];
  read_bytes(in, fheader, sizeof(fheader));
  std::uint64_t seed = 0;
  read_bytes(in, &seed, sizeof(seed));

  LoadedModel loaded;
  loaded.config.architecture = static_cast<Architecture>(header[0]);
  loaded.config.hidden = header[1];
  loaded.config.layer_norm = header[2] != 0;
  loaded.config.class_weights = header[3] != 0;
  loaded.config.batch = header[4];
  loaded.config.epochs = header[5];
  loaded.config.dropout = fheader[0];
  loaded.config.learning_rate = fheader[1];
  loaded.config.beta1 = fheader[2];
  loaded.config.beta2 = fheader[3];
  loaded.config.epsilon = fheader[4];
  loaded.config.seed = seed;

  loaded.params = init_params(loaded.config, seed);
  zip_param_arrays(
      [&](auto& a) {
        std::int64_t rows = 0, cols = 0;
        read_bytes(in, &rows, sizeof(rows));
        read_bytes(in, &cols, sizeof(cols));
        if (rows != a.rows() || cols != a.cols())
          throw IoError("checkpoint array shape mismatch");
        read_bytes(in, a.data(), sizeof(double) * static_cast<size_t>(a.size()));
      },
      loaded.params);
  return loaded;
}

}  // namespace nn
}  // namespace agirisk
