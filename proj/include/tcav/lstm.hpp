#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcav/error.hpp"
#include "tcav/graph.hpp"
#include "tcav/io.hpp"
#include "tcav/rng.hpp"
#include "tcav/stats.hpp"
#include "tcav/tensor.hpp"

// Stacked LSTM sequence model with K independent sigmoid heads, trained by
// full backpropagation through time. The cell is composed from graph
// primitives (no fused ops), so every gradient path is covered by the same
// machinery the finite-difference checks exercise.
//
// Layer and timestep indices are 0-based throughout.

namespace tcav::rnn {

struct ModelSpec {
  std::size_t n_layers = 3;
  std::size_t hidden_size = 64;
  std::size_t input_size = 10;
  std::size_t n_targets = 2;

  void validate() const {
    require(n_layers >= 1, "ModelSpec: n_layers must be >= 1");
    require(hidden_size >= 1, "ModelSpec: hidden_size must be >= 1");
    require(input_size >= 1 && n_targets >= 1, "ModelSpec: input/target sizes must be >= 1");
  }

  std::size_t layer_input(std::size_t l) const { return l == 0 ? input_size : hidden_size; }
};

struct TrainConfig {
  double lr = 3e-4;
  std::size_t batch = 32;
  std::size_t steps = 10000;
  std::uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

struct Params {
  std::vector<num::Tensor> w;  // per layer [in+H, 4H], gate order i,f,g,o
  std::vector<num::Tensor> b;  // per layer [1, 4H]
  num::Tensor w_out;           // [H, K]
  num::Tensor b_out;           // [1, K]
};

struct TrainedModel {
  ModelSpec spec;
  Params params;
  TrainConfig train_config;
  std::vector<double> loss_history;

  void validate() const {
    spec.validate();
    require(params.w.size() == spec.n_layers && params.b.size() == spec.n_layers,
            "TrainedModel: parameter count mismatch");
    auto check_finite = [](const num::Tensor& t, const char* what) {
      for (std::size_t i = 0; i < t.size(); ++i)
        require(std::isfinite(t[i]), std::string("TrainedModel: non-finite value in ") + what);
    };
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
      require(params.w[l].shape() ==
                  num::Shape{spec.layer_input(l) + spec.hidden_size, 4 * spec.hidden_size},
              "TrainedModel: cell weight shape mismatch");
      check_finite(params.w[l], "cell weights");
      check_finite(params.b[l], "cell bias");
    }
    check_finite(params.w_out, "head weights");
    check_finite(params.b_out, "head bias");
  }
};

// Hidden states of every layer at every timestep, a[t, l, :].
struct ActivationTrace {
  num::Tensor a;  // [T, L, H]
};

// Internal forward record: hidden and cell states plus outputs. The hidden
// block recomputes bit-identically to predict() since both run the same
// graph structure.
struct ForwardTrace {
  num::Tensor a;       // [T, L, H]
  num::Tensor c;       // [T, L, H]
  num::Tensor logits;  // [T, K]
  num::Tensor probs;   // [T, K]
};

inline double clamp_prob(double p) {
  return std::min(std::max(p, std::numeric_limits<double>::min()),
                  std::nextafter(1.0, 0.0));
}

inline Params init_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  Params p;
  const std::size_t H = spec.hidden_size;
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    const std::size_t fan_in = spec.layer_input(l) + H;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    num::Tensor w({fan_in, 4 * H});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (2.0 * rng.uniform() - 1.0) * bound;
    num::Tensor b({1, 4 * H});
    for (std::size_t j = H; j < 2 * H; ++j) b[j] = 1.0;  // forget gate bias
    p.w.push_back(std::move(w));
    p.b.push_back(std::move(b));
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(H));
  p.w_out = num::Tensor({H, spec.n_targets});
  for (std::size_t i = 0; i < p.w_out.size(); ++i)
    p.w_out[i] = (2.0 * rng.uniform() - 1.0) * bound;
  p.b_out = num::Tensor({1, spec.n_targets});
  return p;
}

namespace detail {

// One LSTM cell step from primitives; returns {h_id, c_id}.
inline std::pair<int, int> cell_step(num::ComputeGraph& g, std::size_t H, int input, int h_prev,
                                     int c_prev, int w, int b) {
  const int z = g.add(g.matmul(g.concat({input, h_prev}, 1), w), b);
  const int i_gate = g.sigmoid(g.slice(z, 1, 0, H));
  const int f_gate = g.sigmoid(g.slice(z, 1, H, H));
  const int g_gate = g.tanh(g.slice(z, 1, 2 * H, H));
  const int o_gate = g.sigmoid(g.slice(z, 1, 3 * H, H));
  const int c = g.add(g.mul(f_gate, c_prev), g.mul(i_gate, g_gate));
  const int h = g.mul(o_gate, g.tanh(c));
  return {h, c};
}

struct SeqGraph {
  num::ComputeGraph g;
  std::size_t T = 0, B = 0;
  std::vector<int> x_ids;
  std::vector<std::vector<int>> h_ids, c_ids;  // [t][l]
  int targets_id = -1;
  int logits_id = -1;

  num::Tensor& x_leaf(std::size_t t) { return g.mutable_leaf("x" + std::to_string(t)); }
};

inline SeqGraph build_unrolled(const ModelSpec& spec, std::size_t T, std::size_t B,
                               bool with_loss) {
  spec.validate();
  require(T >= 1 && B >= 1, "build_unrolled: T and B must be >= 1");
  const std::size_t L = spec.n_layers, H = spec.hidden_size, K = spec.n_targets;
  SeqGraph sg;
  sg.T = T;
  sg.B = B;
  num::ComputeGraph& g = sg.g;

  std::vector<int> w_ids(L), b_ids(L);
  for (std::size_t l = 0; l < L; ++l) {
    w_ids[l] = g.leaf("w" + std::to_string(l), {spec.layer_input(l) + H, 4 * H});
    b_ids[l] = g.leaf("b" + std::to_string(l), {1, 4 * H});
  }
  const int w_out = g.leaf("w_out", {H, K});
  const int b_out = g.leaf("b_out", {1, K});
  const int zero_state = g.leaf("zero_state", {B, H}, /*differentiable=*/false);

  sg.x_ids.resize(T);
  sg.h_ids.assign(T, std::vector<int>(L, -1));
  sg.c_ids.assign(T, std::vector<int>(L, -1));
  for (std::size_t t = 0; t < T; ++t)
    sg.x_ids[t] = g.leaf("x" + std::to_string(t), {B, spec.input_size}, false);

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      const int input = l == 0 ? sg.x_ids[t] : sg.h_ids[t][l - 1];
      const int h_prev = t == 0 ? zero_state : sg.h_ids[t - 1][l];
      const int c_prev = t == 0 ? zero_state : sg.c_ids[t - 1][l];
      auto [h, c] = cell_step(g, H, input, h_prev, c_prev, w_ids[l], b_ids[l]);
      sg.h_ids[t][l] = h;
      sg.c_ids[t][l] = c;
    }
  }

  std::vector<int> top;
  top.reserve(T);
  for (std::size_t t = 0; t < T; ++t) top.push_back(sg.h_ids[t][L - 1]);
  const int stacked = T == 1 ? top[0] : g.concat(top, 0);     // [T*B, H]
  sg.logits_id = g.add(g.matmul(stacked, w_out), b_out);      // [T*B, K]
  g.mark_output(sg.logits_id, "logits");
  if (with_loss) {
    sg.targets_id = g.leaf("targets", {T * B, K}, false);
    g.mark_output(g.sigmoid_cross_entropy(sg.logits_id, sg.targets_id), "loss");
  } else {
    g.mark_output(g.sigmoid(sg.logits_id), "probs");
  }
  return sg;
}

inline void bind_params(num::ComputeGraph& g, const Params& p) {
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    g.set_leaf("w" + std::to_string(l), p.w[l]);
    g.set_leaf("b" + std::to_string(l), p.b[l]);
  }
  g.set_leaf("w_out", p.w_out);
  g.set_leaf("b_out", p.b_out);
}

inline void check_series(const TrainedModel& m, const num::Tensor& x) {
  require(x.rank() == 2, "series must be a [T, D] tensor");
  require(x.cols() == m.spec.input_size,
          "series has " + std::to_string(x.cols()) + " features, model expects " +
              std::to_string(m.spec.input_size));
  require(x.rows() >= 1, "series must have at least one timestep");
}

}  // namespace detail

struct SeriesRef {
  const num::Tensor* x;  // [T, D]
  const num::Tensor* y;  // [T, K]
};

inline TrainedModel train(const ModelSpec& spec, const std::vector<SeriesRef>& data,
                          const TrainConfig& cfg) {
  spec.validate();
  require(!data.empty(), "train: empty dataset");
  require(cfg.batch >= 1 && cfg.steps >= 1, "train: batch and steps must be >= 1");
  const std::size_t T = data[0].x->rows();
  for (const auto& s : data) {
    require(s.x->rows() == T && s.y->rows() == T, "train: all series must share one length");
    require(s.x->cols() == spec.input_size, "train: feature count mismatch");
    require(s.y->cols() == spec.n_targets, "train: target count mismatch");
  }

  const Rng root(cfg.seed);
  Rng init_rng = root.derive("init");
  Rng batch_rng = root.derive("batches");

  TrainedModel model;
  model.spec = spec;
  model.train_config = cfg;
  model.params = init_params(spec, init_rng);
  model.loss_history.reserve(cfg.steps);

  detail::SeqGraph sg = detail::build_unrolled(spec, T, cfg.batch, /*with_loss=*/true);
  detail::bind_params(sg.g, model.params);
  sg.g.set_leaf("zero_state", num::Tensor({cfg.batch, spec.hidden_size}));

  const std::size_t K = spec.n_targets, D = spec.input_size, B = cfg.batch;
  num::Tensor targets({T * B, K});

  // Adam state, one slot per parameter leaf.
  struct Slot {
    std::string name;
    num::Tensor* value;
    num::Tensor m, v;
  };
  std::vector<Slot> slots;
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    slots.push_back({"w" + std::to_string(l), &model.params.w[l],
                     num::Tensor(model.params.w[l].shape()), num::Tensor(model.params.w[l].shape())});
    slots.push_back({"b" + std::to_string(l), &model.params.b[l],
                     num::Tensor(model.params.b[l].shape()), num::Tensor(model.params.b[l].shape())});
  }
  slots.push_back({"w_out", &model.params.w_out, num::Tensor(model.params.w_out.shape()),
                   num::Tensor(model.params.w_out.shape())});
  slots.push_back({"b_out", &model.params.b_out, num::Tensor(model.params.b_out.shape()),
                   num::Tensor(model.params.b_out.shape())});

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t bi = 0; bi < B; ++bi) {
      const SeriesRef& s = data[batch_rng.uniform_int(data.size())];
      for (std::size_t t = 0; t < T; ++t) {
        num::Tensor& xt = sg.x_leaf(t);
        for (std::size_t d = 0; d < D; ++d) xt(bi, d) = (*s.x)(t, d);
        for (std::size_t k = 0; k < K; ++k) targets(t * B + bi, k) = (*s.y)(t, k);
      }
    }
    sg.g.set_leaf("targets", targets);
    sg.g.run_forward();
    const double loss = sg.g.value("loss")[0];
    if (!std::isfinite(loss))
      throw Error("train: non-finite loss at step " + std::to_string(step));
    model.loss_history.push_back(loss);

    auto grads = sg.g.backward("loss");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step + 1));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step + 1));
    for (auto& slot : slots) {
      const num::Tensor& grad = grads.at(slot.name);
      num::Tensor& theta = *slot.value;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * grad[i];
        slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        theta[i] -= cfg.lr * (slot.m[i] / bc1) / (std::sqrt(slot.v[i] / bc2) + cfg.epsilon);
      }
      sg.g.set_leaf(slot.name, theta);
    }
  }
  return model;
}

inline ForwardTrace full_forward(const TrainedModel& model, const num::Tensor& x) {
  detail::check_series(model, x);
  const std::size_t T = x.rows(), L = model.spec.n_layers, H = model.spec.hidden_size,
                    K = model.spec.n_targets;
  detail::SeqGraph sg = detail::build_unrolled(model.spec, T, 1, /*with_loss=*/false);
  detail::bind_params(sg.g, model.params);
  sg.g.set_leaf("zero_state", num::Tensor({1, H}));
  for (std::size_t t = 0; t < T; ++t) {
    num::Tensor& xt = sg.x_leaf(t);
    std::copy(x.data() + t * x.cols(), x.data() + (t + 1) * x.cols(), xt.data());
  }
  sg.g.run_forward();

  ForwardTrace tr;
  tr.a = num::Tensor({T, L, H});
  tr.c = num::Tensor({T, L, H});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t l = 0; l < L; ++l) {
      const num::Tensor& h = sg.g.value(sg.h_ids[t][l]);
      const num::Tensor& c = sg.g.value(sg.c_ids[t][l]);
      std::copy(h.data(), h.data() + H, tr.a.data() + (t * L + l) * H);
      std::copy(c.data(), c.data() + H, tr.c.data() + (t * L + l) * H);
    }
  tr.logits = num::Tensor({T, K}, sg.g.value("logits").vec());
  tr.probs = num::Tensor({T, K});
  for (std::size_t i = 0; i < tr.probs.size(); ++i)
    tr.probs[i] = clamp_prob(num::stable_sigmoid(tr.logits[i]));
  return tr;
}

// Per-timestep probabilities, strictly inside (0, 1). Causal: the output at
// t depends only on x[0..t].
inline num::Tensor predict(const TrainedModel& model, const num::Tensor& x) {
  return full_forward(model, x).probs;
}

inline ActivationTrace activations(const TrainedModel& model, const num::Tensor& x) {
  return ActivationTrace{full_forward(model, x).a};
}

namespace detail {

// Single-timestep graph of the layers above `layer` (the h(...) map): from
// an activation at (t, layer) through layers layer+1..L-1 at the same
// timestep to the heads. Previous hidden/cell states enter as constants.
struct UpperStack {
  num::ComputeGraph g;
  std::size_t layer, L;

  UpperStack(const TrainedModel& model, std::size_t from_layer) : layer(from_layer) {
    L = model.spec.n_layers;
    const std::size_t H = model.spec.hidden_size;
    int cur = g.leaf("a", {1, H});
    for (std::size_t j = layer + 1; j < L; ++j) {
      const std::string sj = std::to_string(j);
      const int hp = g.leaf("h_prev" + sj, {1, H}, false);
      const int cp = g.leaf("c_prev" + sj, {1, H}, false);
      const int w = g.leaf("w" + sj, model.params.w[j].shape(), false);
      const int b = g.leaf("b" + sj, model.params.b[j].shape(), false);
      cur = cell_step(g, H, cur, hp, cp, w, b).first;
      g.set_leaf("w" + sj, model.params.w[j]);
      g.set_leaf("b" + sj, model.params.b[j]);
    }
    const int w_out = g.leaf("w_out", model.params.w_out.shape(), false);
    const int b_out = g.leaf("b_out", model.params.b_out.shape(), false);
    const int logits = g.add(g.matmul(cur, w_out), b_out);
    g.set_leaf("w_out", model.params.w_out);
    g.set_leaf("b_out", model.params.b_out);
    g.mark_output(logits, "logits");
    g.mark_output(g.sigmoid(logits), "probs");
  }

  void bind(const ForwardTrace& tr, std::size_t t) {
    const std::size_t H = tr.a.dim(2);
    g.set_leaf("a", num::Tensor({1, H}, std::vector<double>(
                                            tr.a.data() + (t * L + layer) * H,
                                            tr.a.data() + (t * L + layer + 1) * H)));
    for (std::size_t j = layer + 1; j < L; ++j) {
      num::Tensor hp({1, H}), cp({1, H});
      if (t > 0) {
        std::copy(tr.a.data() + ((t - 1) * L + j) * H, tr.a.data() + ((t - 1) * L + j + 1) * H,
                  hp.data());
        std::copy(tr.c.data() + ((t - 1) * L + j) * H, tr.c.data() + ((t - 1) * L + j + 1) * H,
                  cp.data());
      }
      g.set_leaf("h_prev" + std::to_string(j), hp);
      g.set_leaf("c_prev" + std::to_string(j), cp);
    }
  }

  num::Tensor gradient(std::size_t k, bool sigmoid_output) {
    g.run_forward();
    auto grads = g.backward_component(sigmoid_output ? "probs" : "logits", k);
    const num::Tensor& ga = grads.at("a");
    return num::Tensor({ga.size()}, ga.vec());
  }
};

}  // namespace detail

// d output(t, k) / d a[t, layer]: flows through the layers above `layer` at
// timestep t only, not through later timesteps. Output is the
// sigmoid-activated head by default; set sigmoid_output=false for the logit.
inline num::Tensor grad_output_wrt_activation(const TrainedModel& model, const ForwardTrace& tr,
                                              std::size_t layer, std::size_t t, std::size_t k,
                                              bool sigmoid_output = true) {
  require(layer < model.spec.n_layers, "grad_output_wrt_activation: layer out of range");
  require(t < tr.a.dim(0), "grad_output_wrt_activation: timestep out of range");
  require(k < model.spec.n_targets, "grad_output_wrt_activation: target out of range");
  detail::UpperStack stack(model, layer);
  stack.bind(tr, t);
  return stack.gradient(k, sigmoid_output);
}

inline num::Tensor grad_output_wrt_activation(const TrainedModel& model, const num::Tensor& x,
                                              std::size_t layer, std::size_t t, std::size_t k,
                                              bool sigmoid_output = true) {
  return grad_output_wrt_activation(model, full_forward(model, x), layer, t, k, sigmoid_output);
}

namespace detail {

// Single-timestep graph of the whole stack, differentiable in the input:
// x[t1] -> layer 0..L-1 at t1 -> heads. Instantaneous gradients only.
struct InputStack {
  num::ComputeGraph g;
  std::size_t L;

  explicit InputStack(const TrainedModel& model) {
    L = model.spec.n_layers;
    const std::size_t H = model.spec.hidden_size;
    int cur = g.leaf("x", {1, model.spec.input_size});
    for (std::size_t j = 0; j < L; ++j) {
      const std::string sj = std::to_string(j);
      const int hp = g.leaf("h_prev" + sj, {1, H}, false);
      const int cp = g.leaf("c_prev" + sj, {1, H}, false);
      const int w = g.leaf("w" + sj, model.params.w[j].shape(), false);
      const int b = g.leaf("b" + sj, model.params.b[j].shape(), false);
      cur = cell_step(g, H, cur, hp, cp, w, b).first;
      g.set_leaf("w" + sj, model.params.w[j]);
      g.set_leaf("b" + sj, model.params.b[j]);
    }
    const int w_out = g.leaf("w_out", model.params.w_out.shape(), false);
    const int b_out = g.leaf("b_out", model.params.b_out.shape(), false);
    const int logits = g.add(g.matmul(cur, w_out), b_out);
    g.set_leaf("w_out", model.params.w_out);
    g.set_leaf("b_out", model.params.b_out);
    g.mark_output(logits, "logits");
    g.mark_output(g.sigmoid(logits), "probs");
  }

  void bind(const num::Tensor& x, const ForwardTrace& tr, std::size_t t) {
    const std::size_t H = tr.a.dim(2), D = x.cols();
    g.set_leaf("x", num::Tensor({1, D}, std::vector<double>(x.data() + t * D,
                                                            x.data() + (t + 1) * D)));
    for (std::size_t j = 0; j < L; ++j) {
      num::Tensor hp({1, H}), cp({1, H});
      if (t > 0) {
        std::copy(tr.a.data() + ((t - 1) * L + j) * H, tr.a.data() + ((t - 1) * L + j + 1) * H,
                  hp.data());
        std::copy(tr.c.data() + ((t - 1) * L + j) * H, tr.c.data() + ((t - 1) * L + j + 1) * H,
                  cp.data());
      }
      g.set_leaf("h_prev" + std::to_string(j), hp);
      g.set_leaf("c_prev" + std::to_string(j), cp);
    }
  }

  num::Tensor gradient(std::size_t k, bool sigmoid_output) {
    g.run_forward();
    auto grads = g.backward_component(sigmoid_output ? "probs" : "logits", k);
    const num::Tensor& gx = grads.at("x");
    return num::Tensor({gx.size()}, gx.vec());
  }
};

}  // namespace detail

// d output(t1, k) / d x[t1, :], the instantaneous input gradient.
inline num::Tensor grad_output_wrt_inputs(const TrainedModel& model, const num::Tensor& x,
                                          std::size_t t1, std::size_t k,
                                          bool sigmoid_output = true) {
  detail::check_series(model, x);
  require(t1 < x.rows(), "grad_output_wrt_inputs: timestep out of range");
  require(k < model.spec.n_targets, "grad_output_wrt_inputs: target out of range");
  ForwardTrace tr = full_forward(model, x);
  detail::InputStack stack(model);
  stack.bind(x, tr, t1);
  return stack.gradient(k, sigmoid_output);
}

// Fraction of (timestep, target) cells where the thresholded prediction
// (p >= 0.5 classifies as 1) matches the label.
inline double per_sequence_accuracy(const TrainedModel& model, const num::Tensor& x,
                                    const num::Tensor& y) {
  const num::Tensor p = predict(model, x);
  require(p.same_shape(y), "per_sequence_accuracy: label shape mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if ((p[i] >= 0.5 ? 1.0 : 0.0) == y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

struct EvalReport {
  double accuracy = 0.0;
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t n_points = 0;
};

// Metrics pooled over all series, timesteps and targets.
inline EvalReport evaluate_model(const TrainedModel& model, const std::vector<SeriesRef>& data) {
  require(!data.empty(), "evaluate_model: empty evaluation set");
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t hits = 0;
  for (const auto& s : data) {
    const num::Tensor p = predict(model, *s.x);
    require(p.same_shape(*s.y), "evaluate_model: label shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      scores.push_back(p[i]);
      labels.push_back((*s.y)[i] != 0.0 ? 1 : 0);
      if ((p[i] >= 0.5 ? 1.0 : 0.0) == (*s.y)[i]) ++hits;
    }
  }
  EvalReport r;
  r.n_points = scores.size();
  r.accuracy = static_cast<double>(hits) / static_cast<double>(scores.size());
  r.auroc = stats::auroc(scores, labels);
  r.auprc = stats::auprc(scores, labels);
  return r;
}

// --- checkpointing ----------------------------------------------------------

inline void save_model(const std::filesystem::path& dir, const TrainedModel& model) {
  io::TensorWriter tw;
  for (std::size_t l = 0; l < model.spec.n_layers; ++l) {
    tw.add("w" + std::to_string(l), model.params.w[l]);
    tw.add("b" + std::to_string(l), model.params.b[l]);
  }
  tw.add("w_out", model.params.w_out);
  tw.add("b_out", model.params.b_out);
  if (!model.loss_history.empty())
    tw.add("loss_history", num::Tensor({model.loss_history.size()}, model.loss_history));
  io::json j{{"format", "tcav-model"},
             {"version", 1},
             {"spec",
              {{"n_layers", model.spec.n_layers},
               {"hidden_size", model.spec.hidden_size},
               {"input_size", model.spec.input_size},
               {"n_targets", model.spec.n_targets}}},
             {"train_config",
              {{"lr", model.train_config.lr},
               {"batch", model.train_config.batch},
               {"steps", model.train_config.steps},
               {"seed", model.train_config.seed},
               {"beta1", model.train_config.beta1},
               {"beta2", model.train_config.beta2},
               {"epsilon", model.train_config.epsilon}}},
             {"params", tw.manifest}};
  std::filesystem::create_directories(dir);
  tw.save(dir / "params.bin");
  io::write_json_atomic(dir / "model.json", j);
}

inline TrainedModel load_model(const std::filesystem::path& dir) {
  const io::json j = io::read_json(dir / "model.json");
  require(j.at("format") == "tcav-model", "load_model: not a model directory");
  TrainedModel m;
  m.spec.n_layers = j.at("spec").at("n_layers").get<std::size_t>();
  m.spec.hidden_size = j.at("spec").at("hidden_size").get<std::size_t>();
  m.spec.input_size = j.at("spec").at("input_size").get<std::size_t>();
  m.spec.n_targets = j.at("spec").at("n_targets").get<std::size_t>();
  m.train_config.lr = j.at("train_config").at("lr").get<double>();
  m.train_config.batch = j.at("train_config").at("batch").get<std::size_t>();
  m.train_config.steps = j.at("train_config").at("steps").get<std::size_t>();
  m.train_config.seed = j.at("train_config").at("seed").get<std::uint64_t>();
  m.train_config.beta1 = j.at("train_config").at("beta1").get<double>();
  m.train_config.beta2 = j.at("train_config").at("beta2").get<double>();
  m.train_config.epsilon = j.at("train_config").at("epsilon").get<double>();
  io::TensorReader tr(dir / "params.bin", j.at("params"));
  for (std::size_t l = 0; l < m.spec.n_layers; ++l) {
    m.params.w.push_back(tr.get("w" + std::to_string(l)));
    m.params.b.push_back(tr.get("b" + std::to_string(l)));
  }
  m.params.w_out = tr.get("w_out");
  m.params.b_out = tr.get("b_out");
  for (const auto& e : j.at("params"))
    if (e.at("name") == "loss_history") {
      const num::Tensor h = tr.get("loss_history");
      m.loss_history.assign(h.data(), h.data() + h.size());
    }
  m.validate();
  return m;
}

}  // namespace tcav::rnn
