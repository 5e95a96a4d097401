#pragma once

#include <span>
#include <string>
#include <vector>

#include "memshare/rng.hpp"

namespace memshare::nn {

using Vec = std::vector<double>;

// Dense weight block, row-major: values[r * cols + c]. Bias vectors are
// stored as cols == 1 blocks so the optimizer and checkpoints see a single
// uniform type.
struct ParamMatrix {
  int rows = 0;
  int cols = 0;
  Vec values;

  static ParamMatrix zeros(int rows, int cols);

  double& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
  int size() const { return rows * cols; }
};

enum class Act { linear, relu, tanh, sigmoid, gumbel_head };

// gumbel_head marks a logits output whose categorical relaxation is applied
// by the caller; inside the net it evaluates as linear.
const char* act_name(Act a);
Act act_from_name(const std::string& name);

struct LayerSpec {
  int out = 0;
  Act act = Act::linear;
};

struct MlpSpec {
  int input = 0;
  std::vector<LayerSpec> layers;

  int output_dim() const { return layers.empty() ? input : layers.back().out; }
  void validate() const;  // throws ConfigError
};

// Convenience builder: hidden widths all `hidden_act`, final layer `out_act`.
MlpSpec dense_spec(int input, const std::vector<int>& hidden, int out,
                   Act hidden_act = Act::relu, Act out_act = Act::linear);

struct Mlp {
  MlpSpec spec;
  std::vector<ParamMatrix> w;  // per layer, out x in
  std::vector<ParamMatrix> b;  // per layer, out x 1
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
Mlp make_mlp(const MlpSpec& spec, Rng& rng);
Mlp zeros_like(const Mlp& net);

struct MlpCache {
  Vec input;
  std::vector<Vec> pre;   // z_l = W_l a_{l-1} + b_l
  std::vector<Vec> post;  // a_l = act(z_l)
  const Vec& output() const { return post.back(); }
};

void mlp_forward(const Mlp& net, std::span<const double> x, MlpCache& cache);
Vec mlp_forward(const Mlp& net, std::span<const double> x);

// Accumulates parameter gradients into grad_acc (shape of `net`); writes the
// gradient w.r.t. the input if input_grad is non-null.
void mlp_backward_acc(const Mlp& net, const MlpCache& cache,
                      std::span<const double> upstream, Mlp& grad_acc,
                      Vec* input_grad = nullptr);

void scale_params(std::vector<ParamMatrix*> params, double s);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Vec> m1;  // first moments, parallel to the parameter list
  std::vector<Vec> m2;  // second moments
};

AdamState make_adam(const std::vector<const ParamMatrix*>& params);

// Standard Adam with bias correction; throws TrainingFault on a non-finite
// gradient entry.
void adam_step(const std::vector<ParamMatrix*>& params,
               const std::vector<const ParamMatrix*>& grads, AdamState& state,
               double lr);

// target <- (1 - tau) * target + tau * source, elementwise.
void soft_update(const std::vector<ParamMatrix*>& target,
                 const std::vector<const ParamMatrix*>& source, double tau);

std::vector<ParamMatrix*> mlp_params(Mlp& net);
std::vector<const ParamMatrix*> mlp_params(const Mlp& net);

}  // namespace memshare::nn
