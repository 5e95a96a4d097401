#include "memshare/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "memshare/errors.hpp"

namespace memshare::nn {

ParamMatrix ParamMatrix::zeros(int rows, int cols) {
  ParamMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.values.assign(static_cast<size_t>(rows) * cols, 0.0);
  return m;
}

const char* act_name(Act a) {
  switch (a) {
    case Act::linear: return "linear";
    case Act::relu: return "relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
    case Act::gumbel_head: return "gumbel-softmax-head";
  }
  return "?";
}

Act act_from_name(const std::string& name) {
  if (name == "linear") return Act::linear;
  if (name == "relu") return Act::relu;
  if (name == "tanh") return Act::tanh;
  if (name == "sigmoid") return Act::sigmoid;
  if (name == "gumbel-softmax-head") return Act::gumbel_head;
  throw ConfigError("unknown activation: " + name);
}

void MlpSpec::validate() const {
  if (input <= 0) throw ConfigError("mlp spec: input width must be positive");
  if (layers.empty()) throw ConfigError("mlp spec: at least one layer required");
  for (const auto& l : layers) {
    if (l.out <= 0) throw ConfigError("mlp spec: layer width must be positive");
  }
}

MlpSpec dense_spec(int input, const std::vector<int>& hidden, int out,
                   Act hidden_act, Act out_act) {
  MlpSpec s;
  s.input = input;
  for (int h : hidden) s.layers.push_back({h, hidden_act});
  s.layers.push_back({out, out_act});
  return s;
}

Mlp make_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp net;
  net.spec = spec;
  int in = spec.input;
  for (const auto& l : spec.layers) {
    ParamMatrix w = ParamMatrix::zeros(l.out, in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.values) v = rng.uniform(-bound, bound);
    net.w.push_back(std::move(w));
    net.b.push_back(ParamMatrix::zeros(l.out, 1));
    in = l.out;
  }
  return net;
}

Mlp zeros_like(const Mlp& net) {
  Mlp z;
  z.spec = net.spec;
  for (const auto& w : net.w) z.w.push_back(ParamMatrix::zeros(w.rows, w.cols));
  for (const auto& b : net.b) z.b.push_back(ParamMatrix::zeros(b.rows, b.cols));
  return z;
}

static double apply_act(Act a, double z) {
  switch (a) {
    case Act::relu: return z > 0.0 ? z : 0.0;
    case Act::tanh: return std::tanh(z);
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Act::linear:
    case Act::gumbel_head: return z;
  }
  return z;
}

// Derivative expressed through the post-activation value.
static double act_grad(Act a, double z, double post) {
  switch (a) {
    case Act::relu: return z > 0.0 ? 1.0 : 0.0;
    case Act::tanh: return 1.0 - post * post;
    case Act::sigmoid: return post * (1.0 - post);
    case Act::linear:
    case Act::gumbel_head: return 1.0;
  }
  return 1.0;
}

void mlp_forward(const Mlp& net, std::span<const double> x, MlpCache& cache) {
  if (static_cast<int>(x.size()) != net.spec.input) {
    throw ConfigError("mlp_forward: input length " + std::to_string(x.size()) +
                      " != spec input " + std::to_string(net.spec.input));
  }
  const size_t nl = net.spec.layers.size();
  cache.input.assign(x.begin(), x.end());
  cache.pre.resize(nl);
  cache.post.resize(nl);
  const Vec* in = &cache.input;
  for (size_t l = 0; l < nl; ++l) {
    const ParamMatrix& w = net.w[l];
    const ParamMatrix& b = net.b[l];
    Vec& z = cache.pre[l];
    Vec& a = cache.post[l];
    z.assign(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double* wr = &w.values[static_cast<size_t>(r) * w.cols];
      double acc = b.values[r];
      for (int c = 0; c < w.cols; ++c) acc += wr[c] * (*in)[c];
      z[r] = acc;
    }
    const Act act = net.spec.layers[l].act;
    a.resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) a[i] = apply_act(act, z[i]);
    in = &a;
  }
}

Vec mlp_forward(const Mlp& net, std::span<const double> x) {
  MlpCache cache;
  mlp_forward(net, x, cache);
  return cache.post.back();
}

void mlp_backward_acc(const Mlp& net, const MlpCache& cache,
                      std::span<const double> upstream, Mlp& grad_acc,
                      Vec* input_grad) {
  const size_t nl = net.spec.layers.size();
  if (cache.pre.size() != nl || cache.post.size() != nl ||
      static_cast<int>(cache.input.size()) != net.spec.input) {
    throw ConfigError("mlp_backward: cache does not match network");
  }
  if (static_cast<int>(upstream.size()) != net.spec.output_dim()) {
    throw ConfigError("mlp_backward: upstream gradient length mismatch");
  }
  Vec delta(upstream.begin(), upstream.end());
  Vec next;
  for (size_t li = nl; li-- > 0;) {
    const ParamMatrix& w = net.w[li];
    const Act act = net.spec.layers[li].act;
    const Vec& z = cache.pre[li];
    const Vec& post = cache.post[li];
    for (int r = 0; r < w.rows; ++r) delta[r] *= act_grad(act, z[r], post[r]);

    const Vec& in = li == 0 ? cache.input : cache.post[li - 1];
    ParamMatrix& gw = grad_acc.w[li];
    ParamMatrix& gb = grad_acc.b[li];
    for (int r = 0; r < w.rows; ++r) {
      double* gwr = &gw.values[static_cast<size_t>(r) * w.cols];
      const double d = delta[r];
      for (int c = 0; c < w.cols; ++c) gwr[c] += d * in[c];
      gb.values[r] += d;
    }
    if (li > 0 || input_grad != nullptr) {
      next.assign(w.cols, 0.0);
      for (int r = 0; r < w.rows; ++r) {
        const double* wr = &w.values[static_cast<size_t>(r) * w.cols];
        const double d = delta[r];
        for (int c = 0; c < w.cols; ++c) next[c] += wr[c] * d;
      }
      if (li == 0) {
        *input_grad = next;
        break;
      }
      delta = next;
    }
  }
}

void scale_params(std::vector<ParamMatrix*> params, double s) {
  for (ParamMatrix* p : params)
    for (double& v : p->values) v *= s;
}

AdamState make_adam(const std::vector<const ParamMatrix*>& params) {
  AdamState st;
  for (const ParamMatrix* p : params) {
    st.m1.emplace_back(p->values.size(), 0.0);
    st.m2.emplace_back(p->values.size(), 0.0);
  }
  return st;
}

void adam_step(const std::vector<ParamMatrix*>& params,
               const std::vector<const ParamMatrix*>& grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.m1.size()) {
    throw ConfigError("adam_step: parameter/gradient/state arity mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    ParamMatrix& p = *params[i];
    const ParamMatrix& g = *grads[i];
    if (p.values.size() != g.values.size()) {
      throw ConfigError("adam_step: gradient shape mismatch at block " +
                        std::to_string(i));
    }
    Vec& m1 = state.m1[i];
    Vec& m2 = state.m2[i];
    for (size_t j = 0; j < p.values.size(); ++j) {
      const double gj = g.values[j];
      if (!std::isfinite(gj)) {
        throw TrainingFault("adam_step: non-finite gradient at block " +
                            std::to_string(i) + " index " + std::to_string(j));
      }
      m1[j] = state.beta1 * m1[j] + (1.0 - state.beta1) * gj;
      m2[j] = state.beta2 * m2[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m1[j] / bc1;
      const double vhat = m2[j] / bc2;
      p.values[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void soft_update(const std::vector<ParamMatrix*>& target,
                 const std::vector<const ParamMatrix*>& source, double tau) {
  if (target.size() != source.size()) {
    throw ConfigError("soft_update: block count mismatch");
  }
  for (size_t i = 0; i < target.size(); ++i) {
    ParamMatrix& t = *target[i];
    const ParamMatrix& s = *source[i];
    if (t.values.size() != s.values.size()) {
      throw ConfigError("soft_update: shape mismatch at block " + std::to_string(i));
    }
    for (size_t j = 0; j < t.values.size(); ++j) {
      t.values[j] = (1.0 - tau) * t.values[j] + tau * s.values[j];
    }
  }
}

std::vector<ParamMatrix*> mlp_params(Mlp& net) {
  std::vector<ParamMatrix*> out;
  for (size_t l = 0; l < net.w.size(); ++l) {
    out.push_back(&net.w[l]);
    out.push_back(&net.b[l]);
  }
  return out;
}

std::vector<const ParamMatrix*> mlp_params(const Mlp& net) {
  std::vector<const ParamMatrix*> out;
  for (size_t l = 0; l < net.w.size(); ++l) {
    out.push_back(&net.w[l]);
    out.push_back(&net.b[l]);
  }
  return out;
}

}  // namespace memshare::nn
