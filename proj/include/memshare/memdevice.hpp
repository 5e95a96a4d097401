#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memshare/nn.hpp"
#include "memshare/rng.hpp"

namespace memshare::md {

using nn::Vec;

// Ablation variants: no_context drops the context vector from the read gate,
// no_read zeroes the read vector and removes it from the action head input,
// no_write leaves the message untouched.
enum class Variant { full, no_context, no_read, no_write };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct MdConfig {
  int obs_dim = 0;
  int action_dim = 0;
  bool discrete = true;
  int embed = 200;    // E, encoding width
  int context = 200;  // H, context vector width
  int memory = 200;   // M, message width
  int enc_hidden = 512;
  int act_hidden = 256;
  Variant variant = Variant::full;

  bool has_context() const { return variant == Variant::full || variant == Variant::no_write; }
  bool has_read() const { return variant != Variant::no_read; }
  bool has_write() const { return variant != Variant::no_write; }

  int read_gate_input() const {
    return has_context() ? embed + context + memory : embed + memory;
  }
  int write_gate_input() const { return embed + memory; }
  int act_input() const { return has_read() ? embed + 2 * memory : embed + memory; }

  nn::MlpSpec encoder_spec() const;
  nn::MlpSpec action_spec() const;
  void validate() const;
};

// Full per-agent parameter bundle: encoder, context map, read gate, write
// gates, action head. Blocks unused by a variant are allocated empty so the
// flattened parameter order is identical across variants.
struct MdPolicyParams {
  MdConfig cfg;
  nn::Mlp encoder;
  nn::ParamMatrix w_context;  // H x E, no bias
  nn::ParamMatrix w_read, b_read;
  nn::ParamMatrix w_cand, b_cand;
  nn::ParamMatrix w_in, b_in;
  nn::ParamMatrix w_forget, b_forget;
  nn::Mlp action_head;

  std::vector<nn::ParamMatrix*> param_list();
  std::vector<const nn::ParamMatrix*> param_list() const;
  std::vector<std::pair<std::string, const nn::ParamMatrix*>> named_params() const;
};

MdPolicyParams make_md_policy(const MdConfig& cfg, Rng& rng);
MdPolicyParams zeros_like(const MdPolicyParams& p);

struct MdStepOutput {
  Vec encoding;         // e_i
  Vec read_vec;         // r_i
  Vec m_prime;          // updated message
  Vec action;           // logits (discrete) or tanh-squashed vector
  Vec memory_snapshot;  // the message as read, before writing
};

// Intermediates retained for the backward pass.
struct MdStepCache {
  Vec memory;
  nn::MlpCache enc;
  Vec e, h;
  Vec read_in, k, r;
  Vec write_in, c, g, f, m_prime;
  Vec act_in;
  nn::MlpCache act;
};

Vec encode(const MdPolicyParams& p, std::span<const double> obs);
// r = m .* sigmoid(W_k [e, h, m]), h = W_h e.
void read(const MdPolicyParams& p, std::span<const double> e,
          std::span<const double> m, Vec& r, Vec& k, Vec& h);
// m' = g .* tanh(W_c [e, m]) + f .* m with sigmoid gates g, f.
void write(const MdPolicyParams& p, std::span<const double> e,
           std::span<const double> m, Vec& m_prime, Vec& c, Vec& g, Vec& f);
Vec act(const MdPolicyParams& p, std::span<const double> e,
        std::span<const double> r, std::span<const double> m_prime);

// encode -> read -> write -> act; the caller commits m_prime to the shared
// device before the next agent steps.
MdStepOutput policy_step(const MdPolicyParams& p, std::span<const double> obs,
                         std::span<const double> memory,
                         MdStepCache* cache = nullptr);

// Backpropagates d_action (gradient on the action output) and d_m_prime
// (gradient on the written message; may be empty for zero) through the step.
// Parameter gradients accumulate into grad_acc; d_memory, if non-null,
// receives the gradient w.r.t. the message the step read.
void policy_backward(const MdPolicyParams& p, const MdStepCache& cache,
                     std::span<const double> d_action,
                     std::span<const double> d_m_prime, MdPolicyParams& grad_acc,
                     Vec* d_memory = nullptr);

}  // namespace memshare::md
