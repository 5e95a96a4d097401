#include "memshare/memdevice.hpp"

#include <algorithm>
#include <cmath>

#include "memshare/errors.hpp"

namespace memshare::md {

namespace {

// Gate outputs stay strictly inside their open ranges even where the
// underlying function saturates in double precision.
constexpr double kGateEps = 1e-12;

double sigmoid(double z) {
  return std::clamp(1.0 / (1.0 + std::exp(-z)), kGateEps, 1.0 - kGateEps);
}

double bounded_tanh(double z) {
  return std::clamp(std::tanh(z), -1.0 + kGateEps, 1.0 - kGateEps);
}

// y += W x + b, where b may be empty (bias-free map).
void affine(const nn::ParamMatrix& w, const nn::ParamMatrix& b,
            std::span<const double> x, Vec& y) {
  y.assign(w.rows, 0.0);
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = &w.values[static_cast<size_t>(r) * w.cols];
    double acc = b.size() > 0 ? b.values[r] : 0.0;
    for (int c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// gw += dz x^T, gb += dz, dx += W^T dz.
void affine_backward(const nn::ParamMatrix& w, std::span<const double> x,
                     std::span<const double> dz, nn::ParamMatrix& gw,
                     nn::ParamMatrix& gb, Vec& dx) {
  for (int r = 0; r < w.rows; ++r) {
    const double d = dz[r];
    double* gwr = &gw.values[static_cast<size_t>(r) * w.cols];
    const double* wr = &w.values[static_cast<size_t>(r) * w.cols];
    for (int c = 0; c < w.cols; ++c) {
      gwr[c] += d * x[c];
      dx[c] += wr[c] * d;
    }
    if (gb.size() > 0) gb.values[r] += d;
  }
}

void concat2(std::span<const double> a, std::span<const double> b, Vec& out) {
  out.resize(a.size() + b.size());
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + a.size());
}

void concat3(std::span<const double> a, std::span<const double> b,
             std::span<const double> c, Vec& out) {
  out.resize(a.size() + b.size() + c.size());
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + a.size());
  std::copy(c.begin(), c.end(), out.begin() + a.size() + b.size());
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_context: return "no-context";
    case Variant::no_read: return "no-read";
    case Variant::no_write: return "no-write";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no-context") return Variant::no_context;
  if (name == "no-read") return Variant::no_read;
  if (name == "no-write") return Variant::no_write;
  throw ConfigError("unknown policy variant: " + name);
}

nn::MlpSpec MdConfig::encoder_spec() const {
  std::vector<int> hidden;
  if (enc_hidden > 0) hidden.push_back(enc_hidden);
  return nn::dense_spec(obs_dim, hidden, embed, nn::Act::relu, nn::Act::linear);
}

nn::MlpSpec MdConfig::action_spec() const {
  std::vector<int> hidden;
  if (act_hidden > 0) hidden.push_back(act_hidden);
  const nn::Act out = discrete ? nn::Act::gumbel_head : nn::Act::tanh;
  return nn::dense_spec(act_input(), hidden, action_dim, nn::Act::relu, out);
}

void MdConfig::validate() const {
  if (obs_dim <= 0) throw ConfigError("md config: obs_dim must be positive");
  if (action_dim <= 0) throw ConfigError("md config: action_dim must be positive");
  if (embed <= 0) throw ConfigError("md config: embed width must be positive");
  if (memory < 0 || context < 0) {
    throw ConfigError("md config: memory/context widths must be non-negative");
  }
}

std::vector<nn::ParamMatrix*> MdPolicyParams::param_list() {
  std::vector<nn::ParamMatrix*> out;
  for (auto* p : nn::mlp_params(encoder)) out.push_back(p);
  out.push_back(&w_context);
  out.push_back(&w_read);
  out.push_back(&b_read);
  out.push_back(&w_cand);
  out.push_back(&b_cand);
  out.push_back(&w_in);
  out.push_back(&b_in);
  out.push_back(&w_forget);
  out.push_back(&b_forget);
  for (auto* p : nn::mlp_params(action_head)) out.push_back(p);
  return out;
}

std::vector<const nn::ParamMatrix*> MdPolicyParams::param_list() const {
  auto mut = const_cast<MdPolicyParams*>(this)->param_list();
  return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, const nn::ParamMatrix*>>
MdPolicyParams::named_params() const {
  std::vector<std::pair<std::string, const nn::ParamMatrix*>> out;
  for (size_t l = 0; l < encoder.w.size(); ++l) {
    out.emplace_back("enc." + std::to_string(l) + ".w", &encoder.w[l]);
    out.emplace_back("enc." + std::to_string(l) + ".b", &encoder.b[l]);
  }
  out.emplace_back("W_h", &w_context);
  out.emplace_back("W_k.w", &w_read);
  out.emplace_back("W_k.b", &b_read);
  out.emplace_back("W_c.w", &w_cand);
  out.emplace_back("W_c.b", &b_cand);
  out.emplace_back("W_g.w", &w_in);
  out.emplace_back("W_g.b", &b_in);
  out.emplace_back("W_f.w", &w_forget);
  out.emplace_back("W_f.b", &b_forget);
  for (size_t l = 0; l < action_head.w.size(); ++l) {
    out.emplace_back("act." + std::to_string(l) + ".w", &action_head.w[l]);
    out.emplace_back("act." + std::to_string(l) + ".b", &action_head.b[l]);
  }
  return out;
}

namespace {

nn::ParamMatrix init_gate(int rows, int cols, Rng& rng) {
  nn::ParamMatrix m = nn::ParamMatrix::zeros(rows, cols);
  if (cols > 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : m.values) v = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

MdPolicyParams make_md_policy(const MdConfig& cfg, Rng& rng) {
  cfg.validate();
  MdPolicyParams p;
  p.cfg = cfg;
  p.encoder = nn::make_mlp(cfg.encoder_spec(), rng);
  const int e = cfg.embed;
  const int h = cfg.context;
  const int m = cfg.memory;
  if (cfg.has_context() && cfg.has_read()) {
    p.w_context = init_gate(h, e, rng);
  } else {
    p.w_context = nn::ParamMatrix::zeros(0, 0);
  }
  if (cfg.has_read()) {
    p.w_read = init_gate(m, cfg.read_gate_input(), rng);
    p.b_read = nn::ParamMatrix::zeros(m, 1);
  } else {
    p.w_read = nn::ParamMatrix::zeros(0, 0);
    p.b_read = nn::ParamMatrix::zeros(0, 0);
  }
  if (cfg.has_write()) {
    p.w_cand = init_gate(m, cfg.write_gate_input(), rng);
    p.b_cand = nn::ParamMatrix::zeros(m, 1);
    p.w_in = init_gate(m, cfg.write_gate_input(), rng);
    p.b_in = nn::ParamMatrix::zeros(m, 1);
    p.w_forget = init_gate(m, cfg.write_gate_input(), rng);
    p.b_forget = nn::ParamMatrix::zeros(m, 1);
  } else {
    p.w_cand = p.b_cand = nn::ParamMatrix::zeros(0, 0);
    p.w_in = p.b_in = nn::ParamMatrix::zeros(0, 0);
    p.w_forget = p.b_forget = nn::ParamMatrix::zeros(0, 0);
  }
  p.action_head = nn::make_mlp(cfg.action_spec(), rng);
  return p;
}

MdPolicyParams zeros_like(const MdPolicyParams& p) {
  MdPolicyParams z;
  z.cfg = p.cfg;
  z.encoder = nn::zeros_like(p.encoder);
  auto zl = [](const nn::ParamMatrix& m) { return nn::ParamMatrix::zeros(m.rows, m.cols); };
  z.w_context = zl(p.w_context);
  z.w_read = zl(p.w_read);
  z.b_read = zl(p.b_read);
  z.w_cand = zl(p.w_cand);
  z.b_cand = zl(p.b_cand);
  z.w_in = zl(p.w_in);
  z.b_in = zl(p.b_in);
  z.w_forget = zl(p.w_forget);
  z.b_forget = zl(p.b_forget);
  z.action_head = nn::zeros_like(p.action_head);
  return z;
}

Vec encode(const MdPolicyParams& p, std::span<const double> obs) {
  return nn::mlp_forward(p.encoder, obs);
}

void read(const MdPolicyParams& p, std::span<const double> e,
          std::span<const double> m, Vec& r, Vec& k, Vec& h) {
  const MdConfig& cfg = p.cfg;
  if (!cfg.has_read()) {
    h.clear();
    k.clear();
    r.assign(m.size(), 0.0);
    return;
  }
  if (static_cast<int>(m.size()) != cfg.memory) {
    throw ConfigError("read: memory length mismatch");
  }
  Vec gate_in;
  if (cfg.has_context()) {
    static const nn::ParamMatrix no_bias;
    affine(p.w_context, no_bias, e, h);
    concat3(e, h, m, gate_in);
  } else {
    h.clear();
    concat2(e, m, gate_in);
  }
  affine(p.w_read, p.b_read, gate_in, k);
  for (double& v : k) v = sigmoid(v);
  r.resize(m.size());
  for (size_t i = 0; i < m.size(); ++i) r[i] = m[i] * k[i];
}

void write(const MdPolicyParams& p, std::span<const double> e,
           std::span<const double> m, Vec& m_prime, Vec& c, Vec& g, Vec& f) {
  const MdConfig& cfg = p.cfg;
  if (static_cast<int>(m.size()) != cfg.memory) {
    throw ConfigError("write: memory length mismatch");
  }
  if (!cfg.has_write()) {
    c.clear();
    g.clear();
    f.clear();
    m_prime.assign(m.begin(), m.end());
    return;
  }
  Vec ew;
  concat2(e, m, ew);
  affine(p.w_cand, p.b_cand, ew, c);
  for (double& v : c) v = bounded_tanh(v);
  affine(p.w_in, p.b_in, ew, g);
  for (double& v : g) v = sigmoid(v);
  affine(p.w_forget, p.b_forget, ew, f);
  for (double& v : f) v = sigmoid(v);
  m_prime.resize(m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    m_prime[i] = g[i] * c[i] + f[i] * m[i];
  }
}

Vec act(const MdPolicyParams& p, std::span<const double> e,
        std::span<const double> r, std::span<const double> m_prime) {
  Vec in;
  if (p.cfg.has_read()) {
    concat3(e, r, m_prime, in);
  } else {
    concat2(e, m_prime, in);
  }
  return nn::mlp_forward(p.action_head, in);
}

MdStepOutput policy_step(const MdPolicyParams& p, std::span<const double> obs,
                         std::span<const double> memory, MdStepCache* cache) {
  MdStepCache local;
  MdStepCache& cc = cache != nullptr ? *cache : local;
  const MdConfig& cfg = p.cfg;

  cc.memory.assign(memory.begin(), memory.end());
  nn::mlp_forward(p.encoder, obs, cc.enc);
  cc.e = cc.enc.output();

  read(p, cc.e, memory, cc.r, cc.k, cc.h);
  if (cfg.has_read() && cfg.has_context()) {
    concat3(cc.e, cc.h, memory, cc.read_in);
  } else if (cfg.has_read()) {
    concat2(cc.e, memory, cc.read_in);
  } else {
    cc.read_in.clear();
  }

  write(p, cc.e, memory, cc.m_prime, cc.c, cc.g, cc.f);
  if (cfg.has_write()) {
    concat2(cc.e, memory, cc.write_in);
  } else {
    cc.write_in.clear();
  }

  if (cfg.has_read()) {
    concat3(cc.e, cc.r, cc.m_prime, cc.act_in);
  } else {
    concat2(cc.e, cc.m_prime, cc.act_in);
  }
  nn::mlp_forward(p.action_head, cc.act_in, cc.act);

  MdStepOutput out;
  out.encoding = cc.e;
  out.read_vec = cc.r;
  out.m_prime = cc.m_prime;
  out.action = cc.act.output();
  out.memory_snapshot = cc.memory;
  return out;
}

void policy_backward(const MdPolicyParams& p, const MdStepCache& cache,
                     std::span<const double> d_action,
                     std::span<const double> d_m_prime, MdPolicyParams& grad_acc,
                     Vec* d_memory) {
  const MdConfig& cfg = p.cfg;
  const int e_dim = cfg.embed;
  const int m_dim = cfg.memory;

  // Action head.
  Vec d_act_in;
  nn::mlp_backward_acc(p.action_head, cache.act, d_action, grad_acc.action_head,
                       &d_act_in);

  Vec de(e_dim, 0.0);
  Vec dm(m_dim, 0.0);
  Vec dmp(m_dim, 0.0);
  Vec dr(m_dim, 0.0);
  for (int i = 0; i < e_dim; ++i) de[i] += d_act_in[i];
  if (cfg.has_read()) {
    for (int i = 0; i < m_dim; ++i) dr[i] += d_act_in[e_dim + i];
    for (int i = 0; i < m_dim; ++i) dmp[i] += d_act_in[e_dim + m_dim + i];
  } else {
    for (int i = 0; i < m_dim; ++i) dmp[i] += d_act_in[e_dim + i];
  }
  if (!d_m_prime.empty()) {
    if (static_cast<int>(d_m_prime.size()) != m_dim) {
      throw ConfigError("policy_backward: d_m_prime length mismatch");
    }
    for (int i = 0; i < m_dim; ++i) dmp[i] += d_m_prime[i];
  }

  // Write gates: m' = g.*c + f.*m.
  if (cfg.has_write() && m_dim > 0) {
    Vec dzc(m_dim), dzg(m_dim), dzf(m_dim);
    for (int i = 0; i < m_dim; ++i) {
      const double dc = dmp[i] * cache.g[i];
      const double dg = dmp[i] * cache.c[i];
      const double df = dmp[i] * cache.memory[i];
      dm[i] += dmp[i] * cache.f[i];
      dzc[i] = dc * (1.0 - cache.c[i] * cache.c[i]);
      dzg[i] = dg * cache.g[i] * (1.0 - cache.g[i]);
      dzf[i] = df * cache.f[i] * (1.0 - cache.f[i]);
    }
    Vec dew(e_dim + m_dim, 0.0);
    affine_backward(p.w_cand, cache.write_in, dzc, grad_acc.w_cand, grad_acc.b_cand, dew);
    affine_backward(p.w_in, cache.write_in, dzg, grad_acc.w_in, grad_acc.b_in, dew);
    affine_backward(p.w_forget, cache.write_in, dzf, grad_acc.w_forget, grad_acc.b_forget, dew);
    for (int i = 0; i < e_dim; ++i) de[i] += dew[i];
    for (int i = 0; i < m_dim; ++i) dm[i] += dew[e_dim + i];
  } else {
    // no_write: m' is the message itself.
    for (int i = 0; i < m_dim; ++i) dm[i] += dmp[i];
  }

  // Read gate: r = m .* k.
  if (cfg.has_read() && m_dim > 0) {
    Vec dzk(m_dim);
    for (int i = 0; i < m_dim; ++i) {
      const double dk = dr[i] * cache.memory[i];
      dm[i] += dr[i] * cache.k[i];
      dzk[i] = dk * cache.k[i] * (1.0 - cache.k[i]);
    }
    Vec dgi(cfg.read_gate_input(), 0.0);
    affine_backward(p.w_read, cache.read_in, dzk, grad_acc.w_read, grad_acc.b_read, dgi);
    if (cfg.has_context()) {
      const int h_dim = cfg.context;
      Vec dh(dgi.begin() + e_dim, dgi.begin() + e_dim + h_dim);
      for (int i = 0; i < e_dim; ++i) de[i] += dgi[i];
      for (int i = 0; i < m_dim; ++i) dm[i] += dgi[e_dim + h_dim + i];
      // h = W_h e, bias-free.
      for (int r = 0; r < p.w_context.rows; ++r) {
        const double d = dh[r];
        double* gwr = &grad_acc.w_context.values[static_cast<size_t>(r) * e_dim];
        const double* wr = &p.w_context.values[static_cast<size_t>(r) * e_dim];
        for (int c = 0; c < e_dim; ++c) {
          gwr[c] += d * cache.e[c];
          de[c] += wr[c] * d;
        }
      }
    } else {
      for (int i = 0; i < e_dim; ++i) de[i] += dgi[i];
      for (int i = 0; i < m_dim; ++i) dm[i] += dgi[e_dim + i];
    }
  }

  nn::mlp_backward_acc(p.encoder, cache.enc, de, grad_acc.encoder, nullptr);
  if (d_memory != nullptr) *d_memory = dm;
}

}  // namespace memshare::md
