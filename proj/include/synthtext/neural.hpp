#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "synthtext/rng.hpp"

namespace synthtext::neural {

enum class Architecture { elman, delta_rnn, gru };

inline const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::elman: return "elman";
    case Architecture::delta_rnn: return "delta_rnn";
    case Architecture::gru: return "gru";
  }
  return "?";
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "elman") return Architecture::elman;
  if (s == "delta_rnn") return Architecture::delta_rnn;
  if (s == "gru") return Architecture::gru;
  throw std::invalid_argument("unknown architecture: " + s);
}

struct ModelConfig {
  Architecture arch = Architecture::delta_rnn;
  int hidden_size = 256;
  int vocab_size = 0;  // includes the reserved null/EOS/UNK indices
  int n_users = 0;
  int bptt_window = 0;  // 0 = full backpropagation through time
  bool layer_norm = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_size < 1) throw std::invalid_argument("hidden_size must be >= 1");
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
    if (n_users < 1) throw std::invalid_argument("n_users must be >= 1");
  }
};

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kGradClipNorm = 5.0;
inline constexpr double kProbFloor = 1e-12;

// LeCun-scaled tanh used as the hidden activation everywhere.
template <typename S>
S scaled_tanh(S x) {
  return S(1.7159) * std::tanh(S(2) / S(3) * x);
}

template <typename S>
struct LayerNormParams {
  VecX<S> scale, shift;
};

template <typename S>
struct ParametersT {
  ModelConfig config;

  MatX<S> W_out;
  VecX<S> b_out;

  // Elman and Delta-RNN input/user projections.
  MatX<S> W_in, W_user;

  // Elman.
  MatX<S> W_rec;
  VecX<S> b_hid;  // used only without layer norm
  LayerNormParams<S> ln_hid;

  // Delta-RNN.
  MatX<S> V_d;
  VecX<S> b_r;
  LayerNormParams<S> ln_rec, ln_in, ln_user;

  // GRU.
  MatX<S> W_z, W_r, W_c, U_z, U_r, U_c, V_z, V_r, V_c;
  VecX<S> b_z, b_rg, b_c;  // used only without layer norm
  LayerNormParams<S> ln_wz, ln_uz, ln_vz, ln_wr, ln_ur, ln_vr, ln_wc, ln_uc, ln_vc;
};

using Parameters = ParametersT<double>;

template <typename S>
struct TensorRef {
  const char* name;
  S* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
};

// The architecture's live tensors in a fixed order; drives
// initialization, ADAM, clipping, serialization and gradient checks.
template <typename S>
std::vector<TensorRef<S>> tensor_refs(ParametersT<S>& p) {
  std::vector<TensorRef<S>> refs;
  auto add_mat = [&](const char* name, MatX<S>& m) {
    refs.push_back({name, m.data(), m.rows(), m.cols()});
  };
  auto add_vec = [&](const char* name, VecX<S>& v) {
    refs.push_back({name, v.data(), v.rows(), 1});
  };
  const auto& c = p.config;
  add_mat("W_out", p.W_out);
  add_vec("b_out", p.b_out);
  switch (c.arch) {
    case Architecture::elman:
      add_mat("W_in", p.W_in);
      add_mat("W_user", p.W_user);
      add_mat("W_rec", p.W_rec);
      if (c.layer_norm) {
        add_vec("ln_hid.scale", p.ln_hid.scale);
        add_vec("ln_hid.shift", p.ln_hid.shift);
      } else {
        add_vec("b_hid", p.b_hid);
      }
      break;
    case Architecture::delta_rnn:
      add_mat("W_in", p.W_in);
      add_mat("W_user", p.W_user);
      add_mat("V_d", p.V_d);
      add_vec("b_r", p.b_r);
      if (c.layer_norm) {
        add_vec("ln_rec.scale", p.ln_rec.scale);
        add_vec("ln_rec.shift", p.ln_rec.shift);
        add_vec("ln_in.scale", p.ln_in.scale);
        add_vec("ln_in.shift", p.ln_in.shift);
        add_vec("ln_user.scale", p.ln_user.scale);
        add_vec("ln_user.shift", p.ln_user.shift);
      }
      break;
    case Architecture::gru:
      add_mat("W_z", p.W_z);
      add_mat("W_r", p.W_r);
      add_mat("W_c", p.W_c);
      add_mat("U_z", p.U_z);
      add_mat("U_r", p.U_r);
      add_mat("U_c", p.U_c);
      add_mat("V_z", p.V_z);
      add_mat("V_r", p.V_r);
      add_mat("V_c", p.V_c);
      if (c.layer_norm) {
        LayerNormParams<S>* lns[] = {&p.ln_wz, &p.ln_uz, &p.ln_vz, &p.ln_wr, &p.ln_ur,
                                     &p.ln_vr, &p.ln_wc, &p.ln_uc, &p.ln_vc};
        static const char* names[] = {
            "ln_wz.scale", "ln_wz.shift", "ln_uz.scale", "ln_uz.shift",
            "ln_vz.scale", "ln_vz.shift", "ln_wr.scale", "ln_wr.shift",
            "ln_ur.scale", "ln_ur.shift", "ln_vr.scale", "ln_vr.shift",
            "ln_wc.scale", "ln_wc.shift", "ln_uc.scale", "ln_uc.shift",
            "ln_vc.scale", "ln_vc.shift"};
        for (int i = 0; i < 9; ++i) {
          refs.push_back({names[2 * i], lns[i]->scale.data(), lns[i]->scale.rows(), 1});
          refs.push_back({names[2 * i + 1], lns[i]->shift.data(), lns[i]->shift.rows(), 1});
        }
      } else {
        add_vec("b_z", p.b_z);
        add_vec("b_rg", p.b_rg);
        add_vec("b_c", p.b_c);
      }
      break;
  }
  return refs;
}

namespace detail {

template <typename S>
void size_parameters(ParametersT<S>& p) {
  const auto& c = p.config;
  const int H = c.hidden_size, V = c.vocab_size, K = c.n_users;
  auto ln = [&](LayerNormParams<S>& l) {
    l.scale = VecX<S>::Ones(H);
    l.shift = VecX<S>::Zero(H);
  };
  p.W_out = MatX<S>::Zero(V, H);
  p.b_out = VecX<S>::Zero(V);
  switch (c.arch) {
    case Architecture::elman:
      p.W_in = MatX<S>::Zero(H, V);
      p.W_user = MatX<S>::Zero(H, K);
      p.W_rec = MatX<S>::Zero(H, H);
      if (c.layer_norm) ln(p.ln_hid);
      else p.b_hid = VecX<S>::Zero(H);
      break;
    case Architecture::delta_rnn:
      p.W_in = MatX<S>::Zero(H, V);
      p.W_user = MatX<S>::Zero(H, K);
      p.V_d = MatX<S>::Zero(H, H);
      p.b_r = VecX<S>::Zero(H);
      if (c.layer_norm) {
        ln(p.ln_rec);
        ln(p.ln_in);
        ln(p.ln_user);
      }
      break;
    case Architecture::gru:
      p.W_z = MatX<S>::Zero(H, V);
      p.W_r = MatX<S>::Zero(H, V);
      p.W_c = MatX<S>::Zero(H, V);
      p.U_z = MatX<S>::Zero(H, K);
      p.U_r = MatX<S>::Zero(H, K);
      p.U_c = MatX<S>::Zero(H, K);
      p.V_z = MatX<S>::Zero(H, H);
      p.V_r = MatX<S>::Zero(H, H);
      p.V_c = MatX<S>::Zero(H, H);
      if (c.layer_norm) {
        ln(p.ln_wz);
        ln(p.ln_uz);
        ln(p.ln_vz);
        ln(p.ln_wr);
        ln(p.ln_ur);
        ln(p.ln_vr);
        ln(p.ln_wc);
        ln(p.ln_uc);
        ln(p.ln_vc);
      } else {
        p.b_z = VecX<S>::Zero(H);
        p.b_rg = VecX<S>::Zero(H);
        p.b_c = VecX<S>::Zero(H);
      }
      break;
  }
}

inline bool is_weight_matrix(const char* name) {
  // Weight matrices get Glorot initialization; biases and layer-norm
  // vectors keep their sized defaults.
  std::string n(name);
  return n.rfind("b_", 0) != 0 && n.find("ln_") == std::string::npos;
}

}  // namespace detail

// Glorot-uniform weights from the config seed; biases zero; layer-norm
// scales one, shifts zero. Bit-deterministic for a given seed.
template <typename S>
ParametersT<S> init_parameters(const ModelConfig& config) {
  config.validate();
  ParametersT<S> p;
  p.config = config;
  detail::size_parameters(p);
  Rng rng(config.seed);
  for (auto& ref : tensor_refs(p)) {
    if (!detail::is_weight_matrix(ref.name)) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(ref.rows + ref.cols));
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      ref.data[i] = static_cast<S>(rng.uniform(-bound, bound));
    }
  }
  return p;
}

template <typename S>
ParametersT<S> zeros_like(const ParametersT<S>& p) {
  ParametersT<S> z;
  z.config = p.config;
  detail::size_parameters(z);
  for (auto& ref : tensor_refs(z)) {
    std::fill(ref.data, ref.data + ref.size(), S(0));
  }
  return z;
}

// ---------------------------------------------------------------------------
// Layer normalization

template <typename S>
struct LnCache {
  VecX<S> xhat;
  S sigma = S(0);
};

template <typename S>
VecX<S> layer_norm(const VecX<S>& z, const VecX<S>& scale, const VecX<S>& shift,
                   LnCache<S>* cache = nullptr) {
  const S mu = z.mean();
  const S sigma = std::sqrt((z.array() - mu).square().mean());
  const S denom = sigma + S(kLayerNormEps);
  VecX<S> xhat = (z.array() - mu).matrix() / denom;
  if (cache) {
    cache->xhat = xhat;
    cache->sigma = sigma;
  }
  return (scale.array() * xhat.array() + shift.array()).matrix();
}

// Accumulates scale/shift gradients and returns dL/dz.
template <typename S>
VecX<S> layer_norm_backward(const VecX<S>& dout, const VecX<S>& scale,
                            const LnCache<S>& cache, VecX<S>& g_scale,
                            VecX<S>& g_shift) {
  g_scale.array() += dout.array() * cache.xhat.array();
  g_shift += dout;
  const auto n = static_cast<S>(dout.size());
  const S denom = cache.sigma + S(kLayerNormEps);
  VecX<S> g = (dout.array() * scale.array()).matrix();
  const S g_mean = g.mean();
  S coef = S(0);
  if (cache.sigma > S(0)) {
    coef = g.dot(cache.xhat) / (n * cache.sigma);
  }
  return ((g.array() - g_mean) / denom - coef * cache.xhat.array()).matrix();
}

// ---------------------------------------------------------------------------
// Step caches

template <typename S>
struct ElmanStepCache {
  VecX<S> h_prev;
  LnCache<S> ln;
  VecX<S> t;  // tanh(2u/3) at the activation input
};

template <typename S>
struct DeltaStepCache {
  VecX<S> h_prev;
  LnCache<S> ln_rec, ln_in, ln_user;
  VecX<S> d_rec, d_dat;
  VecX<S> t_z;  // tanh part of the candidate
  VecX<S> r;
};

template <typename S>
struct GruStepCache {
  VecX<S> h_prev;
  LnCache<S> ln_wz, ln_uz, ln_vz, ln_wr, ln_ur, ln_vr, ln_wc, ln_uc, ln_vc;
  VecX<S> z, r, c;  // gates and candidate
};

template <typename S>
struct StepCacheT {
  std::vector<int> inputs;
  int user = 0;
  MatX<S> probs;       // vocab x T, temperature 1
  MatX<S> h;           // hidden x (T+1), column 0 is h_0 = 0
  std::vector<ElmanStepCache<S>> elman;
  std::vector<DeltaStepCache<S>> delta;
  std::vector<GruStepCache<S>> gru;
};

using StepCache = StepCacheT<double>;

namespace detail {

template <typename S>
VecX<S> softmax(const VecX<S>& logits) {
  const S m = logits.maxCoeff();
  VecX<S> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

// Input column; the null-input index is the all-zero vector.
template <typename S>
VecX<S> input_col(const MatX<S>& W, int idx) {
  if (idx == 0) return VecX<S>::Zero(W.rows());
  return W.col(idx);
}

template <typename S>
void check_indices(const ModelConfig& c, const std::vector<int>& seq, int user) {
  if (user < 0 || user >= c.n_users) throw std::out_of_range("user index out of range");
  for (int idx : seq) {
    if (idx < 0 || idx >= c.vocab_size) throw std::out_of_range("symbol index out of range");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward passes. char_seq holds the input indices per step (the
// null-input bootstrap is index 0); h_0 = 0.

template <typename S>
StepCacheT<S> forward_elman(const ParametersT<S>& p, const std::vector<int>& char_seq,
                            int user, const VecX<S>* h0 = nullptr) {
  const auto& c = p.config;
  detail::check_indices<S>(c, char_seq, user);
  const int T = static_cast<int>(char_seq.size());
  const int H = c.hidden_size;

  StepCacheT<S> cache;
  cache.inputs = char_seq;
  cache.user = user;
  cache.h = MatX<S>::Zero(H, T + 1);
  if (h0) cache.h.col(0) = *h0;
  cache.probs = MatX<S>(c.vocab_size, T);
  cache.elman.resize(T);

  for (int t = 0; t < T; ++t) {
    auto& sc = cache.elman[t];
    sc.h_prev = cache.h.col(t);
    VecX<S> a = detail::input_col(p.W_in, char_seq[t]) + p.W_user.col(user) +
                p.W_rec * sc.h_prev;
    VecX<S> u;
    if (c.layer_norm) {
      u = layer_norm(a, p.ln_hid.scale, p.ln_hid.shift, &sc.ln);
    } else {
      u = a + p.b_hid;
    }
    sc.t = (u.array() * S(2) / S(3)).tanh().matrix();
    cache.h.col(t + 1) = S(1.7159) * sc.t;
    cache.probs.col(t) = detail::softmax<S>(p.W_out * cache.h.col(t + 1) + p.b_out);
  }
  return cache;
}

template <typename S>
StepCacheT<S> forward_delta(const ParametersT<S>& p, const std::vector<int>& char_seq,
                            int user, const VecX<S>* h0 = nullptr) {
  const auto& c = p.config;
  detail::check_indices<S>(c, char_seq, user);
  const int T = static_cast<int>(char_seq.size());
  const int H = c.hidden_size;

  StepCacheT<S> cache;
  cache.inputs = char_seq;
  cache.user = user;
  cache.h = MatX<S>::Zero(H, T + 1);
  if (h0) cache.h.col(0) = *h0;
  cache.probs = MatX<S>(c.vocab_size, T);
  cache.delta.resize(T);

  for (int t = 0; t < T; ++t) {
    auto& sc = cache.delta[t];
    sc.h_prev = cache.h.col(t);
    VecX<S> z_rec = p.V_d * sc.h_prev;
    VecX<S> z_in = detail::input_col(p.W_in, char_seq[t]);
    VecX<S> z_user = p.W_user.col(user);
    if (c.layer_norm) {
      sc.d_rec = layer_norm(z_rec, p.ln_rec.scale, p.ln_rec.shift, &sc.ln_rec);
      sc.d_dat = layer_norm(z_in, p.ln_in.scale, p.ln_in.shift, &sc.ln_in) +
                 layer_norm(z_user, p.ln_user.scale, p.ln_user.shift, &sc.ln_user);
    } else {
      sc.d_rec = z_rec;
      sc.d_dat = z_in + z_user;
    }
    VecX<S> pre = (sc.d_rec.array() * sc.d_dat.array()).matrix() + sc.d_rec + sc.d_dat;
    sc.t_z = (pre.array() * S(2) / S(3)).tanh().matrix();
    VecX<S> z_cand = S(1.7159) * sc.t_z;
    sc.r = (S(1) / (S(1) + (-(sc.d_dat + p.b_r).array()).exp())).matrix();
    cache.h.col(t + 1) = ((S(1) - sc.r.array()) * z_cand.array() +
                          sc.r.array() * sc.h_prev.array())
                             .matrix();
    cache.probs.col(t) = detail::softmax<S>(p.W_out * cache.h.col(t + 1) + p.b_out);
  }
  return cache;
}

template <typename S>
StepCacheT<S> forward_gru(const ParametersT<S>& p, const std::vector<int>& char_seq,
                          int user, const VecX<S>* h0 = nullptr) {
  const auto& c = p.config;
  detail::check_indices<S>(c, char_seq, user);
  const int T = static_cast<int>(char_seq.size());
  const int H = c.hidden_size;

  StepCacheT<S> cache;
  cache.inputs = char_seq;
  cache.user = user;
  cache.h = MatX<S>::Zero(H, T + 1);
  if (h0) cache.h.col(0) = *h0;
  cache.probs = MatX<S>(c.vocab_size, T);
  cache.gru.resize(T);

  auto sigmoid = [](const VecX<S>& v) {
    return (S(1) / (S(1) + (-v.array()).exp())).matrix();
  };

  for (int t = 0; t < T; ++t) {
    auto& sc = cache.gru[t];
    sc.h_prev = cache.h.col(t);
    const int x = char_seq[t];

    VecX<S> pre_z, pre_r;
    if (c.layer_norm) {
      pre_z = layer_norm(detail::input_col(p.W_z, x), p.ln_wz.scale, p.ln_wz.shift, &sc.ln_wz) +
              layer_norm(VecX<S>(p.U_z.col(user)), p.ln_uz.scale, p.ln_uz.shift, &sc.ln_uz) +
              layer_norm(VecX<S>(p.V_z * sc.h_prev), p.ln_vz.scale, p.ln_vz.shift, &sc.ln_vz);
      pre_r = layer_norm(detail::input_col(p.W_r, x), p.ln_wr.scale, p.ln_wr.shift, &sc.ln_wr) +
              layer_norm(VecX<S>(p.U_r.col(user)), p.ln_ur.scale, p.ln_ur.shift, &sc.ln_ur) +
              layer_norm(VecX<S>(p.V_r * sc.h_prev), p.ln_vr.scale, p.ln_vr.shift, &sc.ln_vr);
    } else {
      pre_z = detail::input_col(p.W_z, x) + p.U_z.col(user) + p.V_z * sc.h_prev + p.b_z;
      pre_r = detail::input_col(p.W_r, x) + p.U_r.col(user) + p.V_r * sc.h_prev + p.b_rg;
    }
    sc.z = sigmoid(pre_z);
    sc.r = sigmoid(pre_r);

    VecX<S> rh = (sc.r.array() * sc.h_prev.array()).matrix();
    VecX<S> pre_c;
    if (c.layer_norm) {
      pre_c = layer_norm(detail::input_col(p.W_c, x), p.ln_wc.scale, p.ln_wc.shift, &sc.ln_wc) +
              layer_norm(VecX<S>(p.U_c.col(user)), p.ln_uc.scale, p.ln_uc.shift, &sc.ln_uc) +
              layer_norm(VecX<S>(p.V_c * rh), p.ln_vc.scale, p.ln_vc.shift, &sc.ln_vc);
    } else {
      pre_c = detail::input_col(p.W_c, x) + p.U_c.col(user) + p.V_c * rh + p.b_c;
    }
    sc.c = pre_c.array().tanh().matrix();

    cache.h.col(t + 1) = (sc.z.array() * sc.h_prev.array() +
                          (S(1) - sc.z.array()) * sc.c.array())
                             .matrix();
    cache.probs.col(t) = detail::softmax<S>(p.W_out * cache.h.col(t + 1) + p.b_out);
  }
  return cache;
}

template <typename S>
StepCacheT<S> forward(const ParametersT<S>& p, const std::vector<int>& char_seq, int user,
                      const VecX<S>* h0 = nullptr) {
  switch (p.config.arch) {
    case Architecture::elman: return forward_elman(p, char_seq, user, h0);
    case Architecture::delta_rnn: return forward_delta(p, char_seq, user, h0);
    case Architecture::gru: return forward_gru(p, char_seq, user, h0);
  }
  throw std::logic_error("unknown architecture");
}

// Single inference step for sampling: advances the hidden state in
// place and returns the output logits.
template <typename S>
VecX<S> advance(const ParametersT<S>& p, VecX<S>& h, int input, int user) {
  StepCacheT<S> cache = forward(p, std::vector<int>{input}, user, &h);
  h = cache.h.col(1);
  return p.W_out * h + p.b_out;
}

// ---------------------------------------------------------------------------
// Loss

struct NllResult {
  double total = 0.0;
  double per_char = 0.0;
  int clamped = 0;  // targets whose probability hit the floor
};

template <typename S>
NllResult nll_loss(const MatX<S>& probs, const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != probs.cols()) {
    throw std::invalid_argument("nll_loss: length mismatch");
  }
  NllResult r;
  for (int t = 0; t < probs.cols(); ++t) {
    double p = static_cast<double>(probs(targets[t], t));
    if (p < kProbFloor) {
      p = kProbFloor;
      ++r.clamped;
    }
    r.total -= std::log(p);
  }
  r.per_char = targets.empty() ? 0.0 : r.total / static_cast<double>(targets.size());
  return r;
}

// ---------------------------------------------------------------------------
// Backward passes: exact gradients of the summed NLL through all time
// steps (truncated at config.bptt_window when nonzero).

namespace detail {

template <typename S>
S phi_deriv_coeff() {
  return S(1.7159) * S(2) / S(3);
}

// True when the gradient chain is cut between t and t-1.
inline bool truncate_here(int t, int window) {
  return window > 0 && t % window == 0;
}

}  // namespace detail

template <typename S>
ParametersT<S> backward_elman(const ParametersT<S>& p, const StepCacheT<S>& cache,
                              const std::vector<int>& targets) {
  const auto& c = p.config;
  const int T = static_cast<int>(cache.inputs.size());
  if (static_cast<int>(targets.size()) != T) {
    throw std::invalid_argument("backward: targets do not match cache");
  }
  ParametersT<S> g = zeros_like(p);
  VecX<S> dh_carry = VecX<S>::Zero(c.hidden_size);

  for (int t = T - 1; t >= 0; --t) {
    const auto& sc = cache.elman[t];
    VecX<S> dlogits = cache.probs.col(t);
    dlogits(targets[t]) -= S(1);

    g.W_out += dlogits * cache.h.col(t + 1).transpose();
    g.b_out += dlogits;
    VecX<S> dh = p.W_out.transpose() * dlogits + dh_carry;

    // h = 1.7159 * tanh(2u/3)
    VecX<S> du = (dh.array() * detail::phi_deriv_coeff<S>() *
                  (S(1) - sc.t.array().square()))
                     .matrix();
    VecX<S> da;
    if (c.layer_norm) {
      da = layer_norm_backward(du, p.ln_hid.scale, sc.ln, g.ln_hid.scale, g.ln_hid.shift);
    } else {
      da = du;
      g.b_hid += du;
    }
    if (cache.inputs[t] != 0) g.W_in.col(cache.inputs[t]) += da;
    g.W_user.col(cache.user) += da;
    g.W_rec += da * sc.h_prev.transpose();
    dh_carry = p.W_rec.transpose() * da;
    if (detail::truncate_here(t, c.bptt_window)) dh_carry.setZero();
  }
  return g;
}

template <typename S>
ParametersT<S> backward_delta(const ParametersT<S>& p, const StepCacheT<S>& cache,
                              const std::vector<int>& targets) {
  const auto& c = p.config;
  const int T = static_cast<int>(cache.inputs.size());
  if (static_cast<int>(targets.size()) != T) {
    throw std::invalid_argument("backward: targets do not match cache");
  }
  ParametersT<S> g = zeros_like(p);
  VecX<S> dh_carry = VecX<S>::Zero(c.hidden_size);

  for (int t = T - 1; t >= 0; --t) {
    const auto& sc = cache.delta[t];
    VecX<S> dlogits = cache.probs.col(t);
    dlogits(targets[t]) -= S(1);

    g.W_out += dlogits * cache.h.col(t + 1).transpose();
    g.b_out += dlogits;
    VecX<S> dh = p.W_out.transpose() * dlogits + dh_carry;

    VecX<S> z_cand = S(1.7159) * sc.t_z;
    VecX<S> dr = (dh.array() * (sc.h_prev.array() - z_cand.array())).matrix();
    VecX<S> dz = (dh.array() * (S(1) - sc.r.array())).matrix();
    VecX<S> dh_prev = (dh.array() * sc.r.array()).matrix();

    VecX<S> dpre = (dz.array() * detail::phi_deriv_coeff<S>() *
                    (S(1) - sc.t_z.array().square()))
                       .matrix();
    // pre = d_rec ⊙ d_dat + d_rec + d_dat
    VecX<S> dd_rec = (dpre.array() * (sc.d_dat.array() + S(1))).matrix();
    VecX<S> dd_dat = (dpre.array() * (sc.d_rec.array() + S(1))).matrix();

    VecX<S> dgate = (dr.array() * sc.r.array() * (S(1) - sc.r.array())).matrix();
    dd_dat += dgate;
    g.b_r += dgate;

    VecX<S> dz_rec, dz_in, dz_user;
    if (c.layer_norm) {
      dz_rec = layer_norm_backward(dd_rec, p.ln_rec.scale, sc.ln_rec, g.ln_rec.scale,
                                   g.ln_rec.shift);
      dz_in = layer_norm_backward(dd_dat, p.ln_in.scale, sc.ln_in, g.ln_in.scale,
                                  g.ln_in.shift);
      dz_user = layer_norm_backward(dd_dat, p.ln_user.scale, sc.ln_user, g.ln_user.scale,
                                    g.ln_user.shift);
    } else {
      dz_rec = dd_rec;
      dz_in = dd_dat;
      dz_user = dd_dat;
    }
    g.V_d += dz_rec * sc.h_prev.transpose();
    dh_prev += p.V_d.transpose() * dz_rec;
    if (cache.inputs[t] != 0) g.W_in.col(cache.inputs[t]) += dz_in;
    g.W_user.col(cache.user) += dz_user;

    dh_carry = dh_prev;
    if (detail::truncate_here(t, c.bptt_window)) dh_carry.setZero();
  }
  return g;
}

template <typename S>
ParametersT<S> backward_gru(const ParametersT<S>& p, const StepCacheT<S>& cache,
                            const std::vector<int>& targets) {
  const auto& c = p.config;
  const int T = static_cast<int>(cache.inputs.size());
  if (static_cast<int>(targets.size()) != T) {
    throw std::invalid_argument("backward: targets do not match cache");
  }
  ParametersT<S> g = zeros_like(p);
  VecX<S> dh_carry = VecX<S>::Zero(c.hidden_size);

  for (int t = T - 1; t >= 0; --t) {
    const auto& sc = cache.gru[t];
    const int x = cache.inputs[t];
    VecX<S> dlogits = cache.probs.col(t);
    dlogits(targets[t]) -= S(1);

    g.W_out += dlogits * cache.h.col(t + 1).transpose();
    g.b_out += dlogits;
    VecX<S> dh = p.W_out.transpose() * dlogits + dh_carry;

    // h = z ⊙ h_prev + (1-z) ⊙ c
    VecX<S> dz = (dh.array() * (sc.h_prev.array() - sc.c.array())).matrix();
    VecX<S> dc = (dh.array() * (S(1) - sc.z.array())).matrix();
    VecX<S> dh_prev = (dh.array() * sc.z.array()).matrix();

    VecX<S> dpre_c = (dc.array() * (S(1) - sc.c.array().square())).matrix();
    VecX<S> dpre_z = (dz.array() * sc.z.array() * (S(1) - sc.z.array())).matrix();

    VecX<S> rh = (sc.r.array() * sc.h_prev.array()).matrix();
    VecX<S> dwc, duc, dvc, dwz, duz, dvz;
    if (c.layer_norm) {
      dwc = layer_norm_backward(dpre_c, p.ln_wc.scale, sc.ln_wc, g.ln_wc.scale, g.ln_wc.shift);
      duc = layer_norm_backward(dpre_c, p.ln_uc.scale, sc.ln_uc, g.ln_uc.scale, g.ln_uc.shift);
      dvc = layer_norm_backward(dpre_c, p.ln_vc.scale, sc.ln_vc, g.ln_vc.scale, g.ln_vc.shift);
      dwz = layer_norm_backward(dpre_z, p.ln_wz.scale, sc.ln_wz, g.ln_wz.scale, g.ln_wz.shift);
      duz = layer_norm_backward(dpre_z, p.ln_uz.scale, sc.ln_uz, g.ln_uz.scale, g.ln_uz.shift);
      dvz = layer_norm_backward(dpre_z, p.ln_vz.scale, sc.ln_vz, g.ln_vz.scale, g.ln_vz.shift);
    } else {
      dwc = duc = dvc = dpre_c;
      dwz = duz = dvz = dpre_z;
      g.b_c += dpre_c;
      g.b_z += dpre_z;
    }

    if (x != 0) g.W_c.col(x) += dwc;
    g.U_c.col(cache.user) += duc;
    g.V_c += dvc * rh.transpose();
    VecX<S> drh = p.V_c.transpose() * dvc;
    VecX<S> dr = (drh.array() * sc.h_prev.array()).matrix();
    dh_prev += (drh.array() * sc.r.array()).matrix();

    VecX<S> dpre_r = (dr.array() * sc.r.array() * (S(1) - sc.r.array())).matrix();
    VecX<S> dwr, dur, dvr;
    if (c.layer_norm) {
      dwr = layer_norm_backward(dpre_r, p.ln_wr.scale, sc.ln_wr, g.ln_wr.scale, g.ln_wr.shift);
      dur = layer_norm_backward(dpre_r, p.ln_ur.scale, sc.ln_ur, g.ln_ur.scale, g.ln_ur.shift);
      dvr = layer_norm_backward(dpre_r, p.ln_vr.scale, sc.ln_vr, g.ln_vr.scale, g.ln_vr.shift);
    } else {
      dwr = dur = dvr = dpre_r;
      g.b_rg += dpre_r;
    }
    if (x != 0) g.W_r.col(x) += dwr;
    g.U_r.col(cache.user) += dur;
    g.V_r += dvr * sc.h_prev.transpose();
    dh_prev += p.V_r.transpose() * dvr;

    if (x != 0) g.W_z.col(x) += dwz;
    g.U_z.col(cache.user) += duz;
    g.V_z += dvz * sc.h_prev.transpose();
    dh_prev += p.V_z.transpose() * dvz;

    dh_carry = dh_prev;
    if (detail::truncate_here(t, c.bptt_window)) dh_carry.setZero();
  }
  return g;
}

template <typename S>
ParametersT<S> backward(const ParametersT<S>& p, const StepCacheT<S>& cache,
                        const std::vector<int>& targets) {
  switch (p.config.arch) {
    case Architecture::elman: return backward_elman(p, cache, targets);
    case Architecture::delta_rnn: return backward_delta(p, cache, targets);
    case Architecture::gru: return backward_gru(p, cache, targets);
  }
  throw std::logic_error("unknown architecture");
}

template <typename S>
void accumulate(ParametersT<S>& into, const ParametersT<S>& from) {
  auto a = tensor_refs(into);
  auto b = tensor_refs(const_cast<ParametersT<S>&>(from));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < a[i].size(); ++j) a[i].data[j] += b[i].data[j];
  }
}

// ---------------------------------------------------------------------------
// ADAM

template <typename S>
struct OptimizerStateT {
  ParametersT<S> m, v;  // first and second moment accumulators
  long t = 0;
  double step_size = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerState = OptimizerStateT<double>;

template <typename S>
OptimizerStateT<S> make_optimizer(const ParametersT<S>& p, double step_size = 0.002) {
  OptimizerStateT<S> s;
  s.m = zeros_like(p);
  s.v = zeros_like(p);
  s.step_size = step_size;
  return s;
}

// Standard bias-corrected ADAM applied after global gradient-norm
// clipping at 5.0. Throws on non-finite gradients.
template <typename S>
void adam_step(ParametersT<S>& params, const ParametersT<S>& grads,
               OptimizerStateT<S>& state) {
  auto pr = tensor_refs(params);
  auto gr = tensor_refs(const_cast<ParametersT<S>&>(grads));
  auto mr = tensor_refs(state.m);
  auto vr = tensor_refs(state.v);

  double sq = 0.0;
  for (auto& ref : gr) {
    for (Eigen::Index j = 0; j < ref.size(); ++j) {
      const double x = static_cast<double>(ref.data[j]);
      if (!std::isfinite(x)) {
        throw std::runtime_error(std::string("non-finite gradient in ") + ref.name);
      }
      sq += x * x;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip = norm > kGradClipNorm ? kGradClipNorm / norm : 1.0;

  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < pr.size(); ++i) {
    for (Eigen::Index j = 0; j < pr[i].size(); ++j) {
      const double gval = static_cast<double>(gr[i].data[j]) * clip;
      double m = state.beta1 * static_cast<double>(mr[i].data[j]) + (1.0 - state.beta1) * gval;
      double v = state.beta2 * static_cast<double>(vr[i].data[j]) + (1.0 - state.beta2) * gval * gval;
      mr[i].data[j] = static_cast<S>(m);
      vr[i].data[j] = static_cast<S>(v);
      const double update = state.step_size * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
      pr[i].data[j] = static_cast<S>(static_cast<double>(pr[i].data[j]) - update);
    }
  }
}

}  // namespace synthtext::neural
