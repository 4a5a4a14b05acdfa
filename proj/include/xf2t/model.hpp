#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xf2t/autodiff.hpp"
#include "xf2t/beam_search.hpp"
#include "xf2t/linearizer.hpp"

namespace xf2t {

using ad::Matrix;

struct ModelConfig {
  size_t vocab_size = 0;
  size_t d_model = 512;
  size_t n_heads = 8;
  size_t n_enc_layers = 6;
  size_t n_dec_layers = 6;
  size_t d_ff = 2048;
  double dropout_rate = 0.1;
  size_t max_positions = 512;
  uint64_t seed = 0;
  /// When false the encoder ignores role ids entirely (the ablation without
  /// fact-aware embeddings). The role table still exists.
  bool use_role_embeddings = true;
  /// When true the output projection reuses token_embedding (transposed) and
  /// output_weight is empty.
  bool tie_output_embedding = false;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate(const ModelConfig& c) {
  if (c.vocab_size == 0 || c.d_model == 0 || c.n_heads == 0 || c.n_enc_layers == 0 ||
      c.n_dec_layers == 0 || c.d_ff == 0 || c.max_positions == 0) {
    throw ConfigError("model config: all dimensions must be positive");
  }
  if (c.d_model % c.n_heads != 0) {
    throw ConfigError("model config: d_model " + std::to_string(c.d_model) +
                      " is not divisible by n_heads " + std::to_string(c.n_heads));
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw ConfigError("model config: dropout must be in [0, 1)");
  }
}

struct AttentionWeights {
  Matrix wq, wk, wv, wo;  // [d_model × d_model]
};

struct FeedForwardWeights {
  Matrix w1, b1, w2, b2;  // [d × ff], [1 × ff], [ff × d], [1 × d]
};

struct EncoderLayerWeights {
  Matrix ln1_gain, ln1_bias;
  AttentionWeights self_attn;
  Matrix ln2_gain, ln2_bias;
  FeedForwardWeights ff;
};

struct DecoderLayerWeights {
  Matrix ln1_gain, ln1_bias;
  AttentionWeights self_attn;
  Matrix ln2_gain, ln2_bias;
  AttentionWeights cross_attn;
  Matrix ln3_gain, ln3_bias;
  FeedForwardWeights ff;
};

/// Every weight of the encoder–decoder. Gradients use the same type, so
/// tensors() of params and grads line up one to one.
struct ModelParams {
  ModelConfig config;
  Matrix token_embedding;     // [vocab × d]
  Matrix position_embedding;  // [max_positions × d]
  Matrix role_embedding;      // [4 × d]
  std::vector<EncoderLayerWeights> encoder;
  Matrix encoder_ln_gain, encoder_ln_bias;
  std::vector<DecoderLayerWeights> decoder;
  Matrix decoder_ln_gain, decoder_ln_bias;
  Matrix output_weight;  // [d × vocab]
  Matrix output_bias;    // [1 × vocab]

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("token_embedding", self.token_embedding);
    f("position_embedding", self.position_embedding);
    f("role_embedding", self.role_embedding);
    auto attn = [&](const std::string& p, auto& a) {
      f(p + ".wq", a.wq);
      f(p + ".wk", a.wk);
      f(p + ".wv", a.wv);
      f(p + ".wo", a.wo);
    };
    auto ffn = [&](const std::string& p, auto& w) {
      f(p + ".w1", w.w1);
      f(p + ".b1", w.b1);
      f(p + ".w2", w.w2);
      f(p + ".b2", w.b2);
    };
    for (size_t i = 0; i < self.encoder.size(); ++i) {
      auto& l = self.encoder[i];
      const std::string p = "encoder." + std::to_string(i);
      f(p + ".ln1_gain", l.ln1_gain);
      f(p + ".ln1_bias", l.ln1_bias);
      attn(p + ".self_attn", l.self_attn);
      f(p + ".ln2_gain", l.ln2_gain);
      f(p + ".ln2_bias", l.ln2_bias);
      ffn(p + ".ff", l.ff);
    }
    f("encoder_ln_gain", self.encoder_ln_gain);
    f("encoder_ln_bias", self.encoder_ln_bias);
    for (size_t i = 0; i < self.decoder.size(); ++i) {
      auto& l = self.decoder[i];
      const std::string p = "decoder." + std::to_string(i);
      f(p + ".ln1_gain", l.ln1_gain);
      f(p + ".ln1_bias", l.ln1_bias);
      attn(p + ".self_attn", l.self_attn);
      f(p + ".ln2_gain", l.ln2_gain);
      f(p + ".ln2_bias", l.ln2_bias);
      attn(p + ".cross_attn", l.cross_attn);
      f(p + ".ln3_gain", l.ln3_gain);
      f(p + ".ln3_bias", l.ln3_bias);
      ffn(p + ".ff", l.ff);
    }
    f("decoder_ln_gain", self.decoder_ln_gain);
    f("decoder_ln_bias", self.decoder_ln_bias);
    f("output_weight", self.output_weight);
    f("output_bias", self.output_bias);
  }

  std::vector<std::pair<std::string, Matrix*>> tensors() {
    std::vector<std::pair<std::string, Matrix*>> out;
    visit(*this, [&](const std::string& n, Matrix& m) { out.emplace_back(n, &m); });
    return out;
  }

  std::vector<std::pair<std::string, const Matrix*>> tensors() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    visit(*this, [&](const std::string& n, const Matrix& m) { out.emplace_back(n, &m); });
    return out;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& [name, m] : tensors()) n += static_cast<size_t>(m->size());
    return n;
  }

  bool all_finite() const {
    for (const auto& [name, m] : tensors()) {
      if (!m->allFinite()) return false;
    }
    return true;
  }

  /// Same shapes and config, every entry zero.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto& [name, m] : z.tensors()) m->setZero();
    return z;
  }
};

namespace detail {

inline AttentionWeights shaped_attention(size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {Matrix(n, n), Matrix(n, n), Matrix(n, n), Matrix(n, n)};
}

inline FeedForwardWeights shaped_ff(size_t d, size_t ff) {
  const auto n = static_cast<Eigen::Index>(d);
  const auto m = static_cast<Eigen::Index>(ff);
  return {Matrix(n, m), Matrix(1, m), Matrix(m, n), Matrix(1, n)};
}

inline bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

/// Allocates every tensor with its final shape; contents unspecified.
inline ModelParams shaped_params(const ModelConfig& c) {
  validate(c);
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto v = static_cast<Eigen::Index>(c.vocab_size);
  ModelParams p;
  p.config = c;
  p.token_embedding = Matrix(v, d);
  p.position_embedding = Matrix(static_cast<Eigen::Index>(c.max_positions), d);
  p.role_embedding = Matrix(static_cast<Eigen::Index>(kNumRoles), d);
  for (size_t i = 0; i < c.n_enc_layers; ++i) {
    EncoderLayerWeights l;
    l.ln1_gain = l.ln1_bias = l.ln2_gain = l.ln2_bias = Matrix(1, d);
    l.self_attn = detail::shaped_attention(c.d_model);
    l.ff = detail::shaped_ff(c.d_model, c.d_ff);
    p.encoder.push_back(std::move(l));
  }
  p.encoder_ln_gain = p.encoder_ln_bias = Matrix(1, d);
  for (size_t i = 0; i < c.n_dec_layers; ++i) {
    DecoderLayerWeights l;
    l.ln1_gain = l.ln1_bias = l.ln2_gain = l.ln2_bias = l.ln3_gain = l.ln3_bias = Matrix(1, d);
    l.self_attn = detail::shaped_attention(c.d_model);
    l.cross_attn = detail::shaped_attention(c.d_model);
    l.ff = detail::shaped_ff(c.d_model, c.d_ff);
    p.decoder.push_back(std::move(l));
  }
  p.decoder_ln_gain = p.decoder_ln_bias = Matrix(1, d);
  p.output_weight = c.tie_output_embedding ? Matrix(0, 0) : Matrix(d, v);
  p.output_bias = Matrix(1, v);
  return p;
}

/// Deterministic initialization from config.seed:
///   token/position embeddings  U(-a, a), a = sqrt(3 / d_model)
///   weight matrices [in × out] U(-a, a), a = sqrt(6 / (in + out))
///   biases 0, layer-norm gains 1, role embeddings 0.
/// Tensors are drawn in tensors() order from one mt19937_64 stream.
inline ModelParams init_model(const ModelConfig& config) {
  ModelParams p = shaped_params(config);
  std::mt19937_64 rng(config.seed);
  auto fill_uniform = [&](Matrix& m, double a) {
    if (m.size() == 0) return;
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  const double d = static_cast<double>(config.d_model);
  for (auto& [name, m] : p.tensors()) {
    if (name == "role_embedding") {
      m->setZero();
    } else if (name == "token_embedding" || name == "position_embedding") {
      fill_uniform(*m, std::sqrt(3.0 / d));
    } else if (detail::ends_with(name, "_gain")) {
      m->setOnes();
    } else if (detail::ends_with(name, "_bias") || detail::ends_with(name, ".b1") ||
               detail::ends_with(name, ".b2")) {
      m->setZero();
    } else {
      fill_uniform(*m, std::sqrt(6.0 / static_cast<double>(m->rows() + m->cols())));
    }
  }
  return p;
}

/// A (source, target) training pair; target excludes BOS/EOS.
struct Example {
  LinearizedInput source;
  std::vector<TokenId> target;
  std::string task = "xf2t";
};

/// Right-padded batch. Row-major [batch × length] layouts throughout.
struct Batch {
  size_t size = 0;
  size_t src_len = 0;
  size_t tgt_len = 0;
  std::vector<int32_t> enc_tokens;
  std::vector<int32_t> enc_roles;
  std::vector<uint8_t> enc_mask;
  std::vector<int32_t> dec_inputs;
  std::vector<int32_t> dec_targets;
  std::vector<uint8_t> dec_mask;
};

/// Decoder inputs are ⟨BOS⟩ + target; decoder targets are target + ⟨EOS⟩.
inline Batch make_batch(std::span<const Example* const> examples) {
  if (examples.empty()) throw std::invalid_argument("make_batch: no examples");
  Batch b;
  b.size = examples.size();
  for (const auto* e : examples) {
    if (e->source.tokens.empty()) throw std::invalid_argument("make_batch: empty source");
    b.src_len = std::max(b.src_len, e->source.tokens.size());
    b.tgt_len = std::max(b.tgt_len, e->target.size() + 1);
  }
  b.enc_tokens.assign(b.size * b.src_len, kPadId);
  b.enc_roles.assign(b.size * b.src_len, 0);
  b.enc_mask.assign(b.size * b.src_len, 0);
  b.dec_inputs.assign(b.size * b.tgt_len, kPadId);
  b.dec_targets.assign(b.size * b.tgt_len, kPadId);
  b.dec_mask.assign(b.size * b.tgt_len, 0);
  for (size_t i = 0; i < b.size; ++i) {
    const auto& e = *examples[i];
    for (size_t t = 0; t < e.source.tokens.size(); ++t) {
      b.enc_tokens[i * b.src_len + t] = e.source.tokens[t];
      b.enc_roles[i * b.src_len + t] = static_cast<int32_t>(e.source.roles[t]);
      b.enc_mask[i * b.src_len + t] = 1;
    }
    const size_t n = e.target.size() + 1;
    for (size_t t = 0; t < n; ++t) {
      b.dec_inputs[i * b.tgt_len + t] = t == 0 ? kBosId : e.target[t - 1];
      b.dec_targets[i * b.tgt_len + t] = t + 1 < n ? e.target[t] : kEosId;
      b.dec_mask[i * b.tgt_len + t] = 1;
    }
  }
  return b;
}

inline Batch make_batch(std::span<const Example> examples) {
  std::vector<const Example*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  return make_batch(std::span<const Example* const>(ptrs));
}

struct ForwardOptions {
  bool train_mode = false;
  /// Required when train_mode is set and dropout is non-zero.
  std::mt19937_64* rng = nullptr;
  /// Overrides config.use_role_embeddings when set.
  std::optional<bool> use_roles;
  /// Overrides config.dropout_rate when set.
  std::optional<double> dropout_rate;
};

/// Logits laid out as [batch × steps × vocab].
struct Logits {
  size_t batch = 0;
  size_t steps = 0;
  size_t vocab = 0;
  Matrix values;  // [(batch*steps) × vocab]

  double at(size_t b, size_t t, size_t v) const {
    return values(static_cast<Eigen::Index>(b * steps + t), static_cast<Eigen::Index>(v));
  }
};

namespace detail {

/// Binds a parameter set to a graph and builds the encoder/decoder
/// computations on it.
class Network {
 public:
  Network(ad::Graph& g, const ModelParams& p, const ForwardOptions& opts)
      : g_(g), p_(p), opts_(opts) {
    if (opts.train_mode && rate() > 0.0 && opts.rng == nullptr) {
      throw std::invalid_argument("forward: train_mode with dropout requires an rng");
    }
  }

  ad::Var param(const Matrix& m) {
    auto it = leaves_.find(&m);
    if (it != leaves_.end()) return it->second;
    ad::Var v = g_.parameter(m);
    leaves_.emplace(&m, v);
    return v;
  }

  const std::unordered_map<const Matrix*, ad::Var>& leaves() const { return leaves_; }

  ad::Var encode(std::span<const int32_t> tokens, std::span<const int32_t> roles,
                 std::span<const uint8_t> mask, size_t batch, size_t len) {
    check_ids(tokens, p_.config.vocab_size, "encoder token");
    check_ids(roles, kNumRoles, "role");
    check_length(len, "encoder");
    ad::Var x = g_.add(g_.gather_rows(param(p_.token_embedding), to_vec(tokens)),
                       g_.gather_rows(param(p_.position_embedding), positions(batch, len)));
    const bool use_roles = opts_.use_roles.value_or(p_.config.use_role_embeddings);
    if (use_roles) x = g_.add(x, g_.gather_rows(param(p_.role_embedding), to_vec(roles)));
    x = drop(x);
    ad::AttentionLayout self{batch, len, len, p_.config.n_heads, false,
                             std::vector<uint8_t>(mask.begin(), mask.end())};
    for (const auto& l : p_.encoder) {
      ad::Var h = g_.layer_norm(x, param(l.ln1_gain), param(l.ln1_bias));
      x = g_.add(x, drop(attention(l.self_attn, h, h, self)));
      h = g_.layer_norm(x, param(l.ln2_gain), param(l.ln2_bias));
      x = g_.add(x, drop(feed_forward(l.ff, h)));
    }
    return g_.layer_norm(x, param(p_.encoder_ln_gain), param(p_.encoder_ln_bias));
  }

  /// Returns logits [(batch*len) × vocab].
  ad::Var decode(ad::Var memory, std::span<const uint8_t> memory_mask, size_t memory_len,
                 std::span<const int32_t> inputs, std::span<const uint8_t> mask, size_t batch,
                 size_t len) {
    check_ids(inputs, p_.config.vocab_size, "decoder token");
    check_length(len, "decoder");
    ad::Var y = g_.add(g_.gather_rows(param(p_.token_embedding), to_vec(inputs)),
                       g_.gather_rows(param(p_.position_embedding), positions(batch, len)));
    y = drop(y);
    ad::AttentionLayout self{batch, len, len, p_.config.n_heads, true,
                             std::vector<uint8_t>(mask.begin(), mask.end())};
    ad::AttentionLayout cross{batch, len, memory_len, p_.config.n_heads, false,
                              std::vector<uint8_t>(memory_mask.begin(), memory_mask.end())};
    for (const auto& l : p_.decoder) {
      ad::Var h = g_.layer_norm(y, param(l.ln1_gain), param(l.ln1_bias));
      y = g_.add(y, drop(attention(l.self_attn, h, h, self)));
      h = g_.layer_norm(y, param(l.ln2_gain), param(l.ln2_bias));
      y = g_.add(y, drop(attention(l.cross_attn, h, memory, cross)));
      h = g_.layer_norm(y, param(l.ln3_gain), param(l.ln3_bias));
      y = g_.add(y, drop(feed_forward(l.ff, h)));
    }
    y = g_.layer_norm(y, param(p_.decoder_ln_gain), param(p_.decoder_ln_bias));
    ad::Var logits = p_.config.tie_output_embedding
                         ? g_.matmul_transposed(y, param(p_.token_embedding))
                         : g_.matmul(y, param(p_.output_weight));
    return g_.add_row(logits, param(p_.output_bias));
  }

 private:
  ad::Var attention(const AttentionWeights& w, ad::Var query_in, ad::Var kv_in,
                    const ad::AttentionLayout& layout) {
    ad::Var q = g_.matmul(query_in, param(w.wq));
    ad::Var k = g_.matmul(kv_in, param(w.wk));
    ad::Var v = g_.matmul(kv_in, param(w.wv));
    return g_.matmul(g_.attention(q, k, v, layout), param(w.wo));
  }

  ad::Var feed_forward(const FeedForwardWeights& w, ad::Var x) {
    ad::Var h = g_.gelu(g_.add_row(g_.matmul(x, param(w.w1)), param(w.b1)));
    return g_.add_row(g_.matmul(h, param(w.w2)), param(w.b2));
  }

  ad::Var drop(ad::Var x) {
    if (!opts_.train_mode) return x;
    return g_.dropout(x, rate(), *opts_.rng);
  }

  double rate() const { return opts_.dropout_rate.value_or(p_.config.dropout_rate); }

  static std::vector<int32_t> to_vec(std::span<const int32_t> s) { return {s.begin(), s.end()}; }

  static std::vector<int32_t> positions(size_t batch, size_t len) {
    std::vector<int32_t> pos(batch * len);
    for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int32_t>(i % len);
    return pos;
  }

  static void check_ids(std::span<const int32_t> ids, size_t bound, const char* what) {
    for (int32_t id : ids) {
      if (id < 0 || static_cast<size_t>(id) >= bound) {
        throw std::out_of_range(std::string("forward: ") + what + " id " + std::to_string(id) +
                                " out of range [0, " + std::to_string(bound) + ")");
      }
    }
  }

  void check_length(size_t len, const char* what) const {
    if (len > p_.config.max_positions) {
      throw std::length_error(std::string("forward: ") + what + " length " +
                              std::to_string(len) + " exceeds max_positions " +
                              std::to_string(p_.config.max_positions));
    }
  }

  ad::Graph& g_;
  const ModelParams& p_;
  const ForwardOptions& opts_;
  std::unordered_map<const Matrix*, ad::Var> leaves_;
};

inline void check_batch(const Batch& b) {
  if (b.enc_tokens.size() != b.size * b.src_len || b.enc_roles.size() != b.enc_tokens.size() ||
      b.enc_mask.size() != b.enc_tokens.size() || b.dec_inputs.size() != b.size * b.tgt_len ||
      b.dec_targets.size() != b.dec_inputs.size() || b.dec_mask.size() != b.dec_inputs.size()) {
    throw std::invalid_argument("batch: array sizes do not match declared shape");
  }
}

}  // namespace detail

inline Logits forward(const ModelParams& params, const Batch& batch,
                      const ForwardOptions& opts = {}) {
  detail::check_batch(batch);
  ad::Graph g(false);
  detail::Network net(g, params, opts);
  ad::Var memory = net.encode(batch.enc_tokens, batch.enc_roles, batch.enc_mask, batch.size,
                              batch.src_len);
  ad::Var logits = net.decode(memory, batch.enc_mask, batch.src_len, batch.dec_inputs,
                              batch.dec_mask, batch.size, batch.tgt_len);
  return {batch.size, batch.tgt_len, params.config.vocab_size, g.value(logits)};
}

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean token cross-entropy over non-pad targets and its gradient with
/// respect to every tensor. Tensors that do not influence the loss get an
/// all-zero gradient.
inline LossAndGrads loss_and_grads(const ModelParams& params, const Batch& batch,
                                   const ForwardOptions& opts = {}) {
  detail::check_batch(batch);
  bool any = false;
  for (auto m : batch.dec_mask) any = any || m;
  if (!any) throw std::invalid_argument("loss_and_grads: batch has no non-pad targets");
  ad::Graph g(true);
  detail::Network net(g, params, opts);
  ad::Var memory = net.encode(batch.enc_tokens, batch.enc_roles, batch.enc_mask, batch.size,
                              batch.src_len);
  ad::Var logits = net.decode(memory, batch.enc_mask, batch.src_len, batch.dec_inputs,
                              batch.dec_mask, batch.size, batch.tgt_len);
  ad::Var loss = g.cross_entropy(logits, batch.dec_targets, batch.dec_mask);
  g.backward(loss);
  LossAndGrads out{g.value(loss)(0, 0), params.zeros_like()};
  auto src = params.tensors();
  auto dst = out.grads.tensors();
  for (size_t i = 0; i < src.size(); ++i) {
    auto it = net.leaves().find(src[i].second);
    if (it == net.leaves().end()) continue;
    const Matrix& gm = g.grad(it->second);
    if (gm.size() != 0) *dst[i].second = gm;
  }
  return out;
}

/// Beam search over the model. Encoder states are computed once; each step
/// re-runs the decoder over the live prefixes.
inline std::vector<Hypothesis> beam_decode(const ModelParams& params, const LinearizedInput& src,
                                           const BeamOptions& opts = {}) {
  if (opts.width == 0) throw std::invalid_argument("beam_decode: width must be positive");
  if (src.tokens.size() != src.roles.size() || src.tokens.empty()) {
    throw std::invalid_argument("beam_decode: malformed source");
  }
  const size_t S = src.tokens.size();
  std::vector<int32_t> roles;
  for (auto r : src.roles) roles.push_back(static_cast<int32_t>(r));
  const std::vector<uint8_t> mask(S, 1);
  const ForwardOptions fopts{};
  Matrix memory;
  {
    ad::Graph g(false);
    detail::Network net(g, params, fopts);
    memory = g.value(net.encode(src.tokens, roles, mask, 1, S));
  }
  const size_t max_len = std::min(opts.max_len, params.config.max_positions - 1);
  BeamOptions bounded = opts;
  bounded.max_len = std::max<size_t>(1, max_len);
  auto step = [&](const std::vector<std::vector<int32_t>>& prefixes) {
    const size_t B = prefixes.size();
    const size_t T = prefixes.front().size() + 1;
    std::vector<int32_t> inputs;
    inputs.reserve(B * T);
    for (const auto& p : prefixes) {
      inputs.push_back(kBosId);
      inputs.insert(inputs.end(), p.begin(), p.end());
    }
    Matrix mem(static_cast<Eigen::Index>(B * S), memory.cols());
    for (size_t b = 0; b < B; ++b) {
      mem.middleRows(static_cast<Eigen::Index>(b * S), static_cast<Eigen::Index>(S)) = memory;
    }
    const std::vector<uint8_t> mem_mask(B * S, 1);
    const std::vector<uint8_t> dec_mask(B * T, 1);
    ad::Graph g(false);
    detail::Network net(g, params, fopts);
    ad::Var m = g.constant(std::move(mem));
    const Matrix& z = g.value(net.decode(m, mem_mask, S, inputs, dec_mask, B, T));
    std::vector<std::vector<double>> out(B);
    for (size_t b = 0; b < B; ++b) {
      auto row = z.row(static_cast<Eigen::Index>(b * T + T - 1));
      const double mx = row.maxCoeff();
      const double lse = mx + std::log((row.array() - mx).exp().sum());
      out[b].resize(static_cast<size_t>(row.size()));
      for (Eigen::Index v = 0; v < row.size(); ++v) out[b][static_cast<size_t>(v)] = row(v) - lse;
    }
    return out;
  };
  return beam_search(step, kEosId, bounded);
}

/// Best hypothesis with any trailing ⟨EOS⟩ removed.
inline std::vector<TokenId> decode_best(const ModelParams& params, const LinearizedInput& src,
                                        const BeamOptions& opts = {}) {
  auto hyps = beam_decode(params, src, opts);
  std::vector<TokenId> best = hyps.front().tokens;
  if (!best.empty() && best.back() == kEosId) best.pop_back();
  return best;
}

}  // namespace xf2t
