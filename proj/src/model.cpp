// SPDX-License-Identifier: Apache-2.0

#include "mpt/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "mpt/binio.hpp"

namespace mpt {

using detail::AttentionCache;
using detail::DecoderLayerCache;
using detail::EncoderLayerCache;
using detail::FeedForwardCache;
using detail::LayerNormCache;

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid model config: ") + what);
  };
  require(vocab_size >= 1, "vocab_size must be >= 1");
  require(d_model >= 1, "d_model must be >= 1");
  require(n_heads >= 1, "n_heads must be >= 1");
  require(enc_layers >= 1, "enc_layers must be >= 1");
  require(dec_layers >= 1, "dec_layers must be >= 1");
  require(ff_dim >= 1, "ff_dim must be >= 1");
  require(max_src_len >= 1, "max_src_len must be >= 1");
  require(max_tgt_len >= 1, "max_tgt_len must be >= 1");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
}

namespace {

// ---- layer primitives -------------------------------------------------------

void add_row_bias(Matrix& x, const Vector& bias) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

Matrix ln_forward(const Matrix& x, const LayerNormWeights& w, LayerNormCache& cache) {
  const std::size_t n = x.cols();
  Matrix y(x.rows(), n);
  cache.xhat = Matrix(x.rows(), n);
  cache.inv_std.assign(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[r] = inv;
    auto xh = cache.xhat.row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      xh[c] = (in[c] - mean) * inv;
      out[c] = w.gain[c] * xh[c] + w.bias[c];
    }
  }
  return y;
}

Matrix ln_backward(const Matrix& dy, const LayerNormWeights& w, const LayerNormCache& cache) {
  const std::size_t n = dy.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix dx(dy.rows(), n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto g = dy.row(r);
    auto xh = cache.xhat.row(r);
    double mean_g = 0.0;
    double mean_gx = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double gh = g[c] * w.gain[c];
      mean_g += gh;
      mean_gx += gh * xh[c];
    }
    mean_g *= inv_n;
    mean_gx *= inv_n;
    auto out = dx.row(r);
    for (std::size_t c = 0; c < n; ++c)
      out[c] = cache.inv_std[r] * (g[c] * w.gain[c] - mean_g - xh[c] * mean_gx);
  }
  return dx;
}

Matrix attn_forward(const Matrix& xq, const Matrix& xkv, const AttentionWeights& w,
                    std::size_t heads, bool causal, AttentionCache& c) {
  c.q = matmul(xq, w.wq);
  c.k = matmul(xkv, w.wk);
  c.v = matmul(xkv, w.wv);
  const std::size_t rq = xq.rows();
  const std::size_t rk = xkv.rows();
  const std::size_t d = w.wq.cols();
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix ctx(rq, d);
  c.probs.assign(heads, Matrix(rq, rk));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Matrix& probs = c.probs[h];
    for (std::size_t i = 0; i < rq; ++i) {
      const std::size_t limit = causal ? i + 1 : rk;
      auto p = probs.row(i);
      const double* qi = c.q.row(i).data() + off;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < limit; ++j) {
        const double* kj = c.k.row(j).data() + off;
        double s = 0.0;
        for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
        p[j] = s * scale;
        mx = std::max(mx, p[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < limit; ++j) {
        p[j] = std::exp(p[j] - mx);
        z += p[j];
      }
      double* out = &ctx(i, off);
      for (std::size_t j = 0; j < limit; ++j) {
        p[j] /= z;
        const double* vj = c.v.row(j).data() + off;
        for (std::size_t t = 0; t < dh; ++t) out[t] += p[j] * vj[t];
      }
    }
  }
  return matmul(ctx, w.wo);
}

// Adds the input gradients to dxq and dxkv (which must be pre-sized).
void attn_backward(const Matrix& dout, const AttentionWeights& w, std::size_t heads, bool causal,
                   const AttentionCache& c, Matrix& dxq, Matrix& dxkv) {
  const Matrix dctx = matmul_nt(dout, w.wo);
  const std::size_t rq = c.q.rows();
  const std::size_t rk = c.k.rows();
  const std::size_t d = c.q.cols();
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dq(rq, d);
  Matrix dk(rk, d);
  Matrix dv(rk, d);
  std::vector<double> dp(rk);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix& probs = c.probs[h];
    for (std::size_t i = 0; i < rq; ++i) {
      const std::size_t limit = causal ? i + 1 : rk;
      auto p = probs.row(i);
      const double* gi = dctx.row(i).data() + off;
      double weighted = 0.0;
      for (std::size_t j = 0; j < limit; ++j) {
        const double* vj = c.v.row(j).data() + off;
        double s = 0.0;
        for (std::size_t t = 0; t < dh; ++t) s += gi[t] * vj[t];
        dp[j] = s;
        weighted += p[j] * s;
      }
      const double* qi = c.q.row(i).data() + off;
      double* dqi = &dq(i, off);
      for (std::size_t j = 0; j < limit; ++j) {
        const double ds = p[j] * (dp[j] - weighted) * scale;
        const double* kj = c.k.row(j).data() + off;
        double* dkj = &dk(j, off);
        double* dvj = &dv(j, off);
        for (std::size_t t = 0; t < dh; ++t) {
          dqi[t] += ds * kj[t];
          dkj[t] += ds * qi[t];
          dvj[t] += p[j] * gi[t];
        }
      }
    }
  }
  axpy(dxq, matmul_nt(dq, w.wq));
  axpy(dxkv, matmul_nt(dk, w.wk));
  axpy(dxkv, matmul_nt(dv, w.wv));
}

Matrix ff_forward(const Matrix& x, const FeedForwardWeights& w, FeedForwardCache& c) {
  c.pre = matmul(x, w.w1);
  add_row_bias(c.pre, w.b1);
  Matrix act = c.pre;
  for (double& v : act.values()) v = gelu(v);
  Matrix out = matmul(act, w.w2);
  add_row_bias(out, w.b2);
  return out;
}

Matrix ff_backward(const Matrix& dout, const FeedForwardWeights& w, const FeedForwardCache& c) {
  Matrix dpre = matmul_nt(dout, w.w2);
  auto pre = c.pre.values();
  auto g = dpre.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= gelu_grad(pre[i]);
  return matmul_nt(dpre, w.w1);
}

// ---- stacks -----------------------------------------------------------------

Matrix encoder_layer_forward(const Matrix& x, const EncoderLayerWeights& w, std::size_t heads,
                             EncoderLayerCache& c) {
  const Matrix a = ln_forward(x, w.ln_attn, c.ln_attn);
  Matrix x1 = x;
  axpy(x1, attn_forward(a, a, w.self_attn, heads, false, c.attn));
  const Matrix b = ln_forward(x1, w.ln_ff, c.ln_ff);
  axpy(x1, ff_forward(b, w.ff, c.ff));
  return x1;
}

Matrix encoder_layer_backward(const Matrix& dout, const EncoderLayerWeights& w, std::size_t heads,
                              const EncoderLayerCache& c) {
  Matrix dx1 = dout;
  axpy(dx1, ln_backward(ff_backward(dout, w.ff, c.ff), w.ln_ff, c.ln_ff));
  Matrix da(dx1.rows(), dx1.cols());
  attn_backward(dx1, w.self_attn, heads, false, c.attn, da, da);
  Matrix dx = dx1;
  axpy(dx, ln_backward(da, w.ln_attn, c.ln_attn));
  return dx;
}

Matrix decoder_layer_forward(const Matrix& y, const Matrix& enc, const DecoderLayerWeights& w,
                             std::size_t heads, DecoderLayerCache& c) {
  const Matrix a = ln_forward(y, w.ln_self, c.ln_self);
  Matrix y1 = y;
  axpy(y1, attn_forward(a, a, w.self_attn, heads, true, c.self_attn));
  const Matrix b = ln_forward(y1, w.ln_cross, c.ln_cross);
  axpy(y1, attn_forward(b, enc, w.cross_attn, heads, false, c.cross_attn));
  const Matrix f = ln_forward(y1, w.ln_ff, c.ln_ff);
  axpy(y1, ff_forward(f, w.ff, c.ff));
  return y1;
}

Matrix decoder_layer_backward(const Matrix& dout, const DecoderLayerWeights& w, std::size_t heads,
                              const DecoderLayerCache& c, Matrix& denc) {
  Matrix dy2 = dout;
  axpy(dy2, ln_backward(ff_backward(dout, w.ff, c.ff), w.ln_ff, c.ln_ff));
  Matrix db(dy2.rows(), dy2.cols());
  attn_backward(dy2, w.cross_attn, heads, false, c.cross_attn, db, denc);
  Matrix dy1 = dy2;
  axpy(dy1, ln_backward(db, w.ln_cross, c.ln_cross));
  Matrix da(dy1.rows(), dy1.cols());
  attn_backward(dy1, w.self_attn, heads, true, c.self_attn, da, da);
  Matrix dy = dy1;
  axpy(dy, ln_backward(da, w.ln_self, c.ln_self));
  return dy;
}

LayerNormWeights unit_layer_norm(std::size_t d) { return {Vector(d, 1.0), Vector(d, 0.0)}; }

AttentionWeights zero_attention(std::size_t d) {
  return {Matrix(d, d), Matrix(d, d), Matrix(d, d), Matrix(d, d)};
}

FeedForwardWeights zero_ff(std::size_t d, std::size_t ff) {
  return {Matrix(d, ff), Vector(ff), Matrix(ff, d), Vector(d)};
}

template <typename W, typename Fn>
void visit_ln(W& ln, Fn& fn) {
  fn(ln.gain.values());
  fn(ln.bias.values());
}

template <typename W, typename Fn>
void visit_attn(W& a, Fn& fn) {
  fn(a.wq.values());
  fn(a.wk.values());
  fn(a.wv.values());
  fn(a.wo.values());
}

template <typename W, typename Fn>
void visit_ff(W& f, Fn& fn) {
  fn(f.w1.values());
  fn(f.b1.values());
  fn(f.w2.values());
  fn(f.b2.values());
}

template <typename W, typename Fn>
void visit_all(W& w, Fn& fn) {
  fn(w.embedding.values());
  for (auto& layer : w.encoder) {
    visit_ln(layer.ln_attn, fn);
    visit_attn(layer.self_attn, fn);
    visit_ln(layer.ln_ff, fn);
    visit_ff(layer.ff, fn);
  }
  visit_ln(w.enc_final, fn);
  for (auto& layer : w.decoder) {
    visit_ln(layer.ln_self, fn);
    visit_attn(layer.self_attn, fn);
    visit_ln(layer.ln_cross, fn);
    visit_attn(layer.cross_attn, fn);
    visit_ln(layer.ln_ff, fn);
    visit_ff(layer.ff, fn);
  }
  visit_ln(w.dec_final, fn);
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(std::string(what) + ": expected (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + "), got " + m.shape_string());
}

void fill_gaussian(Matrix& m, Rng& rng, double std) {
  for (double& v : m.values()) v = std * rng.normal();
}

}  // namespace

// ---- FrozenModel --------------------------------------------------------------

ModelWeights allocate_weights(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  ModelWeights w;
  w.embedding = Matrix(cfg.vocab_size, d);
  for (std::size_t i = 0; i < cfg.enc_layers; ++i)
    w.encoder.push_back({unit_layer_norm(d), zero_attention(d), unit_layer_norm(d),
                         zero_ff(d, cfg.ff_dim)});
  w.enc_final = unit_layer_norm(d);
  for (std::size_t i = 0; i < cfg.dec_layers; ++i)
    w.decoder.push_back({unit_layer_norm(d), zero_attention(d), unit_layer_norm(d),
                         zero_attention(d), unit_layer_norm(d), zero_ff(d, cfg.ff_dim)});
  w.dec_final = unit_layer_norm(d);
  return w;
}

void for_each_tensor(const ModelWeights& w, const std::function<void(std::span<const double>)>& fn) {
  auto call = [&](std::span<const double> s) { fn(s); };
  visit_all(w, call);
}

void for_each_tensor(ModelWeights& w, const std::function<void(std::span<double>)>& fn) {
  auto call = [&](std::span<double> s) { fn(s); };
  visit_all(w, call);
}

FrozenModel::FrozenModel(ModelConfig config, ModelWeights weights)
    : config_(config), weights_(std::move(weights)) {
  config_.validate();
  const std::size_t d = config_.d_model;
  check_shape(weights_.embedding, config_.vocab_size, d, "embedding");
  if (weights_.encoder.size() != config_.enc_layers || weights_.decoder.size() != config_.dec_layers)
    throw ShapeError("layer count does not match config");
  bool finite = true;
  for_each_tensor(std::as_const(weights_), [&](std::span<const double> s) {
    finite = finite && all_finite(s);
  });
  if (!finite) throw std::invalid_argument("model weights contain non-finite values");

  const std::size_t max_pos = kMaxPromptLength + std::max(config_.max_src_len, config_.max_tgt_len);
  positions_ = Matrix(max_pos, d);
  for (std::size_t pos = 0; pos < max_pos; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      positions_(pos, i) = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < d) positions_(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
}

void FrozenModel::check_inputs(const Matrix& prompt, std::span<const int> src_ids,
                               std::span<const int> tgt_ids) const {
  if (prompt.cols() != config_.d_model && !(prompt.rows() == 0 && prompt.cols() == 0))
    throw ShapeError("prompt width " + std::to_string(prompt.cols()) + " != d_model " +
                     std::to_string(config_.d_model));
  if (prompt.rows() > kMaxPromptLength)
    throw ShapeError("prompt length " + std::to_string(prompt.rows()) + " exceeds maximum " +
                     std::to_string(kMaxPromptLength));
  if (src_ids.size() > config_.max_src_len)
    throw ShapeError("source length " + std::to_string(src_ids.size()) + " exceeds max_src_len");
  if (tgt_ids.size() > config_.max_tgt_len)
    throw ShapeError("target length " + std::to_string(tgt_ids.size()) + " exceeds max_tgt_len");
  if (tgt_ids.empty()) throw ShapeError("target sequence is empty");
  if (prompt.rows() + src_ids.size() == 0) throw ShapeError("encoder input is empty");
  auto check_ids = [&](std::span<const int> ids) {
    for (int t : ids)
      if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size)
        throw ShapeError("token id " + std::to_string(t) + " outside vocabulary");
  };
  check_ids(src_ids);
  check_ids(tgt_ids);
}

ForwardTrace FrozenModel::forward(const Matrix& prompt, std::span<const int> src_ids,
                                  std::span<const int> tgt_ids) const {
  check_inputs(prompt, src_ids, tgt_ids);
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t l = prompt.rows();
  const std::size_t n_enc = l + src_ids.size();
  const std::size_t n_dec = tgt_ids.size();

  ForwardTrace tr;
  tr.prompt_len = l;

  Matrix x(n_enc, d);
  for (std::size_t r = 0; r < n_enc; ++r) {
    auto dst = x.row(r);
    auto src_row = r < l ? prompt.row(r)
                         : weights_.embedding.row(static_cast<std::size_t>(src_ids[r - l]));
    auto pe = positions_.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] = src_row[c] + pe[c];
  }
  tr.enc_cache.resize(config_.enc_layers);
  for (std::size_t i = 0; i < config_.enc_layers; ++i)
    x = encoder_layer_forward(x, weights_.encoder[i], heads, tr.enc_cache[i]);
  tr.enc_hidden = ln_forward(x, weights_.enc_final, tr.enc_final_cache);

  Matrix y(n_dec, d);
  for (std::size_t r = 0; r < n_dec; ++r) {
    const int tok = r == 0 ? kBosToken : tgt_ids[r - 1];
    auto dst = y.row(r);
    auto emb = weights_.embedding.row(static_cast<std::size_t>(tok));
    auto pe = positions_.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] = emb[c] + pe[c];
  }
  tr.dec_cache.resize(config_.dec_layers);
  for (std::size_t i = 0; i < config_.dec_layers; ++i)
    y = decoder_layer_forward(y, tr.enc_hidden, weights_.decoder[i], heads, tr.dec_cache[i]);
  tr.dec_hidden = ln_forward(y, weights_.dec_final, tr.dec_final_cache);
  tr.logits = matmul_nt(tr.dec_hidden, weights_.embedding);
  return tr;
}

Matrix FrozenModel::backward_to_prompt(const ForwardTrace& trace, const Matrix& dloss_dlogits,
                                       const Matrix& dloss_dhidden_enc,
                                       const Matrix& dloss_dhidden_dec) const {
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t n_enc = trace.enc_hidden.rows();
  const std::size_t n_dec = trace.dec_hidden.rows();
  check_shape(dloss_dlogits, n_dec, config_.vocab_size, "dloss_dlogits");
  const bool has_enc = dloss_dhidden_enc.size() != 0 || dloss_dhidden_enc.rows() != 0;
  const bool has_dec = dloss_dhidden_dec.size() != 0 || dloss_dhidden_dec.rows() != 0;
  if (has_enc) check_shape(dloss_dhidden_enc, n_enc, d, "dloss_dhidden_enc");
  if (has_dec) check_shape(dloss_dhidden_dec, n_dec, d, "dloss_dhidden_dec");

  Matrix dh_dec = matmul(dloss_dlogits, weights_.embedding);
  if (has_dec) axpy(dh_dec, dloss_dhidden_dec);
  Matrix dy = ln_backward(dh_dec, weights_.dec_final, trace.dec_final_cache);

  Matrix denc = has_enc ? dloss_dhidden_enc : Matrix(n_enc, d);
  for (std::size_t i = config_.dec_layers; i-- > 0;)
    dy = decoder_layer_backward(dy, weights_.decoder[i], heads, trace.dec_cache[i], denc);

  Matrix dx = ln_backward(denc, weights_.enc_final, trace.enc_final_cache);
  for (std::size_t i = config_.enc_layers; i-- > 0;)
    dx = encoder_layer_backward(dx, weights_.encoder[i], heads, trace.enc_cache[i]);
  return row_slice(dx, 0, trace.prompt_len);
}

std::vector<int> FrozenModel::greedy_decode(const Matrix& prompt, std::span<const int> src_ids,
                                            std::size_t length) const {
  std::vector<int> out;
  if (length == 0) return out;
  if (length > config_.max_tgt_len) throw ShapeError("decode length exceeds max_tgt_len");
  // Causal decoding: logits at position t depend only on tokens before t, so a
  // placeholder in the last slot never influences the prediction read there.
  std::vector<int> buf(1, kPadToken);
  for (std::size_t t = 0; t < length; ++t) {
    const ForwardTrace tr = forward(prompt, src_ids, buf);
    const int next = static_cast<int>(argmax(tr.logits.row(t)));
    out.push_back(next);
    buf.back() = next;
    if (t + 1 < length) buf.push_back(kPadToken);
  }
  return out;
}

std::uint64_t FrozenModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for_each_tensor(weights_, [&](std::span<const double> s) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(s.data()), s.size_bytes()), h);
  });
  return h;
}

std::size_t FrozenModel::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(weights_, [&](std::span<const double> s) { n += s.size(); });
  return n;
}

void FrozenModel::save(const std::filesystem::path& path) const {
  BinaryWriter w;
  w.magic("MPTM");
  w.u32(kFormatVersion);
  for (std::size_t v : {config_.vocab_size, config_.d_model, config_.n_heads, config_.enc_layers,
                        config_.dec_layers, config_.ff_dim, config_.max_src_len,
                        config_.max_tgt_len})
    w.u32(static_cast<std::uint32_t>(v));
  for_each_tensor(weights_, [&](std::span<const double> s) { w.f64s(s); });
  w.write_file(path);
}

FrozenModel FrozenModel::load(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::from_file(path);
  r.expect_magic("MPTM");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw FormatError("unsupported MPTM version " + std::to_string(version));
  ModelConfig cfg;
  cfg.vocab_size = r.u32();
  cfg.d_model = r.u32();
  cfg.n_heads = r.u32();
  cfg.enc_layers = r.u32();
  cfg.dec_layers = r.u32();
  cfg.ff_dim = r.u32();
  cfg.max_src_len = r.u32();
  cfg.max_tgt_len = r.u32();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("MPTM: ") + e.what());
  }
  ModelWeights w = allocate_weights(cfg);
  for_each_tensor(w, [&](std::span<double> s) { r.f64s(s); });
  r.expect_end();
  return FrozenModel(cfg, std::move(w));
}

FrozenModel init_model(const ModelConfig& cfg, Rng rng, const InitOptions& init) {
  ModelWeights w = allocate_weights(cfg);
  Rng emb_rng = rng.fork("embedding");
  fill_gaussian(w.embedding, emb_rng, init.embedding_std);
  Rng layer_rng = rng.fork("layers");
  auto proj = [&](Matrix& m) {
    fill_gaussian(m, layer_rng, init.weight_gain / std::sqrt(static_cast<double>(m.rows())));
  };
  for (auto& layer : w.encoder) {
    proj(layer.self_attn.wq);
    proj(layer.self_attn.wk);
    proj(layer.self_attn.wv);
    proj(layer.self_attn.wo);
    proj(layer.ff.w1);
    proj(layer.ff.w2);
  }
  for (auto& layer : w.decoder) {
    for (AttentionWeights* a : {&layer.self_attn, &layer.cross_attn}) {
      proj(a->wq);
      proj(a->wk);
      proj(a->wv);
      proj(a->wo);
    }
    proj(layer.ff.w1);
    proj(layer.ff.w2);
  }
  return FrozenModel(cfg, std::move(w));
}

double task_loss(const ForwardTrace& trace, std::span<const int> tgt_ids) {
  return cross_entropy_from_logits(trace.logits, tgt_ids);
}

Matrix task_loss_grad(const ForwardTrace& trace, std::span<const int> tgt_ids) {
  const Matrix& logits = trace.logits;
  if (tgt_ids.size() != logits.rows())
    throw ShapeError("task_loss_grad: target length does not match trace");
  Matrix g(logits.rows(), logits.cols());
  const double inv_n = 1.0 / static_cast<double>(tgt_ids.size());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    softmax_into(logits.row(i), 1.0, g.row(i));
    g(i, static_cast<std::size_t>(tgt_ids[i])) -= 1.0;
    for (double& v : g.row(i)) v *= inv_n;
  }
  return g;
}

}  // namespace mpt
