#include "seqtag/encoder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace seqtag::encoder {
namespace {

constexpr double kLnEps = 1e-12;
constexpr double kInitStd = 0.02;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)) +
         x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

void fill_truncated_normal(std::vector<double>& v, Rng& rng) {
  for (double& x : v) x = rng.truncated_normal(kInitStd);
}

// y = gain * (x - mean) / sqrt(var + eps) + bias, row-wise.
void layer_norm(const Mat& x, const std::vector<double>& gain,
                const std::vector<double>& bias, Mat& y, Mat* xhat,
                std::vector<double>* rstd_out) {
  const std::size_t h = x.cols;
  for (std::size_t t = 0; t < x.rows; ++t) {
    const double* xr = x.row(t);
    double mean = 0.0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(h);
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    if (rstd_out != nullptr) (*rstd_out)[t] = rstd;
    double* yr = y.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      const double xh = (xr[j] - mean) * rstd;
      if (xhat != nullptr) (*xhat)(t, j) = xh;
      yr[j] = gain[j] * xh + bias[j];
    }
  }
}

// dx from dy given the cached xhat/rstd; accumulates dgain/dbias.
void layer_norm_backward(const Mat& dy, const Mat& xhat,
                         const std::vector<double>& rstd,
                         const std::vector<double>& gain, Mat& dx,
                         std::vector<double>& dgain, std::vector<double>& dbias) {
  const std::size_t h = dy.cols;
  std::vector<double> dxhat(h);
  for (std::size_t t = 0; t < dy.rows; ++t) {
    const double* dyr = dy.row(t);
    const double* xhr = xhat.row(t);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      dxhat[j] = dyr[j] * gain[j];
      m1 += dxhat[j];
      m2 += dxhat[j] * xhr[j];
      dgain[j] += dyr[j] * xhr[j];
      dbias[j] += dyr[j];
    }
    m1 /= static_cast<double>(h);
    m2 /= static_cast<double>(h);
    double* dxr = dx.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      dxr[j] += rstd[t] * (dxhat[j] - m1 - xhr[j] * m2);
    }
  }
}

// In-place inverted dropout; multipliers are cached for backward.
void apply_dropout(Mat& x, double rate, Rng& rng, std::vector<double>& mult) {
  mult.resize(x.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mult[i] = rng.uniform_real() < rate ? 0.0 : keep_scale;
    x.data[i] *= mult[i];
  }
}

void mul_cached(Mat& x, const std::vector<double>& mult) {
  if (mult.empty()) return;
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] *= mult[i];
}

// y = x*W + b via kernels; y must be zeroed by the caller or fresh.
void affine(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
  matmul_nn(x, w, y);
  for (std::size_t t = 0; t < y.rows; ++t) {
    kernels::active_ops().axpy(1.0, b.data(), y.row(t), y.cols);
  }
}

void add_col_sums(const Mat& d, std::vector<double>& acc) {
  for (std::size_t t = 0; t < d.rows; ++t) {
    kernels::active_ops().axpy(1.0, d.row(t), acc.data(), d.cols);
  }
}

void copy_head(const Mat& src, std::size_t head, std::size_t dk, Mat& dst) {
  for (std::size_t t = 0; t < src.rows; ++t) {
    const double* s = src.row(t) + head * dk;
    double* d = dst.row(t);
    for (std::size_t j = 0; j < dk; ++j) d[j] = s[j];
  }
}

void add_head(const Mat& src, std::size_t head, std::size_t dk, Mat& dst) {
  for (std::size_t t = 0; t < src.rows; ++t) {
    const double* s = src.row(t);
    double* d = dst.row(t) + head * dk;
    for (std::size_t j = 0; j < dk; ++j) d[j] += s[j];
  }
}

void check_inputs(const EncoderParams& p, const std::vector<int>& ids,
                  const std::vector<int>& segments, const std::vector<int>& mask) {
  const auto& cfg = p.config;
  if (ids.empty()) throw std::invalid_argument("empty input sequence");
  if (ids.size() != segments.size() || ids.size() != mask.size()) {
    throw std::invalid_argument("ids/segments/mask lengths differ");
  }
  if (ids.size() > static_cast<std::size_t>(cfg.max_position)) {
    throw std::invalid_argument("sequence length " + std::to_string(ids.size()) +
                                " exceeds max_position " +
                                std::to_string(cfg.max_position));
  }
  bool any_unmasked = false;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= cfg.vocab_size) {
      throw std::invalid_argument("token id out of range: " + std::to_string(ids[t]));
    }
    if (segments[t] < 0 || segments[t] >= cfg.num_segments) {
      throw std::invalid_argument("segment id out of range: " + std::to_string(segments[t]));
    }
    if (mask[t] != 0 && mask[t] != 1) {
      throw std::invalid_argument("attention mask entries must be 0 or 1");
    }
    any_unmasked |= mask[t] == 1;
  }
  if (!any_unmasked) throw std::invalid_argument("attention mask is all zero");
}

// Row-wise softmax over unmasked keys; masked columns stay exactly zero.
void masked_softmax_rows(Mat& s, const std::vector<int>& mask) {
  for (std::size_t i = 0; i < s.rows; ++i) {
    double* row = s.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.cols; ++j) {
      if (mask[j] == 1) mx = std::max(mx, row[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols; ++j) {
      if (mask[j] == 1) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      } else {
        row[j] = 0.0;
      }
    }
    for (std::size_t j = 0; j < s.cols; ++j) row[j] /= z;
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("num_layers must be >= 1");
  if (num_heads < 1) throw std::invalid_argument("num_heads must be >= 1");
  if (hidden_size < 1 || hidden_size % num_heads != 0) {
    throw std::invalid_argument("hidden_size must be positive and divisible by num_heads");
  }
  if (ffn_size < hidden_size) throw std::invalid_argument("ffn_size must be >= hidden_size");
  if (max_position < 1) throw std::invalid_argument("max_position must be >= 1");
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be set before use");
  if (num_segments < 1) throw std::invalid_argument("num_segments must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("dropout_rate must be in [0, 1)");
  }
}

EncoderConfig preset(std::string_view name) {
  EncoderConfig cfg;
  cfg.num_segments = 2;
  cfg.dropout_rate = 0.0;
  if (name == "bert_base_like") {
    cfg.num_layers = 12;
    cfg.hidden_size = 768;
    cfg.num_heads = 12;
    cfg.ffn_size = 3072;
    cfg.max_position = 512;
  } else if (name == "ernie_tiny_like") {
    cfg.num_layers = 3;
    cfg.hidden_size = 1024;
    cfg.num_heads = 16;
    cfg.ffn_size = 4096;
    cfg.max_position = 512;
  } else if (name == "toy") {
    cfg.num_layers = 2;
    cfg.hidden_size = 32;
    cfg.num_heads = 2;
    cfg.ffn_size = 128;
    cfg.max_position = 128;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) +
                                "'; valid: bert_base_like, ernie_tiny_like, toy");
  }
  return cfg;
}

EncoderParams zeros_like(const EncoderConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden_size;
  const std::size_t f = cfg.ffn_size;
  EncoderParams p;
  p.config = cfg;
  p.tok_emb = Mat(cfg.vocab_size, h);
  p.pos_emb = Mat(cfg.max_position, h);
  p.seg_emb = Mat(cfg.num_segments, h);
  p.layers.resize(cfg.num_layers);
  for (auto& l : p.layers) {
    l.wq = Mat(h, h);
    l.wk = Mat(h, h);
    l.wv = Mat(h, h);
    l.wo = Mat(h, h);
    l.bq.assign(h, 0.0);
    l.bk.assign(h, 0.0);
    l.bv.assign(h, 0.0);
    l.bo.assign(h, 0.0);
    l.ln1_gain.assign(h, 0.0);
    l.ln1_bias.assign(h, 0.0);
    l.w1 = Mat(h, f);
    l.b1.assign(f, 0.0);
    l.w2 = Mat(f, h);
    l.b2.assign(h, 0.0);
    l.ln2_gain.assign(h, 0.0);
    l.ln2_bias.assign(h, 0.0);
  }
  return p;
}

EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams p = zeros_like(cfg);
  Rng rng = Rng::substream(seed, "init");
  fill_truncated_normal(p.tok_emb.data, rng);
  fill_truncated_normal(p.pos_emb.data, rng);
  fill_truncated_normal(p.seg_emb.data, rng);
  for (auto& l : p.layers) {
    fill_truncated_normal(l.wq.data, rng);
    fill_truncated_normal(l.wk.data, rng);
    fill_truncated_normal(l.wv.data, rng);
    fill_truncated_normal(l.wo.data, rng);
    l.ln1_gain.assign(l.ln1_gain.size(), 1.0);
    fill_truncated_normal(l.w1.data, rng);
    fill_truncated_normal(l.w2.data, rng);
    l.ln2_gain.assign(l.ln2_gain.size(), 1.0);
  }
  return p;
}

std::size_t param_count(const EncoderConfig& cfg) {
  const std::size_t h = cfg.hidden_size;
  const std::size_t f = cfg.ffn_size;
  const std::size_t emb =
      (static_cast<std::size_t>(cfg.vocab_size) + cfg.max_position + cfg.num_segments) * h;
  const std::size_t per_layer = 4 * h * h + 4 * h  // attention
                                + 2 * h             // ln1
                                + h * f + f + f * h + h  // ffn
                                + 2 * h;            // ln2
  return emb + static_cast<std::size_t>(cfg.num_layers) * per_layer;
}

Mat forward(const EncoderParams& p, const std::vector<int>& ids,
            const std::vector<int>& segments, const std::vector<int>& mask,
            ForwardCache* cache, double dropout_rate, Rng* rng) {
  check_inputs(p, ids, segments, mask);
  const auto& cfg = p.config;
  const std::size_t len = ids.size();
  const std::size_t h = cfg.hidden_size;
  const std::size_t heads = cfg.num_heads;
  const std::size_t dk = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const bool drop = dropout_rate > 0.0 && rng != nullptr;
  const auto& ops = kernels::active_ops();

  if (cache != nullptr) {
    cache->ids = ids;
    cache->segments = segments;
    cache->mask = mask;
    cache->layers.assign(cfg.num_layers, LayerCache{});
    cache->emb_drop.clear();
  }

  Mat x(len, h);
  for (std::size_t t = 0; t < len; ++t) {
    double* row = x.row(t);
    ops.axpy(1.0, p.tok_emb.row(ids[t]), row, h);
    ops.axpy(1.0, p.pos_emb.row(t), row, h);
    ops.axpy(1.0, p.seg_emb.row(segments[t]), row, h);
  }
  if (drop) {
    std::vector<double> tmp;
    apply_dropout(x, dropout_rate, *rng, tmp);
    if (cache != nullptr) cache->emb_drop = std::move(tmp);
  }

  Mat qh(len, dk), kh(len, dk), vh(len, dk), ch(len, dk), s(len, len);
  for (int li = 0; li < cfg.num_layers; ++li) {
    const LayerParams& l = p.layers[li];
    LayerCache* lc = cache != nullptr ? &cache->layers[li] : nullptr;
    if (lc != nullptr) lc->x_in = x;

    Mat q(len, h), k(len, h), v(len, h);
    affine(x, l.wq, l.bq, q);
    affine(x, l.wk, l.bk, k);
    affine(x, l.wv, l.bv, v);

    Mat ctx(len, h);
    if (lc != nullptr) {
      lc->probs.assign(heads, Mat());
      lc->probs_drop.assign(heads, {});
    }
    for (std::size_t hd = 0; hd < heads; ++hd) {
      copy_head(q, hd, dk, qh);
      copy_head(k, hd, dk, kh);
      copy_head(v, hd, dk, vh);
      s.zero();
      matmul_nt(qh, kh, s);
      ops.scal(scale, s.data.data(), s.size());
      masked_softmax_rows(s, mask);
      if (lc != nullptr) lc->probs[hd] = s;
      if (drop) {
        std::vector<double> pm;
        apply_dropout(s, dropout_rate, *rng, pm);
        if (lc != nullptr) lc->probs_drop[hd] = std::move(pm);
      }
      ch.zero();
      matmul_nn(s, vh, ch);
      for (std::size_t t = 0; t < len; ++t) {
        double* dst = ctx.row(t) + hd * dk;
        const double* src = ch.row(t);
        for (std::size_t j = 0; j < dk; ++j) dst[j] = src[j];
      }
    }

    Mat attn_out(len, h);
    affine(ctx, l.wo, l.bo, attn_out);
    if (drop) {
      std::vector<double> am;
      apply_dropout(attn_out, dropout_rate, *rng, am);
      if (lc != nullptr) lc->attn_drop = std::move(am);
    }

    Mat a(len, h);
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] = x.data[i] + attn_out.data[i];
    Mat h1(len, h);
    Mat* xhat1 = nullptr;
    std::vector<double>* rstd1 = nullptr;
    if (lc != nullptr) {
      lc->ln1_xhat = Mat(len, h);
      lc->ln1_rstd.assign(len, 0.0);
      xhat1 = &lc->ln1_xhat;
      rstd1 = &lc->ln1_rstd;
    }
    layer_norm(a, l.ln1_gain, l.ln1_bias, h1, xhat1, rstd1);

    Mat u(len, cfg.ffn_size);
    affine(h1, l.w1, l.b1, u);
    Mat act(len, cfg.ffn_size);
    for (std::size_t i = 0; i < u.size(); ++i) act.data[i] = gelu(u.data[i]);
    Mat f(len, h);
    affine(act, l.w2, l.b2, f);
    if (drop) {
      std::vector<double> fm;
      apply_dropout(f, dropout_rate, *rng, fm);
      if (lc != nullptr) lc->ffn_drop = std::move(fm);
    }

    Mat b(len, h);
    for (std::size_t i = 0; i < b.size(); ++i) b.data[i] = h1.data[i] + f.data[i];
    Mat y(len, h);
    Mat* xhat2 = nullptr;
    std::vector<double>* rstd2 = nullptr;
    if (lc != nullptr) {
      lc->ln2_xhat = Mat(len, h);
      lc->ln2_rstd.assign(len, 0.0);
      xhat2 = &lc->ln2_xhat;
      rstd2 = &lc->ln2_rstd;
    }
    layer_norm(b, l.ln2_gain, l.ln2_bias, y, xhat2, rstd2);

    if (lc != nullptr) {
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->ctx = std::move(ctx);
      lc->h1 = h1;
      lc->u = std::move(u);
      lc->act = std::move(act);
    }
    x = std::move(y);
  }
  return x;
}

Mat encode(const EncoderParams& p, const std::vector<int>& ids,
           const std::vector<int>& segments, const std::vector<int>& mask) {
  return forward(p, ids, segments, mask, nullptr, 0.0, nullptr);
}

void backward(const EncoderParams& p, const ForwardCache& cache, const Mat& d_out,
              EncoderParams& grads) {
  const auto& cfg = p.config;
  const std::size_t len = cache.ids.size();
  const std::size_t h = cfg.hidden_size;
  const std::size_t heads = cfg.num_heads;
  const std::size_t dk = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const auto& ops = kernels::active_ops();
  if (d_out.rows != len || d_out.cols != h) {
    throw std::invalid_argument("d_out shape does not match cached forward");
  }

  Mat dy = d_out;
  Mat qh(len, dk), kh(len, dk), vh(len, dk);
  Mat dch(len, dk), dph(len, len), dsh(len, len), dqh(len, dk), dkh(len, dk), dvh(len, dk);

  for (int li = cfg.num_layers - 1; li >= 0; --li) {
    const LayerParams& l = p.layers[li];
    const LayerCache& lc = cache.layers[li];
    LayerParams& gl = grads.layers[li];

    // ln2
    Mat db(len, h);
    layer_norm_backward(dy, lc.ln2_xhat, lc.ln2_rstd, l.ln2_gain, db, gl.ln2_gain,
                        gl.ln2_bias);
    Mat dh1 = db;  // residual branch
    Mat df = std::move(db);
    mul_cached(df, lc.ffn_drop);

    // ffn
    matmul_tn(lc.act, df, gl.w2);
    add_col_sums(df, gl.b2);
    Mat dact(len, cfg.ffn_size);
    matmul_nt(df, l.w2, dact);
    Mat du(len, cfg.ffn_size);
    for (std::size_t i = 0; i < du.size(); ++i) {
      du.data[i] = dact.data[i] * gelu_grad(lc.u.data[i]);
    }
    matmul_tn(lc.h1, du, gl.w1);
    add_col_sums(du, gl.b1);
    matmul_nt(du, l.w1, dh1);

    // ln1
    Mat da(len, h);
    layer_norm_backward(dh1, lc.ln1_xhat, lc.ln1_rstd, l.ln1_gain, da, gl.ln1_gain,
                        gl.ln1_bias);
    Mat dx = da;  // residual branch
    Mat dao = std::move(da);
    mul_cached(dao, lc.attn_drop);

    // output projection
    matmul_tn(lc.ctx, dao, gl.wo);
    add_col_sums(dao, gl.bo);
    Mat dctx(len, h);
    matmul_nt(dao, l.wo, dctx);

    // heads
    Mat dq(len, h), dkm(len, h), dv(len, h);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      copy_head(lc.q, hd, dk, qh);
      copy_head(lc.k, hd, dk, kh);
      copy_head(lc.v, hd, dk, vh);
      copy_head(dctx, hd, dk, dch);

      // probs actually used in the forward product (after dropout)
      Mat pd = lc.probs[hd];
      mul_cached(pd, lc.probs_drop[hd]);

      dvh.zero();
      matmul_tn(pd, dch, dvh);
      dph.zero();
      matmul_nt(dch, vh, dph);
      if (!lc.probs_drop[hd].empty()) {
        for (std::size_t i = 0; i < dph.size(); ++i) {
          dph.data[i] *= lc.probs_drop[hd][i];
        }
      }
      // softmax jacobian; rows of probs are zero on masked keys, so dsh is too
      const Mat& prob = lc.probs[hd];
      for (std::size_t i = 0; i < len; ++i) {
        const double* pr = prob.row(i);
        const double* dpr = dph.row(i);
        const double inner = ops.dot(pr, dpr, len);
        double* dsr = dsh.row(i);
        for (std::size_t j = 0; j < len; ++j) dsr[j] = pr[j] * (dpr[j] - inner);
      }
      ops.scal(scale, dsh.data.data(), dsh.size());
      dqh.zero();
      matmul_nn(dsh, kh, dqh);
      dkh.zero();
      matmul_tn(dsh, qh, dkh);

      add_head(dqh, hd, dk, dq);
      add_head(dkh, hd, dk, dkm);
      add_head(dvh, hd, dk, dv);
    }

    // input projections
    matmul_tn(lc.x_in, dq, gl.wq);
    add_col_sums(dq, gl.bq);
    matmul_nt(dq, l.wq, dx);
    matmul_tn(lc.x_in, dkm, gl.wk);
    add_col_sums(dkm, gl.bk);
    matmul_nt(dkm, l.wk, dx);
    matmul_tn(lc.x_in, dv, gl.wv);
    add_col_sums(dv, gl.bv);
    matmul_nt(dv, l.wv, dx);

    dy = std::move(dx);
  }

  mul_cached(dy, cache.emb_drop);
  for (std::size_t t = 0; t < len; ++t) {
    const double* row = dy.row(t);
    ops.axpy(1.0, row, grads.tok_emb.row(cache.ids[t]), h);
    ops.axpy(1.0, row, grads.pos_emb.row(t), h);
    ops.axpy(1.0, row, grads.seg_emb.row(cache.segments[t]), h);
  }
}

Mat attention_probs(const EncoderParams& p, const std::vector<int>& ids,
                    const std::vector<int>& segments, const std::vector<int>& mask,
                    int layer, int head) {
  if (layer < 0 || layer >= p.config.num_layers) {
    throw std::invalid_argument("layer index out of range: " + std::to_string(layer));
  }
  if (head < 0 || head >= p.config.num_heads) {
    throw std::invalid_argument("head index out of range: " + std::to_string(head));
  }
  ForwardCache cache;
  forward(p, ids, segments, mask, &cache, 0.0, nullptr);
  return cache.layers[layer].probs[head];
}

}  // namespace seqtag::encoder
