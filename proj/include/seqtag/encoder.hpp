#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "seqtag/mat.hpp"
#include "seqtag/rng.hpp"

namespace seqtag::encoder {

struct EncoderConfig {
  int num_layers = 0;
  int hidden_size = 0;
  int num_heads = 0;
  int ffn_size = 0;
  int max_position = 0;
  int vocab_size = 0;
  int num_segments = 2;
  double dropout_rate = 0.0;

  void validate() const;  // throws std::invalid_argument on violations
};

// Named shapes. vocab_size stays 0 until the caller binds a vocabulary.
//   bert_base_like:  L=12 H=768  A=12 ffn=3072
//   ernie_tiny_like: L=3  H=1024 A=16 ffn=4096
//   toy:             L=2  H=32   A=2  ffn=128
EncoderConfig preset(std::string_view name);

struct LayerParams {
  Mat wq, wk, wv, wo;                      // H x H
  std::vector<double> bq, bk, bv, bo;      // H
  std::vector<double> ln1_gain, ln1_bias;  // H
  Mat w1;                                  // H x F
  std::vector<double> b1;                  // F
  Mat w2;                                  // F x H
  std::vector<double> b2;                  // H
  std::vector<double> ln2_gain, ln2_bias;  // H
};

struct EncoderParams {
  EncoderConfig config;
  Mat tok_emb;  // V x H
  Mat pos_emb;  // max_position x H
  Mat seg_emb;  // num_segments x H
  std::vector<LayerParams> layers;
};

// Truncated normal (std 0.02, cut at 2 std) for weights and embeddings,
// zeros for biases, layer-norm gain 1 / bias 0. Deterministic per seed.
EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed);

// Same shapes, all zeros; used as a gradient accumulator.
EncoderParams zeros_like(const EncoderConfig& cfg);

std::size_t param_count(const EncoderConfig& cfg);

// Visits every tensor as (name, flat data) in the fixed checkpoint order.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
  f("embeddings.token", p.tok_emb.data);
  f("embeddings.position", p.pos_emb.data);
  f("embeddings.segment", p.seg_emb.data);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    f(prefix + "attention.wq", l.wq.data);
    f(prefix + "attention.bq", l.bq);
    f(prefix + "attention.wk", l.wk.data);
    f(prefix + "attention.bk", l.bk);
    f(prefix + "attention.wv", l.wv.data);
    f(prefix + "attention.bv", l.bv);
    f(prefix + "attention.wo", l.wo.data);
    f(prefix + "attention.bo", l.bo);
    f(prefix + "ln1.gain", l.ln1_gain);
    f(prefix + "ln1.bias", l.ln1_bias);
    f(prefix + "ffn.w1", l.w1.data);
    f(prefix + "ffn.b1", l.b1);
    f(prefix + "ffn.w2", l.w2.data);
    f(prefix + "ffn.b2", l.b2);
    f(prefix + "ln2.gain", l.ln2_gain);
    f(prefix + "ln2.bias", l.ln2_bias);
  }
}

struct LayerCache {
  Mat x_in;                 // T x H input to the layer
  Mat q, k, v;              // T x H
  std::vector<Mat> probs;   // per head, T x T, post-softmax pre-dropout
  std::vector<std::vector<double>> probs_drop;  // per head, empty if rate 0
  Mat ctx;                  // T x H concatenated head contexts
  std::vector<double> attn_drop;
  Mat ln1_xhat;
  std::vector<double> ln1_rstd;
  Mat h1;                   // post-ln1
  Mat u;                    // T x F pre-GELU
  Mat act;                  // T x F post-GELU
  std::vector<double> ffn_drop;
  Mat ln2_xhat;
  std::vector<double> ln2_rstd;
};

struct ForwardCache {
  std::vector<int> ids, segments, mask;
  std::vector<double> emb_drop;
  std::vector<LayerCache> layers;
};

// Inference-mode forward: dropout disabled, nothing cached.
Mat encode(const EncoderParams& p, const std::vector<int>& ids,
           const std::vector<int>& segments, const std::vector<int>& mask);

// Training-mode forward. Pass a cache to enable backward(); dropout engages
// only when dropout_rate > 0 and rng != nullptr.
Mat forward(const EncoderParams& p, const std::vector<int>& ids,
            const std::vector<int>& segments, const std::vector<int>& mask,
            ForwardCache* cache, double dropout_rate, Rng* rng);

// Accumulates d loss / d params into grads (shapes from zeros_like).
void backward(const EncoderParams& p, const ForwardCache& cache,
              const Mat& d_out, EncoderParams& grads);

// Post-softmax attention matrix for one (layer, head); rows sum to 1 over
// unmasked keys, masked key columns are exactly zero.
Mat attention_probs(const EncoderParams& p, const std::vector<int>& ids,
                    const std::vector<int>& segments, const std::vector<int>& mask,
                    int layer, int head);

}  // namespace seqtag::encoder
