#include "seqtag/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "seqtag/rng.hpp"

namespace seqtag::trainer {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

constexpr double kInitStd = 0.02;

// Token positions sit at rows 1..len of the encoder output ([CLS] shift).
Mat token_hidden(const Mat& hidden, std::size_t len) {
  Mat h(len, hidden.cols);
  for (std::size_t i = 0; i < len; ++i) {
    const double* src = hidden.row(i + 1);
    std::copy(src, src + hidden.cols, h.row(i));
  }
  return h;
}

Mat project_emissions(const Mat& token_h, const Mat& proj_w,
                      const std::vector<double>& proj_b) {
  Mat e(token_h.rows, proj_w.cols);
  matmul_nn(token_h, proj_w, e);
  for (std::size_t t = 0; t < e.rows; ++t) {
    kernels::active_ops().axpy(1.0, proj_b.data(), e.row(t), e.cols);
  }
  return e;
}

struct SentenceBatchItem {
  corpus::EncodedSentence enc;
  std::vector<int> gold;
  std::size_t len = 0;
};

// Loss and gradient accumulation for one sentence; returns its nll.
double sentence_backward(const TaggerModel& model, const SentenceBatchItem& item,
                         TaggerGrads& grads, bool freeze_encoder) {
  encoder::ForwardCache cache;
  const Mat hidden = encoder::forward(model.enc, item.enc.ids, item.enc.segment_ids,
                                      item.enc.attention_mask, &cache,
                                      model.config.dropout_rate, nullptr);
  const Mat token_h = token_hidden(hidden, item.len);
  const Mat emissions = project_emissions(token_h, model.proj_w, model.proj_b);

  crf::CrfGradients cg = crf::marginals_and_grad(emissions, model.crf_params, item.gold);
  const double loss = crf::nll(emissions, model.crf_params, item.gold);

  // CRF parameter gradients.
  kernels::active_ops().axpy(1.0, cg.d_transitions.data.data(),
                             grads.crf_transitions.data.data(),
                             grads.crf_transitions.size());
  kernels::active_ops().axpy(1.0, cg.d_start.data(), grads.crf_start.data(),
                             grads.crf_start.size());
  kernels::active_ops().axpy(1.0, cg.d_end.data(), grads.crf_end.data(),
                             grads.crf_end.size());

  // Projection gradients and the gradient flowing into the encoder.
  matmul_tn(token_h, cg.d_emissions, grads.proj_w);
  for (std::size_t t = 0; t < cg.d_emissions.rows; ++t) {
    kernels::active_ops().axpy(1.0, cg.d_emissions.row(t), grads.proj_b.data(),
                               cg.d_emissions.cols);
  }
  if (!freeze_encoder) {
    Mat d_token_h(item.len, hidden.cols);
    matmul_nt(cg.d_emissions, model.proj_w, d_token_h);
    Mat d_hidden(hidden.rows, hidden.cols);
    for (std::size_t i = 0; i < item.len; ++i) {
      const double* src = d_token_h.row(i);
      std::copy(src, src + hidden.cols, d_hidden.row(i + 1));
    }
    encoder::backward(model.enc, cache, d_hidden, grads.enc);
  }
  return loss;
}

}  // namespace

Objective objective_from_name(const std::string& name) {
  if (name == "finetune_ner") return Objective::kFinetuneNer;
  if (name == "mlm") return Objective::kMlm;
  if (name == "mlm_nsp") return Objective::kMlmNsp;
  fail("unknown objective '" + name + "'; valid: finetune_ner, mlm, mlm_nsp");
}

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::kFinetuneNer: return "finetune_ner";
    case Objective::kMlm: return "mlm";
    case Objective::kMlmNsp: return "mlm_nsp";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (max_len < 3) fail("max_len must be >= 3");
}

std::vector<TensorRef> tagger_tensors(TaggerModel& m) {
  std::vector<TensorRef> refs;
  encoder::for_each_tensor(m.enc, [&](const std::string& name, std::vector<double>& v) {
    refs.push_back({name, &v});
  });
  refs.push_back({"projection.weight", &m.proj_w.data});
  refs.push_back({"projection.bias", &m.proj_b});
  refs.push_back({"crf.transitions", &m.crf_params.transitions.data});
  refs.push_back({"crf.start", &m.crf_params.start_scores});
  refs.push_back({"crf.end", &m.crf_params.end_scores});
  return refs;
}

std::vector<TensorRef> tagger_tensors(TaggerGrads& g) {
  std::vector<TensorRef> refs;
  encoder::for_each_tensor(g.enc, [&](const std::string& name, std::vector<double>& v) {
    refs.push_back({name, &v});
  });
  refs.push_back({"projection.weight", &g.proj_w.data});
  refs.push_back({"projection.bias", &g.proj_b});
  refs.push_back({"crf.transitions", &g.crf_transitions.data});
  refs.push_back({"crf.start", &g.crf_start});
  refs.push_back({"crf.end", &g.crf_end});
  return refs;
}

TaggerGrads zero_grads(const TaggerModel& m) {
  TaggerGrads g;
  g.enc = encoder::zeros_like(m.config);
  g.proj_w = Mat(m.proj_w.rows, m.proj_w.cols);
  g.proj_b.assign(m.proj_b.size(), 0.0);
  g.crf_transitions = Mat(m.crf_params.transitions.rows, m.crf_params.transitions.cols);
  g.crf_start.assign(m.crf_params.start_scores.size(), 0.0);
  g.crf_end.assign(m.crf_params.end_scores.size(), 0.0);
  return g;
}

void Adam::step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
  if (params.size() != grads.size()) fail("parameter/gradient registry size mismatch");
  const auto& ops = kernels::active_ops();

  if (clip_norm_ > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads) sq += ops.dot(g.data->data(), g.data->data(), g.data->size());
    const double norm = std::sqrt(sq);
    if (norm > clip_norm_) {
      const double s = clip_norm_ / norm;
      for (const auto& g : grads) ops.scal(s, g.data->data(), g.data->size());
    }
  }

  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].data->size(), 0.0);
      v_[i].assign(params[i].data->size(), 0.0);
    }
  }
  ++t_;
  const double inv_bc1 = 1.0 / (1.0 - std::pow(beta1_, t_));
  const double inv_bc2 = 1.0 / (1.0 - std::pow(beta2_, t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].data->size() != grads[i].data->size()) {
      fail("gradient shape mismatch for " + params[i].name);
    }
    ops.adam_step(params[i].data->data(), grads[i].data->data(), m_[i].data(),
                  v_[i].data(), params[i].data->size(), lr_, beta1_, beta2_, eps_,
                  inv_bc1, inv_bc2);
  }
}

TaggerModel assemble_tagger(const encoder::EncoderConfig& config,
                            const corpus::TagSet& tagset, const corpus::Vocab& vocab,
                            std::uint64_t seed) {
  encoder::EncoderConfig cfg = config;
  cfg.vocab_size = vocab.size();
  cfg.validate();
  TaggerModel m{cfg,
                encoder::init_params(cfg, seed),
                Mat(cfg.hidden_size, tagset.num_tags()),
                std::vector<double>(tagset.num_tags(), 0.0),
                crf::CrfParams(tagset.num_tags()),
                tagset,
                vocab};
  Rng rng = Rng::substream(seed, "init_head");
  for (double& x : m.proj_w.data) x = rng.truncated_normal(kInitStd);
  return m;
}

TrainHistory finetune(TaggerModel& model, const std::vector<corpus::TaggedSentence>& data,
                      const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (data.empty()) fail("finetune: empty dataset");

  std::vector<SentenceBatchItem> items;
  items.reserve(data.size());
  for (const auto& s : data) {
    SentenceBatchItem item;
    item.len = s.tokens.size();
    if (s.tags.size() != s.tokens.size()) fail("finetune: sentence without aligned tags");
    item.enc = corpus::encode_tokens(model.vocab, s.tokens, s.tokens.size() + 2);
    if (item.enc.ids.size() > static_cast<std::size_t>(cfg.max_len)) {
      fail("finetune: sentence of " + std::to_string(s.tokens.size()) +
           " tokens exceeds max_len " + std::to_string(cfg.max_len));
    }
    for (const auto& tag : s.tags) item.gold.push_back(model.tagset.id_of(tag));
    items.push_back(std::move(item));
  }

  auto params = tagger_tensors(model);
  Adam adam(cfg);
  TrainHistory hist;
  std::size_t step = 0;

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      TaggerGrads grads = zero_grads(model);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        batch_loss += sentence_backward(model, items[order[i]], grads, cfg.freeze_encoder);
      }
      const double inv_b = 1.0 / static_cast<double>(end - begin);
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss)) {
        fail("non-finite loss at step " + std::to_string(step));
      }
      auto grad_refs = tagger_tensors(grads);
      for (auto& g : grad_refs) {
        kernels::active_ops().scal(inv_b, g.data->data(), g.data->size());
      }
      if (cfg.freeze_encoder) {
        // Drop encoder tensors from the update so frozen weights stay put.
        std::vector<TensorRef> p2, g2;
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (params[i].name.rfind("projection.", 0) == 0 ||
              params[i].name.rfind("crf.", 0) == 0) {
            p2.push_back(params[i]);
            g2.push_back(grad_refs[i]);
          }
        }
        adam.step(p2, g2);
      } else {
        adam.step(params, grad_refs);
      }

      hist.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++epoch_steps;
      if (log != nullptr) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "step %zu epoch %d loss %.6f\n", step, epoch,
                      batch_loss);
        *log << buf;
      }
      ++step;
    }
    hist.epoch_mean_losses.push_back(epoch_loss / static_cast<double>(epoch_steps));
    hist.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
            .count());
  }
  return hist;
}

std::vector<std::string> predict_tags(const TaggerModel& model,
                                      const std::vector<std::string>& tokens) {
  if (tokens.empty()) return {};
  if (tokens.size() + 2 > static_cast<std::size_t>(model.config.max_position)) {
    fail("predict_tags: sentence of " + std::to_string(tokens.size()) +
         " tokens exceeds max_position " + std::to_string(model.config.max_position));
  }
  const corpus::EncodedSentence enc =
      corpus::encode_tokens(model.vocab, tokens, tokens.size() + 2);
  const Mat hidden = encoder::encode(model.enc, enc.ids, enc.segment_ids, enc.attention_mask);
  const Mat token_h = token_hidden(hidden, tokens.size());
  const Mat emissions = project_emissions(token_h, model.proj_w, model.proj_b);
  const crf::ConstraintMask mask = crf::bio_constraint_mask(model.tagset);
  const crf::ViterbiResult vr = crf::viterbi(emissions, model.crf_params, mask);
  std::vector<std::string> tags;
  tags.reserve(vr.tags.size());
  for (int t : vr.tags) tags.push_back(model.tagset.tag_of(t));
  return tags;
}

std::vector<TensorRef> pretrain_tensors(PretrainModel& m) {
  std::vector<TensorRef> refs;
  encoder::for_each_tensor(m.enc, [&](const std::string& name, std::vector<double>& v) {
    refs.push_back({name, &v});
  });
  refs.push_back({"mlm.weight", &m.heads.mlm_w.data});
  refs.push_back({"mlm.bias", &m.heads.mlm_b});
  refs.push_back({"nsp.weight", &m.heads.nsp_w.data});
  refs.push_back({"nsp.bias", &m.heads.nsp_b});
  return refs;
}

std::vector<TensorRef> pretrain_tensors(PretrainGrads& g) {
  std::vector<TensorRef> refs;
  encoder::for_each_tensor(g.enc, [&](const std::string& name, std::vector<double>& v) {
    refs.push_back({name, &v});
  });
  refs.push_back({"mlm.weight", &g.heads.mlm_w.data});
  refs.push_back({"mlm.bias", &g.heads.mlm_b});
  refs.push_back({"nsp.weight", &g.heads.nsp_w.data});
  refs.push_back({"nsp.bias", &g.heads.nsp_b});
  return refs;
}

PretrainModel assemble_pretrain(const encoder::EncoderConfig& config,
                                const corpus::Vocab& vocab, std::uint64_t seed) {
  encoder::EncoderConfig cfg = config;
  cfg.vocab_size = vocab.size();
  cfg.validate();
  PretrainModel m;
  m.config = cfg;
  m.enc = encoder::init_params(cfg, seed);
  m.heads.mlm_w = Mat(cfg.hidden_size, cfg.vocab_size);
  m.heads.mlm_b.assign(cfg.vocab_size, 0.0);
  m.heads.nsp_w = Mat(cfg.hidden_size, 2);
  m.heads.nsp_b.assign(2, 0.0);
  m.vocab = vocab;
  Rng rng = Rng::substream(seed, "init_head");
  for (double& x : m.heads.mlm_w.data) x = rng.truncated_normal(kInitStd);
  for (double& x : m.heads.nsp_w.data) x = rng.truncated_normal(kInitStd);
  return m;
}

PretrainStepResult pretrain_step(PretrainModel& model,
                                 const std::vector<PretrainExample>& batch,
                                 Objective objective, Adam& adam) {
  if (objective == Objective::kFinetuneNer) {
    fail("pretrain_step: objective must be mlm or mlm_nsp");
  }
  if (batch.empty()) fail("pretrain_step: empty batch");
  const bool want_nsp = objective == Objective::kMlmNsp;
  std::size_t num_labeled = 0;
  for (const auto& ex : batch) {
    num_labeled += ex.mlm_labels.size();
    if (want_nsp && ex.nsp_label < 0) {
      fail("pretrain_step: objective mlm_nsp but an example lacks an NSP label");
    }
    if (!want_nsp && ex.nsp_label >= 0) {
      fail("pretrain_step: objective mlm but an example carries an NSP label");
    }
  }
  if (num_labeled == 0) fail("pretrain_step: batch has zero labeled positions");

  const std::size_t h = model.config.hidden_size;
  const int vsize = model.config.vocab_size;
  const auto& ops = kernels::active_ops();

  PretrainGrads grads;
  grads.enc = encoder::zeros_like(model.config);
  grads.heads.mlm_w = Mat(h, vsize);
  grads.heads.mlm_b.assign(vsize, 0.0);
  grads.heads.nsp_w = Mat(h, 2);
  grads.heads.nsp_b.assign(2, 0.0);

  double mlm_loss = 0.0;
  double nsp_loss = 0.0;
  std::vector<double> logits(vsize), dlogit(vsize);

  for (const auto& ex : batch) {
    encoder::ForwardCache cache;
    const Mat hidden = encoder::forward(model.enc, ex.ids, ex.segment_ids,
                                        ex.attention_mask, &cache,
                                        model.config.dropout_rate, nullptr);
    Mat d_hidden(hidden.rows, hidden.cols);

    for (const auto& [pos, original] : ex.mlm_labels) {
      if (pos >= hidden.rows) fail("pretrain_step: label position out of range");
      if (original < 0 || original >= vsize) fail("pretrain_step: label id out of range");
      const double* hrow = hidden.row(pos);
      for (int j = 0; j < vsize; ++j) logits[j] = model.heads.mlm_b[j];
      // logits += h * W  (W is H x V)
      for (std::size_t i = 0; i < h; ++i) {
        ops.axpy(hrow[i], model.heads.mlm_w.row(i), logits.data(), vsize);
      }
      double mx = logits[0];
      for (int j = 1; j < vsize; ++j) mx = std::max(mx, logits[j]);
      double z = 0.0;
      for (int j = 0; j < vsize; ++j) {
        dlogit[j] = std::exp(logits[j] - mx);
        z += dlogit[j];
      }
      mlm_loss += -(logits[original] - mx - std::log(z));
      const double inv = 1.0 / (z * static_cast<double>(num_labeled));
      for (int j = 0; j < vsize; ++j) dlogit[j] *= inv;
      dlogit[original] -= 1.0 / static_cast<double>(num_labeled);

      // dW += h^T dlogit ; dh += dlogit W^T
      for (std::size_t i = 0; i < h; ++i) {
        ops.axpy(hrow[i], dlogit.data(), grads.heads.mlm_w.row(i), vsize);
      }
      ops.axpy(1.0, dlogit.data(), grads.heads.mlm_b.data(), vsize);
      double* dhrow = d_hidden.row(pos);
      for (std::size_t i = 0; i < h; ++i) {
        dhrow[i] += ops.dot(model.heads.mlm_w.row(i), dlogit.data(), vsize);
      }
    }

    if (want_nsp) {
      const double* cls = hidden.row(0);
      // head is H x 2, plain loops
      double l2[2];
      for (int j = 0; j < 2; ++j) {
        double acc = model.heads.nsp_b[j];
        for (std::size_t i = 0; i < h; ++i) acc += cls[i] * model.heads.nsp_w(i, j);
        l2[j] = acc;
      }
      const double mx = std::max(l2[0], l2[1]);
      const double z = std::exp(l2[0] - mx) + std::exp(l2[1] - mx);
      const int y = ex.nsp_label;
      nsp_loss += -(l2[y] - mx - std::log(z));
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      double dl2[2];
      for (int j = 0; j < 2; ++j) {
        dl2[j] = (std::exp(l2[j] - mx) / z - (j == y ? 1.0 : 0.0)) * inv_b;
      }
      double* dhrow = d_hidden.row(0);
      for (std::size_t i = 0; i < h; ++i) {
        grads.heads.nsp_w(i, 0) += cls[i] * dl2[0];
        grads.heads.nsp_w(i, 1) += cls[i] * dl2[1];
        dhrow[i] += dl2[0] * model.heads.nsp_w(i, 0) + dl2[1] * model.heads.nsp_w(i, 1);
      }
      grads.heads.nsp_b[0] += dl2[0];
      grads.heads.nsp_b[1] += dl2[1];
    }

    encoder::backward(model.enc, cache, d_hidden, grads.enc);
  }

  auto params = pretrain_tensors(model);
  auto grad_refs = pretrain_tensors(grads);
  adam.step(params, grad_refs);

  PretrainStepResult r;
  r.mlm_loss = mlm_loss / static_cast<double>(num_labeled);
  if (want_nsp) r.nsp_loss = nsp_loss / static_cast<double>(batch.size());
  return r;
}

double grad_check(TaggerModel& model, const corpus::TaggedSentence& example,
                  double epsilon, std::size_t num_samples, GradCheckScope scope,
                  std::uint64_t seed) {
  if (!(epsilon > 0.0)) fail("grad_check: epsilon must be > 0");
  SentenceBatchItem item;
  item.len = example.tokens.size();
  item.enc = corpus::encode_tokens(model.vocab, example.tokens, example.tokens.size() + 2);
  for (const auto& tag : example.tags) item.gold.push_back(model.tagset.id_of(tag));

  auto loss_fn = [&]() {
    const Mat hidden = encoder::encode(model.enc, item.enc.ids, item.enc.segment_ids,
                                       item.enc.attention_mask);
    const Mat token_h = token_hidden(hidden, item.len);
    const Mat emissions = project_emissions(token_h, model.proj_w, model.proj_b);
    return crf::nll(emissions, model.crf_params, item.gold);
  };

  TaggerGrads grads = zero_grads(model);
  sentence_backward(model, item, grads, false);
  auto params = tagger_tensors(model);
  auto grad_refs = tagger_tensors(grads);

  // Group tensors so samples always span encoder, projection and CRF.
  std::vector<std::vector<std::size_t>> groups(3);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name.rfind("projection.", 0) == 0) {
      groups[1].push_back(i);
    } else if (params[i].name.rfind("crf.", 0) == 0) {
      groups[2].push_back(i);
    } else {
      groups[0].push_back(i);
    }
  }
  if (scope == GradCheckScope::kCrfOnly) {
    groups = {groups[2]};
  }

  Rng rng = Rng::substream(seed, "grad_check");
  double max_err = 0.0;
  for (std::size_t s = 0; s < num_samples; ++s) {
    const auto& group = groups[s % groups.size()];
    const std::size_t ti = group[rng.uniform_u64(group.size())];
    std::vector<double>& tensor = *params[ti].data;
    const std::size_t ei = rng.uniform_u64(tensor.size());
    const double saved = tensor[ei];
    tensor[ei] = saved + epsilon;
    const double up = loss_fn();
    tensor[ei] = saved - epsilon;
    const double down = loss_fn();
    tensor[ei] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = (*grad_refs[ti].data)[ei];
    const double err = std::abs(analytic - numeric) /
                       std::max({1.0, std::abs(analytic), std::abs(numeric)});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace seqtag::trainer
