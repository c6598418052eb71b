#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "seqtag/corpus.hpp"
#include "seqtag/crf.hpp"
#include "seqtag/encoder.hpp"
#include "seqtag/pretrain.hpp"

namespace seqtag::trainer {

enum class Objective { kFinetuneNer, kMlm, kMlmNsp };

Objective objective_from_name(const std::string& name);
const char* objective_name(Objective o);

// Encoder -> fully-connected projection -> CRF, plus the vocabulary and tag
// inventory the model was built against.
struct TaggerModel {
  encoder::EncoderConfig config;
  encoder::EncoderParams enc;
  Mat proj_w;                   // H x num_tags
  std::vector<double> proj_b;   // num_tags
  crf::CrfParams crf_params;
  corpus::TagSet tagset;
  corpus::Vocab vocab;
};

struct TaggerGrads {
  encoder::EncoderParams enc;
  Mat proj_w;
  std::vector<double> proj_b;
  Mat crf_transitions;
  std::vector<double> crf_start, crf_end;
};

struct TrainConfig {
  int epochs = 2;
  double learning_rate = 5e-5;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int max_len = 128;
  Objective objective = Objective::kFinetuneNer;
  // Adam, pinned in docs; the source paper states only epochs/lr/batch.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables
  bool freeze_encoder = false;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> step_losses;
  std::vector<double> epoch_mean_losses;
  std::vector<double> epoch_seconds;
};

// Flat view of one tensor; registries pin the parameter order used by the
// optimizer, the checkpoint writer and grad_check alike.
struct TensorRef {
  std::string name;
  std::vector<double>* data;
};

std::vector<TensorRef> tagger_tensors(TaggerModel& m);
std::vector<TensorRef> tagger_tensors(TaggerGrads& g);

TaggerGrads zero_grads(const TaggerModel& m);

// Adam with optional global-norm clipping applied to the gradients first.
class Adam {
 public:
  explicit Adam(const TrainConfig& cfg)
      : lr_(cfg.learning_rate),
        beta1_(cfg.adam_beta1),
        beta2_(cfg.adam_beta2),
        eps_(cfg.adam_eps),
        clip_norm_(cfg.clip_norm) {}

  void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);
  int steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, clip_norm_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Encoder from init_params, projection truncated-normal std 0.02, CRF zeros.
TaggerModel assemble_tagger(const encoder::EncoderConfig& config,
                            const corpus::TagSet& tagset, const corpus::Vocab& vocab,
                            std::uint64_t seed);

// Mini-batch Adam on mean CRF nll with full backpropagation. Shuffling is
// keyed by (seed, epoch); one log line per step when log != nullptr.
TrainHistory finetune(TaggerModel& model, const std::vector<corpus::TaggedSentence>& data,
                      const TrainConfig& cfg, std::ostream* log = nullptr);

// Constrained decoding: emissions from the projected encoder output, Viterbi
// under the BIO mask, so the output order of tags is always valid.
std::vector<std::string> predict_tags(const TaggerModel& model,
                                      const std::vector<std::string>& tokens);

struct PretrainHeads {
  Mat mlm_w;                   // H x vocab_size
  std::vector<double> mlm_b;   // vocab_size
  Mat nsp_w;                   // H x 2
  std::vector<double> nsp_b;   // 2
};

struct PretrainModel {
  encoder::EncoderConfig config;
  encoder::EncoderParams enc;
  PretrainHeads heads;
  corpus::Vocab vocab;
};

struct PretrainGrads {
  encoder::EncoderParams enc;
  PretrainHeads heads;
};

std::vector<TensorRef> pretrain_tensors(PretrainModel& m);
std::vector<TensorRef> pretrain_tensors(PretrainGrads& g);

PretrainModel assemble_pretrain(const encoder::EncoderConfig& config,
                                const corpus::Vocab& vocab, std::uint64_t seed);

// One encoded pre-training example. mlm_labels lists (position, original id)
// for corrupted positions; nsp_label is 1 for a true next sentence, 0 for a
// random one, -1 when the objective has no NSP task.
struct PretrainExample {
  std::vector<int> ids;
  std::vector<int> attention_mask;
  std::vector<int> segment_ids;
  std::vector<std::pair<std::size_t, int>> mlm_labels;
  int nsp_label = -1;
};

struct PretrainStepResult {
  double mlm_loss = 0.0;
  std::optional<double> nsp_loss;
};

// One optimizer step. mlm_loss is the mean cross-entropy over labeled
// positions of the batch; nsp_loss (mlm_nsp only) the mean [CLS] binary
// cross-entropy. A batch without a single labeled position is an error.
PretrainStepResult pretrain_step(PretrainModel& model,
                                 const std::vector<PretrainExample>& batch,
                                 Objective objective, Adam& adam);

enum class GradCheckScope { kAll, kCrfOnly };

// Central-difference check of the fine-tuning loss gradient on sampled
// scalars across encoder, projection and CRF (round-robin over the groups).
// Relative error is |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(TaggerModel& model, const corpus::TaggedSentence& example,
                  double epsilon, std::size_t num_samples = 60,
                  GradCheckScope scope = GradCheckScope::kAll, std::uint64_t seed = 0);

}  // namespace seqtag::trainer
