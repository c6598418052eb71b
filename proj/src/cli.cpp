#include "seqtag/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seqtag/checkpoint.hpp"
#include "seqtag/config.hpp"
#include "seqtag/corpus.hpp"
#include "seqtag/evaluator.hpp"
#include "seqtag/kernels.hpp"
#include "seqtag/pretrain.hpp"
#include "seqtag/trainer.hpp"
#include "seqtag/utf8.hpp"

namespace seqtag::cli {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool quiet_logs() {
  const char* env = std::getenv("SEQTAG_LOG");
  return env != nullptr && std::string(env) == "quiet";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write file: " + path);
  out << content;
  if (!out) fail("short write: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Blank-line-separated groups of non-empty lines.
std::vector<std::vector<std::string>> read_line_groups(const std::string& path) {
  std::vector<std::vector<std::string>> groups;
  std::vector<std::string> current;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) {
      if (!current.empty()) groups.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(line);
    }
  }
  if (!current.empty()) groups.push_back(std::move(current));
  return groups;
}

std::uint64_t sequence_seed(std::uint64_t seed, std::uint64_t seq_id) {
  return Rng::substream(seed, "seq", seq_id).next_u64();
}

// Flag values that override the config file (flag > file > default).
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::optional<int> max_len;
  std::optional<std::string> objective;
  std::optional<std::string> masking;
  std::optional<std::string> preset;
  std::optional<int> min_freq;
  std::optional<double> mask_rate;

  void apply(config::RunConfig& rc) const {
    if (seed) {
      rc.seed = *seed;
      rc.train.seed = *seed;
    }
    if (epochs) rc.train.epochs = *epochs;
    if (learning_rate) rc.train.learning_rate = *learning_rate;
    if (batch_size) rc.train.batch_size = *batch_size;
    if (max_len) rc.train.max_len = *max_len;
    if (objective) rc.train.objective = trainer::objective_from_name(*objective);
    if (masking) rc.masking = config::masking_from_name(*masking);
    if (preset) rc.preset = *preset;
    if (min_freq) rc.min_freq = *min_freq;
    if (mask_rate) rc.mask_rate = *mask_rate;
  }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "override config seed");
  cmd->add_option("--epochs", ov.epochs, "override training epochs");
  cmd->add_option("--learning-rate,--lr", ov.learning_rate, "override learning rate");
  cmd->add_option("--batch-size", ov.batch_size, "override batch size");
  cmd->add_option("--max-len", ov.max_len, "override max sequence length");
  cmd->add_option("--objective", ov.objective, "finetune_ner | mlm | mlm_nsp");
  cmd->add_option("--masking", ov.masking, "static | dynamic | span");
  cmd->add_option("--preset", ov.preset, "encoder preset name");
  cmd->add_option("--min-freq", ov.min_freq, "vocabulary frequency threshold");
  cmd->add_option("--mask-rate", ov.mask_rate, "masked-token rate");
}

config::RunConfig load_config(const std::string& path, const Overrides& ov) {
  config::RunConfig rc = config::load_file(path);
  ov.apply(rc);
  rc.validate();
  return rc;
}

std::vector<pretrain::Sentence> tokenize_lines(const std::vector<std::string>& lines) {
  std::vector<pretrain::Sentence> out;
  for (const auto& line : lines) {
    if (!line.empty()) out.push_back(utf8::split_codepoints(line));
  }
  return out;
}

corpus::Vocab vocab_from_sentences(const std::vector<pretrain::Sentence>& sentences,
                                   int min_freq) {
  std::vector<corpus::TaggedSentence> wrapped;
  wrapped.reserve(sentences.size());
  for (const auto& s : sentences) wrapped.push_back({s, {}});
  return corpus::build_vocab(wrapped, min_freq);
}

std::vector<std::uint8_t> specials_of(const corpus::EncodedSentence& enc) {
  std::vector<std::uint8_t> specials(enc.ids.size(), 0);
  for (std::size_t i = 0; i < enc.ids.size(); ++i) {
    if (enc.ids[i] < corpus::Vocab::kNumSpecials) specials[i] = 1;
    if (enc.attention_mask[i] == 0) specials[i] = 1;
  }
  return specials;
}

// Shifts a raw-coordinate span plan into encoded coordinates (+offset).
void shift_plan(pretrain::MaskPlan& plan, std::size_t offset) {
  for (auto& a : plan.actions) a.pos += offset;
  for (auto& l : plan.labels) l.pos += offset;
}

struct PretrainDataset {
  // Uncorrupted encoded examples; masking is applied per epoch.
  struct Item {
    corpus::EncodedSentence enc;
    std::vector<pretrain::Sentence> raw_segments;  // for span matching
    std::vector<std::size_t> segment_offsets;      // encoded offset per segment
    int nsp_label = -1;
  };
  std::vector<Item> items;
};

PretrainDataset build_pretrain_dataset(const config::RunConfig& rc,
                                       const corpus::Vocab& vocab,
                                       const std::vector<pretrain::Sentence>& sentences,
                                       const std::vector<pretrain::Document>& documents) {
  PretrainDataset ds;
  const auto max_len = static_cast<std::size_t>(rc.train.max_len);
  if (rc.train.objective == trainer::Objective::kMlm) {
    for (const auto& s : sentences) {
      PretrainDataset::Item item;
      item.enc = corpus::encode_tokens(vocab, s, s.size() + 2);
      if (item.enc.ids.size() > max_len) {
        fail("pretrain sentence of " + std::to_string(s.size()) +
             " tokens exceeds max_len " + std::to_string(max_len));
      }
      item.raw_segments = {s};
      item.segment_offsets = {1};
      ds.items.push_back(std::move(item));
    }
  } else {
    const auto pairs = pretrain::make_nsp_pairs(documents, sentences.size(), rc.seed);
    for (const auto& pair : pairs) {
      PretrainDataset::Item item;
      const std::size_t total = pair.segment_a.size() + pair.segment_b.size() + 3;
      if (total > max_len) {
        fail("NSP pair of " + std::to_string(total) + " positions exceeds max_len " +
             std::to_string(max_len));
      }
      item.enc.ids.push_back(corpus::Vocab::kCls);
      item.enc.segment_ids.push_back(0);
      for (const auto& tok : pair.segment_a) {
        item.enc.ids.push_back(vocab.encode(tok));
        item.enc.segment_ids.push_back(0);
      }
      item.enc.ids.push_back(corpus::Vocab::kSep);
      item.enc.segment_ids.push_back(0);
      const std::size_t b_offset = item.enc.ids.size();
      for (const auto& tok : pair.segment_b) {
        item.enc.ids.push_back(vocab.encode(tok));
        item.enc.segment_ids.push_back(1);
      }
      item.enc.ids.push_back(corpus::Vocab::kSep);
      item.enc.segment_ids.push_back(1);
      item.enc.attention_mask.assign(item.enc.ids.size(), 1);
      item.raw_segments = {pair.segment_a, pair.segment_b};
      item.segment_offsets = {1, b_offset};
      item.nsp_label = pair.is_next ? 1 : 0;
      ds.items.push_back(std::move(item));
    }
  }
  return ds;
}

// Applies the configured masking strategy to one item for one epoch.
trainer::PretrainExample masked_example(const PretrainDataset::Item& item,
                                        const config::RunConfig& rc,
                                        const corpus::Vocab& vocab,
                                        const pretrain::SpanLexicon& lexicon,
                                        std::uint64_t seq_id, int epoch) {
  const std::uint64_t seed = sequence_seed(rc.seed, seq_id);
  pretrain::MaskPlan plan;
  switch (rc.masking) {
    case config::Masking::kStatic:
      plan = pretrain::plan_static_mask(item.enc.ids, specials_of(item.enc), rc.mask_rate,
                                        seed, vocab.size());
      break;
    case config::Masking::kDynamic:
      plan = pretrain::plan_dynamic_mask(item.enc.ids, specials_of(item.enc), rc.mask_rate,
                                         seed, epoch, vocab.size());
      break;
    case config::Masking::kSpan: {
      // Span plans are drawn per segment in raw coordinates, then shifted
      // past the leading special of that segment.
      for (std::size_t s = 0; s < item.raw_segments.size(); ++s) {
        pretrain::MaskPlan part = pretrain::plan_span_mask(
            item.raw_segments[s], lexicon, rc.mask_rate,
            sequence_seed(seed, s), vocab);
        shift_plan(part, item.segment_offsets[s]);
        plan.actions.insert(plan.actions.end(), part.actions.begin(), part.actions.end());
        plan.labels.insert(plan.labels.end(), part.labels.begin(), part.labels.end());
      }
      plan.strategy = "span";
      break;
    }
  }
  trainer::PretrainExample ex;
  ex.ids = pretrain::apply_plan(item.enc.ids, plan);
  ex.attention_mask = item.enc.attention_mask;
  ex.segment_ids = item.enc.segment_ids;
  for (const auto& label : plan.labels) ex.mlm_labels.emplace_back(label.pos, label.original_id);
  ex.nsp_label = item.nsp_label;
  return ex;
}

int cmd_preprocess(const std::string& config_path, const Overrides& ov,
                   const std::string& emit, const std::string& input,
                   const std::string& out_path, std::size_t count, int plan_epochs) {
  const config::RunConfig rc = load_config(config_path, ov);
  std::ostringstream out;

  if (emit == "mask") {
    const auto sentences = tokenize_lines(read_lines(input));
    if (sentences.empty()) fail("no sentences in " + input);
    const corpus::Vocab vocab = vocab_from_sentences(sentences, rc.min_freq);
    pretrain::SpanLexicon lexicon;
    if (rc.masking == config::Masking::kSpan) {
      if (rc.lexicon_path.empty()) fail("span masking needs paths.lexicon");
      lexicon = pretrain::SpanLexicon::load_file(rc.lexicon_path);
    }
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto& toks = sentences[i];
      std::vector<int> ids(toks.size());
      for (std::size_t t = 0; t < toks.size(); ++t) ids[t] = vocab.encode(toks[t]);
      const std::vector<std::uint8_t> specials(toks.size(), 0);
      const std::uint64_t seed = sequence_seed(rc.seed, i);
      const int epochs = rc.masking == config::Masking::kDynamic ? plan_epochs : 1;
      for (int epoch = 0; epoch < epochs; ++epoch) {
        pretrain::MaskPlan plan;
        switch (rc.masking) {
          case config::Masking::kStatic:
            plan = pretrain::plan_static_mask(ids, specials, rc.mask_rate, seed, vocab.size());
            break;
          case config::Masking::kDynamic:
            plan = pretrain::plan_dynamic_mask(ids, specials, rc.mask_rate, seed, epoch,
                                               vocab.size());
            break;
          case config::Masking::kSpan:
            plan = pretrain::plan_span_mask(toks, lexicon, rc.mask_rate, seed, vocab);
            break;
        }
        plan.seq_id = i;
        out << pretrain::plan_to_jsonl(plan) << '\n';
      }
    }
  } else if (emit == "nsp") {
    std::vector<pretrain::Document> documents;
    for (const auto& group : read_line_groups(input)) {
      documents.push_back(tokenize_lines(group));
    }
    const auto pairs = pretrain::make_nsp_pairs(documents, count, rc.seed);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      nlohmann::json j;
      j["seq_id"] = i;
      j["segment_a"] = pairs[i].segment_a;
      j["segment_b"] = pairs[i].segment_b;
      j["is_next"] = pairs[i].is_next;
      out << j.dump() << '\n';
    }
  } else if (emit == "dlm") {
    std::vector<std::vector<pretrain::Sentence>> dialogues;
    for (const auto& group : read_line_groups(input)) {
      dialogues.push_back(tokenize_lines(group));
    }
    const auto samples = pretrain::make_dlm_samples(dialogues, rc.seed);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      nlohmann::json j;
      j["seq_id"] = i;
      j["turns"] = samples[i].turns;
      j["is_real"] = samples[i].is_real;
      if (samples[i].replaced_turn) j["replaced_turn"] = *samples[i].replaced_turn;
      out << j.dump() << '\n';
    }
  } else {
    fail("--emit must be mask, nsp or dlm, got '" + emit + "'");
  }

  write_file(out_path, out.str());
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_pretrain(const std::string& config_path, const Overrides& ov) {
  const config::RunConfig rc = load_config(config_path, ov);
  if (rc.train.objective == trainer::Objective::kFinetuneNer) {
    fail("pretrain requires objective mlm or mlm_nsp (config [train] objective)");
  }
  if (rc.pretrain_text_path.empty()) fail("pretrain requires paths.pretrain_text");

  const auto groups = read_line_groups(rc.pretrain_text_path);
  std::vector<pretrain::Document> documents;
  std::vector<pretrain::Sentence> sentences;
  for (const auto& group : groups) {
    documents.push_back(tokenize_lines(group));
    for (auto& s : documents.back()) sentences.push_back(s);
  }
  if (sentences.empty()) fail("no sentences in " + rc.pretrain_text_path);

  const corpus::Vocab vocab = vocab_from_sentences(sentences, rc.min_freq);
  pretrain::SpanLexicon lexicon;
  if (rc.masking == config::Masking::kSpan) {
    if (rc.lexicon_path.empty()) fail("span masking needs paths.lexicon");
    lexicon = pretrain::SpanLexicon::load_file(rc.lexicon_path);
  }

  const PretrainDataset ds = build_pretrain_dataset(rc, vocab, sentences, documents);
  trainer::PretrainModel model =
      trainer::assemble_pretrain(rc.resolve_encoder(), vocab, rc.seed);
  trainer::Adam adam(rc.train);

  const bool quiet = quiet_logs();
  std::size_t step = 0;
  double last_mlm = 0.0;
  std::optional<double> last_nsp;
  for (int epoch = 0; epoch < rc.train.epochs; ++epoch) {
    std::vector<std::size_t> order(ds.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::substream(rc.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(rc.train.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(rc.train.batch_size));
      std::vector<trainer::PretrainExample> batch;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(masked_example(ds.items[order[i]], rc, vocab, lexicon, order[i],
                                       epoch));
      }
      const auto result = trainer::pretrain_step(model, batch, rc.train.objective, adam);
      last_mlm = result.mlm_loss;
      last_nsp = result.nsp_loss;
      const double total = result.mlm_loss + result.nsp_loss.value_or(0.0);
      if (!quiet) {
        std::printf("step %zu epoch %d loss %.6f\n", step, epoch, total);
      }
      ++step;
    }
  }

  fs::create_directories(rc.checkpoint_dir);
  const std::string ckpt = (fs::path(rc.checkpoint_dir) / "pretrain.ckpt").string();
  checkpoint::save_pretrain(ckpt, model);
  std::printf("final mlm_loss %.6f", last_mlm);
  if (last_nsp) std::printf(" nsp_loss %.6f", *last_nsp);
  std::printf("\ncheckpoint %s\n", ckpt.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
  config::RunConfig rc = load_config(config_path, ov);
  if (rc.train_path.empty()) fail("train requires paths.train");
  if (rc.entity_types.empty()) fail("train requires [tagset] entity_types");
  rc.train.objective = trainer::Objective::kFinetuneNer;

  const corpus::TagSet tagset = corpus::TagSet::from_entity_types(rc.entity_types);
  const auto data = corpus::parse_column_file(read_file(rc.train_path), tagset);
  if (data.empty()) fail("training corpus is empty: " + rc.train_path);

  trainer::TaggerModel model = [&] {
    if (!rc.init_checkpoint.empty()) {
      // Warm start: encoder weights, config and vocabulary come from the
      // pre-training checkpoint; heads are freshly initialized.
      trainer::PretrainModel pre = checkpoint::load_pretrain(rc.init_checkpoint);
      trainer::TaggerModel m =
          trainer::assemble_tagger(pre.config, tagset, pre.vocab, rc.seed);
      m.enc = std::move(pre.enc);
      return m;
    }
    const corpus::Vocab vocab = corpus::build_vocab(data, rc.min_freq);
    return trainer::assemble_tagger(rc.resolve_encoder(), tagset, vocab, rc.seed);
  }();

  const bool quiet = quiet_logs();
  std::ostream* log = quiet ? nullptr : &std::cout;
  const trainer::TrainHistory hist = trainer::finetune(model, data, rc.train, log);
  if (!quiet) {
    for (std::size_t e = 0; e < hist.epoch_mean_losses.size(); ++e) {
      std::printf("epoch %zu mean_loss %.6f (%.2fs)\n", e, hist.epoch_mean_losses[e],
                  hist.epoch_seconds[e]);
    }
  }

  fs::create_directories(rc.checkpoint_dir);
  const std::string ckpt = (fs::path(rc.checkpoint_dir) / "model.ckpt").string();
  checkpoint::save_tagger(ckpt, model);
  std::printf("checkpoint %s\n", ckpt.c_str());

  if (!rc.dev_path.empty()) {
    const auto dev = corpus::parse_column_file(read_file(rc.dev_path), tagset);
    std::vector<std::vector<std::string>> pred;
    pred.reserve(dev.size());
    for (const auto& s : dev) pred.push_back(trainer::predict_tags(model, s.tokens));
    const auto row = evaluator::evaluate(dev, pred, "dev");
    std::cout << evaluator::format_report({row});
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const Overrides& ov,
             const std::string& gold_path, const std::string& pred_path,
             const std::string& ckpt_path, const std::string& name,
             const std::string& out_path, const std::string& json_path) {
  if (pred_path.empty() == ckpt_path.empty()) {
    fail("eval needs exactly one of --pred or --ckpt");
  }

  std::vector<corpus::TaggedSentence> gold;
  std::vector<std::vector<std::string>> pred;
  if (!ckpt_path.empty()) {
    trainer::TaggerModel model = checkpoint::load_tagger(ckpt_path);
    gold = corpus::parse_column_file(read_file(gold_path), model.tagset);
    pred.reserve(gold.size());
    for (const auto& s : gold) pred.push_back(trainer::predict_tags(model, s.tokens));
  } else {
    if (config_path.empty()) fail("eval --pred needs --config for the tag set");
    const config::RunConfig rc = load_config(config_path, ov);
    if (rc.entity_types.empty()) fail("eval requires [tagset] entity_types");
    const corpus::TagSet tagset = corpus::TagSet::from_entity_types(rc.entity_types);
    gold = corpus::parse_column_file(read_file(gold_path), tagset);
    const auto pred_sentences = corpus::parse_column_file(read_file(pred_path), tagset);
    if (pred_sentences.size() != gold.size()) {
      fail("gold has " + std::to_string(gold.size()) + " sentences, predictions " +
           std::to_string(pred_sentences.size()));
    }
    pred.reserve(pred_sentences.size());
    for (const auto& s : pred_sentences) pred.push_back(s.tags);
  }

  const auto row = evaluator::evaluate(gold, pred, name);
  const std::string report = evaluator::format_report({row});
  std::cout << report;
  if (!out_path.empty()) write_file(out_path, report);
  if (!json_path.empty()) write_file(json_path, evaluator::report_to_json({row}) + "\n");
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input,
                const std::string& out_path) {
  const trainer::TaggerModel model = checkpoint::load_tagger(ckpt_path);
  std::vector<corpus::TaggedSentence> tagged;
  for (const auto& line : read_lines(input)) {
    if (line.empty()) continue;
    corpus::TaggedSentence s;
    s.tokens = utf8::split_codepoints(line);
    s.tags = trainer::predict_tags(model, s.tokens);
    tagged.push_back(std::move(s));
  }
  const std::string text = corpus::to_column_format(tagged);
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
  return 0;
}

int cmd_inspect(const std::string& ckpt_path, bool attention, const std::string& text,
                int layer, int head) {
  const std::string kind = checkpoint::peek_kind(ckpt_path);
  encoder::EncoderConfig cfg;
  const encoder::EncoderParams* enc = nullptr;
  const corpus::Vocab* vocab = nullptr;

  std::optional<trainer::TaggerModel> tagger;
  std::optional<trainer::PretrainModel> pre;
  if (kind == "tagger") {
    tagger = checkpoint::load_tagger(ckpt_path);
    cfg = tagger->config;
    enc = &tagger->enc;
    vocab = &tagger->vocab;
  } else {
    pre = checkpoint::load_pretrain(ckpt_path);
    cfg = pre->config;
    enc = &pre->enc;
    vocab = &pre->vocab;
  }

  if (!attention) {
    std::printf("kind %s\n", kind.c_str());
    std::printf("num_layers %d\nhidden_size %d\nnum_heads %d\nffn_size %d\n",
                cfg.num_layers, cfg.hidden_size, cfg.num_heads, cfg.ffn_size);
    std::printf("max_position %d\nvocab_size %d\nnum_segments %d\ndropout_rate %g\n",
                cfg.max_position, cfg.vocab_size, cfg.num_segments, cfg.dropout_rate);
    if (tagger) {
      std::printf("tags");
      for (const auto& t : tagger->tagset.tags()) std::printf(" %s", t.c_str());
      std::printf("\n");
    }
    const std::size_t params = encoder::param_count(cfg);
    std::printf("encoder_parameters %zu\n", params);
    std::printf("encoder_bytes %zu (%.1f MiB at 8 bytes/param)\n", params * 8,
                static_cast<double>(params) * 8.0 / (1024.0 * 1024.0));
    std::printf("kernel_backend %s\n", kernels::backend_name().c_str());
    return 0;
  }

  if (text.empty()) fail("inspect --attention needs --text");
  const auto tokens = utf8::split_codepoints(text);
  const auto row = corpus::encode_tokens(*vocab, tokens, tokens.size() + 2);
  const Mat probs =
      encoder::attention_probs(*enc, row.ids, row.segment_ids, row.attention_mask,
                               layer, head);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    for (std::size_t j = 0; j < probs.cols; ++j) {
      std::printf(j + 1 == probs.cols ? "%.6f\n" : "%.6f ", probs(i, j));
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"character-level NER toolkit: toy transformer encoders with a "
               "constrained CRF head"};
  app.require_subcommand(1);

  // preprocess
  auto* preprocess = app.add_subcommand(
      "preprocess", "emit mask-plan / NSP / DLM examples as JSON Lines");
  std::string pp_config, pp_emit, pp_input, pp_out;
  std::size_t pp_count = 1000;
  int pp_epochs = 1;
  Overrides pp_ov;
  preprocess->add_option("--config", pp_config, "run config file")->required();
  preprocess->add_option("--emit", pp_emit, "mask | nsp | dlm")->required();
  preprocess->add_option("--input", pp_input, "input text file")->required();
  preprocess->add_option("--out", pp_out, "output JSONL path")->required();
  preprocess->add_option("--count", pp_count, "number of NSP pairs");
  preprocess->add_option("--plan-epochs", pp_epochs, "epochs of dynamic plans to emit");
  add_override_flags(preprocess, pp_ov);

  // pretrain
  auto* pretrain_cmd = app.add_subcommand("pretrain", "toy MLM / MLM+NSP pre-training");
  std::string pt_config;
  Overrides pt_ov;
  pretrain_cmd->add_option("--config", pt_config, "run config file")->required();
  add_override_flags(pretrain_cmd, pt_ov);

  // train
  auto* train_cmd = app.add_subcommand("train", "fine-tune the NER tagger");
  std::string tr_config;
  Overrides tr_ov;
  train_cmd->add_option("--config", tr_config, "run config file")->required();
  add_override_flags(train_cmd, tr_ov);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "entity-level P/R/F1 report");
  std::string ev_config, ev_gold, ev_pred, ev_ckpt, ev_name = "model", ev_out, ev_json;
  Overrides ev_ov;
  eval_cmd->add_option("--config", ev_config, "run config file (for --pred mode)");
  eval_cmd->add_option("--gold", ev_gold, "gold column file")->required();
  eval_cmd->add_option("--pred", ev_pred, "predicted column file");
  eval_cmd->add_option("--ckpt", ev_ckpt, "tagger checkpoint to evaluate");
  eval_cmd->add_option("--name", ev_name, "model name for the report row");
  eval_cmd->add_option("--out", ev_out, "write the text report here too");
  eval_cmd->add_option("--json", ev_json, "write a JSON report here");
  add_override_flags(eval_cmd, ev_ov);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "tag raw sentences (one per line)");
  std::string pr_ckpt, pr_input, pr_out;
  predict_cmd->add_option("--ckpt", pr_ckpt, "tagger checkpoint")->required();
  predict_cmd->add_option("--input", pr_input, "raw sentence file")->required();
  predict_cmd->add_option("--out", pr_out, "output column file (default stdout)");

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "print config or attention maps");
  std::string in_ckpt, in_text;
  bool in_attention = false;
  int in_layer = 0, in_head = 0;
  inspect_cmd->add_option("--ckpt", in_ckpt, "checkpoint to inspect")->required();
  inspect_cmd->add_flag("--attention", in_attention, "print one attention matrix");
  inspect_cmd->add_option("--text", in_text, "input text for --attention");
  inspect_cmd->add_option("--layer", in_layer, "layer index for --attention");
  inspect_cmd->add_option("--head", in_head, "head index for --attention");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (preprocess->parsed()) {
      return cmd_preprocess(pp_config, pp_ov, pp_emit, pp_input, pp_out, pp_count,
                            pp_epochs);
    }
    if (pretrain_cmd->parsed()) return cmd_pretrain(pt_config, pt_ov);
    if (train_cmd->parsed()) return cmd_train(tr_config, tr_ov);
    if (eval_cmd->parsed()) {
      return cmd_eval(ev_config, ev_ov, ev_gold, ev_pred, ev_ckpt, ev_name, ev_out,
                      ev_json);
    }
    if (predict_cmd->parsed()) return cmd_predict(pr_ckpt, pr_input, pr_out);
    if (inspect_cmd->parsed()) {
      return cmd_inspect(in_ckpt, in_attention, in_text, in_layer, in_head);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace seqtag::cli
