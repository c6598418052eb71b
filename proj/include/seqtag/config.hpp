#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqtag/encoder.hpp"
#include "seqtag/trainer.hpp"

namespace seqtag::config {

enum class Masking { kStatic, kDynamic, kSpan };

Masking masking_from_name(const std::string& name);
const char* masking_name(Masking m);

// Declarative run configuration; schema documented in docs/formats.md.
// Flag overrides happen after load_file, path checks in validate().
struct RunConfig {
  std::uint64_t seed = 42;

  // [paths]
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string pretrain_text_path;
  std::string lexicon_path;
  std::string checkpoint_dir = "checkpoints";
  std::string init_checkpoint;

  // [tagset]
  std::vector<std::string> entity_types;

  // [encoder]
  std::string preset = "toy";  // empty means explicit fields below
  encoder::EncoderConfig encoder_fields;

  // [train]
  trainer::TrainConfig train;
  Masking masking = Masking::kStatic;
  int min_freq = 1;
  double mask_rate = 0.15;

  encoder::EncoderConfig resolve_encoder() const;

  // Existence checks for every referenced input path.
  void validate() const;
};

RunConfig load_file(const std::string& path);
RunConfig parse_string(const std::string& text, const std::string& origin = "<config>");

}  // namespace seqtag::config
