#pragma once

#include <string>

#include "seqtag/trainer.hpp"

namespace seqtag::checkpoint {

// Versioned little-endian container: magic, format version, string key/value
// header (config, tag inventory, vocabulary), then named double arrays in a
// fixed order. Byte layout documented in docs/formats.md so other
// implementations can interoperate.
void save_tagger(const std::string& path, trainer::TaggerModel& model);
trainer::TaggerModel load_tagger(const std::string& path);

void save_pretrain(const std::string& path, trainer::PretrainModel& model);
trainer::PretrainModel load_pretrain(const std::string& path);

// "tagger" or "pretrain" without loading the arrays.
std::string peek_kind(const std::string& path);

}  // namespace seqtag::checkpoint
