#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "seqtag/corpus.hpp"

namespace seqtag::pretrain {

enum class MaskAction { kMask, kRandom, kKeep };

const char* action_name(MaskAction a);  // "mask" | "random" | "keep"

struct MaskItem {
  std::size_t pos = 0;
  MaskAction action = MaskAction::kMask;
  int replacement_id = -1;  // set iff action == kRandom

  bool operator==(const MaskItem&) const = default;
};

struct MaskLabel {
  std::size_t pos = 0;
  int original_id = 0;

  bool operator==(const MaskLabel&) const = default;
};

// One sequence's masking decisions. Positions are strictly increasing and
// never land on special tokens; labels keep the originals so a plan can be
// applied and reverted.
struct MaskPlan {
  std::uint64_t seq_id = 0;
  int epoch = 0;
  std::string strategy;  // "static" | "dynamic" | "span"
  std::vector<MaskItem> actions;
  std::vector<MaskLabel> labels;
};

// Multi-character surface strings (entities/phrases) eligible for whole-span
// masking. Entries shorter than 2 codepoints are rejected.
class SpanLexicon {
 public:
  static SpanLexicon from_strings(const std::vector<std::string>& entries);
  static SpanLexicon load_file(const std::string& path);  // one entry per line

  bool contains(const std::string& surface) const { return entries_.count(surface) > 0; }
  std::size_t max_codepoints() const { return max_codepoints_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_set<std::string> entries_;
  std::size_t max_codepoints_ = 0;
};

// Selects round(rate * #non-special) positions (at least 1) uniformly without
// replacement, then applies the 80/10/10 mask/random/keep law per position.
// Random replacements draw non-special ids from [5, vocab_size). The plan is
// a pure function of (ids, specials_mask, rate, seed); epoch stays 0 because
// one static plan is reused for every epoch.
MaskPlan plan_static_mask(const std::vector<int>& ids,
                          const std::vector<std::uint8_t>& specials_mask, double rate,
                          std::uint64_t seed, int vocab_size);

// Same selection law with the stream keyed by (seed, epoch), so each epoch
// re-rolls the masked positions.
MaskPlan plan_dynamic_mask(const std::vector<int>& ids,
                           const std::vector<std::uint8_t>& specials_mask, double rate,
                           std::uint64_t seed, int epoch, int vocab_size);

// Greedy longest-match of lexicon entries (left to right, no overlaps);
// matched spans are masked whole, in random order, until the budget
// round(rate * T) is met or first exceeded; leftover budget falls back to
// single-character masking outside the matched spans. The action kind is
// drawn once per span. With an empty lexicon this degenerates to
// plan_static_mask with the same seed.
MaskPlan plan_span_mask(const std::vector<std::string>& tokens, const SpanLexicon& lexicon,
                        double rate, std::uint64_t seed, const corpus::Vocab& vocab);

std::vector<int> apply_plan(std::vector<int> ids, const MaskPlan& plan);
std::vector<int> revert_plan(std::vector<int> ids, const MaskPlan& plan);

using Sentence = std::vector<std::string>;  // character tokens
using Document = std::vector<Sentence>;

struct SentencePairExample {
  Sentence segment_a;
  Sentence segment_b;
  bool is_next = false;
};

// n pairs; positives are adjacent sentences of one document, negatives pair
// a sentence with one from a different document, at probability 0.5 each.
std::vector<SentencePairExample> make_nsp_pairs(const std::vector<Document>& documents,
                                                std::size_t n, std::uint64_t seed);

struct DialogueExample {
  std::vector<Sentence> turns;
  bool is_real = true;
  std::optional<std::size_t> replaced_turn;  // present iff !is_real
};

// One sample per input dialogue: kept intact with probability 0.5, else one
// uniformly chosen turn is swapped for a uniform turn of another dialogue.
std::vector<DialogueExample> make_dlm_samples(
    const std::vector<std::vector<Sentence>>& dialogues, std::uint64_t seed);

// JSON Lines serialization of mask plans; field names documented in
// docs/formats.md.
std::string plan_to_jsonl(const MaskPlan& plan);

}  // namespace seqtag::pretrain
