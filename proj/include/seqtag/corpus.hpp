#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqtag::corpus {

// Character tokens aligned with BIO tags. tags may be empty for raw
// (unlabeled) sentences; otherwise it has one tag per token.
struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

// Tag inventory derived from the declared entity types: {O} then B-t, I-t per
// type in declaration order. Deriving from a declaration instead of scanning
// data means a typo tag in a corpus is an error, never a new class.
class TagSet {
 public:
  static TagSet from_entity_types(const std::vector<std::string>& types);

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  const std::vector<std::string>& tags() const { return tags_; }
  int num_tags() const { return static_cast<int>(tags_.size()); }

  bool contains(const std::string& tag) const { return tag_to_id_.count(tag) > 0; }
  int id_of(const std::string& tag) const;          // throws on unknown tag
  const std::string& tag_of(int id) const;          // throws on bad id

 private:
  std::vector<std::string> entity_types_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> tag_to_id_;
};

struct EntitySpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::string etype;

  bool operator==(const EntitySpan&) const = default;
};

// Character vocabulary with fixed special ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  static const std::vector<std::string>& special_tokens();

  // tokens: non-special entries in id order (id = kNumSpecials + index).
  static Vocab from_tokens(const std::vector<std::string>& tokens, int min_freq);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int min_freq() const { return min_freq_; }
  int encode(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  const std::vector<std::string>& id_to_token() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  int min_freq_ = 1;
};

// "token<TAB>tag" lines, one blank line between sentences. Errors carry the
// 1-based line number.
std::vector<TaggedSentence> parse_column_file(std::string_view text, const TagSet& tagset);

// Inverse of parse_column_file up to trailing whitespace.
std::string to_column_format(const std::vector<TaggedSentence>& sentences);

// BIO runs to spans. Repair rule: an I-X with no preceding B-X/I-X opens a
// new span as if it were B-X, so any tag sequence decodes.
std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags);

// Renders non-overlapping spans back to BIO tags of the given length.
std::vector<std::string> spans_to_bio(const std::vector<EntitySpan>& spans, std::size_t len);

struct TransitionViolation {
  std::size_t pos = 0;    // index of the offending tag
  std::string prev;       // empty at sequence start
  std::string next;

  bool operator==(const TransitionViolation&) const = default;
};

// Pairs (prev, next) with next = I-X and prev not in {B-X, I-X}; an initial
// I-X is a violation at position 0.
std::vector<TransitionViolation> check_transitions(const std::vector<std::string>& tags,
                                                   const TagSet& tagset);

// Frequency >= min_freq, ids in descending-frequency order, ties broken by
// byte order (equals codepoint order for UTF-8).
Vocab build_vocab(const std::vector<TaggedSentence>& corpus, int min_freq);

struct EncodedSentence {
  std::vector<int> ids;             // [CLS] tokens [SEP] [PAD]...
  std::vector<int> attention_mask;  // 1 on real positions + specials, 0 on pad
  std::vector<int> segment_ids;
};

// Throws if tokens.size() > max_len - 2; no silent truncation.
EncodedSentence encode_tokens(const Vocab& vocab, const std::vector<std::string>& tokens,
                              std::size_t max_len);
EncodedSentence encode_sentence(const Vocab& vocab, const TaggedSentence& sentence,
                                std::size_t max_len);

}  // namespace seqtag::corpus
