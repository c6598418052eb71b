#include "seqtag/corpus.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "seqtag/utf8.hpp"

namespace seqtag::corpus {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool is_bio_tag(const std::string& tag, std::string* etype) {
  if (tag == "O") {
    if (etype != nullptr) etype->clear();
    return true;
  }
  if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    if (etype != nullptr) *etype = tag.substr(2);
    return true;
  }
  return false;
}

}  // namespace

TagSet TagSet::from_entity_types(const std::vector<std::string>& types) {
  TagSet ts;
  ts.entity_types_ = types;
  ts.tags_.push_back("O");
  for (const auto& t : types) {
    if (t.empty()) fail("entity type must be non-empty");
    if (t.find('\n') != std::string::npos || t.find('\t') != std::string::npos) {
      fail("entity type contains whitespace control characters: '" + t + "'");
    }
    ts.tags_.push_back("B-" + t);
    ts.tags_.push_back("I-" + t);
  }
  for (std::size_t i = 0; i < ts.tags_.size(); ++i) {
    if (!ts.tag_to_id_.emplace(ts.tags_[i], static_cast<int>(i)).second) {
      fail("duplicate entity type: '" + types[(i - 1) / 2] + "'");
    }
  }
  return ts;
}

int TagSet::id_of(const std::string& tag) const {
  const auto it = tag_to_id_.find(tag);
  if (it == tag_to_id_.end()) fail("unknown tag '" + tag + "'");
  return it->second;
}

const std::string& TagSet::tag_of(int id) const {
  if (id < 0 || id >= num_tags()) fail("tag id out of range: " + std::to_string(id));
  return tags_[static_cast<std::size_t>(id)];
}

const std::vector<std::string>& Vocab::special_tokens() {
  static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]",
                                                    "[SEP]", "[MASK]"};
  return specials;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens, int min_freq) {
  Vocab v;
  v.min_freq_ = min_freq;
  v.id_to_token_ = special_tokens();
  for (const auto& tok : tokens) v.id_to_token_.push_back(tok);
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    if (!v.token_to_id_.emplace(v.id_to_token_[i], static_cast<int>(i)).second) {
      fail("duplicate vocab token '" + v.id_to_token_[i] + "'");
    }
  }
  return v;
}

int Vocab::encode(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) fail("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<TaggedSentence> parse_column_file(std::string_view text, const TagSet& tagset) {
  std::vector<TaggedSentence> sentences;
  TaggedSentence current;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto flush = [&] {
    if (!current.tokens.empty()) {
      sentences.push_back(std::move(current));
      current = TaggedSentence{};
    }
  };

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      fail("line " + std::to_string(line_no) + ": expected 'token<TAB>tag', got '" +
           std::string(line) + "'");
    }
    std::string token(line.substr(0, tab));
    std::string tag(line.substr(tab + 1));
    if (token.empty()) fail("line " + std::to_string(line_no) + ": empty token");
    if (tag.empty()) fail("line " + std::to_string(line_no) + ": empty tag");
    if (!is_bio_tag(tag, nullptr) || !tagset.contains(tag)) {
      fail("line " + std::to_string(line_no) + ": unknown tag '" + tag + "'");
    }
    current.tokens.push_back(std::move(token));
    current.tags.push_back(std::move(tag));
  }
  flush();
  return sentences;
}

std::string to_column_format(const std::vector<TaggedSentence>& sentences) {
  std::string out;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (s > 0) out += '\n';
    const auto& sent = sentences[s];
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      out += sent.tokens[i];
      out += '\t';
      out += sent.tags[i];
      out += '\n';
    }
  }
  return out;
}

std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  EntitySpan span;
  auto close = [&] {
    if (open) {
      spans.push_back(span);
      open = false;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    std::string etype;
    if (!is_bio_tag(tags[i], &etype)) fail("invalid BIO tag '" + tags[i] + "'");
    if (tags[i] == "O") {
      close();
    } else if (tags[i][0] == 'B') {
      close();
      span = EntitySpan{i, i, etype};
      open = true;
    } else {  // I-X: continue a live span of the same type, else repair to B-X
      if (open && span.etype == etype) {
        span.end = i;
      } else {
        close();
        span = EntitySpan{i, i, etype};
        open = true;
      }
    }
  }
  close();
  return spans;
}

std::vector<std::string> spans_to_bio(const std::vector<EntitySpan>& spans, std::size_t len) {
  std::vector<std::string> tags(len, "O");
  std::vector<EntitySpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  std::size_t prev_end = 0;
  bool first = true;
  for (const auto& s : sorted) {
    if (s.start > s.end || s.end >= len) fail("span out of range");
    if (!first && s.start <= prev_end) fail("overlapping spans");
    tags[s.start] = "B-" + s.etype;
    for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = "I-" + s.etype;
    prev_end = s.end;
    first = false;
  }
  return tags;
}

std::vector<TransitionViolation> check_transitions(const std::vector<std::string>& tags,
                                                   const TagSet& tagset) {
  std::vector<TransitionViolation> violations;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    tagset.id_of(tags[i]);  // validates membership
    if (tags[i][0] != 'I') continue;
    const std::string continuation_of_b = "B" + tags[i].substr(1);
    if (i == 0) {
      violations.push_back({0, "", tags[0]});
    } else if (tags[i - 1] != tags[i] && tags[i - 1] != continuation_of_b) {
      violations.push_back({i, tags[i - 1], tags[i]});
    }
  }
  return violations;
}

Vocab build_vocab(const std::vector<TaggedSentence>& corpus, int min_freq) {
  if (corpus.empty()) fail("build_vocab: corpus is empty");
  std::map<std::string, std::size_t> freq;  // ordered map = byte-order ties for free
  for (const auto& s : corpus) {
    for (const auto& tok : s.tokens) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (auto& [tok, count] : entries) {
    if (count >= static_cast<std::size_t>(min_freq)) kept.push_back(tok);
  }
  return Vocab::from_tokens(kept, min_freq);
}

EncodedSentence encode_tokens(const Vocab& vocab, const std::vector<std::string>& tokens,
                              std::size_t max_len) {
  if (max_len < tokens.size() + 2) {
    fail("sentence of " + std::to_string(tokens.size()) +
         " tokens does not fit max_len " + std::to_string(max_len) +
         " (needs length + 2)");
  }
  EncodedSentence enc;
  enc.ids.reserve(max_len);
  enc.ids.push_back(Vocab::kCls);
  for (const auto& tok : tokens) enc.ids.push_back(vocab.encode(tok));
  enc.ids.push_back(Vocab::kSep);
  const std::size_t real = enc.ids.size();
  enc.ids.resize(max_len, Vocab::kPad);
  enc.attention_mask.assign(max_len, 0);
  std::fill(enc.attention_mask.begin(), enc.attention_mask.begin() + real, 1);
  enc.segment_ids.assign(max_len, 0);
  return enc;
}

EncodedSentence encode_sentence(const Vocab& vocab, const TaggedSentence& sentence,
                                std::size_t max_len) {
  return encode_tokens(vocab, sentence.tokens, max_len);
}

}  // namespace seqtag::corpus
