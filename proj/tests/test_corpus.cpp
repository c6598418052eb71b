#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>

#include "seqtag/corpus.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;
using namespace seqtag::corpus;

namespace {

TagSet per_loc() { return TagSet::from_entity_types({"PER", "LOC"}); }

std::vector<std::string> tags(std::initializer_list<const char*> v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("tagset inventory and ids") {
  const TagSet ts = per_loc();
  CHECK(ts.num_tags() == 5);
  CHECK(ts.tags() == std::vector<std::string>{"O", "B-PER", "I-PER", "B-LOC", "I-LOC"});
  CHECK(ts.id_of("O") == 0);
  CHECK(ts.id_of("I-LOC") == 4);
  CHECK_THROWS_AS(ts.id_of("B-ORG"), std::runtime_error);
  CHECK_THROWS_AS(TagSet::from_entity_types({"PER", "PER"}), std::runtime_error);
  CHECK_THROWS_AS(TagSet::from_entity_types({""}), std::runtime_error);
}

TEST_CASE("parse_column_file basics") {
  const TagSet ts = per_loc();
  const auto sents = parse_column_file("北\tB-LOC\n京\tI-LOC\n\n我\tO\n", ts);
  REQUIRE(sents.size() == 2);
  CHECK(sents[0].tokens == std::vector<std::string>{"北", "京"});
  CHECK(sents[0].tags == tags({"B-LOC", "I-LOC"}));
  CHECK(sents[1].tokens == std::vector<std::string>{"我"});

  CHECK(parse_column_file("", ts).empty());
}

TEST_CASE("parse_column_file errors carry line numbers") {
  const TagSet ts = per_loc();
  SUBCASE("missing tag column") {
    try {
      parse_column_file("北\tB-LOC\n京\n", ts);
      FAIL("expected error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("unknown tag names the tag") {
    try {
      parse_column_file("北\tB-ORG\n", ts);
      FAIL("expected error");
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("B-ORG") != std::string::npos);
      CHECK(msg.find("line 1") != std::string::npos);
    }
  }
}

TEST_CASE("column format round trip") {
  const TagSet ts = per_loc();
  const std::string text = "北\tB-LOC\n京\tI-LOC\n\n我\tO\n在\tO\n";
  const auto sents = parse_column_file(text, ts);
  CHECK(to_column_format(sents) == text);
  const auto again = parse_column_file(to_column_format(sents), ts);
  REQUIRE(again.size() == sents.size());
  for (std::size_t i = 0; i < sents.size(); ++i) {
    CHECK(again[i].tokens == sents[i].tokens);
    CHECK(again[i].tags == sents[i].tags);
  }
}

TEST_CASE("extract_spans") {
  const auto spans = extract_spans(tags({"B-PER", "I-PER", "O", "B-LOC"}));
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == EntitySpan{0, 1, "PER"});
  CHECK(spans[1] == EntitySpan{3, 3, "LOC"});

  CHECK(extract_spans(tags({"O", "O", "O"})).empty());

  // repair rule: dangling I-X acts as B-X
  const auto repaired = extract_spans(tags({"O", "I-PER"}));
  REQUIRE(repaired.size() == 1);
  CHECK(repaired[0] == EntitySpan{1, 1, "PER"});

  // type switch inside a run starts a new span
  const auto switched = extract_spans(tags({"B-PER", "I-LOC"}));
  REQUIRE(switched.size() == 2);
  CHECK(switched[0] == EntitySpan{0, 0, "PER"});
  CHECK(switched[1] == EntitySpan{1, 1, "LOC"});

  // B-X I-X I-X is one span; B after I splits
  const auto runs = extract_spans(tags({"B-PER", "I-PER", "B-PER"}));
  REQUIRE(runs.size() == 2);
  CHECK(runs[0] == EntitySpan{0, 1, "PER"});
}

TEST_CASE("check_transitions") {
  const TagSet ts = per_loc();
  CHECK(check_transitions(tags({"B-PER", "I-PER"}), ts).empty());

  const auto v1 = check_transitions(tags({"O", "I-PER"}), ts);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].pos == 1);
  CHECK(v1[0].prev == "O");
  CHECK(v1[0].next == "I-PER");

  const auto v2 = check_transitions(tags({"B-PER", "I-LOC"}), ts);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].pos == 1);

  const auto v3 = check_transitions(tags({"I-LOC"}), ts);
  REQUIRE(v3.size() == 1);
  CHECK(v3[0].pos == 0);
  CHECK(v3[0].prev.empty());
}

TEST_CASE("spans round trip through BIO rendering") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    // build random non-overlapping spans
    const std::size_t len = 1 + rng.uniform_u64(12);
    std::vector<EntitySpan> spans;
    std::size_t pos = 0;
    while (pos < len) {
      if (rng.uniform_u64(3) == 0) {
        const std::size_t end = pos + rng.uniform_u64(std::min<std::size_t>(3, len - pos));
        spans.push_back({pos, end, rng.uniform_u64(2) == 0 ? "PER" : "LOC"});
        pos = end + 2;  // gap so adjacent spans stay distinct runs
      } else {
        ++pos;
      }
    }
    const auto rendered = spans_to_bio(spans, len);
    CHECK(extract_spans(rendered) == spans);
    // no violations on rendered output
    CHECK(check_transitions(rendered, per_loc()).empty());
  }
}

TEST_CASE("check_transitions clean iff no repair needed") {
  // exhaustive over all tag sequences of length <= 3 for {PER}
  const TagSet ts = TagSet::from_entity_types({"PER"});
  const auto& inventory = ts.tags();
  for (std::size_t len = 1; len <= 3; ++len) {
    std::vector<std::size_t> idx(len, 0);
    while (true) {
      std::vector<std::string> seq;
      for (auto i : idx) seq.push_back(inventory[i]);
      const bool clean = check_transitions(seq, ts).empty();
      // re-render the extracted spans; identical tags <=> no repair applied
      const bool no_repair = spans_to_bio(extract_spans(seq), len) == seq;
      CHECK(clean == no_repair);
      std::size_t p = len;
      while (p > 0) {
        if (++idx[p - 1] < inventory.size()) break;
        idx[p - 1] = 0;
        --p;
      }
      if (p == 0) break;
    }
  }
}

TEST_CASE("build_vocab ids and determinism") {
  const TagSet ts = per_loc();
  const auto sents = parse_column_file(
      "京\tO\n京\tO\n北\tO\n\n北\tO\n海\tO\n北\tO\n", ts);
  const Vocab v = build_vocab(sents, 1);
  CHECK(v.encode("[PAD]") == 0);
  CHECK(v.size() == 5 + 3);
  // 北 appears 3x, 京 2x, 海 1x
  CHECK(v.encode("北") == 5);
  CHECK(v.encode("京") == 6);
  CHECK(v.encode("海") == 7);
  CHECK(v.token_of(Vocab::kMask) == "[MASK]");

  const Vocab v2 = build_vocab(sents, 2);
  CHECK(v2.size() == 5 + 2);
  CHECK(v2.encode("海") == Vocab::kUnk);

  // determinism incl. frequency ties: same corpus -> same ids
  const Vocab v3 = build_vocab(sents, 1);
  CHECK(v3.id_to_token() == v.id_to_token());
}

TEST_CASE("build_vocab breaks frequency ties by codepoint order") {
  const TagSet ts = per_loc();
  // both appear once; 一 (U+4E00) < 海 (U+6D77)
  const auto sents = parse_column_file("海\tO\n一\tO\n", ts);
  const Vocab v = build_vocab(sents, 1);
  CHECK(v.encode("一") == 5);
  CHECK(v.encode("海") == 6);
}

TEST_CASE("encode_sentence") {
  const TagSet ts = per_loc();
  const auto sents = parse_column_file("北\tO\n京\tO\n", ts);
  const Vocab v = build_vocab(sents, 1);

  const auto enc = encode_tokens(v, {"北", "京"}, 6);
  CHECK(enc.ids == std::vector<int>{Vocab::kCls, v.encode("北"), v.encode("京"),
                                    Vocab::kSep, Vocab::kPad, Vocab::kPad});
  CHECK(enc.attention_mask == std::vector<int>{1, 1, 1, 1, 0, 0});
  CHECK(enc.segment_ids == std::vector<int>{0, 0, 0, 0, 0, 0});

  // OOV becomes [UNK]
  const auto oov = encode_tokens(v, {"火"}, 4);
  CHECK(oov.ids[1] == Vocab::kUnk);

  // exact fit leaves no padding
  const auto full = encode_tokens(v, {"北", "京"}, 4);
  CHECK(full.attention_mask == std::vector<int>{1, 1, 1, 1});

  CHECK_THROWS_AS(encode_tokens(v, {"北", "京", "北"}, 4), std::runtime_error);
}

TEST_CASE("encode output length is always max_len") {
  const TagSet ts = per_loc();
  const auto sents = parse_column_file("北\tO\n", ts);
  const Vocab v = build_vocab(sents, 1);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng.uniform_u64(6);
    const std::size_t max_len = n + 2 + rng.uniform_u64(5);
    const std::vector<std::string> toks(n, "北");
    const auto enc = encode_tokens(v, toks, max_len);
    CHECK(enc.ids.size() == max_len);
    CHECK(enc.attention_mask.size() == max_len);
    CHECK(enc.segment_ids.size() == max_len);
  }
}
