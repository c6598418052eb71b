#include "seqtag/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "seqtag/rng.hpp"
#include "seqtag/utf8.hpp"

namespace seqtag::pretrain {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::size_t mask_budget(std::size_t candidates, double rate) {
  auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(candidates)));
  if (k < 1) k = 1;
  if (k > candidates) k = candidates;
  return k;
}

// First k of a partial Fisher-Yates pass over the candidates.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> candidates,
                                                    std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_u64(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

MaskAction draw_action(Rng& rng) {
  const double u = rng.uniform_real();
  if (u < 0.8) return MaskAction::kMask;
  if (u < 0.9) return MaskAction::kRandom;
  return MaskAction::kKeep;
}

int draw_replacement(Rng& rng, int vocab_size) {
  return corpus::Vocab::kNumSpecials +
         static_cast<int>(rng.uniform_u64(
             static_cast<std::uint64_t>(vocab_size - corpus::Vocab::kNumSpecials)));
}

// Contiguous mask unit: a lexicon span or a single character.
struct Unit {
  std::size_t start;
  std::size_t len;
};

// Shared tail of every planner: draw one action kind per unit (in position
// order), one replacement id per position when the kind is random.
void emit_units(std::vector<Unit> units, const std::vector<int>& original_ids, Rng& rng,
                int vocab_size, MaskPlan& plan) {
  std::sort(units.begin(), units.end(),
            [](const Unit& a, const Unit& b) { return a.start < b.start; });
  for (const Unit& unit : units) {
    const MaskAction action = draw_action(rng);
    for (std::size_t i = 0; i < unit.len; ++i) {
      const std::size_t pos = unit.start + i;
      MaskItem item{pos, action, -1};
      if (action == MaskAction::kRandom) item.replacement_id = draw_replacement(rng, vocab_size);
      plan.actions.push_back(item);
      plan.labels.push_back({pos, original_ids[pos]});
    }
  }
}

void check_rate(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) fail("mask rate must be in (0, 1)");
}

MaskPlan plan_uniform(const std::vector<int>& ids,
                      const std::vector<std::uint8_t>& specials_mask, double rate,
                      Rng rng, int vocab_size) {
  check_rate(rate);
  if (ids.size() != specials_mask.size()) {
    fail("ids and specials_mask lengths differ");
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (specials_mask[i] == 0) candidates.push_back(i);
  }
  if (candidates.empty()) fail("no maskable position: all tokens are special");
  const std::size_t k = mask_budget(candidates.size(), rate);
  std::vector<std::size_t> chosen = sample_without_replacement(std::move(candidates), k, rng);
  std::vector<Unit> units;
  units.reserve(chosen.size());
  for (std::size_t pos : chosen) units.push_back({pos, 1});
  MaskPlan plan;
  emit_units(std::move(units), ids, rng, vocab_size, plan);
  return plan;
}

}  // namespace

const char* action_name(MaskAction a) {
  switch (a) {
    case MaskAction::kMask: return "mask";
    case MaskAction::kRandom: return "random";
    case MaskAction::kKeep: return "keep";
  }
  return "?";
}

SpanLexicon SpanLexicon::from_strings(const std::vector<std::string>& entries) {
  SpanLexicon lex;
  for (const auto& e : entries) {
    if (e.empty()) fail("lexicon entry must be non-empty");
    const std::size_t n = utf8::codepoint_count(e);
    if (n < 2) fail("lexicon entry must span at least 2 characters: '" + e + "'");
    lex.entries_.insert(e);
    lex.max_codepoints_ = std::max(lex.max_codepoints_, n);
  }
  return lex;
}

SpanLexicon SpanLexicon::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open lexicon file: " + path);
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) entries.push_back(line);
  }
  return from_strings(entries);
}

MaskPlan plan_static_mask(const std::vector<int>& ids,
                          const std::vector<std::uint8_t>& specials_mask, double rate,
                          std::uint64_t seed, int vocab_size) {
  MaskPlan plan = plan_uniform(ids, specials_mask, rate, Rng::substream(seed, "mask"),
                               vocab_size);
  plan.strategy = "static";
  plan.epoch = 0;
  return plan;
}

MaskPlan plan_dynamic_mask(const std::vector<int>& ids,
                           const std::vector<std::uint8_t>& specials_mask, double rate,
                           std::uint64_t seed, int epoch, int vocab_size) {
  MaskPlan plan = plan_uniform(
      ids, specials_mask, rate,
      Rng::substream(seed, "mask", static_cast<std::uint64_t>(epoch)), vocab_size);
  plan.strategy = "dynamic";
  plan.epoch = epoch;
  return plan;
}

MaskPlan plan_span_mask(const std::vector<std::string>& tokens, const SpanLexicon& lexicon,
                        double rate, std::uint64_t seed, const corpus::Vocab& vocab) {
  check_rate(rate);
  if (tokens.empty()) fail("no maskable position: empty sentence");
  const std::size_t len = tokens.size();
  std::vector<int> ids(len);
  for (std::size_t i = 0; i < len; ++i) ids[i] = vocab.encode(tokens[i]);

  Rng rng = Rng::substream(seed, "mask");

  // Greedy longest match, left to right, no overlaps.
  std::vector<Unit> spans;
  std::vector<std::uint8_t> in_span(len, 0);
  if (lexicon.size() > 0) {
    std::size_t i = 0;
    while (i < len) {
      std::size_t matched = 0;
      const std::size_t cap = std::min(lexicon.max_codepoints(), len - i);
      for (std::size_t l = cap; l >= 2; --l) {
        std::string surface;
        for (std::size_t j = 0; j < l; ++j) surface += tokens[i + j];
        if (lexicon.contains(surface)) {
          matched = l;
          break;
        }
      }
      if (matched > 0) {
        spans.push_back({i, matched});
        std::fill(in_span.begin() + i, in_span.begin() + i + matched, 1);
        i += matched;
      } else {
        ++i;
      }
    }
  }

  const std::size_t budget = mask_budget(len, rate);
  rng.shuffle(spans);
  std::vector<Unit> units;
  std::size_t covered = 0;
  for (const Unit& s : spans) {
    if (covered >= budget) break;
    units.push_back(s);
    covered += s.len;
  }
  if (covered < budget) {
    // Never split a matched span: singles come only from outside all matches.
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < len; ++i) {
      if (in_span[i] == 0) candidates.push_back(i);
    }
    const std::size_t want = std::min(budget - covered, candidates.size());
    if (want > 0) {
      for (std::size_t pos : sample_without_replacement(std::move(candidates), want, rng)) {
        units.push_back({pos, 1});
      }
    }
  }

  MaskPlan plan;
  plan.strategy = "span";
  plan.epoch = 0;
  emit_units(std::move(units), ids, rng, vocab.size(), plan);
  return plan;
}

std::vector<int> apply_plan(std::vector<int> ids, const MaskPlan& plan) {
  for (const MaskItem& item : plan.actions) {
    if (item.pos >= ids.size()) fail("mask plan position out of range");
    switch (item.action) {
      case MaskAction::kMask:
        ids[item.pos] = corpus::Vocab::kMask;
        break;
      case MaskAction::kRandom:
        ids[item.pos] = item.replacement_id;
        break;
      case MaskAction::kKeep:
        break;
    }
  }
  return ids;
}

std::vector<int> revert_plan(std::vector<int> ids, const MaskPlan& plan) {
  for (const MaskLabel& label : plan.labels) {
    if (label.pos >= ids.size()) fail("mask plan position out of range");
    ids[label.pos] = label.original_id;
  }
  return ids;
}

std::vector<SentencePairExample> make_nsp_pairs(const std::vector<Document>& documents,
                                                std::size_t n, std::uint64_t seed) {
  if (documents.size() < 2) {
    fail("NSP pairing needs at least 2 documents for negatives");
  }
  std::vector<std::size_t> pair_docs;  // documents that can yield a positive
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (documents[d].empty()) fail("NSP document " + std::to_string(d) + " is empty");
    for (const auto& s : documents[d]) {
      if (s.empty()) fail("NSP document " + std::to_string(d) + " has an empty sentence");
    }
    if (documents[d].size() >= 2) pair_docs.push_back(d);
  }
  if (pair_docs.empty()) fail("NSP pairing needs a document with at least 2 sentences");

  Rng rng = Rng::substream(seed, "nsp");
  std::vector<SentencePairExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SentencePairExample ex;
    if (rng.uniform_real() < 0.5) {
      const auto& doc = documents[pair_docs[rng.uniform_u64(pair_docs.size())]];
      const std::size_t s = rng.uniform_u64(doc.size() - 1);
      ex.segment_a = doc[s];
      ex.segment_b = doc[s + 1];
      ex.is_next = true;
    } else {
      const std::size_t da = rng.uniform_u64(documents.size());
      std::size_t db = rng.uniform_u64(documents.size() - 1);
      if (db >= da) ++db;
      ex.segment_a = documents[da][rng.uniform_u64(documents[da].size())];
      ex.segment_b = documents[db][rng.uniform_u64(documents[db].size())];
      ex.is_next = false;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<DialogueExample> make_dlm_samples(
    const std::vector<std::vector<Sentence>>& dialogues, std::uint64_t seed) {
  if (dialogues.size() < 2) fail("DLM sampling needs at least 2 dialogues");
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    if (dialogues[d].size() < 2) {
      fail("dialogue " + std::to_string(d) + " has fewer than 2 turns");
    }
  }
  Rng rng = Rng::substream(seed, "dlm");
  std::vector<DialogueExample> out;
  out.reserve(dialogues.size());
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    DialogueExample ex;
    ex.turns = dialogues[d];
    if (rng.uniform_real() < 0.5) {
      ex.is_real = true;
    } else {
      ex.is_real = false;
      const std::size_t turn = rng.uniform_u64(ex.turns.size());
      std::size_t other = rng.uniform_u64(dialogues.size() - 1);
      if (other >= d) ++other;
      ex.turns[turn] = dialogues[other][rng.uniform_u64(dialogues[other].size())];
      ex.replaced_turn = turn;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::string plan_to_jsonl(const MaskPlan& plan) {
  nlohmann::json j;
  j["seq_id"] = plan.seq_id;
  j["epoch"] = plan.epoch;
  j["strategy"] = plan.strategy;
  j["actions"] = nlohmann::json::array();
  for (const auto& a : plan.actions) {
    nlohmann::json item;
    item["pos"] = a.pos;
    item["action"] = action_name(a.action);
    if (a.action == MaskAction::kRandom) item["replacement_id"] = a.replacement_id;
    j["actions"].push_back(std::move(item));
  }
  j["labels"] = nlohmann::json::array();
  for (const auto& l : plan.labels) {
    j["labels"].push_back({{"pos", l.pos}, {"original_id", l.original_id}});
  }
  return j.dump();
}

}  // namespace seqtag::pretrain
