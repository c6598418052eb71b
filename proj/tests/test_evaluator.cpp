#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqtag/evaluator.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;
using namespace seqtag::evaluator;
using corpus::TaggedSentence;

namespace {

TaggedSentence sent(std::vector<std::string> tags) {
  TaggedSentence s;
  s.tokens.assign(tags.size(), "x");
  s.tags = std::move(tags);
  return s;
}

}  // namespace

TEST_CASE("perfect predictions score 100") {
  const std::vector<TaggedSentence> gold = {sent({"B-PER", "I-PER", "O"}),
                                            sent({"O", "B-LOC"})};
  const std::vector<std::vector<std::string>> pred = {{"B-PER", "I-PER", "O"},
                                                      {"O", "B-LOC"}};
  const ReportRow row = evaluate(gold, pred);
  CHECK(row.precision == doctest::Approx(100.0));
  CHECK(row.recall == doctest::Approx(100.0));
  CHECK(row.f1 == doctest::Approx(100.0));
  CHECK(row.num_gold == 2);
  CHECK(row.num_pred == 2);
  CHECK(row.num_correct == 2);
}

TEST_CASE("two of three spans plus one spurious") {
  // gold spans: (0,1,PER), (3,3,LOC), (5,5,PER)
  const std::vector<TaggedSentence> gold = {
      sent({"B-PER", "I-PER", "O", "B-LOC", "O", "B-PER"})};
  // pred: hits the first two, misses the third, adds a wrong LOC at 4
  const std::vector<std::vector<std::string>> pred = {
      {"B-PER", "I-PER", "O", "B-LOC", "B-LOC", "O"}};
  const ReportRow row = evaluate(gold, pred);
  CHECK(row.num_gold == 3);
  CHECK(row.num_pred == 3);
  CHECK(row.num_correct == 2);
  CHECK(row.precision == doctest::Approx(100.0 * 2 / 3));
  CHECK(row.recall == doctest::Approx(100.0 * 2 / 3));
  CHECK(row.f1 == doctest::Approx(100.0 * 2 / 3));
}

TEST_CASE("all-O predictions score zero by convention") {
  const std::vector<TaggedSentence> gold = {sent({"B-PER", "O"})};
  const std::vector<std::vector<std::string>> pred = {{"O", "O"}};
  const ReportRow row = evaluate(gold, pred);
  CHECK(row.precision == 0.0);
  CHECK(row.recall == 0.0);
  CHECK(row.f1 == 0.0);
}

TEST_CASE("boundary or type mismatch is not a match") {
  const std::vector<TaggedSentence> gold = {sent({"B-PER", "I-PER", "O"})};
  CHECK(evaluate(gold, {{"B-PER", "O", "O"}}).num_correct == 0);   // boundary
  CHECK(evaluate(gold, {{"B-LOC", "I-LOC", "O"}}).num_correct == 0);  // type
}

TEST_CASE("length mismatch names the sentence") {
  const std::vector<TaggedSentence> gold = {sent({"O"}), sent({"O", "O"})};
  try {
    evaluate(gold, {{"O"}, {"O"}});
    FAIL("expected error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("sentence 1") != std::string::npos);
  }
  CHECK_THROWS(evaluate(gold, {{"O"}}));
}

TEST_CASE("repair rule applies to predictions before matching") {
  const std::vector<TaggedSentence> gold = {sent({"B-PER", "O"})};
  // dangling I-PER decodes as a span via the repair rule
  const ReportRow row = evaluate(gold, {{"I-PER", "O"}});
  CHECK(row.num_correct == 1);
  CHECK(row.f1 == doctest::Approx(100.0));
}

TEST_CASE("f1 is the harmonic mean and order does not matter") {
  Rng rng(3);
  std::vector<TaggedSentence> gold;
  std::vector<std::vector<std::string>> pred;
  const char* kinds[] = {"O", "B-PER", "I-PER", "B-LOC", "I-LOC"};
  for (int s = 0; s < 40; ++s) {
    std::vector<std::string> g, q;
    const std::size_t len = 1 + rng.uniform_u64(8);
    for (std::size_t i = 0; i < len; ++i) {
      g.push_back(kinds[rng.uniform_u64(5)]);
      q.push_back(kinds[rng.uniform_u64(5)]);
    }
    gold.push_back(sent(g));
    pred.push_back(q);
  }
  const ReportRow row = evaluate(gold, pred);
  if (row.precision + row.recall > 0) {
    CHECK(std::abs(row.f1 - 2 * row.precision * row.recall /
                              (row.precision + row.recall)) < 1e-9);
  }

  // permute sentences identically
  std::vector<std::size_t> perm(gold.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<TaggedSentence> gold2;
  std::vector<std::vector<std::string>> pred2;
  for (std::size_t i : perm) {
    gold2.push_back(gold[i]);
    pred2.push_back(pred[i]);
  }
  const ReportRow row2 = evaluate(gold2, pred2);
  CHECK(row2.num_gold == row.num_gold);
  CHECK(row2.num_pred == row.num_pred);
  CHECK(row2.num_correct == row.num_correct);
}

TEST_CASE("removing a spurious span never lowers precision") {
  // spurious = predicted span that matches nothing
  const std::vector<TaggedSentence> gold = {sent({"B-PER", "O", "O", "O"})};
  const ReportRow with_spurious = evaluate(gold, {{"B-PER", "O", "B-LOC", "O"}});
  const ReportRow without = evaluate(gold, {{"B-PER", "O", "O", "O"}});
  CHECK(without.precision >= with_spurious.precision);
}

TEST_CASE("format_report reproduces the reference five-row table") {
  const std::vector<ReportRow> rows = {
      {"Baseline", 92.54, 88.20, 90.32, 0, 0, 0},
      {"BERT-base", 92.68, 94.18, 93.30, 0, 0, 0},
      {"ERNIE", 92.92, 94.07, 93.37, 0, 0, 0},
      {"ERNIE-tiny", 83.89, 89.88, 86.52, 0, 0, 0},
      {"RoBERTa", 93.64, 94.93, 94.17, 0, 0, 0},
  };
  const std::string report = format_report(rows);
  CHECK(report.find("Models") != std::string::npos);
  CHECK(report.find("Precision/%") != std::string::npos);
  CHECK(report.find("Recall/%") != std::string::npos);
  CHECK(report.find("F1/%") != std::string::npos);
  CHECK(report.find("92.54") != std::string::npos);
  CHECK(report.find("88.20") != std::string::npos);
  CHECK(report.find("90.32") != std::string::npos);
  CHECK(report.find("93.30") != std::string::npos);
  CHECK(report.find("93.37") != std::string::npos);
  CHECK(report.find("86.52") != std::string::npos);
  CHECK(report.find("94.93") != std::string::npos);
  // best row flagged
  CHECK(report.find("94.17 *") != std::string::npos);
  // only one flag
  CHECK(report.find(" *") == report.rfind(" *"));
}

TEST_CASE("single-row report has header and no flag") {
  const std::string report = format_report({{"only", 50.0, 40.0, 44.44, 0, 0, 0}});
  CHECK(report.find("Models") != std::string::npos);
  CHECK(report.find("44.44") != std::string::npos);
  CHECK(report.find('*') == std::string::npos);
}

TEST_CASE("rounding is half-up to two decimals") {
  // 10.125 is exactly representable; half-even would print 10.12
  const std::string report = format_report({{"a", 10.125, 10.1249, 10.0, 0, 0, 0}});
  CHECK(report.find("10.13") != std::string::npos);
  CHECK(report.find("10.12 ") != std::string::npos);
}

TEST_CASE("json report carries counts") {
  const ReportRow row = row_from_counts("m", 4, 5, 3);
  const std::string json = report_to_json({row});
  CHECK(json.find("\"num_gold\": 4") != std::string::npos);
  CHECK(json.find("\"num_pred\": 5") != std::string::npos);
  CHECK(json.find("\"num_correct\": 3") != std::string::npos);
  CHECK(json.find("\"precision\": 60.0") != std::string::npos);
  CHECK(json.find("\"recall\": 75.0") != std::string::npos);
}
