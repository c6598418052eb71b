#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seqtag/corpus.hpp"

namespace seqtag::evaluator {

// One Models/Precision/Recall/F1 row; percentages in [0, 100].
struct ReportRow {
  std::string model;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_gold = 0;
  std::size_t num_pred = 0;
  std::size_t num_correct = 0;
};

// Entity-level scoring: spans extracted from both sides, a prediction counts
// iff (start, end, type) exactly matches an unused gold span. Empty
// denominators score 0 by convention.
ReportRow evaluate(const std::vector<corpus::TaggedSentence>& gold,
                   const std::vector<std::vector<std::string>>& pred,
                   const std::string& model_name = "model");

ReportRow row_from_counts(const std::string& model_name, std::size_t num_gold,
                          std::size_t num_pred, std::size_t num_correct);

// Fixed-layout text table; columns Models | Precision/% | Recall/% | F1/%,
// values rounded half-up to 2 decimals, best-F1 row marked with a trailing
// " *". Exact layout documented in docs/formats.md.
std::string format_report(const std::vector<ReportRow>& rows);

// Same rows as JSON (machine-readable variant).
std::string report_to_json(const std::vector<ReportRow>& rows);

}  // namespace seqtag::evaluator
