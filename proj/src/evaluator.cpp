#include "seqtag/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace seqtag::evaluator {
namespace {

double percent(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double round_half_up_2dp(double v) {
  return std::floor(v * 100.0 + 0.5) / 100.0;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_up_2dp(v));
  return buf;
}

}  // namespace

ReportRow row_from_counts(const std::string& model_name, std::size_t num_gold,
                          std::size_t num_pred, std::size_t num_correct) {
  ReportRow row;
  row.model = model_name;
  row.num_gold = num_gold;
  row.num_pred = num_pred;
  row.num_correct = num_correct;
  row.precision = percent(num_correct, num_pred);
  row.recall = percent(num_correct, num_gold);
  row.f1 = (row.precision + row.recall) == 0.0
               ? 0.0
               : 2.0 * row.precision * row.recall / (row.precision + row.recall);
  return row;
}

ReportRow evaluate(const std::vector<corpus::TaggedSentence>& gold,
                   const std::vector<std::vector<std::string>>& pred,
                   const std::string& model_name) {
  if (gold.size() != pred.size()) {
    throw std::runtime_error("gold has " + std::to_string(gold.size()) +
                             " sentences but predictions have " + std::to_string(pred.size()));
  }
  std::size_t num_gold = 0, num_pred = 0, num_correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].tags.size() != pred[s].size()) {
      throw std::runtime_error("sentence " + std::to_string(s) + ": gold length " +
                               std::to_string(gold[s].tags.size()) +
                               " != prediction length " + std::to_string(pred[s].size()));
    }
    const auto gold_spans = corpus::extract_spans(gold[s].tags);
    const auto pred_spans = corpus::extract_spans(pred[s]);
    num_gold += gold_spans.size();
    num_pred += pred_spans.size();
    std::vector<bool> used(gold_spans.size(), false);
    for (const auto& ps : pred_spans) {
      for (std::size_t g = 0; g < gold_spans.size(); ++g) {
        if (!used[g] && gold_spans[g] == ps) {
          used[g] = true;
          ++num_correct;
          break;
        }
      }
    }
  }
  return row_from_counts(model_name, num_gold, num_pred, num_correct);
}

std::string format_report(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw std::runtime_error("format_report needs at least one row");
  std::size_t name_width = std::string("Models").size();
  for (const auto& r : rows) name_width = std::max(name_width, r.model.size());

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].f1 > rows[best].f1) best = i;
  }

  auto pad_right = [](const std::string& s, std::size_t w) {
    return s + std::string(w - s.size(), ' ');
  };
  auto pad_left = [](const std::string& s, std::size_t w) {
    return std::string(w - s.size(), ' ') + s;
  };

  constexpr std::size_t kColWidth = 11;  // fits "Precision/%"
  std::string out = pad_right("Models", name_width);
  for (const char* h : {"Precision/%", "Recall/%", "F1/%"}) {
    out += "  ";
    out += pad_left(h, kColWidth);
  }
  out += '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += pad_right(rows[i].model, name_width);
    out += "  " + pad_left(fixed2(rows[i].precision), kColWidth);
    out += "  " + pad_left(fixed2(rows[i].recall), kColWidth);
    out += "  " + pad_left(fixed2(rows[i].f1), kColWidth);
    if (rows.size() > 1 && i == best) out += " *";
    out += '\n';
  }
  return out;
}

std::string report_to_json(const std::vector<ReportRow>& rows) {
  nlohmann::json j;
  j["models"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["models"].push_back({{"name", r.model},
                           {"precision", round_half_up_2dp(r.precision)},
                           {"recall", round_half_up_2dp(r.recall)},
                           {"f1", round_half_up_2dp(r.f1)},
                           {"num_gold", r.num_gold},
                           {"num_pred", r.num_pred},
                           {"num_correct", r.num_correct}});
  }
  return j.dump(2);
}

}  // namespace seqtag::evaluator
