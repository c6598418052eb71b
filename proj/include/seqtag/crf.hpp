#pragma once

#include <cstdint>
#include <vector>

#include "seqtag/corpus.hpp"
#include "seqtag/mat.hpp"

namespace seqtag::crf {

// Linear-chain CRF over K tags. A length-T tag sequence y scores
//   start[y0] + sum_t e[t, yt] + sum_t trans[y(t-1), yt] + end[y(T-1)].
struct CrfParams {
  int num_tags = 0;
  Mat transitions;                  // K x K, (i, j) = score of i -> j
  std::vector<double> start_scores; // K
  std::vector<double> end_scores;   // K

  CrfParams() = default;
  explicit CrfParams(int k)
      : num_tags(k),
        transitions(static_cast<std::size_t>(k), static_cast<std::size_t>(k)),
        start_scores(static_cast<std::size_t>(k), 0.0),
        end_scores(static_cast<std::size_t>(k), 0.0) {}
};

// Decode-time hard constraints. Disallowed entries are skipped in the
// dynamic program rather than scored, so no -inf arithmetic ever happens.
struct ConstraintMask {
  int num_tags = 0;
  std::vector<std::uint8_t> allowed;        // K*K row-major
  std::vector<std::uint8_t> allowed_start;  // K
  std::vector<std::uint8_t> allowed_end;    // K

  static ConstraintMask none(int k);

  bool transition(int i, int j) const {
    return allowed[static_cast<std::size_t>(i) * num_tags + j] != 0;
  }
};

// Emissions: T x K matrix of per-position tag scores.
using Emissions = Mat;

double score_sequence(const Emissions& e, const CrfParams& p, const std::vector<int>& tags);

// log sum over all K^T sequences of exp(score), by the forward recursion in
// log space with max-shifted log-sum-exp.
double log_partition(const Emissions& e, const CrfParams& p);

// Negative log-likelihood: log_partition - score_sequence.
double nll(const Emissions& e, const CrfParams& p, const std::vector<int>& tags);

struct CrfGradients {
  Mat marginals;      // T x K unary posteriors, rows sum to 1
  Mat d_emissions;    // T x K, d nll / d e
  Mat d_transitions;  // K x K
  std::vector<double> d_start;
  std::vector<double> d_end;
};

// Forward-backward. Gradients of nll w.r.t. emissions and parameters:
// expected feature counts minus observed ones.
CrfGradients marginals_and_grad(const Emissions& e, const CrfParams& p,
                                const std::vector<int>& tags);

struct ViterbiResult {
  std::vector<int> tags;
  double score = 0.0;
};

// Maximum-score sequence among those the mask allows; ties resolve to the
// lexicographically smallest tag-index sequence. Throws if the mask leaves
// no feasible path.
ViterbiResult viterbi(const Emissions& e, const CrfParams& p, const ConstraintMask& c);

// Start at I-X forbidden; (prev -> I-X) forbidden unless prev is B-X or I-X.
ConstraintMask bio_constraint_mask(const corpus::TagSet& tagset);

}  // namespace seqtag::crf
