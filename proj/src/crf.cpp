#include "seqtag/crf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace seqtag::crf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Max-shifted log(sum exp(v)). Returns -inf for an all -inf input.
double log_sum_exp(const double* v, int n) {
  double mx = kNegInf;
  for (int i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

void check_instance(const Emissions& e, const CrfParams& p) {
  if (e.rows < 1) throw std::invalid_argument("emissions must cover at least one position");
  if (static_cast<int>(e.cols) != p.num_tags) {
    throw std::invalid_argument("emissions width does not match num_tags");
  }
}

void check_tags(const Emissions& e, const CrfParams& p, const std::vector<int>& tags) {
  if (tags.size() != e.rows) {
    throw std::invalid_argument("tag sequence length does not match emissions");
  }
  for (int t : tags) {
    if (t < 0 || t >= p.num_tags) {
      throw std::invalid_argument("tag index out of range: " + std::to_string(t));
    }
  }
}

}  // namespace

ConstraintMask ConstraintMask::none(int k) {
  ConstraintMask c;
  c.num_tags = k;
  c.allowed.assign(static_cast<std::size_t>(k) * k, 1);
  c.allowed_start.assign(static_cast<std::size_t>(k), 1);
  c.allowed_end.assign(static_cast<std::size_t>(k), 1);
  return c;
}

double score_sequence(const Emissions& e, const CrfParams& p, const std::vector<int>& tags) {
  check_instance(e, p);
  check_tags(e, p, tags);
  const std::size_t len = tags.size();
  double score = p.start_scores[tags[0]] + e(0, tags[0]);
  for (std::size_t t = 1; t < len; ++t) {
    score += p.transitions(tags[t - 1], tags[t]) + e(t, tags[t]);
  }
  return score + p.end_scores[tags[len - 1]];
}

double log_partition(const Emissions& e, const CrfParams& p) {
  check_instance(e, p);
  const int k = p.num_tags;
  const std::size_t len = e.rows;
  std::vector<double> alpha(k), next(k), work(k);
  for (int j = 0; j < k; ++j) alpha[j] = p.start_scores[j] + e(0, j);
  for (std::size_t t = 1; t < len; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) work[i] = alpha[i] + p.transitions(i, j);
      next[j] = e(t, j) + log_sum_exp(work.data(), k);
    }
    std::swap(alpha, next);
  }
  for (int j = 0; j < k; ++j) work[j] = alpha[j] + p.end_scores[j];
  return log_sum_exp(work.data(), k);
}

double nll(const Emissions& e, const CrfParams& p, const std::vector<int>& tags) {
  return log_partition(e, p) - score_sequence(e, p, tags);
}

CrfGradients marginals_and_grad(const Emissions& e, const CrfParams& p,
                                const std::vector<int>& tags) {
  check_instance(e, p);
  check_tags(e, p, tags);
  const int k = p.num_tags;
  const std::size_t len = e.rows;

  Mat alpha(len, k), beta(len, k);
  std::vector<double> work(k);
  for (int j = 0; j < k; ++j) alpha(0, j) = p.start_scores[j] + e(0, j);
  for (std::size_t t = 1; t < len; ++t) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) work[i] = alpha(t - 1, i) + p.transitions(i, j);
      alpha(t, j) = e(t, j) + log_sum_exp(work.data(), k);
    }
  }
  for (int j = 0; j < k; ++j) beta(len - 1, j) = p.end_scores[j];
  for (std::size_t t = len - 1; t > 0; --t) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        work[j] = p.transitions(i, j) + e(t, j) + beta(t, j);
      }
      beta(t - 1, i) = log_sum_exp(work.data(), k);
    }
  }
  for (int j = 0; j < k; ++j) work[j] = alpha(len - 1, j) + p.end_scores[j];
  const double log_z = log_sum_exp(work.data(), k);

  CrfGradients g;
  g.marginals = Mat(len, k);
  g.d_emissions = Mat(len, k);
  g.d_transitions = Mat(k, k);
  g.d_start.assign(k, 0.0);
  g.d_end.assign(k, 0.0);

  for (std::size_t t = 0; t < len; ++t) {
    for (int j = 0; j < k; ++j) {
      const double m = std::exp(alpha(t, j) + beta(t, j) - log_z);
      g.marginals(t, j) = m;
      g.d_emissions(t, j) = m - (tags[t] == j ? 1.0 : 0.0);
    }
  }
  // Pairwise expectations for the transition gradient.
  for (std::size_t t = 0; t + 1 < len; ++t) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const double xi = std::exp(alpha(t, i) + p.transitions(i, j) + e(t + 1, j) +
                                   beta(t + 1, j) - log_z);
        g.d_transitions(i, j) += xi;
      }
    }
    g.d_transitions(tags[t], tags[t + 1]) -= 1.0;
  }
  for (int j = 0; j < k; ++j) {
    g.d_start[j] = g.marginals(0, j) - (tags[0] == j ? 1.0 : 0.0);
    g.d_end[j] = g.marginals(len - 1, j) - (tags[len - 1] == j ? 1.0 : 0.0);
  }
  return g;
}

ViterbiResult viterbi(const Emissions& e, const CrfParams& p, const ConstraintMask& c) {
  check_instance(e, p);
  if (c.num_tags != p.num_tags) {
    throw std::invalid_argument("constraint mask does not match num_tags");
  }
  const int k = p.num_tags;
  const std::size_t len = e.rows;

  // Suffix DP: best[t][j] = best score of a feasible completion from (t, j).
  // The path is then read out front to back, taking the smallest tag index
  // among optimal continuations, which yields the lexicographically smallest
  // optimal sequence exactly.
  Mat best(len, k);
  for (int j = 0; j < k; ++j) {
    best(len - 1, j) =
        c.allowed_end[j] ? e(len - 1, j) + p.end_scores[j] : kNegInf;
  }
  for (std::size_t t = len - 1; t > 0; --t) {
    for (int i = 0; i < k; ++i) {
      double b = kNegInf;
      for (int j = 0; j < k; ++j) {
        if (!c.transition(i, j) || best(t, j) == kNegInf) continue;
        b = std::max(b, p.transitions(i, j) + best(t, j));
      }
      best(t - 1, i) = b == kNegInf ? kNegInf : e(t - 1, i) + b;
    }
  }

  ViterbiResult r;
  r.tags.resize(len);
  double total = kNegInf;
  int first = -1;
  for (int j = 0; j < k; ++j) {
    if (!c.allowed_start[j] || best(0, j) == kNegInf) continue;
    const double s = p.start_scores[j] + best(0, j);
    if (s > total) {
      total = s;
      first = j;
    }
  }
  if (first < 0) throw std::runtime_error("constraint mask admits no path");
  r.score = total;
  r.tags[0] = first;
  for (std::size_t t = 1; t < len; ++t) {
    const int prev = r.tags[t - 1];
    double bestv = kNegInf;
    int pick = -1;
    for (int j = 0; j < k; ++j) {
      if (!c.transition(prev, j) || best(t, j) == kNegInf) continue;
      const double s = p.transitions(prev, j) + best(t, j);
      if (s > bestv) {
        bestv = s;
        pick = j;
      }
    }
    r.tags[t] = pick;
  }
  return r;
}

ConstraintMask bio_constraint_mask(const corpus::TagSet& tagset) {
  const int k = tagset.num_tags();
  ConstraintMask c = ConstraintMask::none(k);
  for (int j = 0; j < k; ++j) {
    const std::string& next = tagset.tag_of(j);
    if (next[0] != 'I') continue;
    const std::string opener = "B" + next.substr(1);
    c.allowed_start[j] = 0;
    for (int i = 0; i < k; ++i) {
      const std::string& prev = tagset.tag_of(i);
      c.allowed[static_cast<std::size_t>(i) * k + j] =
          (prev == next || prev == opener) ? 1 : 0;
    }
  }
  return c;
}

}  // namespace seqtag::crf
