#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace xf2t {

struct BeamOptions {
  size_t width = 4;
  size_t max_len = 64;
  /// Final ranking divides the log-probability by length^exponent.
  double length_norm_exponent = 1.0;
};

struct Hypothesis {
  std::vector<int32_t> tokens;  // includes the terminating EOS when finished
  double log_prob = 0.0;
  double score = 0.0;
  bool finished = false;
};

inline double normalized_score(double log_prob, size_t length, double exponent) {
  if (length == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), exponent);
}

/// Ranking used for final output: score descending, then shorter, then
/// lexicographically smaller token sequence.
inline bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

/// Breadth-limited search over a step function.
///
/// `step(prefixes)` receives the live prefixes (all of equal length, without
/// any start symbol) and returns one vector of next-token log-probabilities
/// per prefix. At every step the `width` best expansions by cumulative
/// log-probability survive; expansions ending in `eos` leave the beam as
/// finished hypotheses. Whatever is still live at `max_len` is returned
/// unfinished.
template <class StepFn>
std::vector<Hypothesis> beam_search(StepFn&& step, int32_t eos, const BeamOptions& opts) {
  if (opts.width == 0) throw std::invalid_argument("beam_search: width must be positive");
  if (opts.max_len == 0) throw std::invalid_argument("beam_search: max_len must be positive");

  struct Candidate {
    size_t parent;
    int32_t token;
    double log_prob;
  };

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> done;
  for (size_t t = 0; t < opts.max_len && !live.empty(); ++t) {
    std::vector<std::vector<int32_t>> prefixes;
    prefixes.reserve(live.size());
    for (const auto& h : live) prefixes.push_back(h.tokens);
    const std::vector<std::vector<double>> logp = step(prefixes);
    if (logp.size() != live.size()) {
      throw std::logic_error("beam_search: step returned wrong number of rows");
    }
    std::vector<Candidate> cands;
    for (size_t i = 0; i < live.size(); ++i) {
      for (size_t v = 0; v < logp[i].size(); ++v) {
        if (logp[i][v] == -std::numeric_limits<double>::infinity()) continue;
        cands.push_back({i, static_cast<int32_t>(v), live[i].log_prob + logp[i][v]});
      }
    }
    // Ties on cumulative log-probability fall back to the lexicographic order
    // of the extended sequence, which makes width 1 identical to argmax with
    // lowest-id tie-breaking.
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const auto& pa = live[a.parent].tokens;
      const auto& pb = live[b.parent].tokens;
      if (pa != pb) return pa < pb;
      return a.token < b.token;
    };
    const size_t keep = std::min(opts.width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), better);
    std::vector<Hypothesis> next;
    for (size_t c = 0; c < keep; ++c) {
      Hypothesis h;
      h.tokens = live[cands[c].parent].tokens;
      h.tokens.push_back(cands[c].token);
      h.log_prob = cands[c].log_prob;
      if (cands[c].token == eos) {
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (auto& h : live) done.push_back(std::move(h));
  for (auto& h : done) {
    h.score = normalized_score(h.log_prob, h.tokens.size(), opts.length_norm_exponent);
  }
  std::sort(done.begin(), done.end(), hypothesis_before);
  return done;
}

/// Argmax decoding with lowest-id tie-breaking.
template <class StepFn>
std::vector<int32_t> greedy_search(StepFn&& step, int32_t eos, size_t max_len) {
  std::vector<int32_t> out;
  while (out.size() < max_len) {
    const auto logp = step(std::vector<std::vector<int32_t>>{out});
    const auto& row = logp.at(0);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    out.push_back(static_cast<int32_t>(best));
    if (best == eos) break;
  }
  return out;
}

}  // namespace xf2t
