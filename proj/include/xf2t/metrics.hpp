#pragma once

// Corpus-level generation metrics on a 0-100 scale. Tokenization is a plain
// Unicode-whitespace split; no smoothing, stemming or synonymy.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "xf2t/text.hpp"

namespace xf2t::metrics {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void check_sizes(size_t h, size_t r, const char* name) {
  if (h != r) {
    throw MetricError(std::string(name) + ": " + std::to_string(h) + " hypotheses vs " +
                      std::to_string(r) + " references");
  }
  if (h == 0) throw MetricError(std::string(name) + ": empty corpus");
}

template <class T>
std::map<std::vector<T>, size_t> ngram_counts(const std::vector<T>& seq, size_t n) {
  std::map<std::vector<T>, size_t> counts;
  if (seq.size() < n) return counts;
  for (size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<T>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                            seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

/// Sum over n-grams of min(hyp count, ref count).
template <class T>
size_t clipped_matches(const std::map<std::vector<T>, size_t>& hyp,
                       const std::map<std::vector<T>, size_t>& ref) {
  size_t m = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

struct OrderStats {
  size_t hyp = 0;
  size_t ref = 0;
  size_t match = 0;
};

template <class T>
void accumulate(std::vector<OrderStats>& stats, size_t offset, size_t max_n,
                const std::vector<T>& hyp, const std::vector<T>& ref) {
  for (size_t n = 1; n <= max_n; ++n) {
    auto& s = stats[offset + n - 1];
    s.hyp += hyp.size() >= n ? hyp.size() - n + 1 : 0;
    s.ref += ref.size() >= n ? ref.size() - n + 1 : 0;
    s.match += clipped_matches(ngram_counts(hyp, n), ngram_counts(ref, n));
  }
}

inline std::vector<char32_t> chars_without_space(std::string_view s) {
  std::vector<char32_t> out;
  for (char32_t cp : text::decode_utf8(s)) {
    if (!text::is_unicode_space(cp)) out.push_back(cp);
  }
  return out;
}

}  // namespace detail

/// Corpus BLEU. Brevity penalty exp(min(0, 1 - ref_len/hyp_len)); any zero
/// n-gram precision gives 0.
inline double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
                   size_t max_n = 4) {
  detail::check_sizes(hypotheses.size(), references.size(), "bleu");
  if (max_n == 0) throw MetricError("bleu: max_n must be positive");
  std::vector<detail::OrderStats> stats(max_n);
  size_t hyp_len = 0;
  size_t ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    const auto h = text::split_words(hypotheses[i]);
    const auto r = text::split_words(references[i]);
    hyp_len += h.size();
    ref_len += r.size();
    detail::accumulate(stats, 0, max_n, h, r);
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (const auto& s : stats) {
    if (s.match == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.match) / static_cast<double>(s.hyp));
  }
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
  // Exact 100 for identical corpora: every log term is log(1) = 0 and bp = 1.
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

/// chrF++ with corpus-summed statistics per order. Each order where both
/// sides have n-grams contributes its F_beta (0 when nothing matches); the
/// score is the mean over those orders.
inline double chrf_pp(std::span<const std::string> hypotheses,
                      std::span<const std::string> references, size_t char_n = 6,
                      size_t word_n = 2, double beta = 2.0) {
  detail::check_sizes(hypotheses.size(), references.size(), "chrf_pp");
  if (char_n + word_n == 0) throw MetricError("chrf_pp: no n-gram orders");
  std::vector<detail::OrderStats> stats(char_n + word_n);
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    detail::accumulate(stats, 0, char_n, detail::chars_without_space(hypotheses[i]),
                       detail::chars_without_space(references[i]));
    detail::accumulate(stats, char_n, word_n, text::split_words(hypotheses[i]),
                       text::split_words(references[i]));
  }
  const double b2 = beta * beta;
  double total = 0.0;
  size_t effective = 0;
  for (const auto& s : stats) {
    if (s.hyp == 0 || s.ref == 0) continue;
    ++effective;
    if (s.match == 0) continue;
    if (s.match == s.hyp && s.match == s.ref) {
      total += 1.0;
      continue;
    }
    const double p = static_cast<double>(s.match) / static_cast<double>(s.hyp);
    const double r = static_cast<double>(s.match) / static_cast<double>(s.ref);
    total += (1.0 + b2) * p * r / (b2 * p + r);
  }
  if (effective == 0) return 0.0;
  return 100.0 * total / static_cast<double>(effective);
}

struct MeteorParams {
  double alpha = 0.9;
  double gamma = 0.5;
  double beta = 3.0;
};

/// Sentence-level METEOR-lite in [0, 1].
inline double meteor_lite_sentence(std::string_view hypothesis, std::string_view reference,
                                   const MeteorParams& mp = {}) {
  const auto h = text::split_words(hypothesis);
  const auto r = text::split_words(reference);
  if (h.empty() || r.empty()) return 0.0;
  std::vector<bool> used(r.size(), false);
  // aligned[i] = reference position matched by hypothesis word i, or -1.
  std::vector<std::ptrdiff_t> aligned(h.size(), -1);
  size_t matches = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    for (size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && h[i] == r[j]) {
        used[j] = true;
        aligned[i] = static_cast<std::ptrdiff_t>(j);
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;
  size_t chunks = 0;
  std::ptrdiff_t prev = -2;
  bool in_chunk = false;
  for (auto a : aligned) {
    if (a < 0) {
      in_chunk = false;
      continue;
    }
    if (!in_chunk || a != prev + 1) ++chunks;
    in_chunk = true;
    prev = a;
  }
  const double p = static_cast<double>(matches) / static_cast<double>(h.size());
  const double rc = static_cast<double>(matches) / static_cast<double>(r.size());
  const double fmean = p * rc / (mp.alpha * p + (1.0 - mp.alpha) * rc);
  const double penalty =
      mp.gamma * std::pow(static_cast<double>(chunks) / static_cast<double>(matches), mp.beta);
  return fmean * (1.0 - penalty);
}

/// Mean sentence score over the corpus, times 100.
inline double meteor_lite(std::span<const std::string> hypotheses,
                          std::span<const std::string> references, const MeteorParams& mp = {}) {
  detail::check_sizes(hypotheses.size(), references.size(), "meteor_lite");
  double sum = 0.0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    sum += meteor_lite_sentence(hypotheses[i], references[i], mp);
  }
  return 100.0 * sum / static_cast<double>(hypotheses.size());
}

struct Prediction {
  std::string language;
  std::string hypothesis;
  std::string reference;
};

struct Scores {
  double bleu = 0.0;
  double meteor_lite = 0.0;
  double chrf_pp = 0.0;
  size_t n = 0;
};

struct MetricReport {
  std::map<std::string, Scores> per_language;
  /// Unweighted mean over languages; n is the total pair count.
  Scores average;
};

inline MetricReport evaluate(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw MetricError("evaluate: no predictions");
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> groups;
  for (const auto& p : predictions) {
    auto& g = groups[p.language];
    g.first.push_back(p.hypothesis);
    g.second.push_back(p.reference);
  }
  MetricReport rep;
  for (const auto& [lang, g] : groups) {
    Scores s{bleu(g.first, g.second), meteor_lite(g.first, g.second), chrf_pp(g.first, g.second),
             g.first.size()};
    rep.average.bleu += s.bleu;
    rep.average.meteor_lite += s.meteor_lite;
    rep.average.chrf_pp += s.chrf_pp;
    rep.average.n += s.n;
    rep.per_language.emplace(lang, s);
  }
  const double k = static_cast<double>(groups.size());
  rep.average.bleu /= k;
  rep.average.meteor_lite /= k;
  rep.average.chrf_pp /= k;
  return rep;
}

inline nlohmann::json to_json(const Scores& s) {
  return {{"bleu", s.bleu}, {"meteor_lite", s.meteor_lite}, {"chrf_pp", s.chrf_pp}, {"n", s.n}};
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [lang, s] : r.per_language) per[lang] = to_json(s);
  return {{"per_language", per}, {"average", to_json(r.average)}};
}

/// Fixed-width table, one row per language followed by an "Avg" row.
inline std::string format_table(const MetricReport& r) {
  size_t w = 8;
  for (const auto& [lang, s] : r.per_language) w = std::max(w, lang.size());
  std::string out;
  char buf[256];
  auto row = [&](const std::string& name, const Scores& s) {
    std::snprintf(buf, sizeof buf, "%-*s  %7.2f  %11.2f  %7.2f  %6zu\n", static_cast<int>(w),
                  name.c_str(), s.bleu, s.meteor_lite, s.chrf_pp, s.n);
    out += buf;
  };
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %11s  %7s  %6s\n", static_cast<int>(w), "Language",
                "BLEU", "METEOR-lite", "chrF++", "n");
  out += buf;
  for (const auto& [lang, s] : r.per_language) row(lang, s);
  row("Avg", r.average);
  return out;
}

}  // namespace xf2t::metrics
