#pragma once

// Two-stage fact/sentence alignment. Stage 1 ranks facts by TF-IDF cosine
// over character 3-grams; stage 2 keeps the candidates an entailment scorer
// labels "entail".

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <future>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xf2t/fact_model.hpp"
#include "xf2t/text.hpp"
#include "xf2t/translator.hpp"

namespace xf2t::align {

enum class Label { Entail, Neutral, Contradict };

inline std::string to_string(Label l) {
  switch (l) {
    case Label::Entail: return "entail";
    case Label::Neutral: return "neutral";
    case Label::Contradict: return "contradict";
  }
  return "neutral";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "entail") return Label::Entail;
  if (s == "neutral") return Label::Neutral;
  if (s == "contradict") return Label::Contradict;
  return std::nullopt;
}

struct ScorerOutput {
  double entail_prob = 0.0;
  Label label = Label::Neutral;

  friend bool operator==(const ScorerOutput&, const ScorerOutput&) = default;
};

/// Must be deterministic for fixed inputs and safe to call concurrently.
class EntailmentScorer {
 public:
  virtual ~EntailmentScorer() = default;
  virtual ScorerOutput score(const std::string& premise, const std::string& hypothesis) const = 0;
};

class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Candidate {
  FactTriple fact;
  double score = 0.0;  // in [0, 1]
};

struct CandidateSet {
  std::string sentence;
  std::vector<Candidate> candidates;  // score non-increasing, size <= K
};

struct ScoredFact {
  FactTriple fact;
  ScorerOutput output;
};

struct AlignmentResult {
  std::string sentence;
  std::vector<FactTriple> aligned;
  std::vector<ScoredFact> scored;  // one per candidate, candidate order
};

inline constexpr size_t kDefaultTopK = 5;

/// Space-joined fields: subject, relation, object, then each qualifier pair.
inline std::string fact_text(const FactTriple& f) {
  std::vector<std::string> parts{f.subject, f.relation, f.object};
  for (const auto& q : f.qualifiers) {
    parts.push_back(q.qual_relation);
    parts.push_back(q.qual_value);
  }
  return text::normalize_space(text::join(parts));
}

namespace detail {

using Grams = std::map<std::u32string, double>;

/// Term counts of code-point 3-grams over the lowercased, space-normalized
/// text. Texts shorter than 3 code points contribute themselves as one gram.
inline Grams char_trigrams(std::string_view s) {
  const auto cps = text::decode_utf8(text::ascii_lower(text::normalize_space(s)));
  Grams g;
  if (cps.empty()) return g;
  if (cps.size() < 3) {
    g[std::u32string(cps.begin(), cps.end())] += 1.0;
    return g;
  }
  for (size_t i = 0; i + 3 <= cps.size(); ++i) g[std::u32string(cps.begin() + i, cps.begin() + i + 3)] += 1.0;
  return g;
}

inline double cosine(const Grams& a, const Grams& b, const std::map<std::u32string, double>& idf) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    const double w = v * idf.at(k);
    na += w * w;
    auto it = b.find(k);
    if (it != b.end()) dot += w * it->second * idf.at(k);
  }
  for (const auto& [k, v] : b) {
    const double w = v * idf.at(k);
    nb += w * w;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

}  // namespace detail

struct Stage1Options {
  size_t top_k = kDefaultTopK;
  /// When set and the languages differ, the sentence is translated into the
  /// fact language before scoring.
  const Translator* translator = nullptr;
  std::string sentence_language;
  std::string fact_language = "en";
};

/// TF-IDF weights use smooth idf ln((1 + N) / (1 + df)) + 1 over the
/// document set {sentence, each fact}. Ties keep input order.
inline CandidateSet stage1_candidates(const std::string& sentence,
                                      const std::vector<FactTriple>& facts,
                                      const Stage1Options& opts = {}) {
  if (opts.top_k == 0) throw std::invalid_argument("stage1: K must be positive");
  if (facts.empty()) throw std::invalid_argument("stage1: no facts");
  std::string probe = sentence;
  if (opts.translator != nullptr && !opts.sentence_language.empty() &&
      opts.sentence_language != opts.fact_language) {
    probe = opts.translator->translate(sentence, opts.sentence_language, opts.fact_language);
  }
  std::vector<detail::Grams> docs;
  docs.push_back(detail::char_trigrams(probe));
  for (const auto& f : facts) docs.push_back(detail::char_trigrams(fact_text(f)));
  std::map<std::u32string, double> idf;
  for (const auto& d : docs) {
    for (const auto& [k, v] : d) idf[k] += 1.0;
  }
  const double n = static_cast<double>(docs.size());
  for (auto& [k, df] : idf) df = std::log((1.0 + n) / (1.0 + df)) + 1.0;

  CandidateSet out{sentence, {}};
  for (size_t i = 0; i < facts.size(); ++i) {
    out.candidates.push_back({facts[i], detail::cosine(docs[0], docs[i + 1], idf)});
  }
  std::stable_sort(out.candidates.begin(), out.candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (out.candidates.size() > opts.top_k) out.candidates.resize(opts.top_k);
  return out;
}

/// "sentence⟨SEP⟩subject|relation|object" followed by "|qr:q" per qualifier.
inline std::string nli_input(const std::string& sentence, const FactTriple& fact) {
  std::string s = sentence;
  s += kSepMarker;
  s += fact.subject;
  s += '|';
  s += fact.relation;
  s += '|';
  s += fact.object;
  for (const auto& q : fact.qualifiers) {
    s += '|';
    s += q.qual_relation;
    s += ':';
    s += q.qual_value;
  }
  return s;
}

/// Hypothesis part of an nli_input string (text after the first ⟨SEP⟩).
inline std::string nli_hypothesis(const FactTriple& fact) {
  const std::string full = nli_input("", fact);
  return full.substr(kSepMarker.size());
}

class AlignmentError : public std::runtime_error {
 public:
  AlignmentError(std::string sentence, FactTriple fact, const std::string& cause)
      : std::runtime_error("scoring failed for sentence \"" + sentence + "\" and fact \"" +
                           nli_hypothesis(fact) + "\": " + cause),
        sentence_(std::move(sentence)),
        fact_(std::move(fact)) {}
  const std::string& sentence() const { return sentence_; }
  const FactTriple& fact() const { return fact_; }

 private:
  std::string sentence_;
  FactTriple fact_;
};

/// Scores every candidate (premise = sentence, hypothesis = fact rendering)
/// with at most `max_in_flight` concurrent calls, then keeps the entailed
/// ones in candidate order.
inline AlignmentResult stage2_filter(const CandidateSet& cs, const EntailmentScorer& scorer,
                                     size_t max_in_flight = 1) {
  if (max_in_flight == 0) throw std::invalid_argument("stage2: max_in_flight must be positive");
  const size_t n = cs.candidates.size();
  std::vector<ScorerOutput> outputs(n);
  auto score_one = [&](size_t i) {
    try {
      outputs[i] = scorer.score(cs.sentence, nli_hypothesis(cs.candidates[i].fact));
    } catch (const std::exception& e) {
      throw AlignmentError(cs.sentence, cs.candidates[i].fact, e.what());
    }
  };
  if (max_in_flight == 1) {
    for (size_t i = 0; i < n; ++i) score_one(i);
  } else {
    for (size_t start = 0; start < n; start += max_in_flight) {
      std::vector<std::future<void>> wave;
      for (size_t i = start; i < std::min(n, start + max_in_flight); ++i) {
        wave.push_back(std::async(std::launch::async, score_one, i));
      }
      // Wait for the whole wave before rethrowing so no task outlives `outputs`.
      std::exception_ptr first;
      for (auto& f : wave) {
        try {
          f.get();
        } catch (...) {
          if (!first) first = std::current_exception();
        }
      }
      if (first) std::rethrow_exception(first);
    }
  }
  AlignmentResult r{cs.sentence, {}, {}};
  for (size_t i = 0; i < n; ++i) {
    r.scored.push_back({cs.candidates[i].fact, outputs[i]});
    if (outputs[i].label == Label::Entail) r.aligned.push_back(cs.candidates[i].fact);
  }
  return r;
}

/// Offline baseline: entail_prob is the fraction of hypothesis content
/// tokens found among the premise tokens.
class LexicalScorer : public EntailmentScorer {
 public:
  explicit LexicalScorer(double threshold = 0.5) : threshold_(threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw std::invalid_argument("lexical scorer: threshold must be in [0, 1]");
    }
  }

  /// Splits on whitespace, '|' and ':'; lowercases ASCII; strips ASCII
  /// punctuation from both ends; drops stopwords and empty tokens.
  static std::vector<std::string> content_tokens(std::string_view s) {
    static const std::set<std::string, std::less<>> kStop = {
        "a", "an", "the", "of", "in", "on", "at", "to", "for", "and", "or", "is", "was", "as", "by"};
    std::string spaced(s);
    for (char& c : spaced) {
      if (c == '|' || c == ':') c = ' ';
    }
    std::vector<std::string> out;
    for (auto& w : text::split_words(spaced)) {
      std::string t = text::ascii_lower(w);
      auto punct = [](unsigned char c) { return c < 0x80 && std::ispunct(c); };
      while (!t.empty() && punct(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
      while (!t.empty() && punct(static_cast<unsigned char>(t.back()))) t.pop_back();
      if (!t.empty() && !kStop.count(t)) out.push_back(std::move(t));
    }
    return out;
  }

  ScorerOutput score(const std::string& premise, const std::string& hypothesis) const override {
    const auto hyp = content_tokens(hypothesis);
    const auto prem_list = content_tokens(premise);
    const std::set<std::string> prem(prem_list.begin(), prem_list.end());
    if (hyp.empty()) return {0.0, Label::Neutral};
    size_t hit = 0;
    for (const auto& t : hyp) hit += prem.count(t);
    const double p = static_cast<double>(hit) / static_cast<double>(hyp.size());
    return {p, p >= threshold_ ? Label::Entail : Label::Neutral};
  }

 private:
  double threshold_;
};

}  // namespace xf2t::align
