#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xf2t/fact_model.hpp"
#include "xf2t/text.hpp"

namespace xf2t {

enum class RoleId : uint8_t { Other = 0, Subject = 1, Relation = 2, Object = 3 };
inline constexpr size_t kNumRoles = 4;

using TokenId = int32_t;

inline constexpr std::string_view kPadToken = "⟨PAD⟩";
inline constexpr std::string_view kBosToken = "⟨BOS⟩";
inline constexpr std::string_view kEosToken = "⟨EOS⟩";
inline constexpr std::string_view kUnkToken = "⟨UNK⟩";
inline constexpr std::string_view kGenerateToken = "generate";
inline constexpr std::string_view kTranslateToken = "translate";

/// Fixed prefix of every vocabulary. Language control tokens follow in the
/// configured order, then ordinary words by descending frequency.
inline constexpr std::array<std::string_view, 11> kReservedTokens = {
    kPadToken,      kBosToken,     kEosToken,    kUnkToken,
    kSubjectMarker, kRelationMarker, kObjectMarker, kTitleMarker,
    kSepMarker,     kGenerateToken, kTranslateToken};

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;

class Vocabulary {
 public:
  Vocabulary() = default;

  /// `words` are appended after the reserved block; duplicates and reserved
  /// strings are skipped.
  Vocabulary(std::vector<std::string> languages, const std::vector<std::string>& words)
      : languages_(std::move(languages)) {
    for (auto tok : kReservedTokens) add(std::string(tok));
    for (const auto& lang : languages_) {
      if (lang.empty() || text::split_words(lang).size() != 1) {
        throw std::invalid_argument("vocabulary: invalid language tag \"" + lang + "\"");
      }
      if (!add(lang)) throw std::invalid_argument("vocabulary: duplicate language " + lang);
    }
    reserved_ = tokens_.size();
    for (const auto& w : words) add(w);
  }

  size_t size() const { return tokens_.size(); }
  size_t reserved_count() const { return reserved_; }
  const std::vector<std::string>& languages() const { return languages_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool has_language(std::string_view lang) const {
    return std::find(languages_.begin(), languages_.end(), lang) != languages_.end();
  }

  bool contains(std::string_view tok) const { return ids_.count(std::string(tok)) > 0; }

  TokenId id(std::string_view tok) const {
    auto it = ids_.find(std::string(tok));
    return it == ids_.end() ? kUnkId : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<size_t>(id) >= tokens_.size()) {
      throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<size_t>(id)];
  }

  std::vector<TokenId> encode(const std::vector<std::string>& words) const {
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(id(w));
    return ids;
  }

  std::vector<std::string> decode(std::span<const TokenId> ids) const {
    std::vector<std::string> words;
    words.reserve(ids.size());
    for (TokenId i : ids) words.push_back(token(i));
    return words;
  }

  void save(std::ostream& out) const {
    for (const auto& t : tokens_) out << t << '\n';
  }

  /// Reads a vocabulary file; the reserved block and the language tokens
  /// must appear exactly where a freshly built vocabulary puts them.
  static Vocabulary load(std::istream& in, std::vector<std::string> languages) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
    Vocabulary v(std::move(languages), {});
    if (lines.size() < v.reserved_) throw std::invalid_argument("vocabulary file too short");
    for (size_t i = 0; i < v.reserved_; ++i) {
      if (lines[i] != v.tokens_[i]) {
        throw std::invalid_argument("vocabulary file: unexpected reserved token at line " +
                                    std::to_string(i + 1));
      }
    }
    for (size_t i = v.reserved_; i < lines.size(); ++i) {
      if (!v.add(lines[i])) {
        throw std::invalid_argument("vocabulary file: duplicate token at line " +
                                    std::to_string(i + 1));
      }
    }
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.languages_ == b.languages_;
  }

 private:
  bool add(const std::string& tok) {
    if (tok.empty() || ids_.count(tok)) return false;
    ids_.emplace(tok, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(tok);
    return true;
  }

  std::vector<std::string> languages_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  size_t reserved_ = 0;
};

struct LinearizedInput {
  std::string surface;
  std::vector<TokenId> tokens;
  std::vector<RoleId> roles;

  LinearizedInput() = default;
  LinearizedInput(std::string s, std::vector<TokenId> t, std::vector<RoleId> r)
      : surface(std::move(s)), tokens(std::move(t)), roles(std::move(r)) {
    if (tokens.size() != roles.size()) {
      throw std::logic_error("LinearizedInput: token/role length mismatch");
    }
  }
};

/// Word-level form of a linearization, before vocabulary lookup.
struct LinearizedWords {
  std::vector<std::string> words;
  std::vector<RoleId> roles;
};

namespace detail {

inline void push_span(LinearizedWords& out, std::string_view marker, RoleId role,
                      const std::string& field) {
  out.words.emplace_back(marker);
  out.roles.push_back(role);
  for (auto& w : text::split_words(field)) {
    out.words.push_back(std::move(w));
    out.roles.push_back(role);
  }
}

}  // namespace detail

/// generate [language] (⟨S⟩ s ⟨R⟩ r ⟨O⟩ o (⟨R⟩ qr ⟨O⟩ q)*)+ ⟨T⟩ [title]
///
/// Every marker carries the role of the span it opens; the control prefix,
/// ⟨T⟩ and the title are role 0. Fields are whitespace-normalized.
inline LinearizedWords linearize_words(std::span<const FactTriple> facts,
                                       std::string_view language,
                                       std::string_view section_title) {
  if (facts.empty()) throw std::invalid_argument("linearize: empty fact list");
  LinearizedWords out;
  out.words = {std::string(kGenerateToken), std::string(language)};
  out.roles = {RoleId::Other, RoleId::Other};
  for (const auto& f : facts) {
    detail::push_span(out, kSubjectMarker, RoleId::Subject, f.subject);
    detail::push_span(out, kRelationMarker, RoleId::Relation, f.relation);
    detail::push_span(out, kObjectMarker, RoleId::Object, f.object);
    for (const auto& q : f.qualifiers) {
      detail::push_span(out, kRelationMarker, RoleId::Relation, q.qual_relation);
      detail::push_span(out, kObjectMarker, RoleId::Object, q.qual_value);
    }
  }
  detail::push_span(out, kTitleMarker, RoleId::Other, std::string(section_title));
  return out;
}

inline LinearizedInput linearize(std::span<const FactTriple> facts, std::string_view language,
                                 std::string_view section_title, const Vocabulary& vocab) {
  if (!vocab.has_language(language)) {
    throw std::invalid_argument("linearize: unknown language tag \"" + std::string(language) +
                                "\"");
  }
  auto lw = linearize_words(facts, language, section_title);
  return LinearizedInput(text::join(lw.words), vocab.encode(lw.words), std::move(lw.roles));
}

struct Delinearized {
  std::vector<FactTriple> facts;
  std::string language;
  std::string section_title;
};

class LinearizationError : public std::runtime_error {
 public:
  LinearizationError(size_t position, const std::string& reason)
      : std::runtime_error("token " + std::to_string(position) + ": " + reason),
        position_(position) {}
  size_t position() const { return position_; }

 private:
  size_t position_;
};

/// Inverse of linearize. property_kind is not part of the surface, so every
/// returned fact carries the default kind.
inline Delinearized delinearize(std::string_view surface) {
  const auto words = text::split_words(surface);
  size_t pos = 0;
  auto is_marker = [](const std::string& w) {
    return std::find(kReservedMarkers.begin(), kReservedMarkers.end(), w) !=
           kReservedMarkers.end();
  };
  auto expect = [&](std::string_view marker) {
    if (pos >= words.size()) {
      throw LinearizationError(pos, "expected " + std::string(marker) + ", found end of input");
    }
    if (words[pos] != marker) {
      throw LinearizationError(pos, "expected " + std::string(marker) + ", found \"" +
                                        words[pos] + "\"");
    }
    ++pos;
  };
  auto span = [&](const char* what) {
    std::vector<std::string> parts;
    while (pos < words.size() && !is_marker(words[pos])) parts.push_back(words[pos++]);
    if (parts.empty()) throw LinearizationError(pos, std::string("empty ") + what);
    return text::join(parts);
  };

  Delinearized out;
  expect(kGenerateToken);
  if (pos >= words.size() || is_marker(words[pos])) {
    throw LinearizationError(pos, "missing language token");
  }
  out.language = words[pos++];
  do {
    expect(kSubjectMarker);
    FactTriple f;
    f.subject = span("subject");
    expect(kRelationMarker);
    f.relation = span("relation");
    expect(kObjectMarker);
    f.object = span("object");
    while (pos < words.size() && words[pos] == kRelationMarker) {
      ++pos;
      Qualifier q;
      q.qual_relation = span("qualifier relation");
      expect(kObjectMarker);
      q.qual_value = span("qualifier value");
      f.qualifiers.push_back(std::move(q));
    }
    out.facts.push_back(std::move(f));
  } while (pos < words.size() && words[pos] == kSubjectMarker);
  expect(kTitleMarker);
  std::vector<std::string> title;
  for (; pos < words.size(); ++pos) {
    if (is_marker(words[pos])) throw LinearizationError(pos, "marker inside section title");
    title.push_back(words[pos]);
  }
  out.section_title = text::join(title);
  return out;
}

/// Frequency-ranked word vocabulary over arbitrary texts. Ties are broken
/// lexicographically so that builds are reproducible.
inline Vocabulary build_vocab_from_texts(const std::vector<std::string>& texts,
                                         std::vector<std::string> languages, size_t max_size) {
  const size_t reserved = kReservedTokens.size() + languages.size();
  if (max_size < reserved) {
    throw std::invalid_argument("build_vocab: max_size " + std::to_string(max_size) +
                                " is smaller than the " + std::to_string(reserved) +
                                " reserved tokens");
  }
  std::map<std::string, size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : text::split_words(t)) ++counts[std::move(w)];
  }
  for (auto tok : kReservedTokens) counts.erase(std::string(tok));
  for (const auto& l : languages) counts.erase(l);
  std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  for (size_t i = 0; i < ranked.size() && words.size() + reserved < max_size; ++i) {
    words.push_back(ranked[i].first);
  }
  return Vocabulary(std::move(languages), words);
}

inline std::vector<std::string> corpus_languages(const Corpus& corpus) {
  std::vector<std::string> langs;
  for (const auto& inst : corpus) langs.push_back(inst.language);
  std::sort(langs.begin(), langs.end());
  langs.erase(std::unique(langs.begin(), langs.end()), langs.end());
  return langs;
}

/// Counts words from fact fields, section titles and references. Language
/// control tokens are the corpus' languages in sorted order unless given.
inline Vocabulary build_vocab(const Corpus& corpus, size_t max_size,
                              std::vector<std::string> languages = {}) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (languages.empty()) languages = corpus_languages(corpus);
  std::vector<std::string> texts;
  for (const auto& inst : corpus) {
    for (const auto& f : inst.facts) {
      texts.push_back(f.subject);
      texts.push_back(f.relation);
      texts.push_back(f.object);
      for (const auto& q : f.qualifiers) {
        texts.push_back(q.qual_relation);
        texts.push_back(q.qual_value);
      }
    }
    texts.push_back(inst.section_title);
    texts.push_back(inst.reference_text);
  }
  return build_vocab_from_texts(texts, std::move(languages), max_size);
}

}  // namespace xf2t
