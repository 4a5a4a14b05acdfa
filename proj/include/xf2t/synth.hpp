#pragma once

// Deterministic synthetic corpus for desk-scale runs. English references are
// produced by per-relation templates; the toy target languages are exact
// functions of the English text so that every setup can be exercised and
// checked without real data or machine translation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xf2t/fact_model.hpp"
#include "xf2t/text.hpp"
#include "xf2t/translator.hpp"

namespace xf2t::synth {

struct SynthSpec {
  uint64_t seed = 7;
  std::vector<std::string> languages = {"en-toy", "xx-rev", "yy-map"};
  size_t instances_per_language = 60;
  /// Probability of an instance having 1, 2, 3 or 4 facts.
  std::array<double, 4> facts_distribution = {0.7, 0.15, 0.1, 0.05};
};

/// How a toy language derives its reference from the English one.
enum class Transform { Identity, Reverse, Substitute };

inline Transform transform_for(std::string_view tag) {
  auto ends = [&](std::string_view suffix) {
    return tag.size() >= suffix.size() && tag.substr(tag.size() - suffix.size()) == suffix;
  };
  if (ends("-toy")) return Transform::Identity;
  if (ends("-rev")) return Transform::Reverse;
  if (ends("-map")) return Transform::Substitute;
  throw std::invalid_argument("synth: language tag \"" + std::string(tag) +
                              "\" must end in -toy, -rev or -map");
}

inline void validate(const SynthSpec& s) {
  if (s.languages.size() < 2) throw std::invalid_argument("synth: need at least 2 languages");
  std::set<std::string> uniq(s.languages.begin(), s.languages.end());
  if (uniq.size() != s.languages.size()) throw std::invalid_argument("synth: duplicate language");
  size_t english = 0;
  for (const auto& l : s.languages) english += transform_for(l) == Transform::Identity;
  if (english != 1) throw std::invalid_argument("synth: exactly one -toy (English) language");
  double sum = 0.0;
  for (double p : s.facts_distribution) {
    if (!(p >= 0.0)) throw std::invalid_argument("synth: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("synth: distribution must sum to 1");
  if (s.instances_per_language == 0) throw std::invalid_argument("synth: no instances requested");
}

inline std::string english_language(const SynthSpec& s) {
  for (const auto& l : s.languages) {
    if (transform_for(l) == Transform::Identity) return l;
  }
  throw std::invalid_argument("synth: no English language");
}

struct RelationTemplate {
  std::string_view relation;
  PropertyKind kind;
  std::string_view clause;  // object follows the clause
  std::vector<std::string_view> objects;
};

/// Drawn from the ten most frequent English relations of the real dataset.
/// Pools are deliberately small so that a desk-scale model sees every value
/// many times; "date of death" is left out because its clause competes with
/// "date of birth" for the same date values.
inline const std::vector<RelationTemplate>& relation_templates() {
  static const std::vector<RelationTemplate> t = {
      {"occupation", PropertyKind::WikibaseItem, "works as", {"actor", "singer", "teacher"}},
      {"date of birth", PropertyKind::Time, "born on", {}},
      {"position held", PropertyKind::WikibaseItem, "served as", {"mayor", "governor"}},
      {"country of citizenship", PropertyKind::WikibaseItem, "citizen of", {"India", "Nepal"}},
      {"educated at", PropertyKind::WikibaseItem, "studied at", {"Delhi", "Madras"}},
      {"award received", PropertyKind::WikibaseItem, "received", {"Padma", "Ratna"}},
      {"place of birth", PropertyKind::WikibaseItem, "born in", {"Pune", "Chennai", "Patna"}},
      {"member of sports team", PropertyKind::WikibaseItem, "played for", {"Mumbai", "Kerala"}},
      {"member of political party", PropertyKind::WikibaseItem, "member of", {"Janata", "Congress"}},
  };
  return t;
}

inline constexpr std::array<std::string_view, 2> kFirstNames = {"Asha", "Ravi"};
inline constexpr std::array<std::string_view, 3> kLastNames = {"Rao", "Sen", "Das"};
inline constexpr std::array<std::string_view, 3> kMonths = {"March", "July", "October"};
inline constexpr std::array<std::string_view, 3> kYears = {"1944", "1958", "1971"};
inline constexpr std::array<std::string_view, 2> kTermYears = {"2001", "2014"};
inline constexpr std::array<std::string_view, 4> kTitles = {"Early life", "Career",
                                                           "Personal life", "Biography"};
inline constexpr std::string_view kStartTime = "start time";
inline constexpr std::string_view kClauseJoiner = "and";
inline constexpr std::string_view kFrom = "from";
inline constexpr std::string_view kFullStop = ".";

/// Every word an English synthetic reference can contain, sorted.
inline std::vector<std::string> english_lexicon() {
  std::set<std::string> words;
  auto add = [&](std::string_view s) {
    for (auto& w : text::split_words(s)) words.insert(std::move(w));
  };
  for (const auto& t : relation_templates()) {
    add(t.clause);
    for (auto o : t.objects) add(o);
  }
  for (auto s : kFirstNames) add(s);
  for (auto s : kLastNames) add(s);
  for (auto s : kMonths) add(s);
  for (auto s : kYears) add(s);
  for (auto s : kTermYears) add(s);
  add(kClauseJoiner);
  add(kFrom);
  add(kFullStop);
  return {words.begin(), words.end()};
}

/// Fixed bijective word substitution: the i-th lexicon word becomes "y"
/// followed by i in base 26 (three letters); words outside the lexicon are
/// prefixed with "y:".
class Substitution {
 public:
  Substitution() {
    const auto lex = english_lexicon();
    for (size_t i = 0; i < lex.size(); ++i) {
      std::string code = "y";
      code += static_cast<char>('a' + (i / 676) % 26);
      code += static_cast<char>('a' + (i / 26) % 26);
      code += static_cast<char>('a' + i % 26);
      forward_.emplace(lex[i], code);
      backward_.emplace(code, lex[i]);
    }
  }

  std::string map_word(const std::string& w) const {
    auto it = forward_.find(w);
    return it == forward_.end() ? "y:" + w : it->second;
  }

  std::string unmap_word(const std::string& w) const {
    auto it = backward_.find(w);
    if (it != backward_.end()) return it->second;
    if (w.rfind("y:", 0) == 0) return w.substr(2);
    throw std::invalid_argument("substitution: \"" + w + "\" is not in the image");
  }

 private:
  std::map<std::string, std::string> forward_;
  std::map<std::string, std::string> backward_;
};

inline const Substitution& substitution() {
  static const Substitution s;
  return s;
}

inline std::string apply_transform(Transform t, std::string_view english) {
  auto words = text::split_words(english);
  switch (t) {
    case Transform::Identity: break;
    case Transform::Reverse: std::reverse(words.begin(), words.end()); break;
    case Transform::Substitute:
      for (auto& w : words) w = substitution().map_word(w);
      break;
  }
  return text::join(words);
}

inline std::string invert_transform(Transform t, std::string_view translated) {
  auto words = text::split_words(translated);
  switch (t) {
    case Transform::Identity: break;
    case Transform::Reverse: std::reverse(words.begin(), words.end()); break;
    case Transform::Substitute:
      for (auto& w : words) w = substitution().unmap_word(w);
      break;
  }
  return text::join(words);
}

/// Translator for the toy languages: exact in both directions between the
/// English tag and any other synthetic tag.
class SynthTranslator : public Translator {
 public:
  std::string translate(std::string_view text, std::string_view source,
                        std::string_view target) const override {
    if (source == target) return text::normalize_space(text);
    const Transform from = transform_for(source);
    const Transform to = transform_for(target);
    return apply_transform(to, invert_transform(from, text));
  }
};

namespace detail {

inline size_t pick(std::mt19937_64& rng, size_t n) { return static_cast<size_t>(rng() % n); }

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

struct Entity {
  std::string id;
  std::vector<FactTriple> facts;
  std::string section_title;
  std::string english_reference;
};

inline std::string render_reference(const std::vector<FactTriple>& facts) {
  std::vector<std::string> parts{facts.front().subject};
  for (size_t i = 0; i < facts.size(); ++i) {
    const auto& f = facts[i];
    const auto& tmpl = *std::find_if(relation_templates().begin(), relation_templates().end(),
                                     [&](const auto& t) { return t.relation == f.relation; });
    if (i) parts.emplace_back(kClauseJoiner);
    parts.emplace_back(tmpl.clause);
    parts.push_back(f.object);
    for (const auto& q : f.qualifiers) {
      parts.emplace_back(kFrom);
      parts.push_back(q.qual_value);
    }
  }
  parts.emplace_back(kFullStop);
  return text::join(parts);
}

inline std::vector<Entity> synth_entities(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  const auto& rels = relation_templates();
  std::vector<Entity> out;
  for (size_t e = 0; e < spec.instances_per_language; ++e) {
    Entity ent;
    ent.id = "Q" + std::to_string(1000 + e);
    const std::string subject = std::string(kFirstNames[detail::pick(rng, kFirstNames.size())]) +
                                " " + std::string(kLastNames[detail::pick(rng, kLastNames.size())]);
    const double u = detail::uniform01(rng);
    size_t n = 1;
    double acc = 0.0;
    for (size_t i = 0; i < spec.facts_distribution.size(); ++i) {
      acc += spec.facts_distribution[i];
      if (u < acc) {
        n = i + 1;
        break;
      }
      n = i + 1;
    }
    std::vector<size_t> order(rels.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[detail::pick(rng, i)]);
    // Facts keep template order, so one instance never permutes another.
    std::sort(order.begin(), order.begin() + static_cast<long>(n));
    for (size_t k = 0; k < n; ++k) {
      const auto& t = rels[order[k]];
      FactTriple f;
      f.subject = subject;
      f.relation = std::string(t.relation);
      f.property_kind = t.kind;
      if (t.objects.empty()) {
        f.object = std::string(kMonths[detail::pick(rng, kMonths.size())]) + " " +
                   std::string(kYears[detail::pick(rng, kYears.size())]);
      } else {
        f.object = std::string(t.objects[detail::pick(rng, t.objects.size())]);
      }
      if (t.relation == "position held" && detail::pick(rng, 2) == 0) {
        f.qualifiers.push_back(
            {std::string(kStartTime), std::string(kTermYears[detail::pick(rng, kTermYears.size())])});
      }
      ent.facts.push_back(std::move(f));
    }
    ent.section_title = std::string(kTitles[detail::pick(rng, kTitles.size())]);
    ent.english_reference = render_reference(ent.facts);
    out.push_back(std::move(ent));
  }
  return out;
}

/// One instance per (entity, language), grouped by language in spec order.
inline Corpus synth_corpus(const SynthSpec& spec) {
  const auto entities = synth_entities(spec);
  Corpus corpus;
  for (const auto& lang : spec.languages) {
    const Transform t = transform_for(lang);
    for (const auto& e : entities) {
      corpus.push_back({e.id, lang, e.facts, e.section_title,
                        apply_transform(t, e.english_reference)});
    }
  }
  return corpus;
}

/// Deterministic entity-level split: roughly `fraction` of entities (at
/// least one) go to the held-out side, in every language.
inline std::pair<Corpus, Corpus> split_by_entity(const Corpus& corpus, double fraction,
                                                 uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& inst : corpus) ids.push_back(inst.entity_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::mt19937_64 rng(seed);
  for (size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[detail::pick(rng, i)]);
  const size_t held = std::max<size_t>(1, static_cast<size_t>(std::llround(fraction * static_cast<double>(ids.size()))));
  std::set<std::string> held_out(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(held, ids.size())));
  std::pair<Corpus, Corpus> out;
  for (const auto& inst : corpus) {
    (held_out.count(inst.entity_id) ? out.second : out.first).push_back(inst);
  }
  return out;
}

}  // namespace xf2t::synth
