#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "json.hpp"
#include "xf2t/text.hpp"

namespace xf2t {

// Structural markers shared by the linearizer and the aligner. Fact fields
// may never contain any of them.
inline constexpr std::string_view kSubjectMarker = "⟨S⟩";
inline constexpr std::string_view kRelationMarker = "⟨R⟩";
inline constexpr std::string_view kObjectMarker = "⟨O⟩";
inline constexpr std::string_view kTitleMarker = "⟨T⟩";
inline constexpr std::string_view kSepMarker = "⟨SEP⟩";
inline constexpr std::array<std::string_view, 5> kReservedMarkers = {
    kSubjectMarker, kRelationMarker, kObjectMarker, kTitleMarker, kSepMarker};

inline constexpr size_t kMinFacts = 1;
inline constexpr size_t kMaxFacts = 10;
inline constexpr size_t kMinReferenceWords = 5;
inline constexpr size_t kMaxReferenceWords = 100;

inline bool contains_marker(std::string_view s) {
  return std::any_of(kReservedMarkers.begin(), kReservedMarkers.end(),
                     [&](std::string_view m) { return s.find(m) != std::string_view::npos; });
}

enum class PropertyKind { WikibaseItem, Time, Quantity, Monolingualtext };

inline std::string_view to_string(PropertyKind k) {
  switch (k) {
    case PropertyKind::WikibaseItem: return "WikibaseItem";
    case PropertyKind::Time: return "Time";
    case PropertyKind::Quantity: return "Quantity";
    case PropertyKind::Monolingualtext: return "Monolingualtext";
  }
  return "WikibaseItem";
}

inline std::optional<PropertyKind> parse_property_kind(std::string_view s) {
  if (s == "WikibaseItem") return PropertyKind::WikibaseItem;
  if (s == "Time") return PropertyKind::Time;
  if (s == "Quantity") return PropertyKind::Quantity;
  if (s == "Monolingualtext") return PropertyKind::Monolingualtext;
  return std::nullopt;
}

struct Qualifier {
  std::string qual_relation;
  std::string qual_value;

  friend bool operator==(const Qualifier&, const Qualifier&) = default;
};

struct FactTriple {
  std::string subject;
  std::string relation;
  std::string object;
  PropertyKind property_kind = PropertyKind::WikibaseItem;
  std::vector<Qualifier> qualifiers;

  friend bool operator==(const FactTriple&, const FactTriple&) = default;
};

struct CorpusInstance {
  std::string entity_id;
  std::string language;
  std::vector<FactTriple> facts;
  std::string section_title;
  std::string reference_text;

  friend bool operator==(const CorpusInstance&, const CorpusInstance&) = default;
};

using Corpus = std::vector<CorpusInstance>;

struct Violation {
  std::string field;
  std::string reason;

  friend bool operator==(const Violation&, const Violation&) = default;
};

using Validated = std::variant<CorpusInstance, std::vector<Violation>>;

/// Raised for malformed corpus input; `line` is 1-based, 0 when unknown.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(size_t line, const std::string& reason)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + reason : reason),
        line_(line),
        reason_(reason) {}

  size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  size_t line_;
  std::string reason_;
};

namespace detail {

inline void check_text_field(std::vector<Violation>& out, const std::string& name,
                             const std::string& value) {
  if (text::split_words(value).empty()) {
    out.push_back({name, "empty field"});
  }
  if (contains_marker(value)) {
    out.push_back({name, "reserved marker in field"});
  }
}

}  // namespace detail

/// Checks every type invariant and reports all violations, not just the
/// first. `languages` restricts the language tag when non-empty.
inline Validated validate_instance(const CorpusInstance& inst,
                                   std::span<const std::string> languages = {}) {
  std::vector<Violation> v;
  if (inst.entity_id.empty()) v.push_back({"entity_id", "empty field"});
  if (inst.language.empty() || text::split_words(inst.language).size() != 1 ||
      text::split_words(inst.language).front() != inst.language) {
    v.push_back({"language", "language tag must be a single non-empty word"});
  } else if (!languages.empty() &&
             std::find(languages.begin(), languages.end(), inst.language) == languages.end()) {
    v.push_back({"language", "unknown language tag"});
  }
  if (inst.facts.size() < kMinFacts || inst.facts.size() > kMaxFacts) {
    v.push_back({"facts", "fact count out of range"});
  }
  for (size_t i = 0; i < inst.facts.size(); ++i) {
    const auto& f = inst.facts[i];
    const std::string p = "facts[" + std::to_string(i) + "].";
    detail::check_text_field(v, p + "subject", f.subject);
    detail::check_text_field(v, p + "relation", f.relation);
    detail::check_text_field(v, p + "object", f.object);
    for (size_t j = 0; j < f.qualifiers.size(); ++j) {
      const std::string q = p + "qualifiers[" + std::to_string(j) + "].";
      detail::check_text_field(v, q + "qual_relation", f.qualifiers[j].qual_relation);
      detail::check_text_field(v, q + "qual_value", f.qualifiers[j].qual_value);
    }
  }
  if (contains_marker(inst.section_title)) {
    v.push_back({"section_title", "reserved marker in field"});
  }
  const size_t words = text::word_count(inst.reference_text);
  if (words == 0) {
    v.push_back({"reference_text", "empty field"});
  } else if (words < kMinReferenceWords) {
    v.push_back({"reference_text", "word count < 5"});
  } else if (words > kMaxReferenceWords) {
    v.push_back({"reference_text", "word count > 100"});
  }
  if (v.empty()) return inst;
  return v;
}

inline bool is_valid(const Validated& r) { return std::holds_alternative<CorpusInstance>(r); }

// JSON mapping for the JSONL corpus record.

inline nlohmann::json to_json(const FactTriple& f) {
  nlohmann::json quals = nlohmann::json::array();
  for (const auto& q : f.qualifiers) {
    quals.push_back({{"qual_relation", q.qual_relation}, {"qual_value", q.qual_value}});
  }
  return {{"subject", f.subject},
          {"relation", f.relation},
          {"object", f.object},
          {"property_kind", std::string(to_string(f.property_kind))},
          {"qualifiers", std::move(quals)}};
}

inline nlohmann::json to_json(const CorpusInstance& inst) {
  nlohmann::json facts = nlohmann::json::array();
  for (const auto& f : inst.facts) facts.push_back(to_json(f));
  return {{"entity_id", inst.entity_id},
          {"language", inst.language},
          {"section_title", inst.section_title},
          {"reference_text", inst.reference_text},
          {"facts", std::move(facts)}};
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     nlohmann::json::value_t type) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
  if (it->type() != type) {
    throw std::invalid_argument(std::string("field \"") + key + "\" has wrong type");
  }
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key) {
  return require(obj, key, nlohmann::json::value_t::string).get<std::string>();
}

}  // namespace detail

inline FactTriple fact_from_json(const nlohmann::json& j) {
  using VT = nlohmann::json::value_t;
  if (!j.is_object()) throw std::invalid_argument("fact is not an object");
  FactTriple f;
  f.subject = detail::require_string(j, "subject");
  f.relation = detail::require_string(j, "relation");
  f.object = detail::require_string(j, "object");
  auto kind = parse_property_kind(detail::require_string(j, "property_kind"));
  if (!kind) throw std::invalid_argument("unknown property_kind");
  f.property_kind = *kind;
  if (j.contains("qualifiers")) {
    for (const auto& q : detail::require(j, "qualifiers", VT::array)) {
      if (!q.is_object()) throw std::invalid_argument("qualifier is not an object");
      f.qualifiers.push_back(
          {detail::require_string(q, "qual_relation"), detail::require_string(q, "qual_value")});
    }
  }
  return f;
}

inline CorpusInstance instance_from_json(const nlohmann::json& j) {
  using VT = nlohmann::json::value_t;
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  CorpusInstance inst;
  inst.entity_id = detail::require_string(j, "entity_id");
  inst.language = detail::require_string(j, "language");
  inst.section_title = detail::require_string(j, "section_title");
  inst.reference_text = detail::require_string(j, "reference_text");
  for (const auto& f : detail::require(j, "facts", VT::array)) {
    inst.facts.push_back(fact_from_json(f));
  }
  return inst;
}

inline std::string format_violations(const std::vector<Violation>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += "; ";
    out += vs[i].field + ": " + vs[i].reason;
  }
  return out;
}

/// Reads one JSON record per line. Blank lines are skipped. Throws
/// CorpusError on the first malformed, invalid, or duplicate record.
inline Corpus parse_corpus(std::istream& in, std::span<const std::string> languages = {}) {
  Corpus corpus;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::split_words(line).empty()) continue;
    CorpusInstance inst;
    try {
      inst = instance_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(lineno, std::string("malformed JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw CorpusError(lineno, e.what());
    }
    auto checked = validate_instance(inst, languages);
    if (auto* vs = std::get_if<std::vector<Violation>>(&checked)) {
      throw CorpusError(lineno, format_violations(*vs));
    }
    if (!seen.emplace(inst.entity_id, inst.language, inst.reference_text).second) {
      throw CorpusError(lineno, "duplicate (entity_id, language, reference_text)");
    }
    corpus.push_back(std::move(inst));
  }
  return corpus;
}

inline void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& inst : corpus) out << to_json(inst).dump() << '\n';
}

// Dataset statistics.

struct LanguageStats {
  size_t instances = 0;
  double avg_words = 0.0;
  size_t min_words = 0;
  size_t max_words = 0;
  double avg_facts = 0.0;
  /// Index i holds the fraction of instances with i+1 facts.
  std::array<double, kMaxFacts> fact_histogram{};
  std::vector<std::pair<std::string, size_t>> top_relations;
};

struct StatsReport {
  std::map<std::string, LanguageStats> per_language;
  LanguageStats overall;
};

namespace detail {

inline LanguageStats summarize(const std::vector<const CorpusInstance*>& group, size_t k) {
  LanguageStats s;
  s.instances = group.size();
  size_t total_words = 0;
  size_t total_facts = 0;
  std::array<size_t, kMaxFacts> counts{};
  std::map<std::string, size_t> relations;
  s.min_words = SIZE_MAX;
  for (const auto* inst : group) {
    const size_t w = text::word_count(inst->reference_text);
    total_words += w;
    s.min_words = std::min(s.min_words, w);
    s.max_words = std::max(s.max_words, w);
    total_facts += inst->facts.size();
    const size_t n = std::clamp<size_t>(inst->facts.size(), kMinFacts, kMaxFacts);
    ++counts[n - 1];
    for (const auto& f : inst->facts) ++relations[f.relation];
  }
  s.avg_words = static_cast<double>(total_words) / static_cast<double>(s.instances);
  s.avg_facts = static_cast<double>(total_facts) / static_cast<double>(s.instances);
  for (size_t i = 0; i < kMaxFacts; ++i) {
    s.fact_histogram[i] = static_cast<double>(counts[i]) / static_cast<double>(s.instances);
  }
  s.top_relations.assign(relations.begin(), relations.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // leaves ties in lexicographic order.
  std::stable_sort(s.top_relations.begin(), s.top_relations.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (s.top_relations.size() > k) s.top_relations.resize(k);
  return s;
}

}  // namespace detail

inline StatsReport corpus_stats(const Corpus& corpus, size_t k) {
  if (corpus.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  if (k == 0) throw std::invalid_argument("corpus_stats: k must be positive");
  std::map<std::string, std::vector<const CorpusInstance*>> groups;
  std::vector<const CorpusInstance*> all;
  for (const auto& inst : corpus) {
    groups[inst.language].push_back(&inst);
    all.push_back(&inst);
  }
  StatsReport r;
  for (const auto& [lang, group] : groups) r.per_language[lang] = detail::summarize(group, k);
  r.overall = detail::summarize(all, k);
  return r;
}

inline nlohmann::json to_json(const LanguageStats& s) {
  nlohmann::json hist = nlohmann::json::object();
  for (size_t i = 0; i < kMaxFacts; ++i) hist[std::to_string(i + 1)] = s.fact_histogram[i];
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [rel, n] : s.top_relations) top.push_back({{"relation", rel}, {"count", n}});
  return {{"instances", s.instances},   {"avg_words", s.avg_words},
          {"min_words", s.min_words},   {"max_words", s.max_words},
          {"avg_facts", s.avg_facts},   {"fact_histogram", std::move(hist)},
          {"top_relations", std::move(top)}};
}

inline nlohmann::json to_json(const StatsReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [lang, s] : r.per_language) per[lang] = to_json(s);
  return {{"per_language", std::move(per)}, {"overall", to_json(r.overall)}};
}

}  // namespace xf2t
