#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "xf2t/synth.hpp"

namespace xf2t::synth {
namespace {

std::string serialized(const SynthSpec& s) {
  std::ostringstream os;
  serialize_corpus(synth_corpus(s), os);
  return os.str();
}

TEST(Synth, SameSeedSameBytes) {
  SynthSpec s;
  EXPECT_EQ(serialized(s), serialized(s));
  SynthSpec other = s;
  other.seed = s.seed + 1;
  EXPECT_NE(serialized(s), serialized(other));
}

TEST(Synth, ShapeAndValidity) {
  const SynthSpec s;
  const Corpus c = synth_corpus(s);
  ASSERT_EQ(c.size(), s.languages.size() * s.instances_per_language);
  for (const auto& inst : c) {
    EXPECT_TRUE(std::holds_alternative<CorpusInstance>(validate_instance(inst))) << inst.entity_id;
    EXPECT_GE(inst.facts.size(), 1u);
    EXPECT_LE(inst.facts.size(), 4u);
    EXPECT_GE(text::split_words(inst.reference_text).size(), kMinReferenceWords);
  }
}

TEST(Synth, RelationsComeFromTheTopTen) {
  const std::set<std::string> top10 = {"occupation",   "date of birth",  "position held", "country of citizenship",
                                       "educated at",  "date of death",  "award received", "place of birth",
                                       "member of sports team", "member of political party"};
  for (const auto& inst : synth_corpus(SynthSpec{})) {
    for (const auto& f : inst.facts) EXPECT_TRUE(top10.count(f.relation)) << f.relation;
  }
}

TEST(Synth, FactCountFollowsDistribution) {
  SynthSpec s;
  s.languages = {"en-toy", "xx-rev"};
  s.instances_per_language = 4000;
  std::array<size_t, 4> counts{};
  const Corpus c = synth_corpus(s);
  for (const auto& inst : c) {
    if (inst.language == "en-toy") ++counts[inst.facts.size() - 1];
  }
  for (size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(static_cast<double>(counts[k]) / 4000.0, s.facts_distribution[k], 0.03) << k + 1;
  }
  s.facts_distribution = {1, 0, 0, 0};
  for (const auto& inst : synth_corpus(s)) EXPECT_EQ(inst.facts.size(), 1u);
}

TEST(Synth, LanguagesShareEntitiesAndFacts) {
  const Corpus c = synth_corpus(SynthSpec{});
  std::map<std::string, std::vector<const CorpusInstance*>> by_id;
  for (const auto& inst : c) by_id[inst.entity_id].push_back(&inst);
  for (const auto& [id, insts] : by_id) {
    ASSERT_EQ(insts.size(), 3u) << id;
    for (const auto* i : insts) {
      EXPECT_EQ(i->facts, insts.front()->facts);
      EXPECT_EQ(i->section_title, insts.front()->section_title);
    }
  }
}

TEST(Synth, TransformsInvertToEnglish) {
  const Corpus c = synth_corpus(SynthSpec{});
  std::map<std::string, std::string> english;
  for (const auto& inst : c) {
    if (inst.language == "en-toy") english[inst.entity_id] = inst.reference_text;
  }
  const SynthTranslator tr;
  for (const auto& inst : c) {
    const std::string& en = english.at(inst.entity_id);
    EXPECT_EQ(invert_transform(transform_for(inst.language), inst.reference_text), en);
    EXPECT_EQ(tr.translate(inst.reference_text, inst.language, "en-toy"), en);
    EXPECT_EQ(tr.translate(en, "en-toy", inst.language), inst.reference_text);
    if (inst.language == "xx-rev") {
      auto w = text::split_words(en);
      std::reverse(w.begin(), w.end());
      EXPECT_EQ(inst.reference_text, text::join(w));
    }
    if (inst.language == "yy-map") {
      // Every lexicon word is replaced; nothing English survives.
      for (const auto& w : text::split_words(inst.reference_text)) {
        EXPECT_EQ(w.size(), 4u) << w;
        EXPECT_EQ(w[0], 'y') << w;
      }
    }
  }
}

TEST(Synth, SubstitutionIsBijectiveAndPassesUnknownWords) {
  const auto lex = english_lexicon();
  std::set<std::string> codes;
  for (const auto& w : lex) {
    const auto code = substitution().map_word(w);
    EXPECT_TRUE(codes.insert(code).second) << w;
    EXPECT_EQ(substitution().unmap_word(code), w);
  }
  EXPECT_EQ(substitution().map_word("Zanzibar"), "y:Zanzibar");
  EXPECT_EQ(substitution().unmap_word("y:Zanzibar"), "Zanzibar");
  EXPECT_THROW(substitution().unmap_word("qqq"), std::invalid_argument);
}

TEST(Synth, InvalidSpecsRejected) {
  SynthSpec s;
  s.languages = {"en-toy"};
  EXPECT_THROW(validate(s), std::invalid_argument);
  s.languages = {"en-toy", "fr"};
  EXPECT_THROW(validate(s), std::invalid_argument);
  s.languages = {"xx-rev", "yy-map"};
  EXPECT_THROW(validate(s), std::invalid_argument);
  s = SynthSpec{};
  s.facts_distribution = {0.5, 0.5, 0.5, 0};
  EXPECT_THROW(validate(s), std::invalid_argument);
  s.facts_distribution = {1.2, -0.2, 0, 0};
  EXPECT_THROW(validate(s), std::invalid_argument);
}

TEST(Synth, SplitByEntityPartitionsEntities) {
  const Corpus c = synth_corpus(SynthSpec{});
  for (double fraction : {0.01, 0.2, 0.5}) {
    const auto [train, held] = split_by_entity(c, fraction, 3);
    EXPECT_EQ(train.size() + held.size(), c.size());
    std::set<std::string> train_ids, held_ids;
    for (const auto& i : train) train_ids.insert(i.entity_id);
    for (const auto& i : held) held_ids.insert(i.entity_id);
    for (const auto& id : held_ids) EXPECT_FALSE(train_ids.count(id)) << id;
    EXPECT_GE(held_ids.size(), 1u);
    EXPECT_EQ(held_ids.size(), std::max<size_t>(1, static_cast<size_t>(std::llround(fraction * 60))));
    // Every held-out entity keeps all of its languages.
    EXPECT_EQ(held.size(), 3 * held_ids.size());
  }
  EXPECT_EQ(split_by_entity(c, 0.2, 3).second, split_by_entity(c, 0.2, 3).second);
}

}  // namespace
}  // namespace xf2t::synth
