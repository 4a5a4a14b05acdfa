#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "xf2t/text.hpp"

namespace xf2t {

/// Text translation between language tags. Implementations must be
/// deterministic for fixed inputs.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(std::string_view text, std::string_view source_language,
                                std::string_view target_language) const = 0;
};

/// Word-for-word lookup table per (source, target) pair. Words without an
/// entry, and pairs without a table, pass through unchanged.
class DictionaryTranslator : public Translator {
 public:
  void add(std::string source_language, std::string target_language, std::string word,
           std::string translation) {
    tables_[{std::move(source_language), std::move(target_language)}][std::move(word)] =
        std::move(translation);
  }

  std::string translate(std::string_view text, std::string_view source_language,
                        std::string_view target_language) const override {
    auto words = text::split_words(text);
    auto it = tables_.find({std::string(source_language), std::string(target_language)});
    if (it != tables_.end()) {
      for (auto& w : words) {
        auto hit = it->second.find(w);
        if (hit != it->second.end()) w = hit->second;
      }
    }
    return text::join(words);
  }

 private:
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> tables_;
};

}  // namespace xf2t
