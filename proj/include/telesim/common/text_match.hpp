#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace telesim::text {

using Tokens = std::vector<std::string>;

/// Lower-cases and splits on anything that is not a letter, digit or an
/// in-word apostrophe. "I've had NO fever!" -> {"i've", "had", "no", "fever"}.
Tokens tokenize(std::string_view text);

/// Named alternatives usable inside patterns as `@name`. Each alternative is
/// itself a phrase (space separated, may use trailing `*` for prefixes).
using SynonymTable = std::map<std::string, std::vector<std::string>>;

/// A case-insensitive phrase matcher. Syntax: whitespace-separated terms that
/// must appear consecutively in the tokenized text. A term ending in `*`
/// matches any token with that prefix; a term `@group` matches any phrase from
/// the synonym group.
class Pattern {
 public:
  Pattern(std::string_view source, const SynonymTable& synonyms);

  bool matches(const Tokens& tokens) const;
  bool matches(std::string_view text) const { return matches(tokenize(text)); }

  const std::string& source() const noexcept { return source_; }

 private:
  struct Term {
    std::string text;
    bool prefix = false;
  };
  using Phrase = std::vector<Term>;
  // One slot per pattern term; a slot holds its alternative phrases.
  using Slot = std::vector<Phrase>;

  bool match_from(const Tokens& tokens, std::size_t slot, std::size_t pos) const;
  static Phrase parse_phrase(std::string_view phrase);

  std::string source_;
  std::vector<Slot> slots_;
};

class PatternSet {
 public:
  PatternSet() = default;
  PatternSet(const std::vector<std::string>& sources, const SynonymTable& synonyms);

  bool any(const Tokens& tokens) const;
  bool any(std::string_view text) const { return any(tokenize(text)); }
  bool empty() const noexcept { return patterns_.empty(); }
  const std::vector<Pattern>& patterns() const noexcept { return patterns_; }

 private:
  std::vector<Pattern> patterns_;
};

}  // namespace telesim::text
