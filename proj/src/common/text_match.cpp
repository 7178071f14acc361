#include "telesim/common/text_match.hpp"

#include <cctype>
#include <sstream>

#include "telesim/common/error.hpp"

namespace telesim::text {

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    while (!current.empty() && current.back() == '\'') current.pop_back();
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && !current.empty()) {
      current.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Pattern::Phrase Pattern::parse_phrase(std::string_view phrase) {
  Phrase out;
  std::istringstream words{std::string(phrase)};
  std::string word;
  while (words >> word) {
    bool prefix = !word.empty() && word.back() == '*';
    if (prefix) word.pop_back();
    auto parts = tokenize(word);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      out.push_back(Term{parts[i], prefix && i + 1 == parts.size()});
    }
  }
  return out;
}

Pattern::Pattern(std::string_view source, const SynonymTable& synonyms)
    : source_(source) {
  std::istringstream words{std::string(source)};
  std::string word;
  while (words >> word) {
    if (word.front() == '@') {
      auto name = word.substr(1);
      auto it = synonyms.find(name);
      if (it == synonyms.end()) {
        throw Error(ErrorCode::InvalidArgument,
                    "pattern '" + source_ + "' references unknown synonym group @" + name);
      }
      Slot slot;
      for (const auto& alt : it->second) {
        auto phrase = parse_phrase(alt);
        if (!phrase.empty()) slot.push_back(std::move(phrase));
      }
      if (slot.empty()) {
        throw Error(ErrorCode::InvalidArgument, "synonym group @" + name + " is empty");
      }
      slots_.push_back(std::move(slot));
    } else {
      for (auto& term : parse_phrase(word)) slots_.push_back(Slot{Phrase{std::move(term)}});
    }
  }
  if (slots_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty pattern");
  }
}

bool Pattern::match_from(const Tokens& tokens, std::size_t slot, std::size_t pos) const {
  if (slot == slots_.size()) return true;
  for (const auto& phrase : slots_[slot]) {
    if (pos + phrase.size() > tokens.size()) continue;
    bool ok = true;
    for (std::size_t i = 0; i < phrase.size() && ok; ++i) {
      const auto& tok = tokens[pos + i];
      const auto& term = phrase[i];
      ok = term.prefix ? tok.compare(0, term.text.size(), term.text) == 0 : tok == term.text;
    }
    if (ok && match_from(tokens, slot + 1, pos + phrase.size())) return true;
  }
  return false;
}

bool Pattern::matches(const Tokens& tokens) const {
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    if (match_from(tokens, 0, start)) return true;
  }
  return false;
}

PatternSet::PatternSet(const std::vector<std::string>& sources, const SynonymTable& synonyms) {
  patterns_.reserve(sources.size());
  for (const auto& s : sources) patterns_.emplace_back(s, synonyms);
}

bool PatternSet::any(const Tokens& tokens) const {
  for (const auto& p : patterns_) {
    if (p.matches(tokens)) return true;
  }
  return false;
}

}  // namespace telesim::text
