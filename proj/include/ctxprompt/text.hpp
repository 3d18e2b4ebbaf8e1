#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ctxprompt::text {

// Word characters are ASCII alphanumerics and any byte >= 0x80 (so UTF-8
// sequences stay inside words). A hyphen or apostrophe counts as a word
// character only when flanked by word characters on both sides, which keeps
// "person-4" and "don't" whole.
bool is_word_char(std::string_view s, std::size_t pos);

struct WordSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
};

std::vector<WordSpan> word_spans(std::string_view s);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Shared tokenization: lowercase, words are maximal word-character runs, every
// other non-space byte is a single-character token.
std::vector<std::string> tokenize(std::string_view s);

// join(tokenize(s), " ")
std::string normalize(std::string_view s);

// True for single-character tokens produced from punctuation.
bool is_punct_token(std::string_view token);

// Tokens used for scoring: tokenize() with punctuation tokens dropped.
std::vector<std::string> scoring_tokens(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

}  // namespace ctxprompt::text
