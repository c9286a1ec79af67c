// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace promptlab {

enum class TokenKind {
  Literal,       // raw text between tags; `|||` stays inside it
  InterpOpen,    // {{
  InterpClose,   // }}
  StmtOpen,      // {%
  StmtClose,     // %}
  Identifier,
  Keyword,
  Integer,
  Float,
  String,        // text holds the unescaped contents
  Punct,
};

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset = 0;  // byte offset of the first source byte
  std::size_t length = 0;  // source bytes covered, including quotes

  bool operator==(const Token&) const = default;
};

std::string_view token_kind_name(TokenKind kind);

bool is_keyword(std::string_view word);

/// Splits a template into tokens. Throws TemplateError with code
/// UnterminatedDelimiter when a `{{`, `{%` or string literal never closes,
/// or SyntaxError on a character that starts no token.
std::vector<Token> tokenize(std::string_view source);

}  // namespace promptlab
