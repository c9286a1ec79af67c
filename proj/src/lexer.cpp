// SPDX-License-Identifier: Apache-2.0

#include "promptlab/lexer.hpp"

#include <algorithm>
#include <array>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

constexpr std::array<std::string_view, 17> kKeywords = {
    "if",  "elif", "else", "endif", "for",  "endfor", "in",    "set",  "and",
    "or",  "not",  "true", "false", "none", "True",   "False", "None"};

// Longest first so that "==" wins over "=".
constexpr std::array<std::string_view, 20> kPunct = {
    "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/",
    "%",  "~",  "(",  ")",  "[", "]", ",", ".", "|", "="};

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

class Lexer {
 public:
  explicit Lexer(std::string_view source) : src_(source) {}

  std::vector<Token> run() {
    while (pos_ < src_.size()) {
      lex_literal();
      if (pos_ >= src_.size()) break;
      lex_tag();
    }
    return std::move(tokens_);
  }

 private:
  void lex_literal() {
    std::size_t start = pos_;
    std::size_t next = std::string_view::npos;
    for (std::size_t i = pos_; i + 1 < src_.size(); ++i) {
      if (src_[i] == '{' && (src_[i + 1] == '{' || src_[i + 1] == '%')) {
        next = i;
        break;
      }
    }
    pos_ = next == std::string_view::npos ? src_.size() : next;
    if (pos_ > start) {
      tokens_.push_back({TokenKind::Literal,
                         std::string(src_.substr(start, pos_ - start)), start,
                         pos_ - start});
    }
  }

  void lex_tag() {
    const std::size_t open = pos_;
    const bool interp = src_[pos_ + 1] == '{';
    tokens_.push_back({interp ? TokenKind::InterpOpen : TokenKind::StmtOpen,
                       interp ? "{{" : "{%", open, 2});
    pos_ += 2;
    const char closer = interp ? '}' : '%';
    for (;;) {
      while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
      if (pos_ >= src_.size()) {
        throw TemplateError("UnterminatedDelimiter",
                            std::string("unterminated '") +
                                (interp ? "{{" : "{%") + "' opened at offset " +
                                std::to_string(open),
                            open);
      }
      if (src_[pos_] == closer && pos_ + 1 < src_.size() &&
          src_[pos_ + 1] == '}') {
        tokens_.push_back({interp ? TokenKind::InterpClose
                                  : TokenKind::StmtClose,
                           interp ? "}}" : "%}", pos_, 2});
        pos_ += 2;
        return;
      }
      lex_code_token();
    }
  }

  void lex_code_token() {
    const std::size_t start = pos_;
    const char c = src_[pos_];
    if (c == '\'' || c == '"') {
      lex_string(c);
      return;
    }
    if (is_digit(c)) {
      lex_number();
      return;
    }
    if (is_ident_start(c)) {
      while (pos_ < src_.size() &&
             (is_ident_start(src_[pos_]) || is_digit(src_[pos_]))) {
        ++pos_;
      }
      std::string word(src_.substr(start, pos_ - start));
      auto kind = is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier;
      tokens_.push_back({kind, std::move(word), start, pos_ - start});
      return;
    }
    for (auto p : kPunct) {
      if (src_.substr(pos_, p.size()) == p) {
        tokens_.push_back({TokenKind::Punct, std::string(p), start, p.size()});
        pos_ += p.size();
        return;
      }
    }
    throw TemplateError("SyntaxError",
                        "unexpected character '" + std::string(1, c) +
                            "' at offset " + std::to_string(start),
                        start);
  }

  void lex_string(char quote) {
    const std::size_t start = pos_;
    ++pos_;
    std::string text;
    while (pos_ < src_.size() && src_[pos_] != quote) {
      char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size()) {
        char esc = src_[pos_ + 1];
        switch (esc) {
          case 'n': text += '\n'; break;
          case 't': text += '\t'; break;
          case 'r': text += '\r'; break;
          case '0': text += '\0'; break;
          default: text += esc; break;  // \\ \' \" and anything else
        }
        pos_ += 2;
        continue;
      }
      text += c;
      ++pos_;
    }
    if (pos_ >= src_.size()) {
      throw TemplateError("UnterminatedDelimiter",
                          "unterminated string literal at offset " +
                              std::to_string(start),
                          start);
    }
    ++pos_;
    tokens_.push_back({TokenKind::String, std::move(text), start, pos_ - start});
  }

  void lex_number() {
    const std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' && is_digit(src_[pos_ + 1])) {
      is_float = true;
      ++pos_;
      while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && is_digit(src_[p])) {
        is_float = true;
        pos_ = p;
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
      }
    }
    tokens_.push_back({is_float ? TokenKind::Float : TokenKind::Integer,
                       std::string(src_.substr(start, pos_ - start)), start,
                       pos_ - start});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<Token> tokens_;
};

}  // namespace

std::string_view token_kind_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::Literal: return "LITERAL";
    case TokenKind::InterpOpen: return "INTERP_OPEN";
    case TokenKind::InterpClose: return "INTERP_CLOSE";
    case TokenKind::StmtOpen: return "STMT_OPEN";
    case TokenKind::StmtClose: return "STMT_CLOSE";
    case TokenKind::Identifier: return "IDENT";
    case TokenKind::Keyword: return "KEYWORD";
    case TokenKind::Integer: return "INT";
    case TokenKind::Float: return "FLOAT";
    case TokenKind::String: return "STR";
    case TokenKind::Punct: return "PUNCT";
  }
  return "?";
}

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view source) {
  return Lexer(source).run();
}

}  // namespace promptlab
