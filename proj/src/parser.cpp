// SPDX-License-Identifier: Apache-2.0

#include "promptlab/parser.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <initializer_list>

#include "promptlab/errors.hpp"
#include "promptlab/lexer.hpp"

namespace promptlab {

namespace {

constexpr std::array<std::string_view, 9> kFilters = {
    "lower", "upper", "trim", "capitalize", "length",
    "join",  "replace", "first", "last"};

struct Arity {
  std::size_t min;
  std::size_t max;
};

Arity filter_arity(std::string_view name) {
  if (name == "join") return {0, 1};
  if (name == "replace") return {2, 2};
  return {0, 0};
}

bool types_equal(const Value& a, const Value& b) {
  return a.type() == b.type() && a == b;
}

// Deeper nesting than any hand-written template needs; keeps hostile input
// from exhausting the stack in the parser or the renderer.
constexpr std::size_t kMaxNesting = 200;

class Parser {
 public:
  explicit Parser(std::string_view source)
      : source_size_(source.size()), tokens_(tokenize(source)) {}

  TemplateAst run() {
    TemplateAst ast;
    std::string_view terminator;
    std::size_t terminator_offset = 0;
    ast.nodes = parse_nodes({}, terminator, terminator_offset);
    return ast;
  }

 private:
  // Parses nodes until a `{% kw %}` tag whose keyword is in `stops`, which
  // is consumed up to (but not including) the rest of that tag. With an
  // empty stop set, parses to the end of input.
  NodeList parse_nodes(std::initializer_list<std::string_view> stops,
                       std::string_view& terminator,
                       std::size_t& terminator_offset) {
    NodeList nodes;
    while (!at_end()) {
      const Token& tok = peek();
      switch (tok.kind) {
        case TokenKind::Literal:
          nodes.push_back({LiteralNode{tok.text}, tok.offset});
          ++pos_;
          break;
        case TokenKind::InterpOpen: {
          ++pos_;
          Expr e = parse_expr();
          expect_kind(TokenKind::InterpClose, "'}}'");
          nodes.push_back({InterpNode{std::move(e)}, tok.offset});
          break;
        }
        case TokenKind::StmtOpen: {
          const Token& kw = peek(1);
          if (kw.kind == TokenKind::Keyword &&
              std::find(stops.begin(), stops.end(), kw.text) != stops.end()) {
            pos_ += 2;
            terminator = kw.text;
            terminator_offset = tok.offset;
            return nodes;
          }
          nodes.push_back(parse_statement());
          break;
        }
        default:
          fail("unexpected token '" + tok.text + "'", tok.offset);
      }
    }
    terminator = {};
    return nodes;
  }

  Node parse_statement() {
    DepthGuard guard(*this);
    const Token& open = next();  // {%
    const Token& kw = next();
    if (kw.kind != TokenKind::Keyword && kw.kind != TokenKind::Identifier) {
      fail("expected a statement keyword", kw.offset);
    }
    if (kw.text == "if") return parse_if(open.offset);
    if (kw.text == "for") return parse_for(open.offset);
    if (kw.text == "set") return parse_set(open.offset);
    if (kw.text == "elif" || kw.text == "else" || kw.text == "endif" ||
        kw.text == "endfor") {
      fail("'" + kw.text + "' without a matching opening block", open.offset);
    }
    fail("unknown statement '" + kw.text + "'", kw.offset);
  }

  Node parse_if(std::size_t open_offset) {
    IfNode node;
    node.cond = parse_expr();
    expect_kind(TokenKind::StmtClose, "'%}'");
    std::string_view term;
    std::size_t term_offset = 0;
    node.then_body = parse_nodes({"elif", "else", "endif"}, term, term_offset);
    for (;;) {
      if (term.empty()) fail("unclosed 'if' block", open_offset);
      if (term == "elif") {
        CondBranch branch;
        branch.cond = parse_expr();
        expect_kind(TokenKind::StmtClose, "'%}'");
        branch.body = parse_nodes({"elif", "else", "endif"}, term, term_offset);
        node.elifs.push_back(std::move(branch));
        continue;
      }
      if (term == "else") {
        expect_kind(TokenKind::StmtClose, "'%}'");
        node.else_body = parse_nodes({"endif"}, term, term_offset);
        if (term.empty()) fail("unclosed 'if' block", open_offset);
      }
      expect_kind(TokenKind::StmtClose, "'%}'");
      return {std::move(node), open_offset};
    }
  }

  Node parse_for(std::size_t open_offset) {
    ForNode node;
    const Token& var = next();
    if (var.kind != TokenKind::Identifier) {
      fail("expected loop variable name", var.offset);
    }
    node.var = var.text;
    expect_keyword("in");
    node.iterable = parse_expr();
    expect_kind(TokenKind::StmtClose, "'%}'");
    std::string_view term;
    std::size_t term_offset = 0;
    node.body = parse_nodes({"endfor"}, term, term_offset);
    if (term.empty()) fail("unclosed 'for' block", open_offset);
    expect_kind(TokenKind::StmtClose, "'%}'");
    return {std::move(node), open_offset};
  }

  Node parse_set(std::size_t open_offset) {
    SetNode node;
    const Token& var = next();
    if (var.kind != TokenKind::Identifier) {
      fail("expected variable name after 'set'", var.offset);
    }
    node.var = var.text;
    expect_punct("=");
    node.value = parse_expr();
    expect_kind(TokenKind::StmtClose, "'%}'");
    return {std::move(node), open_offset};
  }

  // ---- expressions -------------------------------------------------------

  Expr parse_expr() {
    DepthGuard guard(*this);
    return parse_or();
  }

  Expr parse_or() {
    Expr lhs = parse_and();
    ChainScope chain(*this);
    while (peek_keyword("or")) {
      std::size_t at = next().offset;
      chain.deeper();
      lhs = binary(Op::Or, std::move(lhs), parse_and(), at);
    }
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_not();
    ChainScope chain(*this);
    while (peek_keyword("and")) {
      std::size_t at = next().offset;
      chain.deeper();
      lhs = binary(Op::And, std::move(lhs), parse_not(), at);
    }
    return lhs;
  }

  Expr parse_not() {
    if (peek_keyword("not")) {
      DepthGuard guard(*this);
      std::size_t at = next().offset;
      return unary(Op::Not, parse_not(), at);
    }
    return parse_compare();
  }

  Expr parse_compare() {
    Expr lhs = parse_concat();
    ChainScope chain(*this);
    for (;;) {
      const Token& tok = peek();
      std::size_t at = tok.offset;
      if (tok.kind == TokenKind::Punct) {
        static constexpr std::pair<std::string_view, Op> kOps[] = {
            {"==", Op::Eq}, {"!=", Op::Ne}, {"<", Op::Lt},
            {"<=", Op::Le}, {">", Op::Gt},  {">=", Op::Ge}};
        auto it = std::find_if(std::begin(kOps), std::end(kOps),
                               [&](const auto& p) { return p.first == tok.text; });
        if (it == std::end(kOps)) return lhs;
        ++pos_;
        chain.deeper();
        lhs = binary(it->second, std::move(lhs), parse_concat(), at);
      } else if (peek_keyword("in")) {
        ++pos_;
        chain.deeper();
        lhs = binary(Op::In, std::move(lhs), parse_concat(), at);
      } else if (peek_keyword("not") && peek(1).kind == TokenKind::Keyword &&
                 peek(1).text == "in") {
        pos_ += 2;
        chain.deeper();
        lhs = unary(Op::Not, binary(Op::In, std::move(lhs), parse_concat(), at),
                    at);
      } else {
        return lhs;
      }
    }
  }

  Expr parse_concat() {
    Expr lhs = parse_additive();
    ChainScope chain(*this);
    while (peek_punct("~")) {
      std::size_t at = next().offset;
      chain.deeper();
      lhs = binary(Op::Concat, std::move(lhs), parse_additive(), at);
    }
    return lhs;
  }

  Expr parse_additive() {
    Expr lhs = parse_term();
    ChainScope chain(*this);
    for (;;) {
      if (peek_punct("+") || peek_punct("-")) {
        const Token& tok = next();
        chain.deeper();
        lhs = binary(tok.text == "+" ? Op::Add : Op::Sub, std::move(lhs),
                     parse_term(), tok.offset);
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    ChainScope chain(*this);
    for (;;) {
      if (peek_punct("*") || peek_punct("/") || peek_punct("%")) {
        const Token& tok = next();
        Op op = tok.text == "*" ? Op::Mul : tok.text == "/" ? Op::Div : Op::Mod;
        chain.deeper();
        lhs = binary(op, std::move(lhs), parse_unary(), tok.offset);
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (peek_punct("-")) {
      DepthGuard guard(*this);
      std::size_t at = next().offset;
      return unary(Op::Neg, parse_unary(), at);
    }
    return parse_filtered();
  }

  Expr parse_filtered() {
    Expr base = parse_postfix();
    ChainScope chain(*this);
    while (peek_punct("|")) {
      next();
      const Token& name = next();
      if (name.kind != TokenKind::Identifier) {
        fail("expected filter name after '|'", name.offset);
      }
      if (std::find(kFilters.begin(), kFilters.end(), name.text) == kFilters.end()) {
        fail("unknown filter '" + name.text + "'", name.offset);
      }
      Expr filter;
      filter.kind = Expr::Kind::Filter;
      filter.offset = name.offset;
      filter.name = name.text;
      filter.args.push_back(std::move(base));
      if (peek_punct("(")) {
        next();
        auto args = parse_arguments();
        for (auto& a : args) filter.args.push_back(std::move(a));
      }
      Arity arity = filter_arity(name.text);
      std::size_t given = filter.args.size() - 1;
      if (given < arity.min || given > arity.max) {
        fail("filter '" + name.text + "' takes " + std::to_string(arity.min) +
                 (arity.min == arity.max ? "" : "-" + std::to_string(arity.max)) +
                 " argument(s), got " + std::to_string(given),
             name.offset);
      }
      chain.deeper();
      base = std::move(filter);
    }
    return base;
  }

  Expr parse_postfix() {
    Expr base = parse_primary();
    ChainScope chain(*this);
    for (;;) {
      if (peek_punct(".")) {
        next();
        const Token& attr = next();
        if (attr.kind != TokenKind::Identifier && attr.kind != TokenKind::Keyword) {
          fail("expected attribute name after '.'", attr.offset);
        }
        Expr e;
        e.kind = Expr::Kind::Attr;
        e.offset = attr.offset;
        e.name = attr.text;
        e.args.push_back(std::move(base));
        chain.deeper();
        base = std::move(e);
      } else if (peek_punct("[")) {
        std::size_t at = next().offset;
        Expr e;
        e.kind = Expr::Kind::Index;
        e.offset = at;
        e.args.push_back(std::move(base));
        e.args.push_back(parse_expr());
        expect_punct("]");
        chain.deeper();
        base = std::move(e);
      } else {
        return base;
      }
    }
  }

  Expr parse_primary() {
    const Token& tok = next();
    Expr e;
    e.offset = tok.offset;
    switch (tok.kind) {
      case TokenKind::String:
        e.literal = tok.text;
        return e;
      case TokenKind::Integer: {
        std::int64_t v = 0;
        auto [ptr, ec] =
            std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
        if (ec != std::errc()) fail("integer literal out of range", tok.offset);
        e.literal = v;
        return e;
      }
      case TokenKind::Float:
        e.literal = std::stod(tok.text);
        return e;
      case TokenKind::Keyword:
        if (tok.text == "true" || tok.text == "True") {
          e.literal = true;
          return e;
        }
        if (tok.text == "false" || tok.text == "False") {
          e.literal = false;
          return e;
        }
        if (tok.text == "none" || tok.text == "None") {
          e.literal = nullptr;
          return e;
        }
        fail("unexpected keyword '" + tok.text + "' in expression", tok.offset);
      case TokenKind::Identifier:
        if (peek_punct("(")) {
          next();
          if (tok.text != "choice") {
            fail("unknown function '" + tok.text + "'", tok.offset);
          }
          e.kind = Expr::Kind::Call;
          e.name = tok.text;
          e.args = parse_arguments();
          if (e.args.size() != 1) {
            fail("choice() takes exactly one argument", tok.offset);
          }
          return e;
        }
        e.kind = Expr::Kind::Var;
        e.name = tok.text;
        return e;
      case TokenKind::Punct:
        if (tok.text == "(") {
          Expr inner = parse_expr();
          expect_punct(")");
          return inner;
        }
        if (tok.text == "[") {
          e.kind = Expr::Kind::List;
          if (peek_punct("]")) {
            next();
            return e;
          }
          for (;;) {
            e.args.push_back(parse_expr());
            if (peek_punct(",")) {
              next();
              if (peek_punct("]")) {  // trailing comma
                next();
                return e;
              }
              continue;
            }
            expect_punct("]");
            return e;
          }
        }
        break;
      default:
        break;
    }
    if (tok.kind == TokenKind::InterpClose || tok.kind == TokenKind::StmtClose) {
      fail("expected an expression before '" + tok.text + "'", tok.offset);
    }
    fail("unexpected '" + tok.text + "' in expression", tok.offset);
  }

  // After '(' has been consumed; consumes the closing ')'.
  std::vector<Expr> parse_arguments() {
    std::vector<Expr> args;
    if (peek_punct(")")) {
      next();
      return args;
    }
    for (;;) {
      args.push_back(parse_expr());
      if (peek_punct(",")) {
        next();
        continue;
      }
      expect_punct(")");
      return args;
    }
  }

  // ---- token helpers -----------------------------------------------------

  static Expr binary(Op op, Expr lhs, Expr rhs, std::size_t at) {
    Expr e;
    e.kind = Expr::Kind::Binary;
    e.op = op;
    e.offset = at;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }

  static Expr unary(Op op, Expr operand, std::size_t at) {
    Expr e;
    e.kind = Expr::Kind::Unary;
    e.op = op;
    e.offset = at;
    e.args.push_back(std::move(operand));
    return e;
  }

  bool at_end() const { return pos_ >= tokens_.size(); }

  const Token& peek(std::size_t ahead = 0) const {
    if (pos_ + ahead >= tokens_.size()) return eof_;
    return tokens_[pos_ + ahead];
  }

  const Token& next() {
    if (at_end()) fail("unexpected end of template", source_size_);
    return tokens_[pos_++];
  }

  bool peek_punct(std::string_view p) const {
    const Token& t = peek();
    return t.kind == TokenKind::Punct && t.text == p;
  }

  bool peek_keyword(std::string_view k) const {
    const Token& t = peek();
    return t.kind == TokenKind::Keyword && t.text == k;
  }

  void expect_kind(TokenKind kind, std::string_view what) {
    const Token& t = peek();
    if (at_end() || t.kind != kind) {
      fail("expected " + std::string(what) + ", found '" + t.text + "'",
           at_end() ? source_size_ : t.offset);
    }
    ++pos_;
  }

  void expect_punct(std::string_view p) {
    if (!peek_punct(p)) {
      fail("expected '" + std::string(p) + "', found '" + peek().text + "'",
           at_end() ? source_size_ : peek().offset);
    }
    ++pos_;
  }

  void expect_keyword(std::string_view k) {
    if (!peek_keyword(k)) {
      fail("expected '" + std::string(k) + "', found '" + peek().text + "'",
           at_end() ? source_size_ : peek().offset);
    }
    ++pos_;
  }

  [[noreturn]] static void fail(const std::string& message, std::size_t offset) {
    throw TemplateError("SyntaxError",
                        message + " at offset " + std::to_string(offset), offset);
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxNesting) {
        fail("nesting deeper than " + std::to_string(kMaxNesting) + " levels",
             parser.peek().offset);
      }
    }
    ~DepthGuard() { --parser.depth_; }
    Parser& parser;
  };

  // Each operator in a left-associative chain nests the tree one level;
  // the levels are released when the chain's parse function returns.
  struct ChainScope {
    explicit ChainScope(Parser& p) : parser(p), saved(p.depth_) {}
    ~ChainScope() { parser.depth_ = saved; }
    void deeper() {
      if (++parser.depth_ > kMaxNesting) {
        fail("nesting deeper than " + std::to_string(kMaxNesting) + " levels",
             parser.peek().offset);
      }
    }
    Parser& parser;
    std::size_t saved;
  };

  std::size_t source_size_;
  std::size_t depth_ = 0;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  Token eof_{TokenKind::Literal, "end of template", 0, 0};
};

}  // namespace

std::string_view op_symbol(Op op) {
  switch (op) {
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "%";
    case Op::Concat: return "~";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::In: return "in";
    case Op::Not: return "not";
    case Op::Neg: return "-";
  }
  return "?";
}

bool Expr::operator==(const Expr& other) const {
  return kind == other.kind && offset == other.offset && name == other.name &&
         op == other.op && types_equal(literal, other.literal) &&
         args == other.args;
}

bool CondBranch::operator==(const CondBranch& o) const {
  return cond == o.cond && body == o.body;
}

bool IfNode::operator==(const IfNode& o) const {
  return cond == o.cond && then_body == o.then_body && elifs == o.elifs &&
         else_body == o.else_body;
}

bool ForNode::operator==(const ForNode& o) const {
  return var == o.var && iterable == o.iterable && body == o.body;
}

std::span<const std::string_view> known_filters() { return kFilters; }

TemplateAst parse(std::string_view source) { return Parser(source).run(); }

}  // namespace promptlab
