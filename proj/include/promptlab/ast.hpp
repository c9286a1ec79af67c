// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "promptlab/value.hpp"

namespace promptlab {

enum class Op {
  Eq, Ne, Lt, Le, Gt, Ge,
  Add, Sub, Mul, Div, Mod, Concat,
  And, Or, In,
  Not, Neg,
};

std::string_view op_symbol(Op op);

/// Expression node. Children live in `args`:
///   List     items
///   Attr     [base]            name = attribute
///   Index    [base, key]
///   Call     call arguments    name = function
///   Filter   [base, args...]   name = filter
///   Binary   [lhs, rhs]        op
///   Unary    [operand]         op
/// Literal kinds carry their value in `literal`.
struct Expr {
  enum class Kind { Literal, List, Var, Attr, Index, Call, Filter, Binary, Unary };

  Kind kind = Kind::Literal;
  std::size_t offset = 0;
  std::string name;
  Op op = Op::Eq;
  Value literal;
  std::vector<Expr> args;

  bool operator==(const Expr& other) const;
};

struct Node;
using NodeList = std::vector<Node>;

struct LiteralNode {
  std::string text;
  bool operator==(const LiteralNode&) const = default;
};

struct InterpNode {
  Expr expr;
  bool operator==(const InterpNode&) const = default;
};

struct CondBranch {
  Expr cond;
  NodeList body;
  bool operator==(const CondBranch&) const;
};

struct IfNode {
  Expr cond;
  NodeList then_body;
  std::vector<CondBranch> elifs;
  NodeList else_body;
  bool operator==(const IfNode&) const;
};

struct ForNode {
  std::string var;
  Expr iterable;
  NodeList body;
  bool operator==(const ForNode&) const;
};

struct SetNode {
  std::string var;
  Expr value;
  bool operator==(const SetNode&) const = default;
};

struct Node {
  std::variant<LiteralNode, InterpNode, IfNode, ForNode, SetNode> data;
  std::size_t offset = 0;
  bool operator==(const Node&) const = default;
};

/// Parsed template. Immutable after parse and safe to share across threads.
struct TemplateAst {
  NodeList nodes;
  bool operator==(const TemplateAst&) const = default;
};

/// Depth-first visit of every expression in the tree, outer before inner.
template <typename Fn>
void visit_exprs(const Expr& expr, Fn&& fn) {
  fn(expr);
  for (const auto& child : expr.args) visit_exprs(child, fn);
}

template <typename Fn>
void visit_exprs(const NodeList& nodes, Fn&& fn) {
  for (const auto& node : nodes) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, InterpNode>) {
            visit_exprs(n.expr, fn);
          } else if constexpr (std::is_same_v<T, IfNode>) {
            visit_exprs(n.cond, fn);
            visit_exprs(n.then_body, fn);
            for (const auto& b : n.elifs) {
              visit_exprs(b.cond, fn);
              visit_exprs(b.body, fn);
            }
            visit_exprs(n.else_body, fn);
          } else if constexpr (std::is_same_v<T, ForNode>) {
            visit_exprs(n.iterable, fn);
            visit_exprs(n.body, fn);
          } else if constexpr (std::is_same_v<T, SetNode>) {
            visit_exprs(n.value, fn);
          }
        },
        node.data);
  }
}

}  // namespace promptlab
