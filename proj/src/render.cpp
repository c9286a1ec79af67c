// SPDX-License-Identifier: Apache-2.0

#include "promptlab/render.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

[[noreturn]] void type_mismatch(const std::string& message, std::size_t offset) {
  throw RenderError("TypeMismatch", message + " at offset " + std::to_string(offset),
                    offset);
}

bool is_number(const Value& v) { return v.is_number(); }

std::int64_t as_int(const Value& v) {
  if (v.is_number_unsigned()) return static_cast<std::int64_t>(v.get<std::uint64_t>());
  return v.get<std::int64_t>();
}

double as_double(const Value& v) {
  if (v.is_number_float()) return v.get<double>();
  if (v.is_number_unsigned()) return static_cast<double>(v.get<std::uint64_t>());
  return static_cast<double>(v.get<std::int64_t>());
}

std::string ascii_map(std::string s, int (*fn)(int)) {
  for (auto& c : s) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(fn(u));
  }
  return s;
}

int to_lower(int c) { return (c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c; }
int to_upper(int c) { return (c >= 'a' && c <= 'z') ? c - 'a' + 'A' : c; }

std::string python_replace(const std::string& s, const std::string& from,
                           const std::string& to) {
  std::string out;
  if (from.empty()) {
    out += to;
    for (const auto& cp : utf8_code_points(s)) {
      out += cp;
      out += to;
    }
    return out;
  }
  std::size_t pos = 0;
  for (;;) {
    auto hit = s.find(from, pos);
    if (hit == std::string::npos) break;
    out.append(s, pos, hit - pos);
    out += to;
    pos = hit + from.size();
  }
  out.append(s, pos, std::string::npos);
  return out;
}

class Renderer {
 public:
  explicit Renderer(RenderContext& ctx) : ctx_(ctx) { scopes_.emplace_back(); }

  void render_nodes(const NodeList& nodes, std::string& out) {
    for (const auto& node : nodes) {
      std::visit([&](const auto& n) { render_node(n, node.offset, out); },
                 node.data);
    }
  }

 private:
  void render_node(const LiteralNode& n, std::size_t, std::string& out) {
    out += n.text;
  }

  void render_node(const InterpNode& n, std::size_t, std::string& out) {
    out += to_display_string(eval(n.expr));
  }

  void render_node(const IfNode& n, std::size_t, std::string& out) {
    if (is_truthy(eval(n.cond))) {
      render_nodes(n.then_body, out);
      return;
    }
    for (const auto& branch : n.elifs) {
      if (is_truthy(eval(branch.cond))) {
        render_nodes(branch.body, out);
        return;
      }
    }
    render_nodes(n.else_body, out);
  }

  void render_node(const ForNode& n, std::size_t, std::string& out) {
    Value iterable = eval(n.iterable);
    std::vector<Value> items;
    if (iterable.is_array()) {
      items.assign(iterable.begin(), iterable.end());
    } else if (iterable.is_object()) {
      for (const auto& [key, _] : iterable.items()) items.emplace_back(key);
    } else if (iterable.is_string()) {
      for (auto& cp : utf8_code_points(iterable.get_ref<const std::string&>())) {
        items.emplace_back(std::move(cp));
      }
    } else {
      type_mismatch("cannot iterate over " + std::string(type_name(iterable)),
                    n.iterable.offset);
    }
    const std::size_t count = items.size();
    for (std::size_t i = 0; i < count; ++i) {
      scopes_.emplace_back();
      auto& scope = scopes_.back();
      scope[n.var] = std::move(items[i]);
      scope["loop"] = Value{{"index", i + 1},
                            {"index0", i},
                            {"first", i == 0},
                            {"last", i + 1 == count},
                            {"length", count}};
      render_nodes(n.body, out);
      scopes_.pop_back();
    }
  }

  void render_node(const SetNode& n, std::size_t, std::string&) {
    scopes_.back()[n.var] = eval(n.value);
  }

  // ---- expressions -------------------------------------------------------

  Value eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Literal:
        return e.literal;
      case Expr::Kind::List: {
        Value list = Value::array();
        for (const auto& item : e.args) list.push_back(eval(item));
        return list;
      }
      case Expr::Kind::Var:
        return lookup(e.name, e.offset);
      case Expr::Kind::Attr:
        return attribute(eval(e.args[0]), e.name, e.offset);
      case Expr::Kind::Index:
        return index(eval(e.args[0]), eval(e.args[1]), e.offset);
      case Expr::Kind::Call:
        return call_choice(e);
      case Expr::Kind::Filter:
        return apply_filter(e);
      case Expr::Kind::Unary:
        return unary(e);
      case Expr::Kind::Binary:
        return binary(e);
    }
    return nullptr;
  }

  Value lookup(const std::string& name, std::size_t offset) {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return found->second;
    }
    if (name == "answer_choices") {
      if (!ctx_.answer_choices) {
        throw RenderError("MissingField",
                          "'answer_choices' is not available here at offset " +
                              std::to_string(offset),
                          offset);
      }
      return Value(*ctx_.answer_choices);
    }
    if (ctx_.example != nullptr && ctx_.example->is_object()) {
      auto found = ctx_.example->find(name);
      if (found != ctx_.example->end()) return *found;
    }
    throw RenderError("MissingField",
                      "unknown field '" + name + "' at offset " + std::to_string(offset),
                      offset);
  }

  Value attribute(const Value& base, const std::string& name, std::size_t offset) {
    if (!base.is_object()) {
      type_mismatch("cannot read attribute '" + name + "' of " +
                        std::string(type_name(base)),
                    offset);
    }
    auto found = base.find(name);
    if (found == base.end()) {
      throw RenderError("MissingField",
                        "no key '" + name + "' at offset " + std::to_string(offset),
                        offset);
    }
    return *found;
  }

  Value index(const Value& base, const Value& key, std::size_t offset) {
    if (base.is_object()) {
      if (!key.is_string()) {
        type_mismatch("mapping keys must be strings", offset);
      }
      auto found = base.find(key.get_ref<const std::string&>());
      if (found == base.end()) {
        throw RenderError("MissingField",
                          "no key '" + key.get<std::string>() + "' at offset " +
                              std::to_string(offset),
                          offset);
      }
      return *found;
    }
    if (base.is_array() || base.is_string()) {
      if (!is_integer(key)) {
        type_mismatch("index must be an integer, got " + std::string(type_name(key)),
                      offset);
      }
      std::vector<std::string> cps;
      std::int64_t size = 0;
      if (base.is_array()) {
        size = static_cast<std::int64_t>(base.size());
      } else {
        cps = utf8_code_points(base.get_ref<const std::string&>());
        size = static_cast<std::int64_t>(cps.size());
      }
      std::int64_t i = as_int(key);
      if (i < 0) i += size;
      if (i < 0 || i >= size) {
        throw RenderError("IndexOutOfRange",
                          "index " + std::to_string(as_int(key)) +
                              " out of range for length " + std::to_string(size) +
                              " at offset " + std::to_string(offset),
                          offset);
      }
      if (base.is_array()) return base[static_cast<std::size_t>(i)];
      return cps[static_cast<std::size_t>(i)];
    }
    type_mismatch("cannot index into " + std::string(type_name(base)), offset);
  }

  Value call_choice(const Expr& e) {
    Value list = eval(e.args[0]);
    if (!list.is_array()) {
      throw RenderError("ChoiceError",
                        "choice() expects a list, got " +
                            std::string(type_name(list)) + " at offset " +
                            std::to_string(e.offset),
                        e.offset);
    }
    try {
      return list[ctx_.resolver.pick(list.size())];
    } catch (const RenderError& err) {
      throw RenderError(err.code(),
                        std::string(err.what()) + " at offset " + std::to_string(e.offset),
                        e.offset);
    }
  }

  const std::string& expect_string(const Value& v, const Expr& e) {
    if (!v.is_string()) {
      type_mismatch("filter '" + e.name + "' expects a string, got " +
                        std::string(type_name(v)),
                    e.offset);
    }
    return v.get_ref<const std::string&>();
  }

  Value apply_filter(const Expr& e) {
    Value base = eval(e.args[0]);
    const std::string& f = e.name;
    if (f == "lower") return ascii_map(expect_string(base, e), to_lower);
    if (f == "upper") return ascii_map(expect_string(base, e), to_upper);
    if (f == "trim") return std::string(trim(expect_string(base, e)));
    if (f == "capitalize") {
      auto cps = utf8_code_points(expect_string(base, e));
      std::string out;
      for (std::size_t i = 0; i < cps.size(); ++i) {
        out += ascii_map(cps[i], i == 0 ? to_upper : to_lower);
      }
      return out;
    }
    if (f == "length") {
      if (base.is_string()) {
        return utf8_code_points(base.get_ref<const std::string&>()).size();
      }
      if (base.is_array() || base.is_object()) return base.size();
      type_mismatch("filter 'length' expects a string, list or mapping, got " +
                        std::string(type_name(base)),
                    e.offset);
    }
    if (f == "join") {
      if (!base.is_array()) {
        type_mismatch("filter 'join' expects a list, got " +
                          std::string(type_name(base)),
                      e.offset);
      }
      std::string sep;
      if (e.args.size() > 1) sep = to_display_string(eval(e.args[1]));
      std::string out;
      bool first = true;
      for (const auto& item : base) {
        if (!first) out += sep;
        first = false;
        out += to_display_string(item);
      }
      return out;
    }
    if (f == "replace") {
      const std::string& s = expect_string(base, e);
      Value from = eval(e.args[1]);
      Value to = eval(e.args[2]);
      if (!from.is_string() || !to.is_string()) {
        type_mismatch("filter 'replace' expects string arguments", e.offset);
      }
      return python_replace(s, from.get<std::string>(), to.get<std::string>());
    }
    if (f == "first" || f == "last") {
      const bool first = f == "first";
      if (base.is_array()) {
        if (base.empty()) return nullptr;
        return first ? base.front() : base.back();
      }
      if (base.is_string()) {
        auto cps = utf8_code_points(base.get_ref<const std::string&>());
        if (cps.empty()) return std::string();
        return first ? cps.front() : cps.back();
      }
      type_mismatch("filter '" + f + "' expects a list or string, got " +
                        std::string(type_name(base)),
                    e.offset);
    }
    type_mismatch("unknown filter '" + f + "'", e.offset);
  }

  Value unary(const Expr& e) {
    Value v = eval(e.args[0]);
    if (e.op == Op::Not) return !is_truthy(v);
    if (!is_number(v)) {
      type_mismatch("cannot negate " + std::string(type_name(v)), e.offset);
    }
    if (is_integer(v)) {
      return static_cast<std::int64_t>(0ULL - static_cast<std::uint64_t>(as_int(v)));
    }
    return -v.get<double>();
  }

  Value binary(const Expr& e) {
    if (e.op == Op::And) {
      Value lhs = eval(e.args[0]);
      return is_truthy(lhs) ? eval(e.args[1]) : lhs;
    }
    if (e.op == Op::Or) {
      Value lhs = eval(e.args[0]);
      return is_truthy(lhs) ? lhs : eval(e.args[1]);
    }
    Value lhs = eval(e.args[0]);
    Value rhs = eval(e.args[1]);
    switch (e.op) {
      case Op::Eq:
        return lhs == rhs;
      case Op::Ne:
        return lhs != rhs;
      case Op::Lt:
      case Op::Le:
      case Op::Gt:
      case Op::Ge:
        return compare(e, lhs, rhs);
      case Op::Concat:
        return to_display_string(lhs) + to_display_string(rhs);
      case Op::In:
        return contains(e, rhs, lhs);
      case Op::Add:
        if (lhs.is_string() && rhs.is_string()) {
          return lhs.get<std::string>() + rhs.get<std::string>();
        }
        if (lhs.is_array() && rhs.is_array()) {
          Value out = lhs;
          for (const auto& item : rhs) out.push_back(item);
          return out;
        }
        return arithmetic(e, lhs, rhs);
      default:
        return arithmetic(e, lhs, rhs);
    }
  }

  Value arithmetic(const Expr& e, const Value& lhs, const Value& rhs) {
    if (!is_number(lhs) || !is_number(rhs)) {
      type_mismatch("operator '" + std::string(op_symbol(e.op)) + "' not supported for " +
                        std::string(type_name(lhs)) + " and " +
                        std::string(type_name(rhs)),
                    e.offset);
    }
    const bool ints = is_integer(lhs) && is_integer(rhs);
    switch (e.op) {
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
        if (ints) {
          auto a = static_cast<std::uint64_t>(as_int(lhs));
          auto b = static_cast<std::uint64_t>(as_int(rhs));
          std::uint64_t r = e.op == Op::Add ? a + b : e.op == Op::Sub ? a - b : a * b;
          return static_cast<std::int64_t>(r);
        } else {
          double a = as_double(lhs);
          double b = as_double(rhs);
          return e.op == Op::Add ? a + b : e.op == Op::Sub ? a - b : a * b;
        }
      case Op::Div: {
        double b = as_double(rhs);
        if (b == 0.0) {
          throw RenderError("DivisionByZero",
                            "division by zero at offset " + std::to_string(e.offset),
                            e.offset);
        }
        return as_double(lhs) / b;
      }
      case Op::Mod: {
        if (!ints) {
          type_mismatch("operator '%' requires integers", e.offset);
        }
        std::int64_t a = as_int(lhs);
        std::int64_t b = as_int(rhs);
        if (b == 0) {
          throw RenderError("DivisionByZero",
                            "modulo by zero at offset " + std::to_string(e.offset),
                            e.offset);
        }
        if (b == -1) return std::int64_t{0};
        std::int64_t r = a % b;
        if (r != 0 && ((r < 0) != (b < 0))) r += b;  // floor semantics
        return r;
      }
      default:
        break;
    }
    type_mismatch("unsupported operator", e.offset);
  }

  Value compare(const Expr& e, const Value& lhs, const Value& rhs) {
    int order = 0;
    if (is_number(lhs) && is_number(rhs)) {
      if (is_integer(lhs) && is_integer(rhs)) {
        auto a = as_int(lhs);
        auto b = as_int(rhs);
        order = a < b ? -1 : (a > b ? 1 : 0);
      } else {
        double a = as_double(lhs);
        double b = as_double(rhs);
        if (std::isnan(a) || std::isnan(b)) return false;
        order = a < b ? -1 : (a > b ? 1 : 0);
      }
    } else if (lhs.is_string() && rhs.is_string()) {
      order = lhs.get_ref<const std::string&>().compare(rhs.get_ref<const std::string&>());
      order = order < 0 ? -1 : (order > 0 ? 1 : 0);
    } else {
      type_mismatch("cannot compare " + std::string(type_name(lhs)) + " with " +
                        std::string(type_name(rhs)),
                    e.offset);
    }
    switch (e.op) {
      case Op::Lt: return order < 0;
      case Op::Le: return order <= 0;
      case Op::Gt: return order > 0;
      default: return order >= 0;
    }
  }

  Value contains(const Expr& e, const Value& haystack, const Value& needle) {
    if (haystack.is_string()) {
      if (!needle.is_string()) {
        type_mismatch("'in <string>' requires a string on the left", e.offset);
      }
      return haystack.get_ref<const std::string&>().find(
                 needle.get_ref<const std::string&>()) != std::string::npos;
    }
    if (haystack.is_array()) {
      for (const auto& item : haystack) {
        if (item == needle) return true;
      }
      return false;
    }
    if (haystack.is_object()) {
      return needle.is_string() && haystack.contains(needle.get<std::string>());
    }
    type_mismatch("'in' not supported for " + std::string(type_name(haystack)),
                  e.offset);
  }

  RenderContext& ctx_;
  std::vector<std::map<std::string, Value>> scopes_;
};

}  // namespace

std::string render(const TemplateAst& ast, RenderContext& ctx) {
  std::string out;
  Renderer(ctx).render_nodes(ast.nodes, out);
  return out;
}

std::vector<std::size_t> enumerate_choice_shape(const TemplateAst& ast,
                                                const RenderContext& ctx) {
  RenderContext probe{ctx.example, ctx.answer_choices, ChoiceResolver::recording()};
  render(ast, probe);
  return probe.resolver.lengths();
}

std::size_t for_each_choice_path(const TemplateAst& ast, const RenderContext& ctx,
                                 std::size_t max_variants,
                                 const ChoiceVisitor& visit) {
  std::vector<std::size_t> prefix;
  std::size_t count = 0;
  for (;;) {
    RenderContext probe{ctx.example, ctx.answer_choices,
                        ChoiceResolver::recording(prefix)};
    std::string text = render(ast, probe);
    if (count == max_variants) {
      throw RenderError("VariantLimitExceeded",
                        "more than " + std::to_string(max_variants) +
                            " choice combinations");
    }
    ++count;
    const auto& taken = probe.resolver.taken();
    const auto& lengths = probe.resolver.lengths();
    visit(text, taken);

    // Advance the odometer: bump the last position that still has room and
    // drop everything after it; the next render rediscovers the tail.
    std::size_t j = taken.size();
    while (j > 0 && taken[j - 1] + 1 >= lengths[j - 1]) --j;
    if (j == 0) return count;
    prefix.assign(taken.begin(), taken.begin() + static_cast<std::ptrdiff_t>(j));
    ++prefix.back();
  }
}

}  // namespace promptlab
