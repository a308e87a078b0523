#include <cstdio>

#include "coffeescan/minijs.hpp"

namespace coffeescan::minijs {

namespace {

void walk_impl(const Node& node, std::vector<const Node*>& stack, const Visitor& visitor) {
  visitor(node, std::span<const Node* const>(stack.data(), stack.size()));
  stack.push_back(&node);
  for (const auto& c : node.children) walk_impl(*c, stack, visitor);
  stack.pop_back();
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\x%02x", static_cast<unsigned char>(c));
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
  return out;
}

class Printer {
 public:
  std::string out;

  void statement(const Node& n, int depth) {
    indent(depth);
    switch (n.kind) {
      case NodeKind::VarDecl:
        out += n.text + " ";
        for (std::size_t i = 0; i < n.names.size(); ++i) {
          if (i) out += ", ";
          out += n.names[i] + " = ";
          expr(*n.children[i]);
        }
        out += ";\n";
        return;
      case NodeKind::FunctionDecl:
        out += "function " + n.text;
        params(n.names);
        out += " ";
        block_body(n.child(0), depth);
        out += "\n";
        return;
      case NodeKind::Block:
        block_body(n, depth);
        out += "\n";
        return;
      case NodeKind::If:
        out += "if (";
        expr(n.child(0));
        out += ")\n";
        statement(n.child(1), depth + 1);
        if (n.children.size() > 2) {
          indent(depth);
          out += "else\n";
          statement(n.child(2), depth + 1);
        }
        return;
      case NodeKind::Return:
        out += "return";
        if (!n.children.empty()) {
          out += " ";
          expr(n.child(0));
        }
        out += ";\n";
        return;
      case NodeKind::ExprStmt:
        out += "(";
        expr(n.child(0));
        out += ");\n";
        return;
      default:
        out += "/* unexpected statement */\n";
    }
  }

  void block_body(const Node& block, int depth) {
    out += "{\n";
    for (const auto& s : block.children) statement(*s, depth + 1);
    indent(depth);
    out += "}";
  }

  void params(const std::vector<std::string>& names) {
    out += "(";
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i) out += ", ";
      out += names[i];
    }
    out += ")";
  }

  void expr(const Node& n) {
    switch (n.kind) {
      case NodeKind::Identifier: out += n.text; return;
      case NodeKind::StringLit: out += quote(n.text); return;
      case NodeKind::NumberLit: out += n.text; return;
      case NodeKind::BoolLit: out += n.flag ? "true" : "false"; return;
      case NodeKind::NullLit: out += "null"; return;
      case NodeKind::ArrayLit:
        out += "[";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          expr(*n.children[i]);
        }
        out += "]";
        return;
      case NodeKind::ObjectLit:
        out += "{";
        for (std::size_t i = 0; i < n.names.size(); ++i) {
          if (i) out += ", ";
          out += quote(n.names[i]) + ": ";
          expr(*n.children[i]);
        }
        out += "}";
        return;
      case NodeKind::Member:
        object_position(n.child(0));
        if (n.flag) {
          out += "[";
          expr(n.child(1));
          out += "]";
        } else {
          out += "." + n.text;
        }
        return;
      case NodeKind::Call:
        object_position(n.child(0));
        out += "(";
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          if (i > 1) out += ", ";
          expr(*n.children[i]);
        }
        out += ")";
        return;
      default: break;
    }
    out += "(";
    switch (n.kind) {
      case NodeKind::Assign:
      case NodeKind::Logical:
      case NodeKind::Binary:
        expr(n.child(0));
        out += " " + n.text + " ";
        expr(n.child(1));
        break;
      case NodeKind::Unary:
        out += n.text;
        if (n.text == "typeof") out += " ";
        expr(n.child(0));
        break;
      case NodeKind::Sequence:
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) out += ", ";
          expr(*n.children[i]);
        }
        break;
      case NodeKind::Conditional:
        expr(n.child(0));
        out += " ? ";
        expr(n.child(1));
        out += " : ";
        expr(n.child(2));
        break;
      case NodeKind::FunctionExpr:
        out += "function";
        if (!n.text.empty()) out += " " + n.text;
        params(n.names);
        out += " ";
        block_body(n.child(0), 0);
        break;
      case NodeKind::ArrowExpr:
        params(n.names);
        out += " => ";
        if (n.flag) {
          out += "(";
          expr(n.child(0));
          out += ")";
        } else {
          block_body(n.child(0), 0);
        }
        break;
      default:
        out += "/* unexpected expression */";
    }
    out += ")";
  }

  void object_position(const Node& n) {
    const bool bare = n.kind == NodeKind::Identifier || n.kind == NodeKind::Member ||
                      n.kind == NodeKind::Call;
    if (bare) {
      expr(n);
    } else {
      out += "(";
      expr(n);
      out += ")";
    }
  }

  void indent(int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }
};

void collect_leaves(const Node& n, std::vector<const Node*>& out) {
  switch (n.kind) {
    case NodeKind::Logical:
    case NodeKind::Binary:
    case NodeKind::Conditional:
    case NodeKind::Unary:
      for (const auto& c : n.children) collect_leaves(*c, out);
      return;
    default:
      out.push_back(&n);
  }
}

}  // namespace

void walk(const Node& root, const Visitor& visitor) {
  std::vector<const Node*> stack;
  walk_impl(root, stack, visitor);
}

std::size_t count_nodes(const Node& root) {
  std::size_t n = 1;
  for (const auto& c : root.children) n += count_nodes(*c);
  return n;
}

std::string print(const Node& root) {
  Printer p;
  if (root.kind == NodeKind::Program) {
    for (const auto& s : root.children) p.statement(*s, 0);
  } else {
    p.expr(root);
  }
  return p.out;
}

bool structurally_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.text != b.text || a.names != b.names || a.flag != b.flag ||
      a.children.size() != b.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!structurally_equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

std::vector<const Node*> leaf_expressions(const Node& expr) {
  std::vector<const Node*> out;
  collect_leaves(expr, out);
  return out;
}

std::string static_path(const Node& expr) {
  if (expr.kind == NodeKind::Identifier) return expr.text;
  if (expr.kind != NodeKind::Member) return {};
  std::string base = static_path(expr.child(0));
  if (base.empty()) return {};
  if (!expr.flag) return base + "." + expr.text;
  const Node& prop = expr.child(1);
  if (prop.kind == NodeKind::StringLit) return base + "." + prop.text;
  return {};
}

}  // namespace coffeescan::minijs
