#include <charconv>
#include <cstdlib>

#include "coffeescan/minijs.hpp"

namespace coffeescan::minijs {

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Program: return "Program";
    case NodeKind::VarDecl: return "VarDecl";
    case NodeKind::FunctionDecl: return "FunctionDecl";
    case NodeKind::Block: return "Block";
    case NodeKind::If: return "If";
    case NodeKind::Return: return "Return";
    case NodeKind::ExprStmt: return "ExprStmt";
    case NodeKind::Assign: return "Assign";
    case NodeKind::Sequence: return "Sequence";
    case NodeKind::Conditional: return "Conditional";
    case NodeKind::Logical: return "Logical";
    case NodeKind::Binary: return "Binary";
    case NodeKind::Unary: return "Unary";
    case NodeKind::Call: return "Call";
    case NodeKind::Member: return "Member";
    case NodeKind::Identifier: return "Identifier";
    case NodeKind::ObjectLit: return "ObjectLit";
    case NodeKind::ArrayLit: return "ArrayLit";
    case NodeKind::FunctionExpr: return "FunctionExpr";
    case NodeKind::ArrowExpr: return "ArrowExpr";
    case NodeKind::StringLit: return "StringLit";
    case NodeKind::NumberLit: return "NumberLit";
    case NodeKind::BoolLit: return "BoolLit";
    case NodeKind::NullLit: return "NullLit";
  }
  return "?";
}

namespace {

double parse_number(const std::string& text) {
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    return static_cast<double>(std::strtoull(text.c_str() + 2, nullptr, 16));
  }
  return std::strtod(text.c_str(), nullptr);
}

class Parser {
 public:
  Parser(std::string_view source, std::string_view file)
      : tokens_(tokenize(source, file)), file_(file) {
    SourceSpan end_span{std::string(file), 1, 1, 1, 1};
    if (!tokens_.empty()) {
      const auto& last = tokens_.back().span;
      end_span = SourceSpan{std::string(file), last.end_line, last.end_col, last.end_line,
                            last.end_col};
    }
    tokens_.push_back(Token{TokenKind::End, "", "", end_span});
  }

  NodePtr program() {
    auto node = std::make_unique<Node>();
    node->kind = NodeKind::Program;
    while (!at_end()) node->children.push_back(statement());
    node->span = SourceSpan{std::string(file_), 1, 1, tokens_.back().span.end_line,
                            tokens_.back().span.end_col};
    return node;
  }

 private:
  const Token& cur() const { return tokens_[pos_]; }
  const Token& look(std::size_t ahead) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  bool at_end() const { return cur().kind == TokenKind::End; }

  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    const Token& t = look(ahead);
    return t.kind == TokenKind::Punct && t.text == p;
  }
  bool is_keyword(std::string_view k) const {
    return cur().kind == TokenKind::Keyword && cur().text == k;
  }

  [[noreturn]] void fail(const std::string& message, const std::string& expected = {}) const {
    const Token& t = cur();
    std::string found = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
    std::string msg = message + " (found " + found + ")";
    if (!expected.empty()) msg += ", expected " + expected;
    throw ParseError(msg, t.span, expected);
  }

  const Token& expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("unexpected token", "'" + std::string(p) + "'");
    return tokens_[pos_++];
  }

  std::string expect_identifier() {
    if (cur().kind != TokenKind::Identifier) fail("unexpected token", "identifier");
    return tokens_[pos_++].text;
  }

  const SourceSpan& prev_span() const { return tokens_[pos_ - 1].span; }

  NodePtr make(NodeKind kind, const SourceSpan& start) const {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->span = start;
    return n;
  }

  void close(Node& n) const {
    const SourceSpan& end = prev_span();
    n.span.end_line = end.end_line;
    n.span.end_col = end.end_col;
  }

  NodePtr close(NodePtr n) const {
    close(*n);
    return n;
  }

  // ---- statements ----------------------------------------------------------

  void end_statement() {
    if (is_punct(";")) {
      ++pos_;
      return;
    }
    if (is_punct("}") || at_end()) return;
    fail("missing semicolon", "';'");
  }

  NodePtr statement() {
    const SourceSpan start = cur().span;
    if (cur().kind == TokenKind::Keyword) {
      const std::string& k = cur().text;
      if (k == "var" || k == "let" || k == "const") return var_decl();
      if (k == "function") return function_decl();
      if (k == "if") return if_statement();
      if (k == "return") {
        auto n = make(NodeKind::Return, start);
        ++pos_;
        if (!is_punct(";") && !is_punct("}") && !at_end()) n->children.push_back(expression());
        end_statement();
        return close(std::move(n));
      }
      if (k != "this" && k != "typeof") fail("unsupported statement '" + k + "'");
    }
    if (is_punct("{")) return block();
    if (is_punct(";")) {
      // empty statement, represented as an empty block
      auto n = make(NodeKind::Block, start);
      ++pos_;
      return close(std::move(n));
    }
    auto n = make(NodeKind::ExprStmt, start);
    n->children.push_back(expression());
    end_statement();
    return close(std::move(n));
  }

  NodePtr var_decl() {
    auto n = make(NodeKind::VarDecl, cur().span);
    n->text = cur().text;
    ++pos_;
    do {
      const SourceSpan name_span = cur().span;
      n->names.push_back(expect_identifier());
      if (is_punct("=")) {
        ++pos_;
        n->children.push_back(assignment());
      } else {
        auto undef = make(NodeKind::Identifier, name_span);
        undef->text = "undefined";
        n->children.push_back(std::move(undef));
      }
    } while (is_punct(",") && (++pos_, true));
    end_statement();
    return close(std::move(n));
  }

  std::vector<std::string> params() {
    std::vector<std::string> out;
    expect_punct("(");
    while (!is_punct(")")) {
      out.push_back(expect_identifier());
      if (!is_punct(")")) expect_punct(",");
    }
    expect_punct(")");
    return out;
  }

  NodePtr function_decl() {
    auto n = make(NodeKind::FunctionDecl, cur().span);
    ++pos_;
    n->text = expect_identifier();
    n->names = params();
    n->children.push_back(block());
    return close(std::move(n));
  }

  NodePtr if_statement() {
    auto n = make(NodeKind::If, cur().span);
    ++pos_;
    expect_punct("(");
    n->children.push_back(expression());
    expect_punct(")");
    n->children.push_back(statement());
    if (is_keyword("else")) {
      ++pos_;
      n->children.push_back(statement());
    }
    return close(std::move(n));
  }

  NodePtr block() {
    auto n = make(NodeKind::Block, cur().span);
    expect_punct("{");
    while (!is_punct("}")) {
      if (at_end()) fail("unterminated block", "'}'");
      n->children.push_back(statement());
    }
    ++pos_;
    return close(std::move(n));
  }

  // ---- expressions ---------------------------------------------------------

  NodePtr expression() {
    NodePtr first = assignment();
    if (!is_punct(",")) return first;
    auto seq = make(NodeKind::Sequence, first->span);
    seq->children.push_back(std::move(first));
    while (is_punct(",")) {
      ++pos_;
      seq->children.push_back(assignment());
    }
    return close(std::move(seq));
  }

  bool arrow_ahead() const {
    if (cur().kind == TokenKind::Identifier && is_punct("=>", 1)) return true;
    if (!is_punct("(")) return false;
    std::size_t i = 1;
    int depth = 1;
    while (depth > 0) {
      const Token& t = look(i);
      if (t.kind == TokenKind::End) return false;
      if (t.kind == TokenKind::Punct) {
        if (t.text == "(") ++depth;
        if (t.text == ")") --depth;
      }
      ++i;
    }
    return is_punct("=>", i);
  }

  NodePtr arrow() {
    auto n = make(NodeKind::ArrowExpr, cur().span);
    if (cur().kind == TokenKind::Identifier) {
      n->names.push_back(tokens_[pos_++].text);
    } else {
      n->names = params();
    }
    expect_punct("=>");
    if (is_punct("{")) {
      n->children.push_back(block());
    } else {
      n->flag = true;
      n->children.push_back(assignment());
    }
    return close(std::move(n));
  }

  NodePtr assignment() {
    if (arrow_ahead()) return arrow();
    NodePtr lhs = conditional();
    if (is_punct("=") || is_punct("+=")) {
      if (lhs->kind != NodeKind::Identifier && lhs->kind != NodeKind::Member) {
        fail("invalid assignment target");
      }
      auto n = make(NodeKind::Assign, lhs->span);
      n->text = cur().text;
      ++pos_;
      n->children.push_back(std::move(lhs));
      n->children.push_back(assignment());
      return close(std::move(n));
    }
    return lhs;
  }

  NodePtr conditional() {
    NodePtr test = logical_or();
    if (!is_punct("?")) return test;
    auto n = make(NodeKind::Conditional, test->span);
    ++pos_;
    n->children.push_back(std::move(test));
    n->children.push_back(assignment());
    expect_punct(":");
    n->children.push_back(assignment());
    return close(std::move(n));
  }

  NodePtr binary_node(NodeKind kind, NodePtr lhs, std::string op, NodePtr rhs) {
    auto n = make(kind, lhs->span);
    n->text = std::move(op);
    n->children.push_back(std::move(lhs));
    n->children.push_back(std::move(rhs));
    return close(std::move(n));
  }

  NodePtr logical_or() {
    NodePtr lhs = logical_and();
    while (is_punct("||")) {
      ++pos_;
      lhs = binary_node(NodeKind::Logical, std::move(lhs), "||", logical_and());
    }
    return lhs;
  }

  NodePtr logical_and() {
    NodePtr lhs = equality();
    while (is_punct("&&")) {
      ++pos_;
      lhs = binary_node(NodeKind::Logical, std::move(lhs), "&&", equality());
    }
    return lhs;
  }

  NodePtr equality() {
    NodePtr lhs = relational();
    while (is_punct("==") || is_punct("!=") || is_punct("===") || is_punct("!==")) {
      std::string op = tokens_[pos_++].text;
      lhs = binary_node(NodeKind::Binary, std::move(lhs), std::move(op), relational());
    }
    return lhs;
  }

  NodePtr relational() {
    NodePtr lhs = additive();
    while (is_punct("<") || is_punct(">") || is_punct("<=") || is_punct(">=") ||
           is_keyword("in")) {
      std::string op = tokens_[pos_++].text;
      lhs = binary_node(NodeKind::Binary, std::move(lhs), std::move(op), additive());
    }
    return lhs;
  }

  NodePtr additive() {
    NodePtr lhs = multiplicative();
    while (is_punct("+") || is_punct("-")) {
      std::string op = tokens_[pos_++].text;
      lhs = binary_node(NodeKind::Binary, std::move(lhs), std::move(op), multiplicative());
    }
    return lhs;
  }

  NodePtr multiplicative() {
    NodePtr lhs = unary();
    while (is_punct("*") || is_punct("/") || is_punct("%")) {
      std::string op = tokens_[pos_++].text;
      lhs = binary_node(NodeKind::Binary, std::move(lhs), std::move(op), unary());
    }
    return lhs;
  }

  NodePtr unary() {
    if (is_punct("!") || is_punct("-") || is_keyword("typeof")) {
      auto n = make(NodeKind::Unary, cur().span);
      n->text = tokens_[pos_++].text;
      n->children.push_back(unary());
      return close(std::move(n));
    }
    return postfix();
  }

  NodePtr postfix() {
    NodePtr expr = primary();
    while (true) {
      if (is_punct(".")) {
        ++pos_;
        auto n = make(NodeKind::Member, expr->span);
        // Reserved words are legal property names: `a.default`, `p.then`.
        if (cur().kind == TokenKind::Identifier || cur().kind == TokenKind::Keyword ||
            cur().kind == TokenKind::BoolLit || cur().kind == TokenKind::NullLit) {
          n->text = tokens_[pos_++].text;
        } else {
          fail("unexpected token", "property name");
        }
        n->children.push_back(std::move(expr));
        expr = close(std::move(n));
      } else if (is_punct("[")) {
        ++pos_;
        auto n = make(NodeKind::Member, expr->span);
        n->flag = true;
        n->children.push_back(std::move(expr));
        n->children.push_back(expression());
        expect_punct("]");
        expr = close(std::move(n));
      } else if (is_punct("(")) {
        ++pos_;
        auto n = make(NodeKind::Call, expr->span);
        n->children.push_back(std::move(expr));
        while (!is_punct(")")) {
          n->children.push_back(assignment());
          if (!is_punct(")")) expect_punct(",");
        }
        ++pos_;
        expr = close(std::move(n));
      } else {
        return expr;
      }
    }
  }

  NodePtr function_expr() {
    auto n = make(NodeKind::FunctionExpr, cur().span);
    ++pos_;
    if (cur().kind == TokenKind::Identifier) n->text = tokens_[pos_++].text;
    n->names = params();
    n->children.push_back(block());
    return close(std::move(n));
  }

  std::string property_key() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::Identifier:
      case TokenKind::Keyword:
      case TokenKind::BoolLit:
      case TokenKind::NullLit:
      case TokenKind::NumberLit:
        ++pos_;
        return t.text;
      case TokenKind::StringLit:
        ++pos_;
        return t.value;
      default:
        fail("unexpected token", "property key");
    }
  }

  NodePtr object_literal() {
    auto n = make(NodeKind::ObjectLit, cur().span);
    expect_punct("{");
    while (!is_punct("}")) {
      const SourceSpan key_span = cur().span;
      const bool bare = cur().kind == TokenKind::Identifier;
      std::string key = property_key();
      NodePtr value;
      if (is_punct(":")) {
        ++pos_;
        value = assignment();
      } else if (is_punct("(")) {
        // method shorthand: key(params) { ... }
        auto fn = make(NodeKind::FunctionExpr, key_span);
        fn->names = params();
        fn->children.push_back(block());
        value = close(std::move(fn));
      } else if (bare && (is_punct(",") || is_punct("}"))) {
        value = make(NodeKind::Identifier, key_span);
        value->text = key;
      } else {
        fail("unexpected token", "':'");
      }
      std::size_t existing = n->names.size();
      for (std::size_t i = 0; i < n->names.size(); ++i) {
        if (n->names[i] == key) existing = i;
      }
      if (existing < n->names.size()) {
        n->children[existing] = std::move(value);
      } else {
        n->names.push_back(std::move(key));
        n->children.push_back(std::move(value));
      }
      if (!is_punct("}")) expect_punct(",");
    }
    ++pos_;
    return close(std::move(n));
  }

  NodePtr array_literal() {
    auto n = make(NodeKind::ArrayLit, cur().span);
    expect_punct("[");
    while (!is_punct("]")) {
      n->children.push_back(assignment());
      if (!is_punct("]")) expect_punct(",");
    }
    ++pos_;
    return close(std::move(n));
  }

  NodePtr primary() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::Identifier: {
        auto n = make(NodeKind::Identifier, t.span);
        n->text = t.text;
        ++pos_;
        return n;
      }
      case TokenKind::StringLit: {
        auto n = make(NodeKind::StringLit, t.span);
        n->text = t.value;
        ++pos_;
        return n;
      }
      case TokenKind::NumberLit: {
        auto n = make(NodeKind::NumberLit, t.span);
        n->text = t.text;
        n->number = parse_number(t.text);
        ++pos_;
        return n;
      }
      case TokenKind::BoolLit: {
        auto n = make(NodeKind::BoolLit, t.span);
        n->flag = t.text == "true";
        ++pos_;
        return n;
      }
      case TokenKind::NullLit: {
        auto n = make(NodeKind::NullLit, t.span);
        ++pos_;
        return n;
      }
      case TokenKind::Keyword:
        if (t.text == "this") {
          auto n = make(NodeKind::Identifier, t.span);
          n->text = "this";
          ++pos_;
          return n;
        }
        if (t.text == "function") return function_expr();
        fail("unsupported construct '" + t.text + "'");
      case TokenKind::Punct:
        if (t.text == "(") {
          ++pos_;
          NodePtr inner = expression();
          expect_punct(")");
          return inner;
        }
        if (t.text == "{") return object_literal();
        if (t.text == "[") return array_literal();
        fail("unexpected token", "expression");
      case TokenKind::End:
        fail("unexpected end of input", "expression");
    }
    fail("unexpected token", "expression");
  }

  std::vector<Token> tokens_;
  std::string_view file_;
  std::size_t pos_ = 0;
};

void assign_ids(Node& node, std::uint32_t& next) {
  node.id = next++;
  for (auto& c : node.children) assign_ids(*c, next);
}

}  // namespace

NodePtr parse(std::string_view source, std::string_view file) {
  Parser parser(source, file);
  NodePtr root = parser.program();
  std::uint32_t next = 0;
  assign_ids(*root, next);
  return root;
}

}  // namespace coffeescan::minijs
