#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// MiniJS: the JavaScript subset the detectors reason about. Statements are
// declarations, expression statements, if/else, return, function
// declarations and blocks; there is no automatic semicolon insertion.
namespace coffeescan::minijs {

/// 1-based positions; columns count bytes. `end` points one past the last
/// character of the construct.
struct SourceSpan {
  std::string file;
  std::uint32_t start_line = 1;
  std::uint32_t start_col = 1;
  std::uint32_t end_line = 1;
  std::uint32_t end_col = 1;

  bool contains(const SourceSpan& inner) const noexcept;
  bool starts_before(const SourceSpan& other) const noexcept;
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

std::string to_string(const SourceSpan& span);

enum class TokenKind { Identifier, StringLit, NumberLit, BoolLit, NullLit, Punct, Keyword, End };

const char* to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;   // raw source text, quotes included for strings
  std::string value;  // decoded string value (StringLit only)
  SourceSpan span;
};

enum class LexErrc { UnterminatedString, UnterminatedComment, IllegalChar };

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, SourceSpan span, std::string expected = {});
  const SourceSpan& span() const noexcept { return span_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  SourceSpan span_;
  std::string expected_;
};

class LexError : public ParseError {
 public:
  LexError(LexErrc code, std::string message, SourceSpan span);
  LexErrc code() const noexcept { return code_; }

 private:
  LexErrc code_;
};

std::vector<Token> tokenize(std::string_view source, std::string_view file);

enum class NodeKind {
  Program,
  VarDecl,
  FunctionDecl,
  Block,
  If,
  Return,
  ExprStmt,
  Assign,
  Sequence,
  Conditional,
  Logical,
  Binary,
  Unary,
  Call,
  Member,
  Identifier,
  ObjectLit,
  ArrayLit,
  FunctionExpr,
  ArrowExpr,
  StringLit,
  NumberLit,
  BoolLit,
  NullLit,
};

const char* to_string(NodeKind kind);

struct Node;
using NodePtr = std::unique_ptr<Node>;

// Payload per kind:
//   VarDecl       text = var|let|const; names[i] declared with children[i]
//   FunctionDecl  text = name; names = params; children = {Block}
//   FunctionExpr  text = optional name; names = params; children = {Block}
//   ArrowExpr     names = params; children = {Block} or {expr} (flag = expression body)
//   If            children = {test, then, [else]}
//   Return        children = {} or {expr}
//   Assign        text = "=" or "+="; children = {target, value}
//   Logical/Binary text = operator; children = {lhs, rhs}
//   Unary         text = operator; children = {operand}
//   Call          children = {callee, args...}
//   Member        text = property name; children = {object} or, when flag
//                 (computed) is set, {object, property-expr}
//   Identifier    text = name ("this" included)
//   ObjectLit     names = keys; children = values (duplicates folded,
//                 last write wins, first position kept)
//   StringLit     text = decoded value
//   NumberLit     text = source spelling; number = value
//   BoolLit       flag = value
struct Node {
  NodeKind kind = NodeKind::Program;
  SourceSpan span;
  std::string text;
  std::vector<std::string> names;
  std::vector<NodePtr> children;
  double number = 0.0;
  bool flag = false;
  std::uint32_t id = 0;  // pre-order index, assigned by parse()

  const Node& child(std::size_t i) const { return *children.at(i); }
};

/// Parses a whole file. Throws ParseError (or LexError) on the first error.
NodePtr parse(std::string_view source, std::string_view file);

/// Pre-order traversal. `ancestry` lists the nodes from the Program root down
/// to, but excluding, the visited node.
using Visitor = std::function<void(const Node& node, std::span<const Node* const> ancestry)>;
void walk(const Node& root, const Visitor& visitor);

std::size_t count_nodes(const Node& root);

/// Renders the tree back to MiniJS with explicit parentheses. Re-parsing the
/// output yields a structurally equal tree.
std::string print(const Node& root);

/// Compares kind and payload recursively; spans and ids are ignored.
bool structurally_equal(const Node& a, const Node& b);

/// Operands of a boolean/comparison expression tree: descends through
/// Logical, Binary, Conditional and Unary nodes and returns the remaining
/// nodes left to right.
std::vector<const Node*> leaf_expressions(const Node& expr);

/// Dotted path for identifier/member chains ("wx.login", "b.a" for
/// b["a"]); empty when the expression is not a static chain.
std::string static_path(const Node& expr);

}  // namespace coffeescan::minijs
