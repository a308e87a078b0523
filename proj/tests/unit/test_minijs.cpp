#include <doctest.h>

#include <random>

#include "coffeescan/minijs.hpp"
#include "fixtures.hpp"

using namespace coffeescan::minijs;

namespace {

std::string kinds(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += std::string(to_string(t.kind)) + ":" + t.text + " ";
  return out;
}

std::string strip_trivia(std::string_view src) {
  std::string out;
  for (char c : src) {
    if (c != ' ' && c != '\n' && c != '\t') out.push_back(c);
  }
  return out;
}

void check_spans(const Node& n) {
  for (const auto& c : n.children) {
    CHECK(n.span.contains(c->span));
    check_spans(*c);
  }
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(kinds(tokenize("var a=1;", "t.js")) ==
        "Keyword:var Identifier:a Punct:= NumberLit:1 Punct:; ");
  const auto s = tokenize("\"wxff60d952b9494209\"", "t.js");
  REQUIRE(s.size() == 1);
  CHECK(s[0].kind == TokenKind::StringLit);
  CHECK(s[0].value == "wxff60d952b9494209");
  CHECK(kinds(tokenize("a !== b === c", "t.js")) ==
        "Identifier:a Punct:!== Identifier:b Punct:=== Identifier:c ");
  CHECK(tokenize("true null false", "t.js")[1].kind == TokenKind::NullLit);
  CHECK(tokenize("'a\\x41\\u0042\\n'", "t.js")[0].value == "aAB\n");
  CHECK(tokenize("// only a comment\n/* and */", "t.js").empty());
}

TEST_CASE("tokenize errors") {
  auto code = [](std::string_view src) {
    try {
      tokenize(src, "t.js");
    } catch (const LexError& e) {
      return e.code();
    }
    FAIL("no error");
    return LexErrc::IllegalChar;
  };
  CHECK(code("/*x") == LexErrc::UnterminatedComment);
  CHECK(code("\"abc") == LexErrc::UnterminatedString);
  CHECK(code("a # b") == LexErrc::IllegalChar);
  try {
    tokenize("var a = 1;\n  @", "f.js");
  } catch (const LexError& e) {
    CHECK(e.span().start_line == 2);
    CHECK(e.span().start_col == 3);
  }
}

TEST_CASE("token texts cover the source") {
  const std::string src = read_fixture("figures/case1/app.js");
  std::string joined;
  for (const auto& t : tokenize(src, "app.js")) joined += t.text;
  CHECK(strip_trivia(joined) == strip_trivia(src));
}

TEST_CASE("parse empty and simple programs") {
  CHECK(parse("", "e.js")->children.empty());
  auto p = parse("var a = 1, b; a.x = false;", "t.js");
  REQUIRE(p->children.size() == 2);
  CHECK(p->child(0).kind == NodeKind::VarDecl);
  CHECK(p->child(0).names == std::vector<std::string>{"a", "b"});
  CHECK(p->child(0).child(1).text == "undefined");
  CHECK(p->child(1).child(0).kind == NodeKind::Assign);
  CHECK(parse("if (a) { b(); }", "t.js")->child(0).kind == NodeKind::If);
}

TEST_CASE("semicolons are required between statements") {
  CHECK_THROWS_AS(parse("a()\nb()", "t.js"), ParseError);
  CHECK_NOTHROW(parse("function f() { return 1 }", "t.js"));
  CHECK_NOTHROW(parse("a()", "t.js"));
}

TEST_CASE("unsupported constructs are parse errors") {
  CHECK_THROWS_AS(parse("class A {}", "t.js"), ParseError);
  CHECK_THROWS_AS(parse("var a = new Foo();", "t.js"), ParseError);
  CHECK_THROWS_AS(parse("var a = `tpl`;", "t.js"), ParseError);
  CHECK_THROWS_AS(parse("for (;;) {}", "t.js"), ParseError);
  try {
    parse("var a = ;", "t.js");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.span().start_col == 9);
    CHECK(!e.expected().empty());
  }
}

TEST_CASE("case 1 parses to an addService member call") {
  auto p = parse(read_fixture("figures/case1/app.js"), "app.js");
  int add_service = 0;
  walk(*p, [&](const Node& n, auto) {
    if (n.kind == NodeKind::Call && n.child(0).kind == NodeKind::Member &&
        n.child(0).text == "addService") {
      ++add_service;
      CHECK(n.span.start_line == 21);
    }
  });
  CHECK(add_service == 1);
  check_spans(*p);
}

TEST_CASE("verification expression decomposes into operand leaves") {
  auto p = parse(
      "t.scene && 1038==t.scene && \"wxff60d952b9494209\"==(t.referrerInfo && "
      "t.referrerInfo.appId ? t.referrerInfo.appId : \"\");",
      "t.js");
  const Node& e = p->child(0).child(0);
  CHECK(e.kind == NodeKind::Logical);
  const auto leaves = leaf_expressions(e);
  REQUIRE(leaves.size() == 8);
  CHECK(static_path(*leaves[0]) == "t.scene");
  CHECK(leaves[1]->number == 1038);
  CHECK(leaves[3]->text == "wxff60d952b9494209");
  CHECK(static_path(*leaves[5]) == "t.referrerInfo.appId");
  CHECK(static_path(*leaves[6]) == "t.referrerInfo.appId");
  CHECK(leaves[7]->kind == NodeKind::StringLit);
  bool conditional = false;
  walk(e, [&](const Node& n, auto) { conditional = conditional || n.kind == NodeKind::Conditional; });
  CHECK(conditional);
}

TEST_CASE("walk visits every node once with Program ancestry") {
  auto p = parse(read_fixture("figures/case2/app.js"), "app.js");
  std::size_t visits = 0;
  int auth = 0;
  walk(*p, [&](const Node& n, std::span<const Node* const> ancestry) {
    ++visits;
    if (!ancestry.empty()) CHECK(ancestry.front()->kind == NodeKind::Program);
    if (n.kind == NodeKind::Call && static_path(n.child(0)).ends_with("authPrivateMessage")) ++auth;
  });
  CHECK(visits == count_nodes(*p));
  CHECK(auth == 1);
}

TEST_CASE("object literal keys fold last write wins") {
  auto p = parse("var o = {a: 1, 'b': 2, a: 3, get: function () {}, m() { return 1; }};", "t.js");
  const Node& o = p->child(0).child(0);
  CHECK(o.names == std::vector<std::string>{"a", "b", "get", "m"});
  CHECK(o.child(0).number == 3);
  CHECK(o.child(3).kind == NodeKind::FunctionExpr);
}

TEST_CASE("static paths") {
  auto p = parse("b[\"a\"](1); x.y.z(); f()(); o[k]();", "t.js");
  CHECK(static_path(p->child(0).child(0).child(0)) == "b.a");
  CHECK(static_path(p->child(1).child(0).child(0)) == "x.y.z");
  CHECK(static_path(p->child(2).child(0).child(0)).empty());
  CHECK(static_path(p->child(3).child(0).child(0)).empty());
}

// ---- printer/parser roundtrip over random programs ---------------------------

namespace {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::string program() {
    std::string out;
    const int n = pick(1, 6);
    for (int i = 0; i < n; ++i) out += statement(0);
    return out;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::string ident() {
    static const char* names[] = {"a", "b", "wx", "that", "res", "t", "this"};
    return names[pick(0, 6)];
  }

  std::string statement(int depth) {
    switch (depth > 2 ? pick(0, 1) : pick(0, 5)) {
      case 0: return "var v" + std::to_string(pick(0, 9)) + " = " + expr(depth) + ";\n";
      case 1: {
        const std::string e = expr(depth);
        if (e.starts_with("{") || e.starts_with("function")) return "(" + e + ");\n";
        return e + ";\n";
      }
      case 2: return "if (" + expr(depth + 1) + ") { " + statement(depth + 1) + "} else " + statement(depth + 1);
      case 3: return "function f" + std::to_string(pick(0, 9)) + "(p, q) { " + statement(depth + 1) + "return " + expr(depth + 1) + "; }\n";
      case 4: return "{ " + statement(depth + 1) + "}\n";
      default: return "let w = " + expr(depth) + ", z;\n";
    }
  }

  std::string expr(int depth) {
    if (depth > 3) return atom();
    switch (pick(0, 11)) {
      case 0: return expr(depth + 1) + " && " + expr(depth + 1);
      case 1: return expr(depth + 1) + " === " + expr(depth + 1);
      case 2: return expr(depth + 1) + " ? " + expr(depth + 1) + " : " + expr(depth + 1);
      case 3: return ident() + "." + ident() + "(" + expr(depth + 1) + ", " + expr(depth + 1) + ")";
      case 4: return "{a: " + expr(depth + 1) + ", \"s k\": " + expr(depth + 1) + "}";
      case 5: return "[" + expr(depth + 1) + ", " + atom() + "]";
      case 6: return "function (x) { return " + expr(depth + 1) + "; }";
      case 7: return "((x, y) => (" + expr(depth + 1) + "))";
      case 8: return "!" + atom();
      case 9: return ident() + "[" + expr(depth + 1) + "]";
      case 10: return "(a = " + expr(depth + 1) + ")";
      default: return "(" + expr(depth + 1) + ", " + expr(depth + 1) + ")";
    }
  }

  std::string atom() {
    switch (pick(0, 5)) {
      case 0: return ident();
      case 1: return std::to_string(pick(0, 2000));
      case 2: return "\"s\\\"" + std::to_string(pick(0, 9)) + "\\n\"";
      case 3: return pick(0, 1) ? "true" : "false";
      case 4: return "null";
      default: return ident() + "." + ident();
    }
  }

  std::mt19937_64 rng_;
};

}  // namespace

TEST_CASE("parse(print(ast)) equals ast for random programs") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const std::string src = Gen(seed).program();
    CAPTURE(src);
    auto ast = parse(src, "r.js");
    const std::string printed = print(*ast);
    CAPTURE(printed);
    auto again = parse(printed, "r.js");
    CHECK(structurally_equal(*ast, *again));
    check_spans(*ast);
    std::string joined;
    for (const auto& t : tokenize(src, "r.js")) joined += t.text;
    CHECK(strip_trivia(joined) == strip_trivia(src));
  }
}
