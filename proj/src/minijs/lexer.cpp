#include <array>
#include <unordered_set>

#include "coffeescan/minijs.hpp"

namespace coffeescan::minijs {

bool SourceSpan::contains(const SourceSpan& inner) const noexcept {
  auto le = [](std::uint32_t l1, std::uint32_t c1, std::uint32_t l2, std::uint32_t c2) {
    return l1 < l2 || (l1 == l2 && c1 <= c2);
  };
  return le(start_line, start_col, inner.start_line, inner.start_col) &&
         le(inner.end_line, inner.end_col, end_line, end_col);
}

bool SourceSpan::starts_before(const SourceSpan& other) const noexcept {
  return start_line < other.start_line ||
         (start_line == other.start_line && start_col < other.start_col);
}

std::string to_string(const SourceSpan& span) {
  return span.file + ":" + std::to_string(span.start_line) + ":" + std::to_string(span.start_col);
}

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::StringLit: return "StringLit";
    case TokenKind::NumberLit: return "NumberLit";
    case TokenKind::BoolLit: return "BoolLit";
    case TokenKind::NullLit: return "NullLit";
    case TokenKind::Punct: return "Punct";
    case TokenKind::Keyword: return "Keyword";
    case TokenKind::End: return "End";
  }
  return "?";
}

ParseError::ParseError(std::string message, SourceSpan span, std::string expected)
    : std::runtime_error(to_string(span) + ": " + message), span_(std::move(span)),
      expected_(std::move(expected)) {}

LexError::LexError(LexErrc code, std::string message, SourceSpan span)
    : ParseError(std::move(message), std::move(span)), code_(code) {}

namespace {

const std::unordered_set<std::string_view>& keywords() {
  static const std::unordered_set<std::string_view> k = {
      "var",   "let",    "const",  "function", "if",     "else",   "return", "this",
      "typeof", "in",    "class",  "new",      "for",    "while",  "do",     "switch",
      "case",  "break",  "continue", "try",    "catch",  "finally", "throw", "delete",
      "void",  "instanceof", "yield", "async", "await",  "import", "export", "default",
      "super", "extends", "debugger", "with"};
  return k;
}

constexpr std::array<std::string_view, 14> kMultiPunct = {
    "===", "!==", "==", "!=", "=>", "+=", "<=", ">=", "&&", "||", "-=", "++", "--", "**"};
constexpr std::string_view kSinglePunct = "{}()[];,.?:=<>!+-*/%";

bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
bool ident_part(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Lexer {
 public:
  Lexer(std::string_view src, std::string_view file) : src_(src), file_(file) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_trivia();
      if (pos_ >= src_.size()) break;
      out.push_back(next());
    }
    return out;
  }

 private:
  SourceSpan span_from(std::size_t, std::uint32_t line, std::uint32_t col) const {
    return SourceSpan{std::string(file_), line, col, line_, col_};
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        const auto line = line_, col = col_;
        advance();
        advance();
        bool closed = false;
        while (pos_ < src_.size()) {
          if (src_[pos_] == '*' && peek(1) == '/') {
            advance();
            advance();
            closed = true;
            break;
          }
          advance();
        }
        if (!closed) {
          throw LexError(LexErrc::UnterminatedComment, "unterminated comment",
                         span_from(pos_, line, col));
        }
      } else if (static_cast<unsigned char>(c) == 0xEF && peek(1) == '\xBB' &&
                 peek(2) == '\xBF') {
        // UTF-8 byte order mark
        pos_ += 3;
      } else {
        break;
      }
    }
  }

  Token next() {
    const std::size_t start = pos_;
    const auto line = line_, col = col_;
    const char c = src_[pos_];
    auto finish = [&](TokenKind kind, std::string value = {}) {
      return Token{kind, std::string(src_.substr(start, pos_ - start)), std::move(value),
                   span_from(start, line, col)};
    };

    if (ident_start(c)) {
      while (pos_ < src_.size() && ident_part(src_[pos_])) advance();
      const std::string_view word = src_.substr(start, pos_ - start);
      if (word == "true" || word == "false") return finish(TokenKind::BoolLit);
      if (word == "null") return finish(TokenKind::NullLit);
      if (keywords().count(word)) return finish(TokenKind::Keyword);
      return finish(TokenKind::Identifier);
    }
    if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
      lex_number();
      return finish(TokenKind::NumberLit);
    }
    if (c == '"' || c == '\'') {
      std::string value = lex_string(c, line, col);
      return finish(TokenKind::StringLit, std::move(value));
    }
    for (std::string_view p : kMultiPunct) {
      if (src_.substr(pos_, p.size()) == p) {
        for (std::size_t i = 0; i < p.size(); ++i) advance();
        return finish(TokenKind::Punct);
      }
    }
    if (kSinglePunct.find(c) != std::string_view::npos) {
      advance();
      return finish(TokenKind::Punct);
    }
    advance();
    throw LexError(LexErrc::IllegalChar,
                   std::string("illegal character '") + c + "'", span_from(start, line, col));
  }

  void lex_number() {
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance();
      advance();
      while (is_hex(peek())) advance();
      return;
    }
    while (is_digit(peek())) advance();
    if (peek() == '.' && is_digit(peek(1))) {
      advance();
      while (is_digit(peek())) advance();
    } else if (peek() == '.' && !ident_start(peek(1))) {
      advance();
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
      advance();
      if (peek() == '+' || peek() == '-') advance();
      while (is_digit(peek())) advance();
    }
  }

  std::string lex_string(char quote, std::uint32_t line, std::uint32_t col) {
    advance();
    std::string value;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        throw LexError(LexErrc::UnterminatedString, "unterminated string literal",
                       span_from(pos_, line, col));
      }
      const char c = src_[pos_];
      if (c == quote) {
        advance();
        return value;
      }
      if (c != '\\') {
        value.push_back(c);
        advance();
        continue;
      }
      advance();
      if (pos_ >= src_.size()) continue;
      const char e = src_[pos_];
      advance();
      switch (e) {
        case 'n': value.push_back('\n'); break;
        case 't': value.push_back('\t'); break;
        case 'r': value.push_back('\r'); break;
        case 'b': value.push_back('\b'); break;
        case 'f': value.push_back('\f'); break;
        case 'v': value.push_back('\v'); break;
        case '0': value.push_back('\0'); break;
        case '\n': break;  // line continuation
        case 'x':
        case 'u': {
          const std::size_t n = e == 'x' ? 2 : 4;
          std::uint32_t cp = 0;
          for (std::size_t i = 0; i < n; ++i) {
            if (!is_hex(peek())) {
              throw LexError(LexErrc::IllegalChar, "bad escape sequence",
                             span_from(pos_, line_, col_));
            }
            const char h = peek();
            cp = cp * 16 + static_cast<std::uint32_t>(
                               is_digit(h) ? h - '0' : (h | 0x20) - 'a' + 10);
            advance();
          }
          append_utf8(value, cp);
          break;
        }
        default: value.push_back(e); break;
      }
    }
  }

  std::string_view src_;
  std::string_view file_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t col_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source, std::string_view file) {
  return Lexer(source, file).run();
}

}  // namespace coffeescan::minijs
