#include <algorithm>
#include <stdexcept>

#include "coffeescan/detectors.hpp"

namespace coffeescan::detectors {

// Accepts the `[class]{n}` form only: ranges and literal characters inside
// the brackets, a fixed repetition count after them.
SecretMatcher::SecretMatcher(const std::string& pattern) {
  auto bad = [&] { return std::invalid_argument("unsupported secret pattern: " + pattern); };
  if (pattern.size() < 5 || pattern.front() != '[') throw bad();
  const std::size_t close = pattern.find(']', 1);
  if (close == std::string::npos || close == 1) throw bad();
  const std::string body = pattern.substr(1, close - 1);
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (i + 2 < body.size() && body[i + 1] == '-') {
      const auto lo = static_cast<unsigned char>(body[i]);
      const auto hi = static_cast<unsigned char>(body[i + 2]);
      if (lo > hi) throw bad();
      for (unsigned c = lo; c <= hi; ++c) cls_[c] = true;
      i += 2;
    } else {
      cls_[static_cast<unsigned char>(body[i])] = true;
    }
  }
  const std::string rep = pattern.substr(close + 1);
  if (rep.size() < 3 || rep.front() != '{' || rep.back() != '}') throw bad();
  const std::string digits = rep.substr(1, rep.size() - 2);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw bad();
  }
  length_ = std::stoul(digits);
  if (length_ == 0) throw bad();
}

std::vector<SecretMatcher::Match> SecretMatcher::find_all(std::string_view text) const {
  std::vector<Match> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!cls_[static_cast<unsigned char>(text[i])]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && cls_[static_cast<unsigned char>(text[j])]) ++j;
    if (j - i == length_) out.push_back({i, std::string(text.substr(i, length_))});
    i = j;
  }
  return out;
}

bool SecretMatcher::matches(std::string_view candidate) const {
  if (candidate.size() != length_) return false;
  return std::all_of(candidate.begin(), candidate.end(),
                     [&](char c) { return cls_[static_cast<unsigned char>(c)]; });
}

namespace {

struct Context {
  std::string_view text;  // enclosing string literal, else the whole line
  std::uint32_t line;
  std::uint32_t col;
};

Context locate(std::string_view src, std::size_t offset) {
  std::size_t line_start = 0;
  if (offset > 0) {
    const std::size_t nl = src.rfind('\n', offset - 1);
    if (nl != std::string_view::npos) line_start = nl + 1;
  }
  std::size_t line_end = src.find('\n', offset);
  if (line_end == std::string_view::npos) line_end = src.size();
  const auto line_no = static_cast<std::uint32_t>(std::count(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(offset), '\n') + 1);
  const auto col = static_cast<std::uint32_t>(offset - line_start + 1);

  // Find the quoted string (if any) that covers `offset` on this line.
  char quote = 0;
  std::size_t open = 0;
  for (std::size_t i = line_start; i < line_end; ++i) {
    const char c = src[i];
    if (quote) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        if (open <= offset && offset < i) return {src.substr(open, i - open), line_no, col};
        quote = 0;
      }
    } else if (c == '"' || c == '\'' || c == '`') {
      quote = c;
      open = i + 1;
    } else if (c == '/' && i + 1 < line_end && src[i + 1] == '/') {
      break;
    }
  }
  if (quote && open <= offset) return {src.substr(open, line_end - open), line_no, col};
  return {src.substr(line_start, line_end - line_start), line_no, col};
}

std::string clip(std::string_view s) {
  constexpr std::size_t kMax = 160;
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() > kMax) out = out.substr(0, kMax) + "...";
  return out;
}

}  // namespace

std::vector<Finding> detect_appsecret(const pkg::Package& package, const DetectorConfig& cfg) {
  const SecretMatcher matcher(cfg.active_secret_regex());
  std::vector<Finding> out;
  for (const pkg::FileEntry& entry : package.entries()) {
    const std::string_view text = entry.text();
    std::set<std::pair<std::string, DetectorKind>> seen;
    for (const auto& m : matcher.find_all(text)) {
      const Context ctx = locate(text, m.offset);
      const bool in_url = ctx.text.find("jscode2session") != std::string_view::npos ||
                          ctx.text.find("secret=") != std::string_view::npos;
      const DetectorKind kind = in_url ? DetectorKind::AppSecretInUrl : DetectorKind::AppSecretString;
      if (!seen.emplace(m.value, kind).second) continue;

      Finding f;
      f.detector = kind;
      f.file = entry.path;
      f.span = {entry.path, ctx.line, ctx.col, ctx.line, static_cast<std::uint32_t>(ctx.col + m.value.size())};
      f.evidence = clip(ctx.text);
      f.confidence = Confidence::High;
      f.candidate_secret = m.value;
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace coffeescan::detectors
