#include <algorithm>
#include <cctype>

#include "coffeescan/detectors.hpp"

namespace coffeescan::detectors {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// "getJCBSessionKey" -> get, JCB, Session, Key
std::vector<std::string_view> camel_pieces(std::string_view run) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i < run.size(); ++i) {
    const char prev = run[i - 1], cur = run[i];
    const bool lower_to_upper = !is_upper(prev) && is_upper(cur);
    const bool acronym_end =
        is_upper(prev) && is_upper(cur) && i + 1 < run.size() && is_lower(run[i + 1]);
    if (lower_to_upper || acronym_end) {
      out.push_back(run.substr(start, i - start));
      start = i;
    }
  }
  out.push_back(run.substr(start));
  return out;
}

void greedy(const std::string& word, const std::set<std::string>& dictionary,
            std::size_t longest, std::vector<std::string>& out) {
  std::string residue;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t best = 0;
    for (std::size_t len = std::min(longest, word.size() - i); len > 0; --len) {
      if (dictionary.count(word.substr(i, len))) {
        best = len;
        break;
      }
    }
    if (best == 0) {
      residue.push_back(word[i++]);
      continue;
    }
    if (!residue.empty()) out.push_back(std::move(residue));
    residue.clear();
    out.push_back(word.substr(i, best));
    i += best;
  }
  if (!residue.empty()) out.push_back(std::move(residue));
}

bool contains_icase(std::string_view hay, std::string_view needle) {
  return lower(hay).find(needle) != std::string::npos;
}

}  // namespace

const char* to_string(UrlClass c) {
  switch (c) {
    case UrlClass::None: return "None";
    case UrlClass::Duplication: return "Duplication";
    case UrlClass::Getter: return "Getter";
  }
  return "?";
}

std::vector<std::string> word_segment(std::string_view s, const std::set<std::string>& dictionary) {
  std::size_t longest = 0;
  for (const auto& w : dictionary) longest = std::max(longest, w.size());

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_alnum(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_alnum(s[j])) ++j;
    for (std::string_view piece : camel_pieces(s.substr(i, j - i))) {
      greedy(lower(piece), dictionary, longest, out);
    }
    i = j;
  }
  return out;
}

bool looks_like_url(std::string_view s) {
  return s.find('/') != std::string_view::npos || s.find('?') != std::string_view::npos;
}

UrlClass classify_url(std::string_view s, const DetectorConfig& cfg) {
  if (contains_icase(s, "jscode2session") || contains_icase(s, "code2session")) {
    return UrlClass::Duplication;
  }

  std::string_view rest = s;
  if (auto scheme = rest.find("://"); scheme != std::string_view::npos) rest.remove_prefix(scheme + 3);
  if (!rest.empty() && rest.front() != '/') {
    const std::size_t slash = rest.find_first_of("/?#");
    const std::string host = lower(rest.substr(0, slash));
    if (host == "api.weixin.qq.com" || host.starts_with("api.weixin.qq.com:")) {
      return UrlClass::Duplication;
    }
  }

  std::string_view path = s, query;
  if (auto q = s.find('?'); q != std::string_view::npos) {
    path = s.substr(0, q);
    query = s.substr(q + 1);
  }
  if (auto h = query.find('#'); h != std::string_view::npos) query = query.substr(0, h);
  if (auto h = path.find('#'); h != std::string_view::npos) path = path.substr(0, h);
  while (!path.empty() && path.back() == '/') path.remove_suffix(1);

  std::vector<std::string_view> candidates;
  const std::size_t last = path.rfind('/');
  candidates.push_back(last == std::string_view::npos ? path : path.substr(last + 1));
  while (!query.empty()) {
    const std::size_t amp = query.find('&');
    std::string_view pair = query.substr(0, amp);
    if (auto eq = pair.find('='); eq != std::string_view::npos) candidates.push_back(pair.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }

  for (std::string_view c : candidates) {
    const auto words = word_segment(c, cfg.url_keyword_dictionary);
    auto has = [&](const char* w) { return std::find(words.begin(), words.end(), w) != words.end(); };
    if (has("session") && (has("key") || has("get") || has("new"))) return UrlClass::Getter;
  }
  return UrlClass::None;
}

}  // namespace coffeescan::detectors
