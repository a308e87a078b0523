#include <algorithm>

#include "coffeescan/detectors.hpp"

namespace coffeescan::detectors {

using flow::AbstractValue;
using minijs::Node;
using minijs::NodeKind;

namespace {

bool call_is(const flow::FileFlow& file, const flow::CallSite& site, std::string_view api) {
  if (api_matches(site.callee_path, api)) return true;
  const std::string canon = flow::canonical_path(site.call->child(0), file);
  return !canon.empty() && canon != site.callee_path && api_matches(canon, api);
}

std::string display_path(const flow::FileFlow& file, const flow::CallSite& site) {
  if (!site.callee_path.empty()) return site.callee_path;
  const std::string canon = flow::canonical_path(site.call->child(0), file);
  return canon.empty() ? "<dynamic>" : canon;
}

Finding make_finding(DetectorKind kind, const minijs::SourceSpan& span, std::string evidence,
                     Confidence confidence) {
  Finding f;
  f.detector = kind;
  f.file = span.file;
  f.span = span;
  f.evidence = std::move(evidence);
  f.confidence = confidence;
  return f;
}

Confidence weaker(Confidence c) {
  return c == Confidence::High ? Confidence::Medium : Confidence::Low;
}

// ---- BLE ------------------------------------------------------------------------

enum class Severity { None, Low, Medium, High };

Severity flag_severity(const AbstractValue& service, const char* flag, std::string& shown) {
  const flow::ObjectShape* shape = service.as_object();
  if (!shape) {
    shown = "?";
    return Severity::Low;
  }
  const AbstractValue* v = shape->find(flag);
  if (!v) {
    shown = "absent";
    return Severity::Medium;
  }
  shown = flow::describe(*v);
  if (auto b = v->as_bool()) return *b ? Severity::None : Severity::High;
  if (const flow::Const* c = v->as_const()) {
    // JS truthiness for non-boolean constants
    const bool truthy = std::visit(
        [](const auto& x) -> bool {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::string>) return !x.empty();
          if constexpr (std::is_same_v<T, double>) return x != 0 && x == x;
          if constexpr (std::is_same_v<T, bool>) return x;
          return false;
        },
        c->value);
    return truthy ? Severity::None : Severity::High;
  }
  return Severity::Low;
}

// ---- cross-app ------------------------------------------------------------------

bool member_named(const Node& n, std::string_view prop) {
  if (n.kind != NodeKind::Member) return false;
  if (!n.flag) return n.text == prop;
  return n.child(1).kind == NodeKind::StringLit && n.child(1).text == prop;
}

bool refers_appid(const Node& e, const flow::FileFlow& file, int depth = 0) {
  if (depth > 8) return false;
  switch (e.kind) {
    case NodeKind::Conditional:
      return refers_appid(e.child(1), file, depth + 1) || refers_appid(e.child(2), file, depth + 1);
    case NodeKind::Logical:
      return refers_appid(e.child(0), file, depth + 1) || refers_appid(e.child(1), file, depth + 1);
    case NodeKind::Identifier: {
      const Node* traced = flow::trace_expression(e, file);
      if (traced != &e) return refers_appid(*traced, file, depth + 1);
      return false;
    }
    case NodeKind::Member: {
      const std::string path = flow::canonical_path(e, file);
      return api_matches(path, "referrerInfo.appId");
    }
    default: return false;
  }
}

bool appid_string(const AbstractValue& v, const DetectorConfig& cfg) {
  auto s = v.as_string();
  return s && cfg.is_appid(*s);
}

bool appid_operand(const Node& e, const flow::FileFlow& file, const flow::PackageFlow& pkg,
                   const DetectorConfig& cfg, int depth = 0) {
  if (depth > 8) return false;
  if (appid_string(flow::resolve(e, file, &pkg).value, cfg)) return true;
  if (e.kind == NodeKind::Conditional) {
    return appid_operand(e.child(1), file, pkg, cfg, depth + 1) ||
           appid_operand(e.child(2), file, pkg, cfg, depth + 1);
  }
  return false;
}

bool appid_collection(const Node& e, const flow::FileFlow& file, const flow::PackageFlow& pkg,
                      const DetectorConfig& cfg) {
  const Node* target = flow::trace_expression(e, file);
  if (target->kind == NodeKind::ArrayLit) {
    for (const auto& el : target->children) {
      if (appid_string(flow::resolve(*el, file, &pkg).value, cfg)) return true;
    }
    return false;
  }
  const AbstractValue v = flow::resolve(e, file, &pkg).value;
  if (const flow::ObjectShape* shape = v.as_object()) {
    for (const auto& [key, value] : shape->fields) {
      if (cfg.is_appid(key)) return true;
    }
  }
  return false;
}

// ---- session key ----------------------------------------------------------------

bool is_network(const flow::FileFlow& file, const flow::CallSite& site, const DetectorConfig& cfg) {
  return std::any_of(cfg.network_apis.begin(), cfg.network_apis.end(),
                     [&](const std::string& api) { return call_is(file, site, api); });
}

bool chain_has_network(const flow::FileFlow& file, const flow::SuccessorChain& chain,
                       const DetectorConfig& cfg) {
  return std::any_of(chain.successors.begin(), chain.successors.end(),
                     [&](const flow::CallSite& s) { return is_network(file, s, cfg); });
}

std::string chain_summary(const flow::FileFlow& file, const flow::SuccessorChain& chain) {
  std::string out = "[";
  for (std::size_t i = 0; i < chain.successors.size(); ++i) {
    if (i) out += ", ";
    out += display_path(file, chain.successors[i]);
  }
  out += "]";
  if (chain.truncated) out += " (truncated)";
  return out;
}

}  // namespace

std::vector<Finding> detect_ble(const AnalyzedPackage& pkg) {
  std::vector<Finding> out;
  for (const ParsedFile& pf : pkg.parsed()) {
    const flow::FileFlow& file = *pf.flow;
    for (const flow::CallSite& site : file.all_calls()) {
      if (!call_is(file, site, "addService")) continue;
      const flow::Resolution res = site.args.empty()
                                       ? flow::Resolution{}
                                       : flow::resolve(*site.args[0], file, &pkg.flow());
      std::string read_shown, write_shown;
      const Severity sev = std::max(flag_severity(res.value, "readEncryptionRequired", read_shown),
                                    flag_severity(res.value, "writeEncryptionRequired", write_shown));
      if (sev == Severity::None) continue;
      Confidence c = sev == Severity::High     ? Confidence::High
                     : sev == Severity::Medium ? Confidence::Medium
                                               : Confidence::Low;
      if (res.cross_file && c != Confidence::Low) c = weaker(c);
      const std::string arg =
          site.args.empty() ? std::string() : minijs::print(*site.args[0]);
      out.push_back(make_finding(DetectorKind::BleMisconfig, site.span,
                                 display_path(file, site) + "(" + arg +
                                     "): readEncryptionRequired=" + read_shown +
                                     ", writeEncryptionRequired=" + write_shown,
                                 c));
    }
  }
  return out;
}

std::vector<Finding> detect_cross_app(const AnalyzedPackage& pkg, const DetectorConfig& cfg) {
  const Node* first_read = nullptr;
  std::string first_read_path;
  bool compared = false;
  bool verified = false;

  for (const ParsedFile& pf : pkg.parsed()) {
    const flow::FileFlow& file = *pf.flow;
    minijs::walk(*pf.ast, [&](const Node& n, auto) {
      if (member_named(n, "extraData")) {
        const std::string base = flow::canonical_path(n.child(0), file);
        if (api_matches(base, "referrerInfo")) {
          const bool earlier = !first_read || n.span.file < first_read->span.file ||
                               (n.span.file == first_read->span.file &&
                                n.span.starts_before(first_read->span));
          if (earlier) {
            first_read = &n;
            first_read_path = base + ".extraData";
          }
        }
      }
      if (n.kind != NodeKind::Binary) return;
      const std::string& op = n.text;
      if (op == "==" || op == "===" || op == "!=" || op == "!==") {
        const Node& l = n.child(0);
        const Node& r = n.child(1);
        if (refers_appid(l, file) && !refers_appid(r, file)) {
          compared = true;
          verified = verified || appid_operand(r, file, pkg.flow(), cfg);
        } else if (refers_appid(r, file) && !refers_appid(l, file)) {
          compared = true;
          verified = verified || appid_operand(l, file, pkg.flow(), cfg);
        }
      } else if (op == "in" && refers_appid(n.child(0), file)) {
        compared = true;
        verified = verified || appid_collection(n.child(1), file, pkg.flow(), cfg);
      }
    });
  }

  if (!first_read || verified) return {};
  if (compared) {
    return {make_finding(DetectorKind::MissingCrossAppCheck, first_read->span,
                         first_read_path + " read; referrerInfo.appId compared only against "
                                           "non-appid values",
                         Confidence::Medium)};
  }
  return {make_finding(DetectorKind::MissingCrossAppCheck, first_read->span,
                       first_read_path + " read without any referrerInfo.appId comparison",
                       Confidence::High)};
}

std::vector<Finding> detect_private_share(const AnalyzedPackage& pkg) {
  for (const ParsedFile& pf : pkg.parsed()) {
    for (const flow::CallSite& site : pf.flow->all_calls()) {
      if (call_is(*pf.flow, site, "authPrivateMessage")) return {};
    }
  }
  std::vector<Finding> out;
  for (const ParsedFile& pf : pkg.parsed()) {
    const flow::FileFlow& file = *pf.flow;
    for (const flow::CallSite& site : file.all_calls()) {
      if (!call_is(file, site, "updateShareMenu")) continue;
      const flow::Resolution res = site.args.empty()
                                       ? flow::Resolution{}
                                       : flow::resolve(*site.args[0], file, &pkg.flow());
      AbstractValue flag = flow::Unknown{};
      if (const flow::ObjectShape* shape = res.value.as_object()) {
        const AbstractValue* v = shape->find("isPrivateMessage");
        if (!v) continue;
        flag = *v;
      }
      Confidence c;
      if (auto b = flag.as_bool()) {
        if (!*b) continue;
        c = Confidence::High;
      } else if (flag.is_unknown()) {
        c = Confidence::Low;
      } else {
        continue;
      }
      if (res.cross_file && c == Confidence::High) c = Confidence::Medium;
      out.push_back(make_finding(DetectorKind::MissingPrivateShareCheck, site.span,
                                 display_path(file, site) + " with isPrivateMessage=" +
                                     flow::describe(flag) + " and no authPrivateMessage call",
                                 c));
    }
  }
  return out;
}

std::vector<Finding> detect_session_key(const AnalyzedPackage& pkg, const DetectorConfig& cfg) {
  std::vector<Finding> out;

  for (const ParsedFile& pf : pkg.parsed()) {
    for (const flow::StringOccurrence& s : flow::collect_strings(*pf.ast)) {
      if (!looks_like_url(s.value)) continue;
      const UrlClass cls = classify_url(s.value, cfg);
      if (cls == UrlClass::None) continue;
      out.push_back(make_finding(DetectorKind::SessionKeyUrl, s.span,
                                 std::string(to_string(cls)) + ": " + s.value,
                                 cls == UrlClass::Duplication ? Confidence::High : Confidence::Medium));
    }
  }

  bool login_sent = false;
  for (const ParsedFile& pf : pkg.parsed()) {
    for (const flow::CallSite& site : pf.flow->all_calls()) {
      if (call_is(*pf.flow, site, "wx.login") &&
          chain_has_network(*pf.flow, flow::successors(*pf.flow, site), cfg)) {
        login_sent = true;
      }
    }
  }
  if (!login_sent) return out;

  auto report = [&](const flow::FileFlow& file, const flow::SuccessorChain& chain,
                    const minijs::SourceSpan& span, const std::string& what) {
    if (chain_has_network(file, chain, cfg)) return;
    out.push_back(make_finding(DetectorKind::SessionKeyMissingNetwork, span,
                               what + " result never reaches a network API; successors " +
                                   chain_summary(file, chain),
                               chain.truncated ? Confidence::Low : Confidence::Medium));
  };

  for (const ParsedFile& pf : pkg.parsed()) {
    const flow::FileFlow& file = *pf.flow;
    for (const flow::CallSite& site : file.all_calls()) {
      for (const std::string& api : cfg.encrypted_data_apis) {
        if (call_is(file, site, api)) {
          report(file, flow::successors(file, site), site.span, display_path(file, site));
          break;
        }
      }
    }
    minijs::walk(*pf.ast, [&](const Node& n, auto) {
      if (n.kind == NodeKind::ObjectLit) {
        for (std::size_t i = 0; i < n.names.size(); ++i) {
          const Node& value = *n.children[i];
          const bool fn = value.kind == NodeKind::FunctionExpr || value.kind == NodeKind::ArrowExpr;
          if (fn && cfg.encrypted_data_handlers.count(n.names[i])) {
            report(file, flow::calls_within(file, value), value.span, "handler " + n.names[i]);
          }
        }
      } else if (n.kind == NodeKind::FunctionDecl && cfg.encrypted_data_handlers.count(n.text)) {
        report(file, flow::calls_within(file, n), n.span, "handler " + n.text);
      }
    });
  }
  return out;
}

}  // namespace coffeescan::detectors
