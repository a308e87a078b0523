#include "coffeescan/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace coffeescan::flow {

// ---- abstract values ---------------------------------------------------------

const AbstractValue* ObjectShape::find(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return &v;
  }
  return nullptr;
}

void ObjectShape::set(const std::string& key, AbstractValue value) {
  for (auto& [k, v] : fields) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  fields.emplace_back(key, std::move(value));
}

std::optional<bool> AbstractValue::as_bool() const {
  const Const* c = as_const();
  if (!c) return std::nullopt;
  if (const bool* b = std::get_if<bool>(&c->value)) return *b;
  return std::nullopt;
}

std::optional<std::string> AbstractValue::as_string() const {
  const Const* c = as_const();
  if (!c) return std::nullopt;
  if (const std::string* s = std::get_if<std::string>(&c->value)) return *s;
  return std::nullopt;
}

namespace {

std::string js_number(double d) {
  if (std::isnan(d)) return "NaN";
  if (std::isinf(d)) return d > 0 ? "Infinity" : "-Infinity";
  if (d == std::floor(d) && std::fabs(d) < 1e21) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", d);
    return buf;
  }
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, d);
    if (std::strtod(buf, nullptr) == d) break;
  }
  return buf;
}

bool truthy(const Const& c) {
  return std::visit(
      [](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) return !v.empty();
        if constexpr (std::is_same_v<T, double>) return v != 0 && !std::isnan(v);
        if constexpr (std::is_same_v<T, bool>) return v;
        return false;
      },
      c.value);
}

}  // namespace

std::string describe(const AbstractValue& value) {
  if (value.is_unknown()) return "?";
  if (const Const* c = value.as_const()) {
    return std::visit(
        [](const auto& v) -> std::string {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) return "\"" + v + "\"";
          if constexpr (std::is_same_v<T, double>) return js_number(v);
          if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
          return "null";
        },
        c->value);
  }
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : value.as_object()->fields) {
    if (!first) out += ", ";
    first = false;
    out += k + ": " + describe(v);
  }
  return out + "}";
}

// ---- file index --------------------------------------------------------------

namespace {

bool is_function(const Node& n) {
  return n.kind == NodeKind::FunctionDecl || n.kind == NodeKind::FunctionExpr ||
         n.kind == NodeKind::ArrowExpr;
}

DeclKind decl_kind(const std::string& keyword) {
  if (keyword == "let") return DeclKind::Let;
  if (keyword == "const") return DeclKind::Const;
  return DeclKind::Var;
}

void declare(FunctionSummary& s, Declaration d) {
  auto it = s.declared_vars.find(d.name);
  if (it != s.declared_vars.end()) {
    it->second.count += 1;
    return;
  }
  std::string name = d.name;
  s.declared_vars.emplace(std::move(name), std::move(d));
}

// Root identifier of an assignment target (`a`, `a.b.c`, `a["b"]`).
const Node* target_root(const Node& target) {
  const Node* n = &target;
  while (n->kind == NodeKind::Member) n = n->children[0].get();
  return n->kind == NodeKind::Identifier ? n : nullptr;
}

}  // namespace

FileFlow::FileFlow(const Node& program, std::string file)
    : program_(&program), file_(std::move(file)) {
  FunctionSummary top;
  top.function_id = program.id;
  top.function = &program;
  summaries_.push_back(std::move(top));
  scope_of_fn_[&program] = 0;
  index(program, 0);
  for (std::size_t i = 0; i < all_calls_.size(); ++i) call_index_[all_calls_[i].call] = i;
}

void FileFlow::index(const Node& node, std::size_t scope) {
  owner_scope_[&node] = scope;
  std::size_t inner = scope;

  switch (node.kind) {
    case NodeKind::VarDecl:
      for (std::size_t i = 0; i < node.names.size(); ++i) {
        declare(summaries_[scope], Declaration{node.names[i], decl_kind(node.text), &node,
                                               node.children[i].get(), 1});
      }
      break;
    case NodeKind::FunctionDecl:
    case NodeKind::FunctionExpr:
    case NodeKind::ArrowExpr: {
      if (node.kind == NodeKind::FunctionDecl) {
        declare(summaries_[scope], Declaration{node.text, DeclKind::Function, &node, &node, 1});
      }
      FunctionSummary s;
      s.function_id = node.id;
      s.function = &node;
      s.parent = scope;
      inner = summaries_.size();
      summaries_.push_back(std::move(s));
      scope_of_fn_[&node] = inner;
      if (node.kind == NodeKind::FunctionExpr && !node.text.empty()) {
        declare(summaries_[inner], Declaration{node.text, DeclKind::Function, &node, &node, 1});
      }
      for (const auto& p : node.names) {
        declare(summaries_[inner], Declaration{p, DeclKind::Param, &node, nullptr, 1});
      }
      break;
    }
    case NodeKind::Call: {
      CallSite site;
      site.callee_path = minijs::static_path(node.child(0));
      site.call = &node;
      for (std::size_t i = 1; i < node.children.size(); ++i) site.args.push_back(node.children[i].get());
      site.span = node.span;
      site.scope = scope;
      summaries_[scope].call_sites.push_back(site);
      all_calls_.push_back(std::move(site));
      break;
    }
    case NodeKind::Assign:
      if (const Node* root = target_root(node.child(0))) writes_.emplace(root->text, &node);
      break;
    default:
      break;
  }

  for (const auto& c : node.children) {
    parent_[c.get()] = &node;
    index(*c, inner);
  }
}

std::size_t FileFlow::scope_of(const Node& node) const {
  auto it = owner_scope_.find(&node);
  return it == owner_scope_.end() ? 0 : it->second;
}

const Node* FileFlow::parent_of(const Node& node) const {
  auto it = parent_.find(&node);
  return it == parent_.end() ? nullptr : it->second;
}

const Declaration* FileFlow::lookup(std::string_view name, std::size_t scope,
                                    std::size_t* found_scope) const {
  std::optional<std::size_t> s = scope;
  while (s) {
    const auto& vars = summaries_[*s].declared_vars;
    auto it = vars.find(std::string(name));
    if (it != vars.end()) {
      if (found_scope) *found_scope = *s;
      return &it->second;
    }
    s = summaries_[*s].parent;
  }
  return nullptr;
}

const CallSite* FileFlow::call_site(const Node& call) const {
  auto it = call_index_.find(&call);
  return it == call_index_.end() ? nullptr : &all_calls_[it->second];
}

std::vector<const Node*> FileFlow::writes_to(const std::string& name) const {
  std::vector<const Node*> out;
  auto [lo, hi] = writes_.equal_range(name);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  std::sort(out.begin(), out.end(),
            [](const Node* a, const Node* b) { return a->span.starts_before(b->span); });
  return out;
}

std::vector<FunctionSummary> summarize(const Node& program) {
  return FileFlow(program, program.span.file).summaries();
}

const FileFlow* PackageFlow::owner(const Node& node) const {
  for (const FileFlow* f : files_) {
    if (f->program().span.file == node.span.file) return f;
  }
  return nullptr;
}

// ---- resolution ----------------------------------------------------------------

namespace {

// Property path of a member chain relative to its root identifier. Returns
// false when some key is computed from a non-literal.
bool member_path(const Node& target, std::vector<std::string>& out) {
  if (target.kind == NodeKind::Identifier) return true;
  if (target.kind != NodeKind::Member) return false;
  if (!member_path(target.child(0), out)) return false;
  if (!target.flag) {
    out.push_back(target.text);
    return true;
  }
  const Node& key = target.child(1);
  if (key.kind == NodeKind::StringLit) {
    out.push_back(key.text);
    return true;
  }
  if (key.kind == NodeKind::NumberLit) {
    out.push_back(key.text);
    return true;
  }
  return false;
}

class Resolver {
 public:
  Resolver(const PackageFlow* package, const ResolveOptions& options)
      : package_(package), options_(options) {}

  bool cross_file = false;

  AbstractValue value_of(const Node& expr, const FileFlow& file, std::size_t depth) {
    if (depth > options_.max_depth) return Unknown{};
    switch (expr.kind) {
      case NodeKind::StringLit: return Const{expr.text};
      case NodeKind::NumberLit: return Const{expr.number};
      case NodeKind::BoolLit: return Const{expr.flag};
      case NodeKind::NullLit: return Const{nullptr};
      case NodeKind::Unary: {
        AbstractValue operand = value_of(expr.child(0), file, depth + 1);
        if (expr.text == "!") {
          if (const Const* c = operand.as_const()) return Const{!truthy(*c)};
          if (operand.as_object()) return Const{false};
          return Unknown{};
        }
        if (expr.text == "-") {
          if (const Const* c = operand.as_const()) {
            if (const double* d = std::get_if<double>(&c->value)) return Const{-*d};
          }
        }
        return Unknown{};
      }
      case NodeKind::Conditional: {
        AbstractValue test = value_of(expr.child(0), file, depth + 1);
        if (const Const* c = test.as_const()) {
          return value_of(expr.child(truthy(*c) ? 1 : 2), file, depth + 1);
        }
        if (test.as_object()) return value_of(expr.child(1), file, depth + 1);
        AbstractValue a = value_of(expr.child(1), file, depth + 1);
        AbstractValue b = value_of(expr.child(2), file, depth + 1);
        if (a == b) return a;
        return Unknown{};
      }
      case NodeKind::Binary: {
        if (expr.text != "+") return Unknown{};
        return plus(value_of(expr.child(0), file, depth + 1),
                    value_of(expr.child(1), file, depth + 1));
      }
      case NodeKind::ObjectLit: {
        ObjectShape shape;
        for (std::size_t i = 0; i < expr.names.size(); ++i) {
          shape.set(expr.names[i], value_of(*expr.children[i], file, depth + 1));
        }
        return shape;
      }
      case NodeKind::Member: {
        AbstractValue object = value_of(expr.child(0), file, depth + 1);
        const ObjectShape* shape = object.as_object();
        if (!shape) return Unknown{};
        std::string key = expr.text;
        if (expr.flag) {
          auto k = value_of(expr.child(1), file, depth + 1);
          if (auto s = k.as_string()) {
            key = *s;
          } else if (const Const* c = k.as_const(); c && std::holds_alternative<double>(c->value)) {
            key = js_number(std::get<double>(c->value));
          } else {
            return Unknown{};
          }
        }
        const AbstractValue* field = shape->find(key);
        return field ? *field : AbstractValue{Unknown{}};
      }
      case NodeKind::Identifier: return identifier(expr, file, depth);
      default: return Unknown{};
    }
  }

 private:
  static AbstractValue plus(const AbstractValue& a, const AbstractValue& b) {
    const Const* ca = a.as_const();
    const Const* cb = b.as_const();
    if (!ca || !cb) return Unknown{};
    auto text = [](const Const& c) -> std::optional<std::string> {
      if (auto s = std::get_if<std::string>(&c.value)) return *s;
      if (auto d = std::get_if<double>(&c.value)) return js_number(*d);
      return std::nullopt;
    };
    const auto* da = std::get_if<double>(&ca->value);
    const auto* db = std::get_if<double>(&cb->value);
    if (da && db) return Const{*da + *db};
    const bool any_string = std::holds_alternative<std::string>(ca->value) ||
                            std::holds_alternative<std::string>(cb->value);
    if (!any_string) return Unknown{};
    auto ta = text(*ca), tb = text(*cb);
    if (!ta || !tb) return Unknown{};
    return Const{*ta + *tb};
  }

  AbstractValue identifier(const Node& ident, const FileFlow& file, std::size_t depth) {
    std::size_t decl_scope = 0;
    const Declaration* decl = file.lookup(ident.text, file.scope_of(ident), &decl_scope);
    if (!decl) {
      if (!package_) return Unknown{};
      for (const FileFlow* other : package_->files()) {
        if (other == &file) continue;
        const auto& vars = other->summaries()[0].declared_vars;
        auto it = vars.find(ident.text);
        if (it == vars.end()) continue;
        cross_file = true;
        return declaration(it->second, 0, *other, nullptr, depth + 1);
      }
      return Unknown{};
    }
    return declaration(*decl, decl_scope, file, &ident, depth + 1);
  }

  bool straight_line(const Node& assign, std::size_t decl_scope, const FileFlow& file) const {
    if (file.scope_of(assign) != decl_scope) return false;
    const Node* p = file.parent_of(assign);
    if (p && p->kind == NodeKind::Sequence) p = file.parent_of(*p);
    if (!p || p->kind != NodeKind::ExprStmt) return false;
    const Node* body = file.parent_of(*p);
    const Node* fn = file.summaries()[decl_scope].function;
    if (!body || !fn) return false;
    if (fn->kind == NodeKind::Program) return body == fn;
    return !fn->children.empty() && body == fn->children[0].get() &&
           body->kind == NodeKind::Block;
  }

  AbstractValue declaration(const Declaration& decl, std::size_t decl_scope,
                            const FileFlow& file, const Node* use, std::size_t depth) {
    if (depth > options_.max_depth) return Unknown{};
    if (decl.kind == DeclKind::Param || decl.kind == DeclKind::Function) return Unknown{};
    if (decl.count != 1 || !decl.initializer) return Unknown{};
    if (!in_progress_.insert(&decl).second) return Unknown{};

    AbstractValue value = value_of(*decl.initializer, file, depth + 1);
    const bool same_scope_use = use && file.scope_of(*use) == decl_scope;

    for (const Node* assign : file.writes_to(decl.name)) {
      std::size_t binding_scope = 0;
      const Declaration* bound = file.lookup(decl.name, file.scope_of(*assign), &binding_scope);
      if (bound != &decl) continue;
      if (assign->span.starts_before(decl.decl->span)) continue;
      if (same_scope_use && !assign->span.starts_before(use->span)) continue;

      std::vector<std::string> path;
      const bool static_target = member_path(assign->child(0), path);
      const bool linear = straight_line(*assign, decl_scope, file);
      AbstractValue rhs = linear ? value_of(assign->child(1), file, depth + 1) : Unknown{};
      if (linear && assign->text == "+=") {
        rhs = plus(path.empty() ? value : AbstractValue{Unknown{}}, rhs);
      }

      if (!static_target) {
        value = Unknown{};
      } else if (path.empty()) {
        value = std::move(rhs);
      } else {
        write_path(value, path, 0, std::move(rhs));
      }
    }
    in_progress_.erase(&decl);
    return value;
  }

  static void write_path(AbstractValue& target, const std::vector<std::string>& path,
                         std::size_t i, AbstractValue rhs) {
    ObjectShape* shape = std::get_if<ObjectShape>(&target.v);
    if (!shape) {
      target = Unknown{};
      return;
    }
    if (i + 1 == path.size()) {
      shape->set(path[i], std::move(rhs));
      return;
    }
    for (auto& [k, v] : shape->fields) {
      if (k == path[i]) {
        write_path(v, path, i + 1, std::move(rhs));
        return;
      }
    }
    shape->set(path[i], Unknown{});
  }

  const PackageFlow* package_;
  ResolveOptions options_;
  std::set<const Declaration*> in_progress_;
};

}  // namespace

Resolution resolve(const Node& expr, const FileFlow& file, const PackageFlow* package,
                   const ResolveOptions& options) {
  Resolver r(package, options);
  Resolution out;
  out.value = r.value_of(expr, file, 0);
  out.cross_file = r.cross_file;
  return out;
}

// ---- aliases and call lookup ---------------------------------------------------

namespace {

const Declaration* single_assignment(const Node& ident, const FileFlow& file) {
  std::size_t scope = 0;
  const Declaration* decl = file.lookup(ident.text, file.scope_of(ident), &scope);
  if (!decl || decl->count != 1) return nullptr;
  if (decl->kind == DeclKind::Param) return nullptr;
  if (decl->kind == DeclKind::Function) return decl;
  for (const Node* w : file.writes_to(ident.text)) {
    if (w->child(0).kind != NodeKind::Identifier) continue;
    if (file.lookup(ident.text, file.scope_of(*w)) == decl) return nullptr;
  }
  return decl;
}

}  // namespace

const Node* trace_expression(const Node& expr, const FileFlow& file) {
  const Node* cur = &expr;
  for (int hops = 0; hops < 16 && cur->kind == NodeKind::Identifier; ++hops) {
    const Declaration* decl = single_assignment(*cur, file);
    if (!decl || !decl->initializer) break;
    if (decl->initializer->kind == NodeKind::Identifier && decl->initializer->text == "undefined") {
      break;
    }
    cur = decl->initializer;
  }
  return cur;
}

namespace {

std::string canonical_impl(const Node& expr, const FileFlow& file, int depth) {
  if (depth > 16) return minijs::static_path(expr);
  if (expr.kind == NodeKind::Identifier) {
    const Node* traced = trace_expression(expr, file);
    if (traced == &expr) return expr.text;
    if (traced->kind == NodeKind::Identifier || traced->kind == NodeKind::Member) {
      std::string p = canonical_impl(*traced, file, depth + 1);
      return p.empty() ? expr.text : p;
    }
    return expr.text;
  }
  if (expr.kind != NodeKind::Member) return {};
  std::string base = canonical_impl(expr.child(0), file, depth + 1);
  if (base.empty()) return {};
  if (!expr.flag) return base + "." + expr.text;
  if (expr.child(1).kind == NodeKind::StringLit) return base + "." + expr.child(1).text;
  return {};
}

}  // namespace

std::string canonical_path(const Node& expr, const FileFlow& file) {
  return canonical_impl(expr, file, 0);
}

bool glob_match(std::string_view pattern, std::string_view path) {
  std::size_t p = 0, s = 0, star = std::string_view::npos, mark = 0;
  while (s < path.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = s;
    } else if (p < pattern.size() && pattern[p] == path[s]) {
      ++p;
      ++s;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      s = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::vector<CallSite> find_calls(const FileFlow& file, std::string_view pattern) {
  std::vector<CallSite> out;
  for (const CallSite& site : file.all_calls()) {
    if (!site.callee_path.empty() && glob_match(pattern, site.callee_path)) {
      out.push_back(site);
      continue;
    }
    const std::string canon = canonical_path(site.call->child(0), file);
    if (!canon.empty() && canon != site.callee_path && glob_match(pattern, canon)) {
      CallSite aliased = site;
      aliased.callee_path = canon;
      out.push_back(std::move(aliased));
    }
  }
  return out;
}

// ---- successors ----------------------------------------------------------------

namespace {

bool is_callable(const Node* n) {
  return n && (n->kind == NodeKind::FunctionExpr || n->kind == NodeKind::ArrowExpr ||
               n->kind == NodeKind::FunctionDecl);
}

class SuccessorWalker {
 public:
  SuccessorWalker(const FileFlow& file, const SuccessorOptions& options, SuccessorChain& chain)
      : file_(file), options_(options), chain_(chain) {}

  void function_body(const Node& fn, std::size_t depth) {
    if (depth > options_.max_depth) {
      chain_.truncated = true;
      return;
    }
    if (!entered_.insert(&fn).second) return;
    for (const auto& c : fn.children) calls_in(*c, depth);
  }

  void calls_in(const Node& n, std::size_t depth) {
    if (is_callable(&n)) {
      function_body(n, depth + 1);
      return;
    }
    if (n.kind == NodeKind::Call) {
      add(n);
      hop(n, depth);
    }
    for (const auto& c : n.children) calls_in(*c, depth);
  }

  void callback(const Node& arg, std::size_t depth) {
    const Node* fn = resolve_function(arg);
    if (fn) function_body(*fn, depth + 1);
  }

  void callbacks_of(const Node& call, std::size_t depth) {
    for (std::size_t i = 1; i < call.children.size(); ++i) {
      const Node* arg = trace_expression(*call.children[i], file_);
      if (arg->kind != NodeKind::ObjectLit) continue;
      for (std::size_t k = 0; k < arg->names.size(); ++k) {
        const std::string& key = arg->names[k];
        if (key == "success" || key == "fail" || key == "complete") {
          callback(*arg->children[k], depth);
        }
      }
    }
  }

  void then_chain(const Node& call, std::size_t depth) {
    const Node* member = file_.parent_of(call);
    if (!member || member->kind != NodeKind::Member || member->flag || member->text != "then" ||
        member->children[0].get() != &call) {
      return;
    }
    const Node* then_call = file_.parent_of(*member);
    if (!then_call || then_call->kind != NodeKind::Call || then_call->children[0].get() != member) {
      return;
    }
    for (std::size_t i = 1; i < then_call->children.size(); ++i) {
      callback(*then_call->children[i], depth);
    }
    then_chain(*then_call, depth);
  }

  void sequence_after(const Node& call, std::size_t depth) {
    const Node* child = &call;
    const Node* p = file_.parent_of(call);
    while (p && !is_callable(p) && p->kind != NodeKind::Sequence && p->kind != NodeKind::ExprStmt &&
           p->kind != NodeKind::Block && p->kind != NodeKind::Program) {
      child = p;
      p = file_.parent_of(*p);
    }
    if (!p || p->kind != NodeKind::Sequence) return;
    bool after = false;
    for (const auto& element : p->children) {
      if (after) calls_in(*element, depth);
      if (element.get() == child) after = true;
    }
  }

 private:
  const Node* resolve_function(const Node& expr) {
    const Node* target = trace_expression(expr, file_);
    if (is_callable(target)) return target;
    if (expr.kind == NodeKind::Member && !expr.flag) {
      const std::string base = canonical_path(expr.child(0), file_);
      if (base == "this") return enclosing_method(expr, expr.text);
    }
    return nullptr;
  }

  // `this.name` inside an object literal of methods (Page({...}), App({...})).
  const Node* enclosing_method(const Node& from, const std::string& name) {
    for (const Node* p = file_.parent_of(from); p; p = file_.parent_of(*p)) {
      if (p->kind != NodeKind::ObjectLit) continue;
      for (std::size_t i = 0; i < p->names.size(); ++i) {
        if (p->names[i] == name && is_callable(p->children[i].get())) return p->children[i].get();
      }
    }
    return nullptr;
  }

  void hop(const Node& call, std::size_t depth) {
    const Node& callee = call.child(0);
    if (callee.kind == NodeKind::Identifier || callee.kind == NodeKind::Member) {
      if (const Node* fn = resolve_function(callee)) function_body(*fn, depth + 1);
    }
  }

  void add(const Node& call) {
    if (!added_.insert(&call).second) return;
    if (const CallSite* site = file_.call_site(call)) chain_.successors.push_back(*site);
  }

  const FileFlow& file_;
  SuccessorOptions options_;
  SuccessorChain& chain_;
  std::set<const Node*> added_;
  std::set<const Node*> entered_;
};

}  // namespace

SuccessorChain successors(const FileFlow& file, const CallSite& origin,
                          const SuccessorOptions& options) {
  SuccessorChain chain;
  chain.origin = origin;
  SuccessorWalker walker(file, options, chain);
  walker.sequence_after(*origin.call, 0);
  walker.then_chain(*origin.call, 0);
  walker.callbacks_of(*origin.call, 0);
  std::erase_if(chain.successors, [&](const CallSite& s) { return s.call == origin.call; });
  return chain;
}

SuccessorChain calls_within(const FileFlow& file, const Node& function,
                            const SuccessorOptions& options) {
  SuccessorChain chain;
  SuccessorWalker walker(file, options, chain);
  walker.function_body(function, 0);
  return chain;
}

std::vector<StringOccurrence> collect_strings(const Node& program) {
  std::vector<StringOccurrence> out;
  minijs::walk(program, [&](const Node& n, auto) {
    if (n.kind == NodeKind::StringLit) out.push_back({n.text, n.span});
  });
  std::stable_sort(out.begin(), out.end(), [](const StringOccurrence& a, const StringOccurrence& b) {
    return a.span.starts_before(b.span);
  });
  return out;
}

}  // namespace coffeescan::flow
