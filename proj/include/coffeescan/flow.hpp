#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coffeescan/minijs.hpp"

// Backward slicing and successor tracking over MiniJS trees. Resolution is
// intraprocedural plus module top level; top-level declarations of sibling
// files are consulted only when a name is not bound locally.
namespace coffeescan::flow {

using minijs::Node;
using minijs::NodeKind;
using minijs::SourceSpan;

struct Const {
  std::variant<std::string, double, bool, std::nullptr_t> value;
  friend bool operator==(const Const&, const Const&) = default;
};

struct Unknown {
  friend bool operator==(const Unknown&, const Unknown&) = default;
};

struct AbstractValue;

struct ObjectShape {
  // insertion-ordered, keys unique
  std::vector<std::pair<std::string, AbstractValue>> fields;

  const AbstractValue* find(std::string_view key) const;
  void set(const std::string& key, AbstractValue value);
  friend bool operator==(const ObjectShape&, const ObjectShape&);
};

struct AbstractValue {
  std::variant<Unknown, Const, ObjectShape> v;

  AbstractValue() = default;
  AbstractValue(Unknown u) : v(u) {}
  AbstractValue(Const c) : v(std::move(c)) {}
  AbstractValue(ObjectShape o) : v(std::move(o)) {}

  bool is_unknown() const { return std::holds_alternative<Unknown>(v); }
  const Const* as_const() const { return std::get_if<Const>(&v); }
  const ObjectShape* as_object() const { return std::get_if<ObjectShape>(&v); }
  std::optional<bool> as_bool() const;
  std::optional<std::string> as_string() const;

  friend bool operator==(const AbstractValue&, const AbstractValue&) = default;
};

inline bool operator==(const ObjectShape& a, const ObjectShape& b) { return a.fields == b.fields; }

std::string describe(const AbstractValue& value);

enum class DeclKind { Var, Let, Const, Param, Function };

struct Declaration {
  std::string name;
  DeclKind kind = DeclKind::Var;
  const Node* decl = nullptr;         // VarDecl, FunctionDecl, or the function owning a param
  const Node* initializer = nullptr;  // null for params; the function node for Function
  std::size_t count = 1;              // >1 means redeclared within the scope
};

struct CallSite {
  std::string callee_path;  // static path of the callee, "" when dynamic
  const Node* call = nullptr;
  std::vector<const Node*> args;
  SourceSpan span;
  std::size_t scope = 0;  // index into the file's summaries
};

/// Per-function (or top-level) index of declarations and call sites.
struct FunctionSummary {
  std::uint32_t function_id = 0;  // id of the function node, or of the Program
  const Node* function = nullptr;  // Program node for the top-level summary
  std::optional<std::size_t> parent;
  std::map<std::string, Declaration> declared_vars;
  std::vector<CallSite> call_sites;  // source order
};

/// One analysed source file. Keeps non-owning pointers into `ast`, which
/// must outlive it.
class FileFlow {
 public:
  FileFlow(const Node& program, std::string file);

  const Node& program() const { return *program_; }
  const std::string& file() const { return file_; }
  const std::vector<FunctionSummary>& summaries() const { return summaries_; }

  /// Index of the innermost summary whose function contains `node`.
  std::size_t scope_of(const Node& node) const;
  const Node* parent_of(const Node& node) const;
  const Declaration* lookup(std::string_view name, std::size_t scope,
                            std::size_t* found_scope = nullptr) const;

  const std::vector<CallSite>& all_calls() const { return all_calls_; }
  const CallSite* call_site(const Node& call) const;

  /// Assignments whose target is `name` or a member chain rooted at `name`.
  std::vector<const Node*> writes_to(const std::string& name) const;

 private:
  void index(const Node& node, std::size_t scope);

  const Node* program_;
  std::string file_;
  std::vector<FunctionSummary> summaries_;
  std::map<const Node*, std::size_t> scope_of_fn_;
  std::map<const Node*, const Node*> parent_;
  std::map<const Node*, std::size_t> owner_scope_;
  std::vector<CallSite> all_calls_;
  std::map<const Node*, std::size_t> call_index_;
  std::multimap<std::string, const Node*> writes_;
};

std::vector<FunctionSummary> summarize(const Node& program);

/// All analysed files of one package; enables the cross-file hop.
class PackageFlow {
 public:
  void add(const FileFlow* file) { files_.push_back(file); }
  const std::vector<const FileFlow*>& files() const { return files_; }
  const FileFlow* owner(const Node& node) const;

 private:
  std::vector<const FileFlow*> files_;
};

struct ResolveOptions {
  std::size_t max_depth = 32;
};

struct Resolution {
  AbstractValue value;
  bool cross_file = false;  // resolution used another file's top-level declaration
};

/// Backward slice of `expr` to an abstract value. Unknown is the safe bottom.
Resolution resolve(const Node& expr, const FileFlow& file, const PackageFlow* package = nullptr,
                   const ResolveOptions& options = {});

/// Follows identifier aliases (`var w = wx; w.login` -> "wx.login") to a
/// canonical dotted path; falls back to the literal static path.
std::string canonical_path(const Node& expr, const FileFlow& file);

/// Follows identifier aliases to the expression they were initialised with,
/// provided the binding is never reassigned.
const Node* trace_expression(const Node& expr, const FileFlow& file);

/// Dotted-path glob: '*' matches any run of characters, dots included.
bool glob_match(std::string_view pattern, std::string_view path);

/// Call sites whose static or alias-resolved callee path matches `pattern`.
std::vector<CallSite> find_calls(const FileFlow& file, std::string_view pattern);

struct SuccessorChain {
  CallSite origin;
  std::vector<CallSite> successors;
  bool truncated = false;
};

struct SuccessorOptions {
  std::size_t max_depth = 8;
};

/// Calls that run after `origin` via a following sequence element, a
/// `.then(fn)` on its result, or its success/fail/complete callbacks.
SuccessorChain successors(const FileFlow& file, const CallSite& origin,
                          const SuccessorOptions& options = {});

/// Calls lexically inside a function body, following nested functions and
/// calls to same-file named functions up to the depth limit.
SuccessorChain calls_within(const FileFlow& file, const Node& function,
                            const SuccessorOptions& options = {});

struct StringOccurrence {
  std::string value;
  SourceSpan span;
};

std::vector<StringOccurrence> collect_strings(const Node& program);

}  // namespace coffeescan::flow
