#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace metabug::minilang {

/// Unique per Program. Assigned by the parser in creation order, so a
/// structurally identical tree always receives identical ids.
using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct SourceLoc {
  int line = 0;
  int column = 0;
  friend bool operator==(const SourceLoc&, const SourceLoc&) = default;
};

enum class Type { Int, String, Handle, Array };

enum class ExprKind {
  IntLit,
  StrLit,
  Null,
  Var,
  Index,     // args[0][args[1]]
  Binary,    // text = operator, args = {lhs, rhs}
  Unary,     // text = "-" or "!", args = {operand}
  Builtin,   // text = builtin name
  NewArray,  // new[args[0]]
};

struct Expr {
  NodeId id = kNoNode;
  SourceLoc loc;
  ExprKind kind = ExprKind::Null;
  std::int64_t int_value = 0;
  std::string text;
  std::vector<Expr> args;

  static Expr int_lit(std::int64_t v);
  static Expr str_lit(std::string s);
  static Expr null();
  static Expr var(std::string name);
  static Expr index(Expr base, Expr idx);
  static Expr binary(std::string op, Expr lhs, Expr rhs);
  static Expr unary(std::string op, Expr operand);
  static Expr builtin(std::string name, std::vector<Expr> args);
  static Expr new_array(Expr length);
};

enum class StmtKind { VarDecl, Assign, If, While, Call, Return, Spawn };

/// One statement. Field use by kind:
///   VarDecl  target = Var node of the declared name, value = initializer (optional for globals)
///   Assign   target = Var or Index lvalue, value = rhs
///   If       value = condition, then_body / else_body
///   While    value = condition, then_body = loop body
///   Call     name = callee; builtin callees keep the call in `value`, user
///            procedures keep their arguments in `args`
///   Return   value = optional result (ignored by callers)
///   Spawn    name = callee, args
struct Stmt {
  NodeId id = kNoNode;
  SourceLoc loc;
  StmtKind kind = StmtKind::Return;
  std::string name;
  std::optional<Expr> target;
  std::optional<Expr> value;
  std::vector<Expr> args;
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;
};

struct Param {
  NodeId id = kNoNode;
  SourceLoc loc;
  std::string name;
  Type type = Type::Int;
  bool by_ref = false;
};

struct Procedure {
  NodeId id = kNoNode;
  SourceLoc loc;
  std::string name;
  std::vector<Param> params;
  std::vector<Stmt> body;
};

struct Program {
  std::vector<Stmt> globals;  // VarDecl statements
  std::vector<Procedure> procedures;
  std::string entry = "main";
  NodeId next_id = 0;  // one past the largest id in use

  const Procedure* find_procedure(const std::string& name) const;
};

const char* to_string(Type t);
const char* to_string(StmtKind k);

/// Structural equality ignoring node ids and source locations.
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const Stmt& a, const Stmt& b);
bool structurally_equal(const Program& a, const Program& b);

/// Pre-order visit of every statement, including nested bodies and globals.
template <typename F>
void for_each_stmt(const std::vector<Stmt>& block, F&& f) {
  for (const auto& s : block) {
    f(s);
    for_each_stmt(s.then_body, f);
    for_each_stmt(s.else_body, f);
  }
}

template <typename F>
void for_each_stmt(const Program& p, F&& f) {
  for_each_stmt(p.globals, f);
  for (const auto& proc : p.procedures) for_each_stmt(proc.body, f);
}

template <typename F>
void for_each_expr(const Expr& e, F&& f) {
  f(e);
  for (const auto& a : e.args) for_each_expr(a, f);
}

/// Every expression owned directly by `s` (not by nested statements).
template <typename F>
void for_each_own_expr(const Stmt& s, F&& f) {
  if (s.target) for_each_expr(*s.target, f);
  if (s.value) for_each_expr(*s.value, f);
  for (const auto& a : s.args) for_each_expr(a, f);
}

/// Variables read by a statement's own expressions (lvalue array bases count as reads).
std::vector<std::string> used_variables(const Stmt& s);

/// Locates a statement by id anywhere in the program.
const Stmt* find_stmt(const Program& p, NodeId id);

/// Name of the procedure containing statement `id`; empty for globals.
std::string owning_procedure(const Program& p, NodeId id);

}  // namespace metabug::minilang
