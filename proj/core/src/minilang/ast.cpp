#include "metabug/minilang/ast.hpp"

#include <algorithm>

namespace metabug::minilang {

Expr Expr::int_lit(std::int64_t v) {
  Expr e;
  e.kind = ExprKind::IntLit;
  e.int_value = v;
  return e;
}

Expr Expr::str_lit(std::string s) {
  Expr e;
  e.kind = ExprKind::StrLit;
  e.text = std::move(s);
  return e;
}

Expr Expr::null() { return Expr{}; }

Expr Expr::var(std::string name) {
  Expr e;
  e.kind = ExprKind::Var;
  e.text = std::move(name);
  return e;
}

Expr Expr::index(Expr base, Expr idx) {
  Expr e;
  e.kind = ExprKind::Index;
  e.args.push_back(std::move(base));
  e.args.push_back(std::move(idx));
  return e;
}

Expr Expr::binary(std::string op, Expr lhs, Expr rhs) {
  Expr e;
  e.kind = ExprKind::Binary;
  e.text = std::move(op);
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

Expr Expr::unary(std::string op, Expr operand) {
  Expr e;
  e.kind = ExprKind::Unary;
  e.text = std::move(op);
  e.args.push_back(std::move(operand));
  return e;
}

Expr Expr::builtin(std::string name, std::vector<Expr> args) {
  Expr e;
  e.kind = ExprKind::Builtin;
  e.text = std::move(name);
  e.args = std::move(args);
  return e;
}

Expr Expr::new_array(Expr length) {
  Expr e;
  e.kind = ExprKind::NewArray;
  e.args.push_back(std::move(length));
  return e;
}

const Procedure* Program::find_procedure(const std::string& name) const {
  auto it = std::find_if(procedures.begin(), procedures.end(),
                         [&](const Procedure& p) { return p.name == name; });
  return it == procedures.end() ? nullptr : &*it;
}

const char* to_string(Type t) {
  switch (t) {
    case Type::Int: return "int";
    case Type::String: return "string";
    case Type::Handle: return "handle";
    case Type::Array: return "array";
  }
  return "?";
}

const char* to_string(StmtKind k) {
  switch (k) {
    case StmtKind::VarDecl: return "var-decl";
    case StmtKind::Assign: return "assign";
    case StmtKind::If: return "if";
    case StmtKind::While: return "while";
    case StmtKind::Call: return "call";
    case StmtKind::Return: return "return";
    case StmtKind::Spawn: return "spawn";
  }
  return "?";
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.int_value != b.int_value || a.text != b.text ||
      a.args.size() != b.args.size())
    return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!structurally_equal(a.args[i], b.args[i])) return false;
  return true;
}

namespace {

bool opt_equal(const std::optional<Expr>& a, const std::optional<Expr>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || structurally_equal(*a, *b);
}

bool block_equal(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!structurally_equal(a[i], b[i])) return false;
  return true;
}

const Stmt* find_in_block(const std::vector<Stmt>& block, NodeId id) {
  for (const auto& s : block) {
    if (s.id == id) return &s;
    if (auto* r = find_in_block(s.then_body, id)) return r;
    if (auto* r = find_in_block(s.else_body, id)) return r;
  }
  return nullptr;
}

}  // namespace

bool structurally_equal(const Stmt& a, const Stmt& b) {
  if (a.kind != b.kind || a.name != b.name || a.args.size() != b.args.size()) return false;
  if (!opt_equal(a.target, b.target) || !opt_equal(a.value, b.value)) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!structurally_equal(a.args[i], b.args[i])) return false;
  return block_equal(a.then_body, b.then_body) && block_equal(a.else_body, b.else_body);
}

bool structurally_equal(const Program& a, const Program& b) {
  if (a.entry != b.entry || !block_equal(a.globals, b.globals) ||
      a.procedures.size() != b.procedures.size())
    return false;
  for (std::size_t i = 0; i < a.procedures.size(); ++i) {
    const auto& p = a.procedures[i];
    const auto& q = b.procedures[i];
    if (p.name != q.name || p.params.size() != q.params.size()) return false;
    for (std::size_t j = 0; j < p.params.size(); ++j) {
      if (p.params[j].name != q.params[j].name || p.params[j].type != q.params[j].type ||
          p.params[j].by_ref != q.params[j].by_ref)
        return false;
    }
    if (!block_equal(p.body, q.body)) return false;
  }
  return true;
}

std::vector<std::string> used_variables(const Stmt& s) {
  std::vector<std::string> out;
  auto add = [&](const Expr& e) {
    if (e.kind == ExprKind::Var) out.push_back(e.text);
  };
  // A plain `x := ...` or `var x := ...` target is a definition, not a use.
  if (s.target && s.target->kind == ExprKind::Index) for_each_expr(*s.target, add);
  if (s.value) for_each_expr(*s.value, add);
  for (const auto& a : s.args) for_each_expr(a, add);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const Stmt* find_stmt(const Program& p, NodeId id) {
  if (auto* s = find_in_block(p.globals, id)) return s;
  for (const auto& proc : p.procedures)
    if (auto* s = find_in_block(proc.body, id)) return s;
  return nullptr;
}

std::string owning_procedure(const Program& p, NodeId id) {
  for (const auto& proc : p.procedures)
    if (find_in_block(proc.body, id)) return proc.name;
  return {};
}

}  // namespace metabug::minilang
