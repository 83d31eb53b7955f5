#include <sstream>

#include "metabug/minilang/parser.hpp"

namespace metabug::minilang {

namespace {

int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Binary:
      if (e.text == "||") return 1;
      if (e.text == "&&") return 2;
      if (e.text == "==" || e.text == "!=" || e.text == "<" || e.text == "<=" ||
          e.text == ">" || e.text == ">=")
        return 3;
      if (e.text == "+" || e.text == "-") return 4;
      return 5;
    case ExprKind::Unary:
      return 6;
    default:
      return 7;
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out.push_back('\\');
      out.push_back(c);
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

void emit(std::ostream& os, const Expr& e, int min_prec) {
  int p = precedence(e);
  bool paren = p < min_prec;
  if (paren) os << '(';
  switch (e.kind) {
    case ExprKind::IntLit: os << e.int_value; break;
    case ExprKind::StrLit: os << quote(e.text); break;
    case ExprKind::Null: os << "null"; break;
    case ExprKind::Var: os << e.text; break;
    case ExprKind::Index:
      emit(os, e.args[0], 7);
      os << '[';
      emit(os, e.args[1], 0);
      os << ']';
      break;
    case ExprKind::Binary: {
      bool cmp = p == 3;
      emit(os, e.args[0], cmp ? p + 1 : p);
      os << ' ' << e.text << ' ';
      emit(os, e.args[1], p + 1);
      break;
    }
    case ExprKind::Unary:
      os << e.text;
      emit(os, e.args[0], 6);
      break;
    case ExprKind::Builtin:
      os << e.text << '(';
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << ", ";
        emit(os, e.args[i], 0);
      }
      os << ')';
      break;
    case ExprKind::NewArray:
      os << "new[";
      emit(os, e.args[0], 0);
      os << ']';
      break;
  }
  if (paren) os << ')';
}

void emit_args(std::ostream& os, const std::vector<Expr>& args) {
  os << '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) os << ", ";
    emit(os, args[i], 0);
  }
  os << ')';
}

void emit_header(std::ostream& os, const Stmt& s) {
  switch (s.kind) {
    case StmtKind::VarDecl:
      os << "var " << s.name << " := ";
      emit(os, *s.value, 0);
      os << ';';
      break;
    case StmtKind::Assign:
      emit(os, *s.target, 0);
      os << " := ";
      emit(os, *s.value, 0);
      os << ';';
      break;
    case StmtKind::If:
      os << "if (";
      emit(os, *s.value, 0);
      os << ')';
      break;
    case StmtKind::While:
      os << "while (";
      emit(os, *s.value, 0);
      os << ')';
      break;
    case StmtKind::Call:
      if (s.value) {
        emit(os, *s.value, 0);
      } else {
        os << s.name;
        emit_args(os, s.args);
      }
      os << ';';
      break;
    case StmtKind::Return:
      os << "return";
      if (s.value) {
        os << ' ';
        emit(os, *s.value, 0);
      }
      os << ';';
      break;
    case StmtKind::Spawn:
      os << "spawn " << s.name;
      emit_args(os, s.args);
      os << ';';
      break;
  }
}

void emit_block(std::ostream& os, const std::vector<Stmt>& block, int indent);

void emit_stmt(std::ostream& os, const Stmt& s, int indent) {
  std::string pad(indent * 2, ' ');
  os << pad;
  emit_header(os, s);
  if (s.kind == StmtKind::If || s.kind == StmtKind::While) {
    os << " {\n";
    emit_block(os, s.then_body, indent + 1);
    os << pad << '}';
    if (s.kind == StmtKind::If && !s.else_body.empty()) {
      os << " else {\n";
      emit_block(os, s.else_body, indent + 1);
      os << pad << '}';
    }
  }
  os << '\n';
}

void emit_block(std::ostream& os, const std::vector<Stmt>& block, int indent) {
  for (const auto& s : block) emit_stmt(os, s, indent);
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::ostringstream os;
  emit(os, e, 0);
  return os.str();
}

std::string print_stmt_header(const Stmt& s) {
  std::ostringstream os;
  emit_header(os, s);
  return os.str();
}

std::string pretty_print(const Program& program) {
  std::ostringstream os;
  for (const auto& g : program.globals) {
    os << "global " << g.name;
    if (g.value) {
      os << " := ";
      emit(os, *g.value, 0);
    }
    os << ";\n";
  }
  if (!program.globals.empty()) os << '\n';
  for (std::size_t i = 0; i < program.procedures.size(); ++i) {
    const auto& proc = program.procedures[i];
    if (i) os << '\n';
    os << "proc " << proc.name << '(';
    for (std::size_t j = 0; j < proc.params.size(); ++j) {
      const auto& p = proc.params[j];
      if (j) os << ", ";
      if (p.by_ref) os << "ref ";
      os << p.name << ": " << to_string(p.type);
    }
    os << ") {\n";
    emit_block(os, proc.body, 1);
    os << "}\n";
  }
  return os.str();
}

}  // namespace metabug::minilang
