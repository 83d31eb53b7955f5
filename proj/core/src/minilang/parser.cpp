#include "metabug/minilang/parser.hpp"

#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "metabug/minilang/builtins.hpp"

namespace metabug::minilang {

namespace {

const std::unordered_set<std::string> kKeywords = {
    "proc", "var", "global", "if", "else", "while", "return", "spawn",
    "null", "new", "ref", "int", "string", "handle", "array"};

const char* kTwoCharPuncts[] = {":=", "==", "!=", "<=", ">=", "&&", "||"};

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    SourceLoc loc{line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      std::string word(src.substr(i, j - i));
      TokenKind kind = kKeywords.count(word) ? TokenKind::Keyword : TokenKind::Ident;
      out.push_back({kind, word, loc});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({TokenKind::Int, std::string(src.substr(i, j - i)), loc});
      advance(j - i);
      continue;
    }
    if (c == '"') {
      std::string text;
      advance(1);
      bool closed = false;
      while (i < src.size()) {
        char d = src[i];
        if (d == '"') {
          advance(1);
          closed = true;
          break;
        }
        if (d == '\n') break;
        if (d == '\\' && i + 1 < src.size()) {
          char e = src[i + 1];
          text.push_back(e == 'n' ? '\n' : e);
          advance(2);
          continue;
        }
        text.push_back(d);
        advance(1);
      }
      if (!closed) throw SyntaxError(loc, "unterminated string literal");
      out.push_back({TokenKind::String, text, loc});
      continue;
    }
    bool matched = false;
    for (const char* p : kTwoCharPuncts) {
      if (src.substr(i, 2) == p) {
        out.push_back({TokenKind::Punct, p, loc});
        advance(2);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("(){}[];,:+-*/%<>!").find(c) != std::string_view::npos) {
      out.push_back({TokenKind::Punct, std::string(1, c), loc});
      advance(1);
      continue;
    }
    throw SyntaxError(loc, std::string("unexpected character '") + c + "'");
  }
  out.push_back({TokenKind::End, "", {line, col}});
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program parse() {
    Program prog;
    while (!at_end()) {
      if (is_kw("global")) {
        prog.globals.push_back(parse_global());
      } else if (is_kw("proc")) {
        prog.procedures.push_back(parse_proc());
      } else {
        fail("expected 'proc' or 'global'");
      }
    }
    prog.next_id = next_id_;
    return prog;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  NodeId next_id_ = 0;

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == TokenKind::End; }
  bool is_kw(const char* kw) const {
    return peek().kind == TokenKind::Keyword && peek().text == kw;
  }
  bool is_punct(const char* p, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokenKind::Punct && peek(ahead).text == p;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    std::string got = at_end() ? "end of input" : "'" + peek().text + "'";
    throw SyntaxError(peek().loc, msg + ", got " + got);
  }
  Token take() { return toks_[pos_++]; }
  void expect_punct(const char* p) {
    if (!is_punct(p)) fail(std::string("expected '") + p + "'");
    ++pos_;
  }
  void expect_kw(const char* kw) {
    if (!is_kw(kw)) fail(std::string("expected '") + kw + "'");
    ++pos_;
  }
  Token expect_ident() {
    if (peek().kind != TokenKind::Ident) fail("expected identifier");
    return take();
  }
  NodeId fresh() { return next_id_++; }

  Stmt parse_global() {
    Stmt s;
    s.loc = peek().loc;
    s.id = fresh();
    expect_kw("global");
    s.kind = StmtKind::VarDecl;
    Token name = expect_ident();
    s.name = name.text;
    Expr target = Expr::var(name.text);
    target.loc = name.loc;
    target.id = fresh();
    s.target = std::move(target);
    if (is_punct(":=")) {
      ++pos_;
      s.value = parse_expr();
    }
    expect_punct(";");
    return s;
  }

  Type parse_type() {
    if (peek().kind == TokenKind::Keyword) {
      const std::string& t = peek().text;
      Type ty;
      if (t == "int") ty = Type::Int;
      else if (t == "string") ty = Type::String;
      else if (t == "handle") ty = Type::Handle;
      else if (t == "array") ty = Type::Array;
      else fail("expected type");
      ++pos_;
      return ty;
    }
    fail("expected type");
  }

  Procedure parse_proc() {
    Procedure proc;
    proc.loc = peek().loc;
    proc.id = fresh();
    expect_kw("proc");
    proc.name = expect_ident().text;
    expect_punct("(");
    if (!is_punct(")")) {
      while (true) {
        Param p;
        p.loc = peek().loc;
        p.id = fresh();
        if (is_kw("ref")) {
          ++pos_;
          p.by_ref = true;
        }
        p.name = expect_ident().text;
        expect_punct(":");
        p.type = parse_type();
        proc.params.push_back(std::move(p));
        if (is_punct(",")) {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect_punct(")");
    proc.body = parse_block();
    return proc;
  }

  std::vector<Stmt> parse_block() {
    expect_punct("{");
    std::vector<Stmt> out;
    while (!is_punct("}")) {
      if (at_end()) fail("expected '}'");
      out.push_back(parse_stmt());
    }
    ++pos_;
    return out;
  }

  std::vector<Expr> parse_args() {
    expect_punct("(");
    std::vector<Expr> args;
    if (!is_punct(")")) {
      while (true) {
        args.push_back(parse_expr());
        if (is_punct(",")) {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect_punct(")");
    return args;
  }

  Stmt parse_if() {
    Stmt s;
    s.loc = peek().loc;
    s.id = fresh();
    s.kind = StmtKind::If;
    expect_kw("if");
    expect_punct("(");
    s.value = parse_expr();
    expect_punct(")");
    s.then_body = parse_block();
    if (is_kw("else")) {
      ++pos_;
      if (is_kw("if")) {
        s.else_body.push_back(parse_if());
      } else {
        s.else_body = parse_block();
      }
    }
    return s;
  }

  Stmt parse_stmt() {
    if (is_kw("if")) return parse_if();
    Stmt s;
    s.loc = peek().loc;
    s.id = fresh();
    if (is_kw("var")) {
      ++pos_;
      s.kind = StmtKind::VarDecl;
      Token name = expect_ident();
      s.name = name.text;
      Expr target = Expr::var(name.text);
      target.loc = name.loc;
      target.id = fresh();
      s.target = std::move(target);
      expect_punct(":=");
      s.value = parse_expr();
      expect_punct(";");
      return s;
    }
    if (is_kw("while")) {
      ++pos_;
      s.kind = StmtKind::While;
      expect_punct("(");
      s.value = parse_expr();
      expect_punct(")");
      s.then_body = parse_block();
      return s;
    }
    if (is_kw("return")) {
      ++pos_;
      s.kind = StmtKind::Return;
      if (!is_punct(";")) s.value = parse_expr();
      expect_punct(";");
      return s;
    }
    if (is_kw("spawn")) {
      ++pos_;
      s.kind = StmtKind::Spawn;
      s.name = expect_ident().text;
      s.args = parse_args();
      expect_punct(";");
      return s;
    }
    if (peek().kind == TokenKind::Ident && is_punct("(", 1)) {
      Token name = take();
      s.kind = StmtKind::Call;
      s.name = name.text;
      auto args = parse_args();
      if (is_builtin(name.text)) {
        Expr call = Expr::builtin(name.text, std::move(args));
        call.loc = name.loc;
        call.id = fresh();
        s.value = std::move(call);
      } else {
        s.args = std::move(args);
      }
      expect_punct(";");
      return s;
    }
    if (peek().kind == TokenKind::Ident) {
      s.kind = StmtKind::Assign;
      s.target = parse_lvalue();
      expect_punct(":=");
      s.value = parse_expr();
      expect_punct(";");
      return s;
    }
    fail("expected statement");
  }

  Expr parse_lvalue() {
    Token name = expect_ident();
    Expr base = Expr::var(name.text);
    base.loc = name.loc;
    base.id = fresh();
    if (!is_punct("[")) return base;
    ++pos_;
    Expr idx = parse_expr();
    expect_punct("]");
    Expr e = Expr::index(std::move(base), std::move(idx));
    e.loc = name.loc;
    e.id = fresh();
    return e;
  }

  Expr make_binary(const Token& op, Expr lhs, Expr rhs) {
    Expr e = Expr::binary(op.text, std::move(lhs), std::move(rhs));
    e.loc = op.loc;
    e.id = fresh();
    return e;
  }

  Expr parse_expr() { return parse_or(); }

  Expr parse_or() {
    Expr lhs = parse_and();
    while (is_punct("||")) {
      Token op = take();
      lhs = make_binary(op, std::move(lhs), parse_and());
    }
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_cmp();
    while (is_punct("&&")) {
      Token op = take();
      lhs = make_binary(op, std::move(lhs), parse_cmp());
    }
    return lhs;
  }

  Expr parse_cmp() {
    Expr lhs = parse_add();
    for (const char* p : {"==", "!=", "<", "<=", ">", ">="}) {
      if (is_punct(p)) {
        Token op = take();
        return make_binary(op, std::move(lhs), parse_add());
      }
    }
    return lhs;
  }

  Expr parse_add() {
    Expr lhs = parse_mul();
    while (is_punct("+") || is_punct("-")) {
      Token op = take();
      lhs = make_binary(op, std::move(lhs), parse_mul());
    }
    return lhs;
  }

  Expr parse_mul() {
    Expr lhs = parse_unary();
    while (is_punct("*") || is_punct("/") || is_punct("%")) {
      Token op = take();
      lhs = make_binary(op, std::move(lhs), parse_unary());
    }
    return lhs;
  }

  Expr parse_unary() {
    if (is_punct("-") || is_punct("!")) {
      Token op = take();
      Expr operand = parse_unary();
      Expr e = Expr::unary(op.text, std::move(operand));
      e.loc = op.loc;
      e.id = fresh();
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token tok = peek();
    switch (tok.kind) {
      case TokenKind::Int: {
        ++pos_;
        Expr e = Expr::int_lit(std::stoll(tok.text));
        e.loc = tok.loc;
        e.id = fresh();
        return e;
      }
      case TokenKind::String: {
        ++pos_;
        Expr e = Expr::str_lit(tok.text);
        e.loc = tok.loc;
        e.id = fresh();
        return e;
      }
      case TokenKind::Keyword:
        if (tok.text == "null") {
          ++pos_;
          Expr e = Expr::null();
          e.loc = tok.loc;
          e.id = fresh();
          return e;
        }
        if (tok.text == "new") {
          ++pos_;
          expect_punct("[");
          Expr len = parse_expr();
          expect_punct("]");
          Expr e = Expr::new_array(std::move(len));
          e.loc = tok.loc;
          e.id = fresh();
          return e;
        }
        fail("expected expression");
      case TokenKind::Ident: {
        ++pos_;
        if (is_punct("(")) {
          auto args = parse_args();
          Expr e = Expr::builtin(tok.text, std::move(args));
          e.loc = tok.loc;
          e.id = fresh();
          return e;
        }
        Expr base = Expr::var(tok.text);
        base.loc = tok.loc;
        base.id = fresh();
        if (is_punct("[")) {
          ++pos_;
          Expr idx = parse_expr();
          expect_punct("]");
          Expr e = Expr::index(std::move(base), std::move(idx));
          e.loc = tok.loc;
          e.id = fresh();
          return e;
        }
        return base;
      }
      case TokenKind::Punct:
        if (tok.text == "(") {
          ++pos_;
          Expr e = parse_expr();
          expect_punct(")");
          return e;
        }
        fail("expected expression");
      case TokenKind::End:
        fail("expected expression");
    }
    fail("expected expression");
  }
};

// ---------------------------------------------------------------------------
// Name resolution

class Resolver {
 public:
  explicit Resolver(const Program& p) : prog_(p) {}

  void run() {
    const Procedure* main = nullptr;
    std::set<std::string> names;
    for (const auto& proc : prog_.procedures) {
      if (is_builtin(proc.name))
        throw ResolutionError(proc.loc, proc.name, "procedure shadows builtin");
      if (!names.insert(proc.name).second)
        throw ResolutionError(proc.loc, proc.name, "duplicate procedure");
      if (proc.name == prog_.entry) main = &proc;
    }
    if (!main) throw SyntaxError(SourceLoc{1, 1}, "missing procedure '" + prog_.entry + "'");
    for (const auto& g : prog_.globals) {
      globals_.insert(g.name);
    }
    for (const auto& g : prog_.globals)
      if (g.value) check_expr(*g.value, globals_);
    for (const auto& proc : prog_.procedures) check_proc(proc);
  }

 private:
  const Program& prog_;
  std::set<std::string> globals_;

  void check_proc(const Procedure& proc) {
    std::set<std::string> scope = globals_;
    std::set<std::string> params;
    for (const auto& p : proc.params) {
      if (!params.insert(p.name).second)
        throw ResolutionError(p.loc, p.name, "duplicate parameter");
      scope.insert(p.name);
    }
    for_each_stmt(proc.body, [&](const Stmt& s) {
      if (s.kind == StmtKind::VarDecl) scope.insert(s.name);
    });
    for_each_stmt(proc.body, [&](const Stmt& s) { check_stmt(s, scope); });
  }

  void check_call_target(const Stmt& s) {
    const Procedure* callee = prog_.find_procedure(s.name);
    if (!callee) throw ResolutionError(s.loc, s.name, "call to undeclared procedure");
    if (callee->params.size() != s.args.size())
      throw ResolutionError(s.loc, s.name, "wrong number of arguments to");
    for (std::size_t i = 0; i < s.args.size(); ++i) {
      if (callee->params[i].by_ref && s.args[i].kind != ExprKind::Var)
        throw ResolutionError(s.args[i].loc, callee->params[i].name,
                              "by-reference argument must be a variable for parameter");
    }
  }

  void check_stmt(const Stmt& s, const std::set<std::string>& scope) {
    switch (s.kind) {
      case StmtKind::Call:
        if (s.value) {
          check_expr(*s.value, scope);
        } else {
          if (is_builtin(s.name))
            throw ResolutionError(s.loc, s.name, "malformed builtin call");
          check_call_target(s);
        }
        break;
      case StmtKind::Spawn:
        if (is_builtin(s.name)) throw ResolutionError(s.loc, s.name, "cannot spawn builtin");
        check_call_target(s);
        break;
      default:
        break;
    }
    if (s.target) check_expr(*s.target, scope);
    if (s.value && s.kind != StmtKind::Call) check_expr(*s.value, scope);
    for (const auto& a : s.args) check_expr(a, scope);
  }

  void check_expr(const Expr& e, const std::set<std::string>& scope) {
    for_each_expr(e, [&](const Expr& x) {
      if (x.kind == ExprKind::Var && !scope.count(x.text))
        throw ResolutionError(x.loc, x.text, "undefined variable");
      if (x.kind == ExprKind::Builtin) {
        auto sig = find_builtin(x.text);
        if (!sig) {
          if (prog_.find_procedure(x.text))
            throw ResolutionError(x.loc, x.text, "procedure used as expression");
          throw ResolutionError(x.loc, x.text, "call to undeclared procedure");
        }
        if (static_cast<int>(x.args.size()) != sig->arity)
          throw ResolutionError(x.loc, x.text, "wrong number of arguments to");
        if (sig->takes_handle) {
          auto k = x.args[0].kind;
          if (k == ExprKind::IntLit || k == ExprKind::StrLit || k == ExprKind::NewArray)
            throw ResolutionError(x.args[0].loc, x.text, "non-handle argument to");
        }
      }
    });
  }
};

}  // namespace

void resolve(const Program& program) { Resolver(program).run(); }

Program parse_program(std::string_view source) {
  Parser parser(tokenize(source));
  Program prog = parser.parse();
  resolve(prog);
  return prog;
}

}  // namespace metabug::minilang
