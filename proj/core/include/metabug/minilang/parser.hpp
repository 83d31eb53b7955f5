#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "metabug/minilang/ast.hpp"
#include "metabug/minilang/errors.hpp"

namespace metabug::minilang {

enum class TokenKind { Ident, Int, String, Keyword, Punct, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  SourceLoc loc;
};

/// Splits MBL source into tokens; `//` comments and whitespace are skipped.
std::vector<Token> tokenize(std::string_view source);

/// Parses and resolves a complete program. Throws SyntaxError or ResolutionError.
Program parse_program(std::string_view source);

/// Checks the Program invariants (single main, unique names, resolved calls).
/// parse_program calls this; exposed for programs assembled in code.
void resolve(const Program& program);

/// Canonical source text. parse_program(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const Program& program);
std::string print_expr(const Expr& e);
/// One-line rendering of a statement without its nested bodies.
std::string print_stmt_header(const Stmt& s);

}  // namespace metabug::minilang
