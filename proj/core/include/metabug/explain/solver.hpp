#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace metabug::explain {

/// Σ coef·x_var + constant over integer variables.
struct LinExpr {
  std::map<int, std::int64_t> coef;
  std::int64_t constant = 0;

  static LinExpr var(int v);
  static LinExpr num(std::int64_t c);
  bool is_constant() const { return coef.empty(); }

  LinExpr operator+(const LinExpr& o) const;
  LinExpr operator-(const LinExpr& o) const;
  LinExpr operator*(std::int64_t k) const;
  friend bool operator==(const LinExpr&, const LinExpr&) = default;
};

/// `expr >= 0` or `expr == 0`.
struct LinConstraint {
  LinExpr expr;
  bool equality = false;
};

/// A conjunction of linear constraints and boolean atoms.
struct Conjunct {
  std::vector<LinConstraint> linear;
  std::map<int, bool> atoms;
};

/// Formula in disjunctive normal form. `exact` is false once a size cap forced
/// the formula to be weakened to true; negating such a formula also gives true,
/// so approximations only ever drop constraints.
struct Dnf {
  std::vector<Conjunct> terms;
  bool exact = true;

  static Dnf truth();
  static Dnf falsity();
  static Dnf ge(const LinExpr& e);   // e >= 0
  static Dnf eq(const LinExpr& e);   // e == 0
  static Dnf ne(const LinExpr& e);   // e != 0, as e >= 1 or e <= -1
  static Dnf atom(int id, bool value);

  bool is_true() const;
  bool is_false() const { return terms.empty(); }
};

inline constexpr std::size_t kMaxDnfTerms = 256;

Dnf conj(const Dnf& a, const Dnf& b);
Dnf disj(const Dnf& a, const Dnf& b);
Dnf negate(const Dnf& a);

/// Fourier-Motzkin elimination with integer tightening. Returns false only
/// when the constraints have no rational solution after tightening, so an
/// infeasible verdict is always genuine; blow-ups give up and return true.
bool linear_feasible(const std::vector<LinConstraint>& constraints);

bool satisfiable(const Dnf& f);

using NameFn = std::function<std::string(int)>;

/// `x - y >= 1`, `x == 0`; the constant is moved to the right-hand side.
std::string render(const LinConstraint& c, const NameFn& var);
/// Terms joined by `||`, conjuncts by `&&`; atoms print as `name` or `!name`.
std::string render(const Dnf& f, const NameFn& var, const NameFn& atom);

}  // namespace metabug::explain
