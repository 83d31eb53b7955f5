#include "metabug/explain/solver.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

namespace metabug::explain {

LinExpr LinExpr::var(int v) {
  LinExpr e;
  e.coef[v] = 1;
  return e;
}

LinExpr LinExpr::num(std::int64_t c) {
  LinExpr e;
  e.constant = c;
  return e;
}

LinExpr LinExpr::operator+(const LinExpr& o) const {
  LinExpr r = *this;
  r.constant += o.constant;
  for (const auto& [v, c] : o.coef) {
    if ((r.coef[v] += c) == 0) r.coef.erase(v);
  }
  return r;
}

LinExpr LinExpr::operator-(const LinExpr& o) const { return *this + o * -1; }

LinExpr LinExpr::operator*(std::int64_t k) const {
  LinExpr r;
  if (k == 0) return r;
  r.constant = constant * k;
  for (const auto& [v, c] : coef) r.coef[v] = c * k;
  return r;
}

Dnf Dnf::truth() {
  Dnf d;
  d.terms.emplace_back();
  return d;
}

Dnf Dnf::falsity() { return Dnf{}; }

Dnf Dnf::ge(const LinExpr& e) {
  if (e.is_constant()) return e.constant >= 0 ? truth() : falsity();
  Dnf d = truth();
  d.terms[0].linear.push_back({e, false});
  return d;
}

Dnf Dnf::eq(const LinExpr& e) {
  if (e.is_constant()) return e.constant == 0 ? truth() : falsity();
  Dnf d = truth();
  d.terms[0].linear.push_back({e, true});
  return d;
}

Dnf Dnf::ne(const LinExpr& e) { return disj(ge(e - LinExpr::num(1)), ge(e * -1 - LinExpr::num(1))); }

Dnf Dnf::atom(int id, bool value) {
  Dnf d = truth();
  d.terms[0].atoms[id] = value;
  return d;
}

bool Dnf::is_true() const {
  return std::any_of(terms.begin(), terms.end(),
                     [](const Conjunct& c) { return c.linear.empty() && c.atoms.empty(); });
}

namespace {

Dnf weakened() {
  Dnf d = Dnf::truth();
  d.exact = false;
  return d;
}

}  // namespace

Dnf conj(const Dnf& a, const Dnf& b) {
  if (a.terms.size() * b.terms.size() > kMaxDnfTerms) {
    // Keep whichever side is exact; the conjunction only gets weaker.
    if (a.exact && a.terms.size() <= kMaxDnfTerms) return Dnf{a.terms, false};
    if (b.exact && b.terms.size() <= kMaxDnfTerms) return Dnf{b.terms, false};
    return weakened();
  }
  Dnf r;
  r.exact = a.exact && b.exact;
  for (const auto& x : a.terms)
    for (const auto& y : b.terms) {
      Conjunct c = x;
      bool clash = false;
      for (const auto& [id, v] : y.atoms) {
        auto it = c.atoms.find(id);
        if (it != c.atoms.end() && it->second != v) {
          clash = true;
          break;
        }
        c.atoms[id] = v;
      }
      if (clash) continue;
      c.linear.insert(c.linear.end(), y.linear.begin(), y.linear.end());
      r.terms.push_back(std::move(c));
    }
  return r;
}

Dnf disj(const Dnf& a, const Dnf& b) {
  if (a.terms.size() + b.terms.size() > kMaxDnfTerms) return weakened();
  Dnf r = a;
  r.exact = a.exact && b.exact;
  r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
  return r;
}

Dnf negate(const Dnf& a) {
  if (!a.exact) return weakened();
  Dnf r = Dnf::truth();
  for (const auto& term : a.terms) {
    Dnf clause = Dnf::falsity();
    for (const auto& lc : term.linear) {
      if (lc.equality) clause = disj(clause, Dnf::ne(lc.expr));
      else clause = disj(clause, Dnf::ge(lc.expr * -1 - LinExpr::num(1)));
    }
    for (const auto& [id, v] : term.atoms) clause = disj(clause, Dnf::atom(id, !v));
    r = conj(r, clause);
    if (!r.exact) return weakened();
  }
  return r;
}

namespace {

constexpr std::int64_t kCoefLimit = std::int64_t{1} << 30;
constexpr std::size_t kRowLimit = 4000;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Divides by the gcd of the variable coefficients and floors the constant,
// which keeps exactly the same integer solutions.
bool tighten(LinExpr& e) {
  std::int64_t g = 0;
  for (const auto& [v, c] : e.coef) g = std::gcd(g, std::llabs(c));
  if (g > 1) {
    for (auto& [v, c] : e.coef) c /= g;
    e.constant = floor_div(e.constant, g);
  }
  for (const auto& [v, c] : e.coef)
    if (std::llabs(c) > kCoefLimit) return false;
  return std::llabs(e.constant) <= kCoefLimit;
}

}  // namespace

bool linear_feasible(const std::vector<LinConstraint>& constraints) {
  std::vector<LinExpr> rows;
  std::vector<LinExpr> eqs;
  for (const auto& c : constraints) (c.equality ? eqs : rows).push_back(c.expr);
  // Equalities: substitute away a unit-coefficient variable, else split.
  while (!eqs.empty()) {
    LinExpr e = eqs.back();
    eqs.pop_back();
    if (e.is_constant()) {
      if (e.constant != 0) return false;
      continue;
    }
    std::int64_t g = 0;
    for (const auto& [v, c] : e.coef) g = std::gcd(g, std::llabs(c));
    if (e.constant % g != 0) return false;
    int pivot = -1;
    for (const auto& [v, c] : e.coef)
      if (std::llabs(c) == 1) {
        pivot = v;
        break;
      }
    if (pivot < 0) {
      rows.push_back(e);
      rows.push_back(e * -1);
      continue;
    }
    // x = -(e - c·x) / c with c = ±1.
    std::int64_t c = e.coef.at(pivot);
    LinExpr rest = e;
    rest.coef.erase(pivot);
    LinExpr value = rest * (-c);
    auto substitute = [&](LinExpr& x) {
      auto it = x.coef.find(pivot);
      if (it == x.coef.end()) return;
      std::int64_t k = it->second;
      x.coef.erase(it);
      x = x + value * k;
    };
    for (auto& x : eqs) substitute(x);
    for (auto& x : rows) substitute(x);
  }
  while (true) {
    std::vector<LinExpr> live;
    std::set<std::pair<std::vector<std::pair<int, std::int64_t>>, std::int64_t>> seen;
    for (auto& r : rows) {
      if (!tighten(r)) return true;
      if (r.is_constant()) {
        if (r.constant < 0) return false;
        continue;
      }
      std::vector<std::pair<int, std::int64_t>> key(r.coef.begin(), r.coef.end());
      if (seen.insert({key, r.constant}).second) live.push_back(r);
    }
    if (live.empty()) return true;
    // Eliminate the variable with the fewest generated rows.
    std::map<int, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& r : live)
      for (const auto& [v, c] : r.coef) (c > 0 ? counts[v].first : counts[v].second)++;
    int best = -1;
    std::size_t best_cost = 0;
    for (const auto& [v, pn] : counts) {
      std::size_t cost = pn.first * pn.second;
      if (best < 0 || cost < best_cost) {
        best = v;
        best_cost = cost;
      }
    }
    std::vector<LinExpr> pos, neg, next;
    for (auto& r : live) {
      auto it = r.coef.find(best);
      if (it == r.coef.end()) next.push_back(r);
      else (it->second > 0 ? pos : neg).push_back(r);
    }
    if (next.size() + pos.size() * neg.size() > kRowLimit) return true;
    for (const auto& p : pos)
      for (const auto& n : neg) {
        std::int64_t a = p.coef.at(best), b = -n.coef.at(best);
        next.push_back(p * b + n * a);
      }
    rows = std::move(next);
  }
}

bool satisfiable(const Dnf& f) {
  return std::any_of(f.terms.begin(), f.terms.end(),
                     [](const Conjunct& c) { return linear_feasible(c.linear); });
}

std::string render(const LinConstraint& c, const NameFn& var) {
  // Reads better with positive coefficients: -x >= 1 becomes x <= -1.
  bool flip = !c.expr.coef.empty() &&
              (c.equality ? c.expr.coef.begin()->second < 0
                          : std::all_of(c.expr.coef.begin(), c.expr.coef.end(),
                                        [](const auto& t) { return t.second < 0; }));
  LinExpr e = flip ? c.expr * -1 : c.expr;
  std::ostringstream os;
  bool first = true;
  for (const auto& [v, k] : e.coef) {
    if (first) {
      if (k < 0) os << "-";
    } else {
      os << (k < 0 ? " - " : " + ");
    }
    if (std::llabs(k) != 1) os << std::llabs(k) << "*";
    os << var(v);
    first = false;
  }
  if (first) os << 0;
  os << (c.equality ? " == " : flip ? " <= " : " >= ") << -e.constant;
  return os.str();
}

std::string render(const Dnf& f, const NameFn& var, const NameFn& atom) {
  if (f.is_false()) return "false";
  if (f.is_true()) return "true";
  std::ostringstream os;
  for (std::size_t t = 0; t < f.terms.size(); ++t) {
    const Conjunct& c = f.terms[t];
    if (t) os << " || ";
    std::size_t parts = c.linear.size() + c.atoms.size();
    bool wrap = f.terms.size() > 1 && parts > 1;
    if (wrap) os << "(";
    bool first = true;
    for (const auto& l : c.linear) {
      os << (first ? "" : " && ") << render(l, var);
      first = false;
    }
    for (const auto& [a, v] : c.atoms) {
      os << (first ? "" : " && ") << (v ? "" : "!") << atom(a);
      first = false;
    }
    if (wrap) os << ")";
  }
  return os.str();
}

}  // namespace metabug::explain
