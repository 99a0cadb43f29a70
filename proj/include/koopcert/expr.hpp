#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "koopcert/rational.hpp"

namespace koopcert {

enum class SymbolKind { state, input, auxiliary };

// A named variable. Symbols are identified by name; `order` fixes their
// position in the graded-lexicographic monomial order (declaration order for
// user symbols, larger values for generated ones).
struct Symbol {
    std::string name;
    SymbolKind kind = SymbolKind::auxiliary;
    int order = 0;

    bool operator==(const Symbol& o) const { return name == o.name; }
    bool operator!=(const Symbol& o) const { return name != o.name; }
};

inline bool symbol_before(const Symbol& a, const Symbol& b) {
    if (a.order != b.order) return a.order < b.order;
    return a.name < b.name;
}

enum class FuncKind { sin, cos, exp };

inline const char* func_name(FuncKind f) {
    switch (f) {
        case FuncKind::sin: return "sin";
        case FuncKind::cos: return "cos";
        case FuncKind::exp: return "exp";
    }
    return "?";
}

class Expr;

// Elementary function applied to a canonical sub-expression, kept unexpanded.
struct FuncAtom {
    FuncKind fn;
    std::shared_ptr<const Expr> arg;
};

int compare_expr(const Expr& a, const Expr& b);

inline int compare_func_atom(const FuncAtom& a, const FuncAtom& b) {
    if (a.fn != b.fn) return a.fn < b.fn ? -1 : 1;
    return compare_expr(*a.arg, *b.arg);
}

// One canonical term: coeff * prod(sym^e) * prod(func(arg)^e).
// Power lists are sorted and exponents are >= 1; coeff is never zero inside
// a canonical Expr.
struct Term {
    Rational coeff;
    std::vector<std::pair<Symbol, int>> powers;
    std::vector<std::pair<FuncAtom, int>> funcs;

    int symbol_degree() const {
        int d = 0;
        for (const auto& [s, e] : powers) d += e;
        return d;
    }
    bool is_constant() const { return powers.empty() && funcs.empty(); }
};

// Total order on term shapes (coefficient excluded). Graded lexicographic on
// the symbol part, then the function part as a tie-break, so canonical forms
// are unique and printing follows the usual highest-degree-first convention.
inline int compare_term_key(const Term& a, const Term& b) {
    int da = a.symbol_degree(), db = b.symbol_degree();
    if (da != db) return da < db ? -1 : 1;
    size_t i = 0, j = 0;
    while (i < a.powers.size() && j < b.powers.size()) {
        const auto& [sa, ea] = a.powers[i];
        const auto& [sb, eb] = b.powers[j];
        if (sa == sb) {
            if (ea != eb) return ea > eb ? 1 : -1;  // higher power on same symbol is larger
            ++i;
            ++j;
        } else if (symbol_before(sa, sb)) {
            return 1;  // positive exponent on an earlier symbol wins
        } else {
            return -1;
        }
    }
    if (i < a.powers.size()) return 1;
    if (j < b.powers.size()) return -1;
    size_t fi = 0, fj = 0;
    while (fi < a.funcs.size() && fj < b.funcs.size()) {
        int c = compare_func_atom(a.funcs[fi].first, b.funcs[fj].first);
        if (c != 0) return c;
        if (a.funcs[fi].second != b.funcs[fj].second)
            return a.funcs[fi].second > b.funcs[fj].second ? 1 : -1;
        ++fi;
        ++fj;
    }
    if (fi < a.funcs.size()) return 1;
    if (fj < b.funcs.size()) return -1;
    return 0;
}

// Canonical symbolic expression: a sum of terms with exact rational
// coefficients, stored largest term first. Equal canonical forms are
// structurally identical, so operator== decides mathematical equality on the
// polynomial fragment.
class Expr {
public:
    Expr() = default;

    static Expr zero() { return Expr(); }
    static Expr constant(const Rational& c) {
        Expr e;
        if (c != 0) e.terms_.push_back(Term{c, {}, {}});
        return e;
    }
    static Expr symbol(const Symbol& s) {
        Expr e;
        e.terms_.push_back(Term{Rational(1), {{s, 1}}, {}});
        return e;
    }
    static Expr function(FuncKind fn, const Expr& arg) {
        Expr e;
        FuncAtom atom{fn, std::make_shared<const Expr>(arg)};
        e.terms_.push_back(Term{Rational(1), {}, {{atom, 1}}});
        return e;
    }
    static Expr from_terms(std::vector<Term> terms) {
        Expr e;
        e.canonicalize(std::move(terms));
        return e;
    }

    const std::vector<Term>& terms() const { return terms_; }
    size_t term_count() const { return terms_.size(); }

    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const {
        return terms_.empty() || (terms_.size() == 1 && terms_[0].is_constant());
    }
    Rational constant_value() const {
        if (terms_.empty()) return Rational(0);
        if (!is_constant()) throw std::logic_error("constant_value on non-constant expression");
        return terms_[0].coeff;
    }
    bool has_functions() const {
        for (const auto& t : terms_)
            if (!t.funcs.empty()) return true;
        return false;
    }

    int degree() const {
        int d = 0;
        for (const auto& t : terms_) d = std::max(d, t.symbol_degree());
        return d;
    }

    bool contains(const Symbol& s) const {
        for (const auto& t : terms_) {
            for (const auto& [ts, e] : t.powers)
                if (ts == s) return true;
            for (const auto& [f, e] : t.funcs)
                if (f.arg->contains(s)) return true;
        }
        return false;
    }

    void collect_symbols(std::map<std::string, Symbol>& out) const {
        for (const auto& t : terms_) {
            for (const auto& [s, e] : t.powers) out.emplace(s.name, s);
            for (const auto& [f, e] : t.funcs) f.arg->collect_symbols(out);
        }
    }
    std::vector<Symbol> symbols() const {
        std::map<std::string, Symbol> m;
        collect_symbols(m);
        std::vector<Symbol> v;
        v.reserve(m.size());
        for (auto& [name, s] : m) v.push_back(s);
        std::sort(v.begin(), v.end(), symbol_before);
        return v;
    }

    Expr operator-() const {
        Expr e = *this;
        for (auto& t : e.terms_) t.coeff = -t.coeff;
        return e;
    }

    Expr operator+(const Expr& o) const {
        // both sides are sorted descending: a single merge pass suffices
        Expr e;
        e.terms_.reserve(terms_.size() + o.terms_.size());
        size_t i = 0, j = 0;
        while (i < terms_.size() || j < o.terms_.size()) {
            int c;
            if (j == o.terms_.size())
                c = 1;
            else if (i == terms_.size())
                c = -1;
            else
                c = compare_term_key(terms_[i], o.terms_[j]);
            if (c > 0)
                e.terms_.push_back(terms_[i++]);
            else if (c < 0)
                e.terms_.push_back(o.terms_[j++]);
            else {
                Rational sum = terms_[i].coeff + o.terms_[j].coeff;
                if (sum != 0) {
                    Term t = terms_[i];
                    t.coeff = std::move(sum);
                    e.terms_.push_back(std::move(t));
                }
                ++i;
                ++j;
            }
        }
        return e;
    }
    Expr operator-(const Expr& o) const { return *this + (-o); }

    Expr operator*(const Expr& o) const {
        std::vector<Term> products;
        products.reserve(terms_.size() * o.terms_.size());
        for (const auto& ta : terms_)
            for (const auto& tb : o.terms_) products.push_back(multiply_terms(ta, tb));
        Expr e;
        e.canonicalize(std::move(products));
        return e;
    }
    Expr operator*(const Rational& s) const {
        if (s == 0) return Expr();
        Expr e = *this;
        for (auto& t : e.terms_) t.coeff *= s;
        return e;
    }

    Expr pow(int n) const {
        if (n < 0) throw std::invalid_argument("Expr::pow: negative exponent");
        Expr result = Expr::constant(1);
        Expr base = *this;
        while (n > 0) {
            if (n & 1) result = result * base;
            base = n > 1 ? base * base : base;
            n >>= 1;
        }
        return result;
    }

    bool operator==(const Expr& o) const { return compare_expr(*this, o) == 0; }
    bool operator!=(const Expr& o) const { return !(*this == o); }

    // Exact symbolic partial derivative (product and chain rules).
    Expr partial(const Symbol& s) const {
        std::vector<Term> acc;
        for (const auto& t : terms_) {
            Expr d = term_partial(t, s);
            acc.insert(acc.end(), d.terms().begin(), d.terms().end());
        }
        return from_terms(std::move(acc));
    }

    // Memo for repeated powers of the same replacement across one binding.
    using PowerCache = std::map<std::pair<std::string, int>, Expr>;

    // Replaces symbols by expressions; unbound symbols pass through.
    Expr substitute(const std::map<std::string, Expr>& binding) const {
        PowerCache cache;
        return substitute(binding, cache);
    }

    Expr substitute(const std::map<std::string, Expr>& binding, PowerCache& cache) const {
        std::vector<Term> acc;
        for (const auto& t : terms_) {
            Expr factor = Expr::constant(t.coeff);
            for (const auto& [sym, e] : t.powers) {
                auto it = binding.find(sym.name);
                if (it != binding.end()) {
                    factor = factor * cached_power(it->second, sym.name, e, cache);
                } else {
                    // untouched symbol: multiply the monomial factor in directly
                    for (auto& ft : factor.terms_) {
                        Term mono;
                        mono.coeff = 1;
                        mono.powers = {{sym, e}};
                        ft = multiply_terms(ft, mono);
                    }
                }
            }
            for (const auto& [atom, e] : t.funcs) {
                Expr sub_arg = atom.arg->substitute(binding, cache);
                factor = factor * Expr::function(atom.fn, sub_arg).pow(e);
            }
            acc.insert(acc.end(), factor.terms().begin(), factor.terms().end());
        }
        return from_terms(std::move(acc));
    }

    // Exact evaluation; rejects expressions with elementary functions.
    Rational eval_rational(const std::map<std::string, Rational>& values) const {
        Rational sum = 0;
        for (const auto& t : terms_) {
            if (!t.funcs.empty())
                throw std::domain_error("eval_rational: expression contains elementary functions");
            Rational prod = t.coeff;
            for (const auto& [sym, e] : t.powers) {
                auto it = values.find(sym.name);
                if (it == values.end())
                    throw std::invalid_argument("eval_rational: no value for symbol " + sym.name);
                Rational p = 1;
                for (int k = 0; k < e; ++k) p *= it->second;
                prod *= p;
            }
            sum += prod;
        }
        return sum;
    }

    double eval_double(const std::map<std::string, double>& values) const {
        double sum = 0.0;
        for (const auto& t : terms_) {
            double prod = to_double(t.coeff);
            for (const auto& [sym, e] : t.powers) {
                auto it = values.find(sym.name);
                if (it == values.end())
                    throw std::invalid_argument("eval_double: no value for symbol " + sym.name);
                prod *= std::pow(it->second, e);
            }
            for (const auto& [atom, e] : t.funcs) {
                double a = atom.arg->eval_double(values);
                double v = 0.0;
                switch (atom.fn) {
                    case FuncKind::sin: v = std::sin(a); break;
                    case FuncKind::cos: v = std::cos(a); break;
                    case FuncKind::exp: v = std::exp(a); break;
                }
                prod *= std::pow(v, e);
            }
            sum += prod;
        }
        return sum;
    }

    // Coefficient of an exact monomial shape (symbol powers only).
    Rational coefficient(const std::vector<std::pair<Symbol, int>>& monomial) const {
        for (const auto& t : terms_) {
            if (!t.funcs.empty()) continue;
            if (t.powers == monomial) return t.coeff;
        }
        return Rational(0);
    }

    std::string to_string() const;

private:
    // sort descending, merge like terms, drop zeros
    void canonicalize(std::vector<Term> terms) {
        std::sort(terms.begin(), terms.end(),
                  [](const Term& a, const Term& b) { return compare_term_key(a, b) > 0; });
        terms_.clear();
        terms_.reserve(terms.size());
        for (auto& t : terms) {
            if (!terms_.empty() && compare_term_key(terms_.back(), t) == 0) {
                terms_.back().coeff += t.coeff;
                if (terms_.back().coeff == 0) terms_.pop_back();
            } else {
                terms_.push_back(std::move(t));
            }
        }
        terms_.shrink_to_fit();
    }

    static Term multiply_terms(const Term& a, const Term& b) {
        Term out;
        out.coeff = a.coeff * b.coeff;
        // merge sorted power lists
        size_t i = 0, j = 0;
        while (i < a.powers.size() || j < b.powers.size()) {
            if (j == b.powers.size() ||
                (i < a.powers.size() && symbol_before(a.powers[i].first, b.powers[j].first))) {
                out.powers.push_back(a.powers[i++]);
            } else if (i == a.powers.size() ||
                       symbol_before(b.powers[j].first, a.powers[i].first)) {
                out.powers.push_back(b.powers[j++]);
            } else {
                out.powers.emplace_back(a.powers[i].first, a.powers[i].second + b.powers[j].second);
                ++i;
                ++j;
            }
        }
        // merge sorted function lists
        size_t fi = 0, fj = 0;
        while (fi < a.funcs.size() || fj < b.funcs.size()) {
            int c;
            if (fj == b.funcs.size())
                c = -1;
            else if (fi == a.funcs.size())
                c = 1;
            else
                c = compare_func_atom(a.funcs[fi].first, b.funcs[fj].first);
            if (c < 0)
                out.funcs.push_back(a.funcs[fi++]);
            else if (c > 0)
                out.funcs.push_back(b.funcs[fj++]);
            else {
                out.funcs.emplace_back(a.funcs[fi].first,
                                       a.funcs[fi].second + b.funcs[fj].second);
                ++fi;
                ++fj;
            }
        }
        return out;
    }

    static Expr term_without_factor(const Term& t, size_t power_index, bool is_func,
                                    size_t func_index) {
        Term copy = t;
        if (!is_func) {
            if (copy.powers[power_index].second > 1)
                --copy.powers[power_index].second;
            else
                copy.powers.erase(copy.powers.begin() + power_index);
        } else {
            if (copy.funcs[func_index].second > 1)
                --copy.funcs[func_index].second;
            else
                copy.funcs.erase(copy.funcs.begin() + func_index);
        }
        return from_terms({copy});
    }

    static const Expr& cached_power(const Expr& base, const std::string& name, int e,
                                    PowerCache& cache) {
        auto it = cache.find({name, e});
        if (it != cache.end()) return it->second;
        Expr value = e == 1 ? base : cached_power(base, name, e - 1, cache) * base;
        return cache.emplace(std::make_pair(name, e), std::move(value)).first->second;
    }

    static Expr func_derivative(const FuncAtom& atom) {
        switch (atom.fn) {
            case FuncKind::sin: return Expr::function(FuncKind::cos, *atom.arg);
            case FuncKind::cos: return -Expr::function(FuncKind::sin, *atom.arg);
            case FuncKind::exp: return Expr::function(FuncKind::exp, *atom.arg);
        }
        return Expr();
    }

    static Expr term_partial(const Term& t, const Symbol& s) {
        Expr result;
        for (size_t i = 0; i < t.powers.size(); ++i) {
            const auto& [sym, e] = t.powers[i];
            if (!(sym == s)) continue;
            result = result + term_without_factor(t, i, false, 0) * Rational(e);
        }
        for (size_t i = 0; i < t.funcs.size(); ++i) {
            const auto& [atom, e] = t.funcs[i];
            Expr inner = atom.arg->partial(s);
            if (inner.is_zero()) continue;
            Expr rest = term_without_factor(t, 0, true, i);
            result = result + rest * func_derivative(atom) * inner * Rational(e);
        }
        return result;
    }

    std::vector<Term> terms_;
};

inline int compare_expr(const Expr& a, const Expr& b) {
    const auto& ta = a.terms();
    const auto& tb = b.terms();
    size_t n = std::min(ta.size(), tb.size());
    for (size_t i = 0; i < n; ++i) {
        int c = compare_term_key(ta[i], tb[i]);
        if (c != 0) return c;
        if (ta[i].coeff != tb[i].coeff) return ta[i].coeff < tb[i].coeff ? -1 : 1;
    }
    if (ta.size() != tb.size()) return ta.size() < tb.size() ? -1 : 1;
    return 0;
}

inline std::string Expr::to_string() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& t : terms_) {
        Rational mag = t.coeff < 0 ? Rational(-t.coeff) : t.coeff;
        if (first) {
            if (t.coeff < 0) out += "-";
            first = false;
        } else {
            out += t.coeff < 0 ? " - " : " + ";
        }
        bool coeff_shown = false;
        if (mag != 1 || t.is_constant()) {
            out += koopcert::to_string(mag);
            coeff_shown = true;
        }
        bool first_factor = !coeff_shown;
        auto sep = [&] {
            if (!first_factor) out += "*";
            first_factor = false;
        };
        for (const auto& [sym, e] : t.powers) {
            sep();
            out += sym.name;
            if (e > 1) out += "^" + std::to_string(e);
        }
        for (const auto& [atom, e] : t.funcs) {
            sep();
            out += std::string(func_name(atom.fn)) + "(" + atom.arg->to_string() + ")";
            if (e > 1) out += "^" + std::to_string(e);
        }
    }
    return out;
}

// Componentwise helpers for expression vectors.

inline std::vector<Expr> substitute_all(const std::vector<Expr>& es,
                                        const std::map<std::string, Expr>& binding) {
    Expr::PowerCache cache;  // shared across components
    std::vector<Expr> out;
    out.reserve(es.size());
    for (const auto& e : es) out.push_back(e.substitute(binding, cache));
    return out;
}

inline size_t total_term_count(const std::vector<Expr>& es) {
    size_t n = 0;
    for (const auto& e : es) n += e.term_count();
    return n;
}

}  // namespace koopcert
