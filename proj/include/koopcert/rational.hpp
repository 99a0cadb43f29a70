#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <sstream>
#include <stdexcept>
#include <string>

namespace koopcert {

using Int = boost::multiprecision::cpp_int;

// Exact rational scalar. boost::cpp_rational keeps gcd(num, den) = 1 and
// den > 0 as class invariants, which is exactly the canonical form we need.
using Rational = boost::multiprecision::cpp_rational;

inline Rational rational(long long num, long long den = 1) {
    if (den == 0) throw std::invalid_argument("rational: zero denominator");
    return Rational(Int(num), Int(den));
}

namespace detail {
// cpp_int's string constructor treats a leading 0 as an octal prefix, so
// strip redundant leading zeros first.
inline Int int_from_digits(std::string digits) {
    size_t first = digits.find_first_not_of('0');
    if (first == std::string::npos) return Int(0);
    return Int(digits.substr(first));
}
}  // namespace detail

// Parses "12", "0.9", "1.25" or "9/10" into an exact rational.
// Decimal literals become exact decimal fractions (0.9 -> 9/10).
inline Rational rational_from_literal(const std::string& text) {
    auto slash = text.find('/');
    if (slash != std::string::npos) {
        Int num = detail::int_from_digits(text.substr(0, slash));
        Int den = detail::int_from_digits(text.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("rational literal: zero denominator");
        return Rational(num, den);
    }
    auto dot = text.find('.');
    if (dot == std::string::npos) return Rational(detail::int_from_digits(text));
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    size_t frac_len = text.size() - dot - 1;
    Int den = 1;
    for (size_t i = 0; i < frac_len; ++i) den *= 10;
    return Rational(detail::int_from_digits(digits), den);
}

inline std::string to_string(const Rational& q) {
    std::ostringstream os;
    os << q;
    return os.str();
}

inline double to_double(const Rational& q) {
    return q.template convert_to<double>();
}

}  // namespace koopcert
