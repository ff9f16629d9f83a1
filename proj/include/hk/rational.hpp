#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hk {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

namespace detail {

/// Signed decimal integer; boost would read a leading 0 as octal.
inline BigInt parse_decimal(std::string digits, const std::string& text) {
  bool negative = false;
  if (!digits.empty() && (digits[0] == '-' || digits[0] == '+')) {
    negative = digits[0] == '-';
    digits.erase(0, 1);
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("malformed rational literal '" + text + "'");
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  BigInt v(digits);
  return negative ? BigInt(-v) : v;
}

}  // namespace detail

/// Parses "p/q", "p" or a terminating decimal such as "-0.25" exactly.
inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty rational literal");
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    BigInt num = detail::parse_decimal(text.substr(0, slash), text);
    BigInt den = detail::parse_decimal(text.substr(slash + 1), text);
    if (den == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    return Rational(num, den);
  }
  auto dot = text.find('.');
  if (dot == std::string::npos) return Rational(detail::parse_decimal(text, text));
  std::string whole = text.substr(0, dot), frac = text.substr(dot + 1);
  if (frac.empty())
    throw std::invalid_argument("malformed rational literal '" + text + "'");
  BigInt den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  return Rational(detail::parse_decimal(whole + frac, text), den);
}

inline std::string to_string(const Rational& r) {
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline int sign(const Rational& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

}  // namespace hk
