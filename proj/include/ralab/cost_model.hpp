#pragma once

#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "ralab/common.hpp"

namespace ralab {

using Rational = boost::multiprecision::cpp_rational;

/// Exact parse of integers, plain decimals ("0.04") and fractions ("1/25").
inline Rational parse_rational(std::string_view s) {
  using boost::multiprecision::cpp_int;
  if (s.empty()) throw Error("empty number");
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(s.substr(0, slash));
    Rational den = parse_rational(s.substr(slash + 1));
    if (den == 0) throw Error("zero denominator in '" + std::string(s) + "'");
    return num / den;
  }
  bool neg = false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  cpp_int digits = 0;
  cpp_int scale = 1;
  bool seen_point = false, seen_digit = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c == '.' && !seen_point) {
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      digits = digits * 10 + (c - '0');
      if (seen_point) scale *= 10;
      seen_digit = true;
    } else {
      throw Error("not an exact decimal: '" + std::string(s) + "'");
    }
  }
  if (!seen_digit) throw Error("not a number: '" + std::string(s) + "'");
  Rational r(digits, scale);
  return neg ? Rational(-r) : r;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Symbolic quantities of the retriever overhead model. Parameter counts
/// only enter through their ratio.
struct CostModelParams {
  Rational n = 0;       // documents in the index
  Rational b = 1;       // batch size
  Rational k = 1;       // documents read by the language model
  Rational r = 1;       // refresh interval, in steps
  Rational l = 1;       // re-rank pool
  Rational p_retr = 1;  // retriever parameters
  Rational p_lm = 1;    // language model parameters

  void validate() const {
    for (const Rational* v : {&n, &b, &k, &r, &l, &p_retr, &p_lm})
      if (*v <= 0) throw Error("cost model quantities must be positive");
  }
};

/// N * P_retr / (4 * B * K * P_lm * R): index refresh relative to one
/// step's forward+backward cost.
inline Rational overhead_full_refresh(const CostModelParams& p) {
  p.validate();
  return p.n * p.p_retr / (4 * p.b * p.k * p.p_lm * p.r);
}

/// L * P_retr / (4 * K * P_lm): re-embedding the top-L every step.
inline Rational overhead_rerank(const CostModelParams& p) {
  p.validate();
  return p.l * p.p_retr / (4 * p.k * p.p_lm);
}

}  // namespace ralab
