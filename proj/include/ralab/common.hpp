#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ralab {

/// Raised for every contract violation in the library. The message is meant
/// to be shown to a user as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown for failed reads and writes so the CLI can map them to exit code 1.
class IOError : public Error {
 public:
  using Error::Error;
};

/// A configuration problem tied to one key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& msg) : Error("config key '" + key + "': " + msg), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

using Tokens = std::vector<std::string>;

// A word is a maximal run of non-whitespace characters.
inline Tokens split_words(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Calendar date used to tag corpus dumps. Ordering is lexicographic on
/// (year, month, day).
struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;

  static Date parse(std::string_view s) {
    auto field = [&](std::size_t pos, std::size_t len) {
      int v = 0;
      auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
      if (ec != std::errc{} || p != s.data() + pos + len) throw Error("malformed date '" + std::string(s) + "'");
      return v;
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw Error("malformed date '" + std::string(s) + "', expected YYYY-MM-DD");
    Date d{field(0, 4), field(5, 2), field(8, 2)};
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) throw Error("date out of range '" + std::string(s) + "'");
    return d;
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }
};

// ---------------------------------------------------------------------------
// Numerics shared by the retriever and the losses.

/// Softmax of scores / temperature, stabilized by max-subtraction.
/// Entries equal to -inf get probability zero. If every entry is -inf the
/// result is uniform and `degenerate` is set.
inline std::vector<double> softmax(std::span<const double> scores, double temperature, bool* degenerate = nullptr) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw Error("temperature must be positive and finite");
  if (scores.empty()) throw Error("softmax over an empty score list");
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) throw Error("non-finite score");
    mx = std::max(mx, s);
  }
  std::vector<double> p(scores.size());
  if (degenerate) *degenerate = false;
  if (mx == -std::numeric_limits<double>::infinity()) {
    if (degenerate) *degenerate = true;
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp((scores[i] - mx) / temperature);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline double logsumexp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Checks nonnegativity and unit mass within `tol`.
inline bool is_distribution(std::span<const double> p, double tol = 1e-9) {
  if (p.empty()) return false;
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

inline float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  float s = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// FNV-1a, 64 bit. Used for corpus fingerprints in run manifests.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ralab
