#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace powrob {

// Exact rational in lowest terms, denominator always positive.
class Rational {
public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n) {}
  Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::domain_error("zero denominator");
    if (d < 0) { n = -n; d = -d; }
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g == 0) g = 1;
    num_ = n / g;
    den_ = d / g;
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
  }
  Rational half() const { return Rational(num_, den_ * 2); }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num_) * b.den_ <=> static_cast<__int128>(b.num_) * a.den_;
  }

  std::string str() const { return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_); }

  // Accepts "n", "n/d".
  static Rational parse(const std::string& s) {
    auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      std::int64_t n = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument("bad rational: " + s);
      return Rational(n);
    }
    std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    std::size_t ua = 0, ub = 0;
    std::int64_t n = std::stoll(a, &ua), d = std::stoll(b, &ub);
    if (ua != a.size() || ub != b.size()) throw std::invalid_argument("bad rational: " + s);
    return Rational(n, d);
  }

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rational midpoint(const Rational& a, const Rational& b) { return (a + b).half(); }

inline std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

}  // namespace powrob

template <>
struct std::hash<powrob::Rational> {
  std::size_t operator()(const powrob::Rational& r) const noexcept {
    return std::hash<std::int64_t>{}(r.num()) * 1000003u ^ std::hash<std::int64_t>{}(r.den());
  }
};
