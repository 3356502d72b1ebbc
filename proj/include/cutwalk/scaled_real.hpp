#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace cutwalk {

// Sign-preserving mantissa/exponent scalar: value = mantissa * 2^exponent with
// |mantissa| in [1,2) or exactly 0.  Holds products like e1 A_k...A_n e1^t that
// overflow double long before the probability quotients they feed do.
class ScaledReal {
 public:
  ScaledReal() = default;

  explicit ScaledReal(double v) {
    if (v == 0.0) {
      mant_ = 0.0;
      exp_ = 0;
      return;
    }
    int e = 0;
    double m = std::frexp(v, &e);  // |m| in [0.5,1)
    mant_ = 2.0 * m;
    exp_ = static_cast<std::int64_t>(e) - 1;
  }

  static ScaledReal zero() { return ScaledReal(); }
  static ScaledReal one() { return ScaledReal(1.0); }

  // Assembles from an already-normalized mantissa (|m| in [1,2) or 0).
  static ScaledReal from_parts(double mantissa, std::int64_t exponent) {
    ScaledReal r;
    r.mant_ = mantissa;
    r.exp_ = mantissa == 0.0 ? 0 : exponent;
    return r;
  }

  bool is_zero() const { return mant_ == 0.0; }
  double mantissa() const { return mant_; }
  std::int64_t exponent() const { return exp_; }

  // Saturates to +-inf / 0 outside double range.
  double to_double() const {
    if (mant_ == 0.0) return 0.0;
    if (exp_ > 1100) return mant_ > 0 ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity();
    if (exp_ < -1100) return mant_ > 0 ? 0.0 : -0.0;
    return std::ldexp(mant_, static_cast<int>(exp_));
  }

  double log2_abs() const {
    if (mant_ == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log2(std::fabs(mant_)) + static_cast<double>(exp_);
  }

  ScaledReal& operator*=(const ScaledReal& o) {
    if (is_zero() || o.is_zero()) return *this = zero();
    double m = mant_ * o.mant_;  // |m| in [1,4)
    exp_ += o.exp_;
    normalize_from(m);
    return *this;
  }

  ScaledReal& operator*=(double v) { return *this *= ScaledReal(v); }

  ScaledReal& operator+=(const ScaledReal& o) {
    if (o.is_zero()) return *this;
    if (is_zero()) return *this = o;
    // Align onto the larger exponent; the small operand underflows harmlessly.
    if (exp_ >= o.exp_) {
      std::int64_t d = exp_ - o.exp_;
      double m = mant_ + (d > 1074 ? 0.0 : std::ldexp(o.mant_, -static_cast<int>(d)));
      normalize_from(m);
    } else {
      std::int64_t d = o.exp_ - exp_;
      double m = o.mant_ + (d > 1074 ? 0.0 : std::ldexp(mant_, -static_cast<int>(d)));
      exp_ = o.exp_;
      normalize_from(m);
    }
    return *this;
  }

  ScaledReal operator-() const {
    ScaledReal r = *this;
    r.mant_ = -r.mant_;
    return r;
  }

  friend ScaledReal operator*(ScaledReal a, const ScaledReal& b) { return a *= b; }
  friend ScaledReal operator*(ScaledReal a, double b) { return a *= ScaledReal(b); }
  friend ScaledReal operator+(ScaledReal a, const ScaledReal& b) { return a += b; }
  friend ScaledReal operator-(ScaledReal a, const ScaledReal& b) { return a += (-b); }

  // Quotient as plain double (saturating); quotients of same-scale products
  // are the quantities of interest and always land in range.
  friend double ratio(const ScaledReal& num, const ScaledReal& den) {
    if (num.is_zero()) return 0.0;
    double m = num.mant_ / den.mant_;
    std::int64_t e = num.exp_ - den.exp_;
    if (e > 1100) return m > 0 ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    if (e < -1100) return 0.0;
    return std::ldexp(m, static_cast<int>(e));
  }

  friend bool operator<(const ScaledReal& a, const ScaledReal& b) {
    ScaledReal d = b - a;
    return d.mant_ > 0.0;
  }

 private:
  void normalize_from(double m) {
    if (m == 0.0 || !std::isfinite(m)) {
      mant_ = m;  // propagate inf/nan so callers can detect
      exp_ = 0;
      if (m == 0.0) exp_ = 0;
      if (m == 0.0) mant_ = 0.0;
      return;
    }
    int e = 0;
    double f = std::frexp(m, &e);
    mant_ = 2.0 * f;
    exp_ += static_cast<std::int64_t>(e) - 1;
  }

  double mant_ = 0.0;
  std::int64_t exp_ = 0;
};

}  // namespace cutwalk
