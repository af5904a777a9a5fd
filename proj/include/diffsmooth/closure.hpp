#pragma once

#include <array>
#include <initializer_list>

namespace diffsmooth {

/// Laurent polynomial sum_e c_e x^e with exponents in [kMinExp, kMaxExp].
/// Products that leave the range throw ClosureUnsupported.
class Laurent {
 public:
  static constexpr int kMinExp = -4;
  static constexpr int kMaxExp = 10;

  Laurent() = default;
  /// Coefficients of x^0, x^1, ... in order.
  Laurent(std::initializer_list<double> ascending);

  static Laurent monomial(double coef, int exponent);

  double coef(int e) const noexcept {
    return (e < kMinExp || e > kMaxExp) ? 0.0 : c_[e - kMinExp];
  }
  void set(int e, double v);
  void add(int e, double v) { set(e, coef(e) + v); }

  bool empty() const noexcept { return lo_ > hi_; }
  int lowest() const noexcept { return lo_; }
  int highest() const noexcept { return hi_; }
  /// Highest exponent with a nonzero coefficient, or kMinExp - 1 when zero.
  int degree() const noexcept;

  double operator()(double x) const noexcept;
  Laurent derivative() const;
  Laurent shifted(int by) const;  ///< multiply by x^by

  Laurent& operator+=(const Laurent& o);
  Laurent& operator-=(const Laurent& o);
  Laurent& operator*=(double s);

  friend Laurent operator+(Laurent a, const Laurent& b) { return a += b; }
  friend Laurent operator-(Laurent a, const Laurent& b) { return a -= b; }
  friend Laurent operator*(Laurent a, double s) { return a *= s; }
  friend Laurent operator*(double s, Laurent a) { return a *= s; }
  friend Laurent operator*(const Laurent& a, const Laurent& b);

 private:
  static constexpr int kSize = kMaxExp - kMinExp + 1;
  std::array<double, kSize> c_{};
  int lo_ = 1;
  int hi_ = 0;
};

enum class InverseMomentRule { FirstOrder, SecondOrder };

/// Gaussian moment closure: E[x^n] for n >= 0 exactly, n = -1, -2 via an
/// inverse-moment rule, plus the partial derivatives of each moment with
/// respect to the mean and the variance.
class GaussianMoments {
 public:
  static constexpr int kMinOrder = -2;
  static constexpr int kMaxOrder = Laurent::kMaxExp;

  GaussianMoments(double mean, double variance, InverseMomentRule rule);

  double mean() const noexcept { return m_; }
  double variance() const noexcept { return S_; }

  double moment(int n) const;
  double expect(const Laurent& p) const;
  double d_mean(const Laurent& p) const;
  double d_var(const Laurent& p) const;

 private:
  void require(const Laurent& p) const;

  static constexpr int kSize = kMaxOrder - kMinOrder + 1;
  double m_;
  double S_;
  bool inverse_ok_;
  std::array<double, kSize> value_{};
  std::array<double, kSize> dm_{};
  std::array<double, kSize> dS_{};
};

}  // namespace diffsmooth
